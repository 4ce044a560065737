#pragma once

#include <cmath>

#include "modfield/dense.hpp"
#include "modfield/rng.hpp"

namespace modfield {

namespace detail {

template <typename T>
DenseLayer<T> uniform_layer(Index out_dim, Index in_dim, double bound, Activation act, RngStream& rng,
                            double bias_value = 0.0) {
  DenseLayer<T> layer(out_dim, in_dim, act);
  // Row-major draw order: row 0 left to right, then row 1, ...
  for (Index r = 0; r < out_dim; ++r) {
    for (Index c = 0; c < in_dim; ++c) {
      layer.weights(r, c) = static_cast<T>(rng.uniform(-bound, bound));
    }
  }
  layer.bias.setConstant(static_cast<T>(bias_value));
  return layer;
}

}  // namespace detail

/// First sine layer: Uniform(-omega0/in, omega0/in), zero bias. The frequency
/// scale omega0 is folded into the weights, so the forward pass applies no
/// extra multiplier.
template <typename T>
DenseLayer<T> init_siren_first(Index out_dim, Index in_dim, RngStream& rng, double omega0 = 30.0) {
  return detail::uniform_layer<T>(out_dim, in_dim, omega0 / static_cast<double>(in_dim), Activation::Sine, rng);
}

/// Hidden sine layer: Uniform(-sqrt(6/in)/omega0, +sqrt(6/in)/omega0), zero bias.
template <typename T>
DenseLayer<T> init_siren_hidden(Index out_dim, Index in_dim, double omega0, RngStream& rng,
                                Activation act = Activation::Sine) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim)) / omega0;
  return detail::uniform_layer<T>(out_dim, in_dim, bound, act, rng);
}

/// Kaiming-style Uniform(-sqrt(6/in), +sqrt(6/in)) for ReLU networks.
template <typename T>
DenseLayer<T> init_kaiming_uniform(Index out_dim, Index in_dim, Activation act, RngStream& rng,
                                   double bias_value = 0.0) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim));
  return detail::uniform_layer<T>(out_dim, in_dim, bound, act, rng, bias_value);
}

}  // namespace modfield
