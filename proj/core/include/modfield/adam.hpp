#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "modfield/error.hpp"

namespace modfield {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  std::uint64_t step_count = 0;
  AdamConfig config;

  AdamState() = default;
  AdamState(std::size_t size, AdamConfig cfg)
      : first_moment(size, T(0)), second_moment(size, T(0)), config(cfg) {}
};

/// Bias-corrected Adam update, in place.
///
/// A block whose gradient is identically zero is left alone: parameters,
/// moments and step_count are not touched. Latent codes that did not appear
/// in a minibatch therefore keep their momentum instead of drifting.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state) {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: params vs grads", static_cast<long long>(params.size()),
                         static_cast<long long>(grads.size()));
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw DimensionError("adam_step: params vs optimizer state", static_cast<long long>(params.size()),
                         static_cast<long long>(state.first_moment.size()));
  }
  bool any = false;
  for (const T g : grads) {
    if (g != T(0)) {
      any = true;
      break;
    }
  }
  if (!any) return;

  const AdamConfig& c = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const T b1 = static_cast<T>(c.beta1);
  const T b2 = static_cast<T>(c.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(c.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(c.beta2, t));
  const T lr = static_cast<T>(c.learning_rate);
  const T eps = static_cast<T>(c.epsilon);

  T* m = state.first_moment.data();
  T* v = state.second_moment.data();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    m[i] = b1 * m[i] + (T(1) - b1) * g;
    v[i] = b2 * v[i] + (T(1) - b2) * g * g;
    const T m_hat = m[i] / correction1;
    const T v_hat = v[i] / correction2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

}  // namespace modfield
