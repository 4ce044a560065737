#pragma once

#include <span>
#include <vector>

#include "modfield/dense.hpp"
#include "modfield/rng.hpp"
#include "modfield/signal.hpp"
#include "modfield/tiling.hpp"

namespace modfield {

struct EncoderConfig {
  int hidden = 256;
};

/// Three-layer MLP mapping a flattened tile of samples to a latent code:
/// in -> hidden (ReLU) -> hidden (ReLU) -> d (linear).
///
/// The input is the tile's dense samples in pixel order (axis 0 fastest)
/// with the m channels of each sample adjacent, so in = prod(tile) * m.
template <typename T>
struct TileEncoderParams {
  std::vector<DenseLayer<T>> layers;

  static TileEncoderParams init(Index input_dim, Index hidden, Index latent_dim, RngStream& rng);

  [[nodiscard]] Index input_dim() const { return layers.front().in_dim(); }
  [[nodiscard]] Index latent_dim() const { return layers.back().out_dim(); }
  void validate() const;

  [[nodiscard]] std::vector<std::span<T>> blocks();
  [[nodiscard]] std::vector<std::span<const T>> blocks() const;

  template <typename U>
  [[nodiscard]] TileEncoderParams<U> cast() const {
    TileEncoderParams<U> out;
    for (const auto& l : layers) out.layers.push_back(l.template cast<U>());
    return out;
  }
};

template <typename T>
struct EncoderTape {
  Matrix<T> input;
  std::vector<Matrix<T>> preacts;
  std::vector<Matrix<T>> hidden;  ///< post-activation of every layer; back() is the latent batch
  [[nodiscard]] const Matrix<T>& latents() const { return hidden.back(); }
};

/// One latent per column of `tiles` [input_dim x G].
template <typename T>
EncoderTape<T> encoder_forward(const TileEncoderParams<T>& params, const Matrix<T>& tiles);

/// Gradients of all encoder parameters given dL/dz [d x G].
template <typename T>
TileEncoderParams<T> encoder_backward(const TileEncoderParams<T>& params, const EncoderTape<T>& tape,
                                      const Matrix<T>& d_latents);

/// Flattened samples of one tile of a dense signal.
Vector<float> tile_values(const SampledSignal& signal, const TileGrid& grid, std::int64_t tile);

/// Codebook from a single encoder pass over every tile; no optimization.
Codebook encode_signal(const TileEncoderParams<float>& encoder, const SampledSignal& signal, const TileGrid& grid);

}  // namespace modfield
