#include "modfield/encoder.hpp"

#include <cmath>
#include <string>

#include "modfield/init.hpp"

namespace modfield {

template <typename T>
TileEncoderParams<T> TileEncoderParams<T>::init(Index input_dim, Index hidden, Index latent_dim, RngStream& rng) {
  if (input_dim < 1 || hidden < 1 || latent_dim < 1) throw ConfigError("encoder dims must be >= 1");
  TileEncoderParams p;
  p.layers.push_back(init_kaiming_uniform<T>(hidden, input_dim, Activation::ReLU, rng));
  p.layers.push_back(init_kaiming_uniform<T>(hidden, hidden, Activation::ReLU, rng));
  p.layers.push_back(detail::uniform_layer<T>(latent_dim, hidden, 1.0 / std::sqrt(static_cast<double>(hidden)),
                                              Activation::Identity, rng));
  return p;
}

template <typename T>
void TileEncoderParams<T>::validate() const {
  if (layers.size() != 3) throw DimensionError("encoder layer count", 3, static_cast<long long>(layers.size()));
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i].in_dim() != layers[i - 1].out_dim()) {
      throw DimensionError("encoder layer " + std::to_string(i) + " in_dim", layers[i - 1].out_dim(), layers[i].in_dim());
    }
  }
}

template <typename T>
std::vector<std::span<T>> TileEncoderParams<T>::blocks() {
  std::vector<std::span<T>> out;
  for (auto& l : layers) {
    out.emplace_back(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return out;
}

template <typename T>
std::vector<std::span<const T>> TileEncoderParams<T>::blocks() const {
  std::vector<std::span<const T>> out;
  for (auto s : const_cast<TileEncoderParams&>(*this).blocks()) out.emplace_back(s.data(), s.size());
  return out;
}

template <typename T>
EncoderTape<T> encoder_forward(const TileEncoderParams<T>& params, const Matrix<T>& tiles) {
  params.validate();
  EncoderTape<T> tape;
  tape.input = tiles;
  const Matrix<T>* prev = &tape.input;
  for (const auto& layer : params.layers) {
    tape.preacts.push_back(linear_forward_batch(layer, *prev));
    tape.hidden.push_back(activate(tape.preacts.back(), layer.activation));
    prev = &tape.hidden.back();
  }
  return tape;
}

template <typename T>
TileEncoderParams<T> encoder_backward(const TileEncoderParams<T>& params, const EncoderTape<T>& tape,
                                      const Matrix<T>& d_latents) {
  if (d_latents.rows() != params.latent_dim() || d_latents.cols() != tape.input.cols()) {
    throw DimensionError("encoder_backward: upstream size", tape.latents().size(), d_latents.size());
  }
  TileEncoderParams<T> grads;
  for (const auto& l : params.layers) grads.layers.emplace_back(l.out_dim(), l.in_dim(), l.activation);
  Matrix<T> upstream = d_latents;
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    const Matrix<T> dp = activate_backward(tape.preacts[i], params.layers[i].activation, upstream);
    const Matrix<T>& in = i == 0 ? tape.input : tape.hidden[i - 1];
    grads.layers[i].weights.noalias() = dp * in.transpose();
    grads.layers[i].bias = dp.rowwise().sum();
    if (i > 0) upstream = params.layers[i].weights.transpose() * dp;
  }
  return grads;
}

Vector<float> tile_values(const SampledSignal& signal, const TileGrid& grid, std::int64_t tile) {
  if (!signal.dense) throw ConfigError("tile_values requires a dense signal");
  if (signal.extent != grid.extent()) throw ConfigError("tile_values: signal extent differs from the grid extent");
  const TileRef ref = grid.tile(tile);
  const int n = grid.dims();
  const std::int64_t count = grid.samples_per_tile();
  Vector<float> out(count * signal.m);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n), 0);
  for (std::int64_t k = 0; k < count; ++k) {
    std::int64_t linear = 0;
    for (int a = n - 1; a >= 0; --a) linear = linear * signal.extent[a] + ref.origin[a] + idx[a];
    for (int c = 0; c < signal.m; ++c) out(k * signal.m + c) = static_cast<float>(signal.values(c, linear));
    for (int a = 0; a < n; ++a) {
      if (++idx[a] < grid.tile_size()[a]) break;
      idx[a] = 0;
    }
  }
  return out;
}

Codebook encode_signal(const TileEncoderParams<float>& encoder, const SampledSignal& signal, const TileGrid& grid) {
  Matrix<float> tiles(grid.samples_per_tile() * signal.m, grid.tile_count());
  if (tiles.rows() != encoder.input_dim()) {
    throw DimensionError("encode_signal: tile sample count * m vs encoder input", encoder.input_dim(), tiles.rows());
  }
  for (std::int64_t t = 0; t < grid.tile_count(); ++t) tiles.col(t) = tile_values(signal, grid, t);
  Codebook cb(grid, encoder.latent_dim());
  cb.codes = encoder_forward(encoder, tiles).latents();
  return cb;
}

template struct TileEncoderParams<float>;
template struct TileEncoderParams<double>;
template EncoderTape<float> encoder_forward<float>(const TileEncoderParams<float>&, const Matrix<float>&);
template EncoderTape<double> encoder_forward<double>(const TileEncoderParams<double>&, const Matrix<double>&);
template TileEncoderParams<float> encoder_backward<float>(const TileEncoderParams<float>&, const EncoderTape<float>&,
                                                          const Matrix<float>&);
template TileEncoderParams<double> encoder_backward<double>(const TileEncoderParams<double>&,
                                                            const EncoderTape<double>&, const Matrix<double>&);

}  // namespace modfield
