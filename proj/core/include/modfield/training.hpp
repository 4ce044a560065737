#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "modfield/encoder.hpp"
#include "modfield/loss.hpp"
#include "modfield/model.hpp"
#include "modfield/rng.hpp"
#include "modfield/signal.hpp"
#include "modfield/tiling.hpp"

namespace modfield {

struct TrainRow {
  int step = 0;
  double loss = 0.0;
  double psnr_1x = 0.0;  ///< NaN for signals without a dense layout
  double psnr_2x = 0.0;  ///< NaN unless every signal is dense 2-D
  double wall_ms = 0.0;
};

struct TrainConfig {
  int steps = 2000;
  int batch_size = 4096;  ///< (tile, sample) pairs per step
  double lr_theta = 1e-4;
  double lr_latent = 1e-3;
  LossKind loss = LossKind::L2;
  double latent_init_scale = 1e-2;
  std::uint64_t seed = 0;
  int eval_every = 0;  ///< 0: evaluate only after the last step
  std::function<void(const TrainRow&)> on_eval;

  /// Throws ConfigError on non-positive steps, batch, rates or scale.
  void validate() const;
};

struct TrainReport {
  std::vector<TrainRow> rows;        ///< increasing step
  std::vector<double> step_losses;   ///< minibatch loss of every step
  double final_loss = 0.0;
  double final_psnr_1x = 0.0;
  double final_psnr_2x = 0.0;
  double wall_ms = 0.0;
};

/// Uniform tile size and overlap on every axis. size <= 0 means a single tile
/// spanning the whole signal.
struct TileShape {
  std::int64_t size = 32;
  std::int64_t overlap = 8;

  [[nodiscard]] TileGrid grid_for(const std::vector<std::int64_t>& extent) const;
};

/// [d x count] matrix of i.i.d. N(0, s^2) entries, drawn column by column.
Matrix<float> init_latents(Index count, Index d, double s, RngStream& rng);

struct AutodecoderResult {
  ModelParams<float> params;
  std::vector<Codebook> codebooks;  ///< one per signal
  TrainReport report;
};

/// Optional starting point; fresh initialization when null.
struct AutodecoderInit {
  const ModelParams<float>* params = nullptr;
  const std::vector<Codebook>* codebooks = nullptr;
};

/// Joint optimization of θ and one latent code per tile of every signal.
///
/// Each sample contributes one training pair per tile covering it, with the
/// tile's local coordinate as input. A step draws batch_size pairs uniformly
/// with replacement, evaluates the batch-mean loss and takes one Adam step on
/// θ and on every code that appeared in the batch.
AutodecoderResult train_autodecoder(const std::vector<SampledSignal>& signals, const TileShape& tiles,
                                    const ModelConfig& model, const TrainConfig& train,
                                    const AutodecoderInit& init = {});

/// Latent codes for one signal with θ frozen. Each tile is optimized on its
/// own samples with its own random stream, so the result does not depend on
/// `tile_order` (a permutation of all tiles; empty means 0..count-1).
/// steps and batch_size apply per tile.
Codebook infer_latents(const ModelParams<float>& params, const SampledSignal& signal, const TileShape& tiles,
                       const TrainConfig& train, std::span<const std::int64_t> tile_order = {});

struct AutoencoderResult {
  ModelParams<float> params;
  TileEncoderParams<float> encoder;
  TrainReport report;
};

/// End-to-end training of encoder and field on dense signals; codes are
/// encoder outputs on the flattened tile samples.
AutoencoderResult train_autoencoder(const std::vector<SampledSignal>& signals, const TileShape& tiles,
                                    const EncoderConfig& encoder, const ModelConfig& model,
                                    const TrainConfig& train);

/// Blended decode at the pixel centres of a (factor * extent) grid.
SampledSignal decode_dense(const ModelParams<float>& params, const Codebook& codebook, int factor);

struct SignalScore {
  double psnr_1x;
  double psnr_2x;  ///< against the bilinearly upsampled target; NaN unless dense 2-D
};

/// NaN scores for non-dense signals.
SignalScore score_signal(const ModelParams<float>& params, const Codebook& codebook, const SampledSignal& signal);

}  // namespace modfield
