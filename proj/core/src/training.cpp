#include "modfield/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "modfield/adam.hpp"

namespace modfield {

std::string_view to_string(LossKind k) { return k == LossKind::L2 ? "l2" : "l1"; }

LossKind loss_kind_from_string(std::string_view name) {
  if (name == "l2") return LossKind::L2;
  if (name == "l1") return LossKind::L1;
  throw ConfigError("unknown loss '" + std::string(name) + "' (expected l2 or l1)");
}

double mean_squared_error(const SampledSignal& pred, const SampledSignal& target) {
  if (pred.values.rows() != target.values.rows() || pred.values.cols() != target.values.cols()) {
    throw DimensionError("mean_squared_error: pred vs target value count", target.values.size(), pred.values.size());
  }
  if (pred.values.size() == 0) throw DimensionError("mean_squared_error: empty signal", 1, 0);
  return (pred.values - target.values).squaredNorm() / static_cast<double>(pred.values.size());
}

double psnr(const SampledSignal& pred, const SampledSignal& target, double peak) {
  return psnr_from_mse(mean_squared_error(pred, target), peak);
}

double psnr_subset(const SampledSignal& pred, const SampledSignal& target, std::span<const Eigen::Index> samples,
                   double peak) {
  if (pred.values.rows() != target.values.rows() || pred.values.cols() != target.values.cols()) {
    throw DimensionError("psnr_subset: pred vs target value count", target.values.size(), pred.values.size());
  }
  if (samples.empty()) throw ConfigError("psnr_subset: empty sample set");
  double sum = 0.0;
  for (const Eigen::Index j : samples) {
    if (j < 0 || j >= pred.size()) throw DimensionError("psnr_subset: sample index out of range", pred.size(), j);
    sum += (pred.values.col(j) - target.values.col(j)).squaredNorm();
  }
  return psnr_from_mse(sum / static_cast<double>(samples.size() * static_cast<std::size_t>(pred.m)), peak);
}

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(lr_theta > 0.0) || !(lr_latent > 0.0)) throw ConfigError("learning rates must be > 0");
  if (!(latent_init_scale > 0.0)) throw ConfigError("latent init scale must be > 0");
  if (eval_every < 0) throw ConfigError("eval cadence must be >= 0");
}

TileGrid TileShape::grid_for(const std::vector<std::int64_t>& extent) const {
  if (extent.empty()) throw ConfigError("tiling needs a signal extent");
  if (size <= 0) return TileGrid(extent, extent, std::vector<std::int64_t>(extent.size(), 0));
  return TileGrid::uniform(extent, size, overlap);
}

Matrix<float> init_latents(Index count, Index d, double s, RngStream& rng) {
  if (!(s > 0.0)) throw ConfigError("latent init scale must be > 0");
  if (count < 0 || d < 1) throw ConfigError("init_latents: need count >= 0 and d >= 1");
  Matrix<float> z(d, count);
  for (Index c = 0; c < count; ++c) {
    for (Index r = 0; r < d; ++r) z(r, c) = static_cast<float>(rng.normal(0.0, s));
  }
  return z;
}

SampledSignal decode_dense(const ModelParams<float>& params, const Codebook& codebook, int factor) {
  const auto& extent = codebook.grid.extent();
  std::vector<std::int64_t> fine(extent);
  for (auto& e : fine) e *= factor;
  SampledSignal out = SampledSignal::dense_grid(fine, params.config.output_dim);
  const Eigen::MatrixXd pts = pixel_center_grid(extent, factor);
  out.values = blended_decode_points(params, codebook, pts).cast<double>();
  return out;
}

SignalScore score_signal(const ModelParams<float>& params, const Codebook& codebook, const SampledSignal& signal) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  if (!signal.dense) return {nan, nan};
  const double p1 = psnr(decode_dense(params, codebook, 1), signal);
  if (signal.n != 2) return {p1, nan};
  const SampledSignal up = bilinear_resample(signal, {2 * signal.extent[0], 2 * signal.extent[1]});
  return {p1, psnr(decode_dense(params, codebook, 2), up)};
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// Every (signal, tile, sample) training pair, in signal / sample / tile order.
struct PairTable {
  std::vector<TileGrid> grids;
  std::vector<std::int64_t> tile_offset;  ///< first global tile id of each signal
  std::int64_t total_tiles = 0;
  std::vector<std::int64_t> key;          ///< global tile id of every pair
  Matrix<float> local;                    ///< [n x P]
  Matrix<float> target;                   ///< [m x P]
};

void check_signals(const std::vector<SampledSignal>& signals, const ModelConfig& model) {
  if (signals.empty()) throw ConfigError("training needs at least one signal");
  for (const auto& s : signals) {
    s.validate();
    if (s.n != signals.front().n || s.m != signals.front().m) throw ConfigError("training signals must share n and m");
    if (s.extent.empty()) throw ConfigError("training signals need an extent (map world points to the grid frame)");
  }
  if (model.input_dim != signals.front().n) throw DimensionError("model n vs signal n", signals.front().n, model.input_dim);
  if (model.output_dim != signals.front().m) throw DimensionError("model m vs signal m", signals.front().m, model.output_dim);
}

PairTable build_pairs(const std::vector<SampledSignal>& signals, const TileShape& tiles) {
  PairTable t;
  std::vector<float> local, target;
  const int n = signals.front().n;
  const int m = signals.front().m;
  for (const auto& s : signals) {
    t.grids.push_back(tiles.grid_for(s.extent));
    t.tile_offset.push_back(t.total_tiles);
    const TileGrid& grid = t.grids.back();
    for (Index j = 0; j < s.size(); ++j) {
      const std::span<const double> p(s.coords.col(j).data(), static_cast<std::size_t>(n));
      for (const TileRef& ref : tiles_containing(grid, p)) {
        for (const double x : to_local(grid, ref, p)) local.push_back(static_cast<float>(x));
        for (int c = 0; c < m; ++c) target.push_back(static_cast<float>(s.values(c, j)));
        t.key.push_back(t.total_tiles + ref.linear);
      }
    }
    t.total_tiles += grid.tile_count();
  }
  const Index P = static_cast<Index>(t.key.size());
  if (P == 0) throw ConfigError("training signals contain no samples");
  t.local = Eigen::Map<const Matrix<float>>(local.data(), n, P);
  t.target = Eigen::Map<const Matrix<float>>(target.data(), m, P);
  return t;
}

/// One minibatch: pairs sorted by global tile id so samples of a tile share a group.
struct Batch {
  Matrix<float> coords;
  Matrix<float> target;
  std::vector<Index> groups;
  std::vector<std::int64_t> group_keys;
};

Batch draw_batch(const PairTable& pairs, int batch_size, RngStream& rng) {
  const std::uint64_t P = static_cast<std::uint64_t>(pairs.key.size());
  std::vector<std::pair<std::int64_t, std::int64_t>> picks(static_cast<std::size_t>(batch_size));
  for (auto& [k, i] : picks) {
    i = static_cast<std::int64_t>(rng.below(P));
    k = pairs.key[static_cast<std::size_t>(i)];
  }
  std::sort(picks.begin(), picks.end());
  Batch b;
  b.coords.resize(pairs.local.rows(), batch_size);
  b.target.resize(pairs.target.rows(), batch_size);
  b.groups.resize(static_cast<std::size_t>(batch_size));
  for (Index c = 0; c < batch_size; ++c) {
    const auto [k, i] = picks[static_cast<std::size_t>(c)];
    b.coords.col(c) = pairs.local.col(i);
    b.target.col(c) = pairs.target.col(i);
    if (b.group_keys.empty() || b.group_keys.back() != k) b.group_keys.push_back(k);
    b.groups[static_cast<std::size_t>(c)] = static_cast<Index>(b.group_keys.size()) - 1;
  }
  return b;
}

[[noreturn]] void throw_non_finite(int step, const Matrix<float>& output, const Batch& batch, const PairTable& pairs) {
  std::int64_t key = batch.group_keys.empty() ? 0 : batch.group_keys.front();
  for (Index c = 0; c < output.cols(); ++c) {
    if (!output.col(c).allFinite() || !batch.target.col(c).allFinite()) {
      key = batch.group_keys[static_cast<std::size_t>(batch.groups[static_cast<std::size_t>(c)])];
      break;
    }
  }
  const auto it = std::upper_bound(pairs.tile_offset.begin(), pairs.tile_offset.end(), key);
  const auto sig = static_cast<std::size_t>(std::distance(pairs.tile_offset.begin(), it) - 1);
  throw NumericalError("non-finite loss at step " + std::to_string(step) + " (signal " + std::to_string(sig) +
                       ", tile " + std::to_string(key - pairs.tile_offset[sig]) + ")");
}

template <typename Params>
std::vector<AdamState<float>> make_states(const Params& params, double lr) {
  std::vector<AdamState<float>> states;
  for (const auto& b : params.blocks()) states.emplace_back(b.size(), AdamConfig{.learning_rate = lr});
  return states;
}

template <typename Params>
void apply_adam(Params& params, const Params& grads, std::vector<AdamState<float>>& states) {
  auto p = params.blocks();
  const auto g = grads.blocks();
  for (std::size_t k = 0; k < p.size(); ++k) adam_step<float>(p[k], g[k], states[k]);
}

void apply_latent_adam(Matrix<float>& codes, const Matrix<float>& d_latents, const std::vector<std::int64_t>& keys,
                       std::vector<AdamState<float>>& states) {
  const auto d = static_cast<std::size_t>(codes.rows());
  for (std::size_t g = 0; g < keys.size(); ++g) {
    const auto key = keys[g];
    adam_step<float>(std::span<float>(codes.col(key).data(), d),
                     std::span<const float>(d_latents.col(static_cast<Index>(g)).data(), d),
                     states[static_cast<std::size_t>(key)]);
  }
}

Codebook slice_codebook(const PairTable& pairs, const Matrix<float>& codes, std::size_t signal) {
  Codebook cb(pairs.grids[signal], codes.rows());
  cb.codes = codes.middleCols(pairs.tile_offset[signal], pairs.grids[signal].tile_count());
  return cb;
}

/// Evaluation row; PSNR columns are means over signals.
TrainRow evaluate(int step, double loss, const ModelParams<float>& params, const std::vector<Codebook>& codebooks,
                  const std::vector<SampledSignal>& signals, Clock::time_point start) {
  TrainRow row;
  row.step = step;
  row.loss = loss;
  double p1 = 0.0, p2 = 0.0;
  for (std::size_t s = 0; s < signals.size(); ++s) {
    const SignalScore sc = score_signal(params, codebooks[s], signals[s]);
    p1 += sc.psnr_1x;
    p2 += sc.psnr_2x;
  }
  row.psnr_1x = p1 / static_cast<double>(signals.size());
  row.psnr_2x = p2 / static_cast<double>(signals.size());
  row.wall_ms = elapsed_ms(start);
  return row;
}

bool is_eval_step(const TrainConfig& train, int step) {
  return step == train.steps || (train.eval_every > 0 && step % train.eval_every == 0);
}

void finish_report(TrainReport& report, Clock::time_point start) {
  const TrainRow& last = report.rows.back();
  report.final_loss = last.loss;
  report.final_psnr_1x = last.psnr_1x;
  report.final_psnr_2x = last.psnr_2x;
  report.wall_ms = elapsed_ms(start);
}

/// Stream keys; fixed so that results depend only on the seed.
constexpr std::uint64_t kStreamModel = 1;
constexpr std::uint64_t kStreamLatents = 2;
constexpr std::uint64_t kStreamBatches = 3;
constexpr std::uint64_t kStreamEncoder = 4;
constexpr std::uint64_t kStreamInfer = 5;

}  // namespace

AutodecoderResult train_autodecoder(const std::vector<SampledSignal>& signals, const TileShape& tiles,
                                    const ModelConfig& model, const TrainConfig& train,
                                    const AutodecoderInit& init) {
  model.validate();
  train.validate();
  check_signals(signals, model);
  const auto start = Clock::now();
  const PairTable pairs = build_pairs(signals, tiles);

  const RngStream root(train.seed);
  AutodecoderResult result;
  if (init.params) {
    if (init.params->config != model) throw ConfigError("initial parameters do not match the model config");
    init.params->validate();
    result.params = *init.params;
  } else {
    RngStream r = root.derive(kStreamModel);
    result.params = ModelParams<float>::init(model, r);
  }
  Matrix<float> codes;
  if (init.codebooks) {
    if (init.codebooks->size() != signals.size()) throw ConfigError("initial codebook count differs from signal count");
    codes.resize(model.latent_dim, pairs.total_tiles);
    for (std::size_t s = 0; s < signals.size(); ++s) {
      const Codebook& cb = (*init.codebooks)[s];
      cb.validate();
      if (cb.grid != pairs.grids[s] || cb.latent_dim() != model.latent_dim) {
        throw ConfigError("initial codebook " + std::to_string(s) + " does not match the tiling");
      }
      codes.middleCols(pairs.tile_offset[s], cb.grid.tile_count()) = cb.codes;
    }
  } else {
    RngStream r = root.derive(kStreamLatents);
    codes = init_latents(pairs.total_tiles, model.latent_dim, train.latent_init_scale, r);
  }

  auto theta_states = make_states(result.params, train.lr_theta);
  std::vector<AdamState<float>> latent_states(static_cast<std::size_t>(pairs.total_tiles),
                                              AdamState<float>(static_cast<std::size_t>(model.latent_dim),
                                                               AdamConfig{.learning_rate = train.lr_latent}));
  RngStream batches = root.derive(kStreamBatches);
  Matrix<float> d_out;
  for (int step = 1; step <= train.steps; ++step) {
    const Batch batch = draw_batch(pairs, train.batch_size, batches);
    Matrix<float> z(model.latent_dim, static_cast<Index>(batch.group_keys.size()));
    for (std::size_t g = 0; g < batch.group_keys.size(); ++g) z.col(static_cast<Index>(g)) = codes.col(batch.group_keys[g]);

    const ForwardTape<float> tape = model_forward<float>(result.params, batch.coords, z, batch.groups);
    const double loss = batch_loss(tape.output, batch.target, train.loss, d_out);
    if (!std::isfinite(loss)) throw_non_finite(step, tape.output, batch, pairs);
    result.report.step_losses.push_back(loss);

    const ModelGradients<float> grads = model_backward<float>(result.params, tape, d_out);
    apply_adam(result.params, grads.params, theta_states);
    if (model.uses_latent()) apply_latent_adam(codes, grads.latents, batch.group_keys, latent_states);

    if (is_eval_step(train, step)) {
      std::vector<Codebook> cbs;
      for (std::size_t s = 0; s < signals.size(); ++s) cbs.push_back(slice_codebook(pairs, codes, s));
      result.report.rows.push_back(evaluate(step, loss, result.params, cbs, signals, start));
      if (train.on_eval) train.on_eval(result.report.rows.back());
    }
  }
  for (std::size_t s = 0; s < signals.size(); ++s) result.codebooks.push_back(slice_codebook(pairs, codes, s));
  finish_report(result.report, start);
  return result;
}

Codebook infer_latents(const ModelParams<float>& params, const SampledSignal& signal, const TileShape& tiles,
                       const TrainConfig& train, std::span<const std::int64_t> tile_order) {
  const ModelConfig& model = params.config;
  params.validate();
  train.validate();
  check_signals({signal}, model);

  const TileGrid grid = tiles.grid_for(signal.extent);
  const std::int64_t count = grid.tile_count();
  std::vector<std::int64_t> order(tile_order.begin(), tile_order.end());
  if (order.empty()) {
    order.resize(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), 0);
  }
  {
    std::vector<std::int64_t> sorted(order);
    std::sort(sorted.begin(), sorted.end());
    for (std::int64_t i = 0; i < count; ++i) {
      if (sorted.size() != static_cast<std::size_t>(count) || sorted[static_cast<std::size_t>(i)] != i) {
        throw ConfigError("tile order must be a permutation of all " + std::to_string(count) + " tiles");
      }
    }
  }

  // Samples of each tile, in sample order.
  const int n = signal.n;
  const int m = signal.m;
  std::vector<std::vector<float>> local(static_cast<std::size_t>(count)), target(static_cast<std::size_t>(count));
  for (Index j = 0; j < signal.size(); ++j) {
    const std::span<const double> p(signal.coords.col(j).data(), static_cast<std::size_t>(n));
    for (const TileRef& ref : tiles_containing(grid, p)) {
      auto& l = local[static_cast<std::size_t>(ref.linear)];
      for (const double x : to_local(grid, ref, p)) l.push_back(static_cast<float>(x));
      for (int c = 0; c < m; ++c) target[static_cast<std::size_t>(ref.linear)].push_back(static_cast<float>(signal.values(c, j)));
    }
  }

  const RngStream root(train.seed);
  RngStream init_rng = root.derive(kStreamLatents);
  Codebook cb(grid, model.latent_dim);
  cb.codes = init_latents(count, model.latent_dim, train.latent_init_scale, init_rng);
  if (!model.uses_latent()) return cb;

  const RngStream tile_root = root.derive(kStreamInfer);
  const auto d = static_cast<std::size_t>(model.latent_dim);
  Matrix<float> d_out;
  for (const std::int64_t t : order) {
    const auto ti = static_cast<std::size_t>(t);
    const Index samples = static_cast<Index>(local[ti].size()) / n;
    if (samples == 0) continue;
    const Eigen::Map<const Matrix<float>> all_x(local[ti].data(), n, samples);
    const Eigen::Map<const Matrix<float>> all_y(target[ti].data(), m, samples);
    const bool full = train.batch_size >= samples;
    const Index B = full ? samples : train.batch_size;
    const std::vector<Index> groups = single_group(B);
    RngStream rng = tile_root.derive(static_cast<std::uint64_t>(t));
    AdamState<float> state(d, AdamConfig{.learning_rate = train.lr_latent});
    Matrix<float> x(n, B), y(m, B);
    if (full) {
      x = all_x;
      y = all_y;
    }
    for (int step = 1; step <= train.steps; ++step) {
      if (!full) {
        std::vector<Index> pick(static_cast<std::size_t>(B));
        for (auto& i : pick) i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(samples)));
        std::sort(pick.begin(), pick.end());
        for (Index c = 0; c < B; ++c) {
          x.col(c) = all_x.col(pick[static_cast<std::size_t>(c)]);
          y.col(c) = all_y.col(pick[static_cast<std::size_t>(c)]);
        }
      }
      const Matrix<float> z = cb.codes.col(t);
      const ForwardTape<float> tape = model_forward<float>(params, x, z, groups);
      const double loss = batch_loss(tape.output, y, train.loss, d_out);
      if (!std::isfinite(loss)) {
        throw NumericalError("non-finite loss at step " + std::to_string(step) + " (tile " + std::to_string(t) + ")");
      }
      const ModelGradients<float> grads = model_backward<float>(params, tape, d_out, true);
      adam_step<float>(std::span<float>(cb.codes.col(t).data(), d), std::span<const float>(grads.latents.data(), d),
                       state);
    }
  }
  return cb;
}

AutoencoderResult train_autoencoder(const std::vector<SampledSignal>& signals, const TileShape& tiles,
                                    const EncoderConfig& encoder, const ModelConfig& model,
                                    const TrainConfig& train) {
  model.validate();
  train.validate();
  check_signals(signals, model);
  if (!model.uses_latent()) throw ConfigError("auto-encoder training needs a latent-conditioned model");
  if (encoder.hidden < 1) throw ConfigError("encoder hidden width must be >= 1");
  for (const auto& s : signals) {
    if (!s.dense) throw ConfigError("auto-encoder training needs dense signals");
  }
  const auto start = Clock::now();
  const PairTable pairs = build_pairs(signals, tiles);

  // Flattened tile samples, one column per global tile.
  const Index in_dim = pairs.grids.front().samples_per_tile() * model.output_dim;
  Matrix<float> tile_inputs(in_dim, pairs.total_tiles);
  for (std::size_t s = 0; s < signals.size(); ++s) {
    if (pairs.grids[s].samples_per_tile() * model.output_dim != in_dim) {
      throw ConfigError("auto-encoder signals must share the tile size");
    }
    for (std::int64_t t = 0; t < pairs.grids[s].tile_count(); ++t) {
      tile_inputs.col(pairs.tile_offset[s] + t) = tile_values(signals[s], pairs.grids[s], t);
    }
  }

  const RngStream root(train.seed);
  AutoencoderResult result;
  {
    RngStream r = root.derive(kStreamModel);
    result.params = ModelParams<float>::init(model, r);
    RngStream e = root.derive(kStreamEncoder);
    result.encoder = TileEncoderParams<float>::init(in_dim, encoder.hidden, model.latent_dim, e);
  }
  auto theta_states = make_states(result.params, train.lr_theta);
  auto encoder_states = make_states(result.encoder, train.lr_theta);
  RngStream batches = root.derive(kStreamBatches);
  Matrix<float> d_out;
  for (int step = 1; step <= train.steps; ++step) {
    const Batch batch = draw_batch(pairs, train.batch_size, batches);
    Matrix<float> enc_in(in_dim, static_cast<Index>(batch.group_keys.size()));
    for (std::size_t g = 0; g < batch.group_keys.size(); ++g) {
      enc_in.col(static_cast<Index>(g)) = tile_inputs.col(batch.group_keys[g]);
    }
    const EncoderTape<float> enc = encoder_forward(result.encoder, enc_in);
    const ForwardTape<float> tape = model_forward<float>(result.params, batch.coords, enc.latents(), batch.groups);
    const double loss = batch_loss(tape.output, batch.target, train.loss, d_out);
    if (!std::isfinite(loss)) throw_non_finite(step, tape.output, batch, pairs);
    result.report.step_losses.push_back(loss);

    const ModelGradients<float> grads = model_backward<float>(result.params, tape, d_out);
    const TileEncoderParams<float> enc_grads = encoder_backward(result.encoder, enc, grads.latents);
    apply_adam(result.params, grads.params, theta_states);
    apply_adam(result.encoder, enc_grads, encoder_states);

    if (is_eval_step(train, step)) {
      std::vector<Codebook> cbs;
      for (std::size_t s = 0; s < signals.size(); ++s) cbs.push_back(encode_signal(result.encoder, signals[s], pairs.grids[s]));
      result.report.rows.push_back(evaluate(step, loss, result.params, cbs, signals, start));
      if (train.on_eval) train.on_eval(result.report.rows.back());
    }
  }
  finish_report(result.report, start);
  return result;
}

}  // namespace modfield
