#include "modfield/app.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "modfield/experiment.hpp"
#include "modfield/formats.hpp"
#include "modfield/image_io.hpp"
#include "modfield/metrics.hpp"

namespace modfield::app {

namespace fs = std::filesystem;

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

/// Flags shared by commands that train or infer.
struct Overrides {
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::optional<int> steps;
  std::optional<std::int64_t> tile_size;
  std::optional<std::int64_t> overlap;
  std::optional<int> latent_dim;
  std::optional<int> width;
  std::optional<int> layers;
  std::optional<double> omega0;
  std::optional<std::string> loss;
  std::optional<std::string> out;

  void attach(CLI::App* cmd, bool model_flags) {
    cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_flag("--deterministic", deterministic, "Bitwise-reproducible mode (zeroes wall_ms in CSV output)");
    cmd->add_option("--steps", steps, "Optimization steps")->check(CLI::PositiveNumber);
    cmd->add_option("--loss", loss, "Reconstruction loss")->check(CLI::IsMember({"l2", "l1"}));
    if (!model_flags) return;
    cmd->add_option("--tile-size", tile_size, "Tile side in samples (0: one tile)");
    cmd->add_option("--overlap", overlap, "Tile overlap in samples");
    cmd->add_option("--latent-dim", latent_dim, "Latent code size d")->check(CLI::PositiveNumber);
    cmd->add_option("--width", width, "Hidden width")->check(CLI::PositiveNumber);
    cmd->add_option("--layers", layers, "Synthesis layers K")->check(CLI::PositiveNumber);
    cmd->add_option("--omega0", omega0, "First-layer frequency scale")->check(CLI::PositiveNumber);
  }

  void apply(ExperimentConfig& c) const {
    if (seed) c.train.seed = *seed;
    if (deterministic) c.deterministic = true;
    if (steps) c.train.steps = *steps;
    if (tile_size) c.tiles.size = *tile_size;
    if (overlap) c.tiles.overlap = *overlap;
    if (latent_dim) c.model.latent_dim = *latent_dim;
    if (width) c.model.width = *width;
    if (layers) c.model.hidden_layers = *layers;
    if (omega0) c.model.omega0 = *omega0;
    if (loss) c.train.loss = loss_kind_from_string(*loss);
    if (out) c.out = *out;
  }
};

void write_csv(const fs::path& path, const std::string& text) { write_file_atomic(path, text); }

std::string metrics_csv(const TrainReport& report, bool deterministic) {
  std::ostringstream s;
  s << "step,loss,psnr_1x,psnr_2x,wall_ms\n";
  for (const TrainRow& r : report.rows) {
    s << r.step << ',' << csv_number(r.loss) << ',' << csv_number(r.psnr_1x) << ',' << csv_number(r.psnr_2x) << ','
      << csv_number(deterministic ? 0.0 : r.wall_ms) << '\n';
  }
  return s.str();
}

void fill_dims(ExperimentConfig& c, const std::vector<SampledSignal>& signals) {
  c.model.input_dim = signals.front().n;
  c.model.output_dim = signals.front().m;
  c.model.validate();
}

SampledSignal load_signal_arg(const std::string& arg) {
  const fs::path p(arg);
  if (p.extension() == ".json") {
    ExperimentConfig c = load_experiment(p);
    return load_signals(c.data).front();
  }
  return load_image(p);
}

int cmd_fit(const std::string& config_path, const Overrides& ov, std::ostream& out) {
  ExperimentConfig c = load_experiment(config_path);
  ov.apply(c);
  c.validate();
  const std::vector<SampledSignal> signals = load_signals(c.data);
  fill_dims(c, signals);

  fs::create_directories(c.out);
  Checkpoint ck;
  ck.tiles = c.tiles;
  ck.seed = c.train.seed;
  ck.step = c.train.steps;
  TrainReport report;
  std::vector<Codebook> codebooks;
  if (c.mode == TrainMode::Autodecoder) {
    AutodecoderResult r = train_autodecoder(signals, c.tiles, c.model, c.train);
    ck.params = std::move(r.params);
    codebooks = std::move(r.codebooks);
    report = std::move(r.report);
  } else {
    AutoencoderResult r = train_autoencoder(signals, c.tiles, c.encoder, c.model, c.train);
    ck.params = std::move(r.params);
    for (const auto& s : signals) codebooks.push_back(encode_signal(r.encoder, s, c.tiles.grid_for(s.extent)));
    ck.encoder = std::move(r.encoder);
    report = std::move(r.report);
  }
  save_checkpoint(ck, c.out / "checkpoint.modf");
  for (std::size_t i = 0; i < codebooks.size(); ++i) {
    save_codebook(codebooks[i], c.out / ("codebook_" + std::to_string(i) + ".modz"));
  }
  write_csv(c.out / "metrics.csv", metrics_csv(report, c.deterministic));
  out << "final loss " << csv_number(report.final_loss) << " psnr_1x " << csv_number(report.final_psnr_1x)
      << " psnr_2x " << csv_number(report.final_psnr_2x) << "\n";
  return kExitOk;
}

int cmd_infer(const std::string& checkpoint, const std::string& signal_arg, const std::string& config_path,
              const Overrides& ov, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  TrainConfig train;
  train.steps = 300;
  train.batch_size = 1024;
  train.lr_latent = 1e-2;
  train.seed = ck.seed;
  if (!config_path.empty()) train = load_experiment(config_path).train;
  if (ov.seed) train.seed = *ov.seed;
  if (ov.steps) train.steps = *ov.steps;
  if (ov.loss) train.loss = loss_kind_from_string(*ov.loss);
  const SampledSignal signal = load_signal_arg(signal_arg);
  const Codebook cb = infer_latents(ck.params, signal, ck.tiles, train);
  const fs::path dst = ov.out ? fs::path(*ov.out) : fs::path("codebook.modz");
  save_codebook(cb, dst);
  const SignalScore score = score_signal(ck.params, cb, signal);
  out << "psnr_1x " << csv_number(score.psnr_1x) << "\n";
  return kExitOk;
}

int cmd_decode(const std::string& checkpoint, const std::string& codebook, int factor, const std::string& dst,
               std::ostream& out) {
  if (factor < 1) throw ConfigError("--factor must be >= 1");
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Codebook cb = load_codebook(codebook);
  if (cb.grid.dims() != 2) throw ConfigError("decode writes images and needs a 2-D codebook");
  const SampledSignal img = decode_dense(ck.params, cb, factor);
  save_image(img, dst);
  out << "wrote " << dst << " (" << img.extent[0] << "x" << img.extent[1] << ")\n";
  return kExitOk;
}

int cmd_eval(const std::string& pred, const std::string& target, const std::string& metric,
             const std::string& codebook, int resolution, std::ostream& out) {
  std::string row;
  if (metric == "psnr" || metric == "l1") {
    const SampledSignal a = load_image(pred);
    const SampledSignal b = load_image(target);
    if (a.extent != b.extent || a.m != b.m) throw DimensionError("eval: image sizes differ", b.size() * b.m, a.size() * a.m);
    const double v = metric == "psnr" ? psnr(a, b)
                                      : (a.values - b.values).cwiseAbs().sum() / static_cast<double>(a.values.size());
    row = metric + ',' + csv_number(v) + ',';
  } else if (metric == "chamfer") {
    row = "chamfer," + csv_number(chamfer_distance(load_point_cloud(pred), load_point_cloud(target))) + ',';
  } else if (metric == "sdf-grid") {
    const Checkpoint ck = load_checkpoint(pred);
    const SdfShape shape = load_scene(target);
    std::optional<Codebook> cb;
    if (!codebook.empty()) cb = load_codebook(codebook);
    const SdfGridMetrics m = sdf_grid_metrics(ck.params, cb ? &*cb : nullptr, shape, resolution);
    row = "sdf-grid," + csv_number(m.mean_abs_error) + ',' + csv_number(m.sign_agreement);
  } else {
    throw ConfigError("unknown metric '" + metric + "'");
  }
  out << "metric,value,aux\n" << row << "\n";
  return kExitOk;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ModelConfig baseline_model(const std::string& name, ModelConfig base) {
  base.input_encoding = InputEncoding::Raw;
  if (name == "relu") {
    base.conditioning = Conditioning::Concat;
    base.synth_activation = Activation::ReLU;
  } else if (name == "ffn") {
    base.conditioning = Conditioning::Concat;
    base.synth_activation = Activation::ReLU;
    base.input_encoding = InputEncoding::FourierFeatures;
  } else if (name == "concat") {
    base.conditioning = Conditioning::Concat;
    base.synth_activation = Activation::Sine;
  } else if (name == "modulated") {
    base.conditioning = Conditioning::Modulated;
    base.synth_activation = Activation::Sine;
  } else {
    throw ConfigError("unknown baseline '" + name + "' (expected relu, ffn, concat or modulated)");
  }
  return base;
}

int cmd_compare(const std::string& config_path, const std::string& baselines, const Overrides& ov,
                std::ostream& out) {
  ExperimentConfig c = load_experiment(config_path);
  ov.apply(c);
  c.validate();
  const auto names = split_list(baselines);
  if (names.empty()) throw ConfigError("--baselines needs at least one name");
  for (const auto& n : names) baseline_model(n, c.model);  // reject unknown names before training

  const std::vector<SampledSignal> signals = load_signals(c.data);
  fill_dims(c, signals);
  std::vector<Eigen::Index> hf;
  if (c.data.kind == DataKind::Perlin) hf = high_frequency_samples(c.data.perlin);

  std::ostringstream csv;
  csv << "method,local,steps,psnr_1x,psnr_2x,psnr_hf,wall_ms\n";
  for (const auto& name : names) {
    const ModelConfig model = baseline_model(name, c.model);
    const AutodecoderResult r = train_autodecoder(signals, c.tiles, model, c.train);
    double hf_psnr = std::numeric_limits<double>::quiet_NaN();
    if (!hf.empty()) hf_psnr = psnr_subset(decode_dense(r.params, r.codebooks[0], 1), signals[0], hf);
    csv << name << ',' << (c.tiles.size > 0 ? "yes" : "no") << ',' << r.report.step_losses.size() << ','
        << csv_number(r.report.final_psnr_1x) << ',' << csv_number(r.report.final_psnr_2x) << ','
        << csv_number(hf_psnr) << ',' << csv_number(c.deterministic ? 0.0 : r.report.wall_ms) << '\n';
  }
  if (ov.out) {
    write_csv(*ov.out, csv.str());
  } else {
    out << csv.str();
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Modulated periodic neural fields", "modfield"};
  app.require_subcommand(1);

  std::string config, checkpoint, codebook, signal, pred, target, metric = "psnr", baselines = "relu,ffn,concat,modulated";
  std::string decode_out;
  int factor = 1, resolution = 64;
  Overrides fit_ov, infer_ov, compare_ov;

  auto* fit = app.add_subcommand("fit", "Train a field and codebooks from an experiment config");
  fit->add_option("--config", config, "Experiment JSON")->required();
  fit_ov.attach(fit, true);
  fit->add_option("--out", fit_ov.out, "Output directory");

  auto* infer = app.add_subcommand("infer", "Fit latent codes for a signal with frozen weights");
  infer->add_option("--checkpoint", checkpoint, "Checkpoint (.modf)")->required();
  infer->add_option("signal", signal, "Image (.ppm/.pfm) or experiment JSON")->required();
  infer->add_option("--config", config, "Experiment JSON supplying training settings");
  infer_ov.attach(infer, false);
  infer->add_option("--out", infer_ov.out, "Codebook output (.modz)");

  auto* decode = app.add_subcommand("decode", "Render a codebook to an image");
  decode->add_option("--checkpoint", checkpoint, "Checkpoint (.modf)")->required();
  decode->add_option("--codebook", codebook, "Codebook (.modz)")->required();
  decode->add_option("--factor", factor, "Resolution multiplier");
  decode->add_option("--out", decode_out, "Output image (.ppm or .pfm)")->required();

  auto* eval = app.add_subcommand("eval", "Print one metric as CSV");
  eval->add_option("pred", pred, "Prediction (image, point cloud or checkpoint)")->required();
  eval->add_option("target", target, "Target (image, point cloud or scene JSON)")->required();
  eval->add_option("--metric", metric, "psnr, l1, chamfer or sdf-grid");
  eval->add_option("--codebook", codebook, "Codebook for sdf-grid");
  eval->add_option("--resolution", resolution, "Grid resolution for sdf-grid");

  auto* compare = app.add_subcommand("compare", "Train baselines under an equal budget");
  compare->add_option("--config", config, "Experiment JSON")->required();
  compare->add_option("--baselines", baselines, "Comma-separated: relu,ffn,concat,modulated");
  compare_ov.attach(compare, true);
  compare->add_option("--out", compare_ov.out, "Summary CSV (stdout when omitted)");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*fit) return cmd_fit(config, fit_ov, out);
    if (*infer) return cmd_infer(checkpoint, signal, config, infer_ov, out);
    if (*decode) return cmd_decode(checkpoint, codebook, factor, decode_out, out);
    if (*eval) return cmd_eval(pred, target, metric, codebook, resolution, out);
    if (*compare) return cmd_compare(config, baselines, compare_ov, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}

}  // namespace modfield::app
