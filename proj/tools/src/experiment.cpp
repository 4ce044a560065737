#include "modfield/experiment.hpp"

#include "modfield/image_io.hpp"

namespace modfield::app {

namespace {

using nlohmann::json;

template <typename T>
void read_opt(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

DataSource parse_data(const json& j, const std::filesystem::path& base) {
  DataSource d;
  const std::string type = j.at("type").get<std::string>();
  if (type == "image") {
    d.kind = DataKind::Image;
    if (j.contains("path")) d.paths.push_back(j.at("path").get<std::string>());
    if (j.contains("paths")) {
      for (const auto& p : j.at("paths")) d.paths.push_back(p.get<std::string>());
    }
    if (d.paths.empty()) throw ConfigError("image data needs \"path\" or \"paths\"");
    for (auto& p : d.paths) {
      if (p.is_relative()) p = base / p;
    }
  } else if (type == "perlin") {
    d.kind = DataKind::Perlin;
    int rows = 4, cols = 4, patch = 32;
    double f_min = 2, f_max = 16;
    std::uint64_t seed = 0;
    read_opt(j, "rows", rows);
    read_opt(j, "cols", cols);
    read_opt(j, "patch_size", patch);
    read_opt(j, "f_min", f_min);
    read_opt(j, "f_max", f_max);
    read_opt(j, "seed", seed);
    d.perlin = PerlinSpec::sweep(rows, cols, patch, f_min, f_max, seed);
  } else if (type == "blobs") {
    d.kind = DataKind::Blobs;
    read_opt(j, "count", d.blob_count);
    read_opt(j, "width", d.blobs.width);
    read_opt(j, "height", d.blobs.height);
    read_opt(j, "channels", d.blobs.channels);
    read_opt(j, "blobs", d.blobs.blobs);
    read_opt(j, "width_min", d.blobs.width_min);
    read_opt(j, "width_max", d.blobs.width_max);
    read_opt(j, "seed", d.blobs.seed);
  } else if (type == "sdf") {
    d.kind = DataKind::Sdf;
    d.shape = parse_shape(j.at("shape"));
    read_opt(j, "points", d.sdf_points);
    read_opt(j, "near_fraction", d.near_fraction);
    read_opt(j, "near_sigma", d.near_sigma);
    read_opt(j, "extent", d.sdf_extent);
    read_opt(j, "seed", d.sdf_seed);
  } else {
    throw ConfigError("unknown data type '" + type + "' (expected image, perlin, blobs or sdf)");
  }
  return d;
}

}  // namespace

SdfShape parse_shape(const json& j) {
  if (j.is_array()) {
    SdfUnion u;
    for (const auto& c : j) u.children.push_back(parse_shape(c));
    return SdfShape{std::move(u)};
  }
  const std::string type = j.at("type").get<std::string>();
  const Vec3 center = j.contains("center") ? vec3(j.at("center")) : Vec3::Zero();
  if (type == "sphere") return SdfShape{Sphere{center, j.at("radius").get<double>()}};
  if (type == "box") return SdfShape{Box{center, vec3(j.at("half_extents"))}};
  if (type == "torus") {
    return SdfShape{Torus{center, j.at("major_radius").get<double>(), j.at("minor_radius").get<double>()}};
  }
  if (type == "union") return parse_shape(j.at("children"));
  throw ConfigError("unknown shape type '" + type + "'");
}

SdfShape load_scene(const std::filesystem::path& path) {
  try {
    const json doc = json::parse(read_file(path));
    // A bare shape, {"shape": ...}, or a full experiment config with SDF data.
    const json& j = doc.contains("data") ? doc.at("data") : doc;
    const SdfShape s = parse_shape(j.contains("shape") ? j.at("shape") : j);
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void ExperimentConfig::validate() const {
  ModelConfig m = model;
  if (m.input_dim < 1) m.input_dim = 1;
  if (m.output_dim < 1) m.output_dim = 1;
  m.validate();
  train.validate();
  if (tiles.size > 0 && (tiles.overlap < 0 || tiles.overlap >= tiles.size)) {
    throw ConfigError("tile overlap must satisfy 0 <= overlap < tile size");
  }
  if (mode == TrainMode::Autoencoder && data.kind == DataKind::Sdf) {
    throw ConfigError("auto-encoder mode needs dense signals; use the auto-decoder for SDF data");
  }
  if (data.kind == DataKind::Blobs && data.blob_count < 1) throw ConfigError("blob count must be >= 1");
}

ExperimentConfig parse_experiment(const json& doc, const std::filesystem::path& base) {
  ExperimentConfig c;
  try {
    if (doc.contains("mode")) {
      const auto mode = doc.at("mode").get<std::string>();
      if (mode == "autodecoder") {
        c.mode = TrainMode::Autodecoder;
      } else if (mode == "autoencoder") {
        c.mode = TrainMode::Autoencoder;
      } else {
        throw ConfigError("unknown mode '" + mode + "' (expected autodecoder or autoencoder)");
      }
    }
    c.data = parse_data(doc.at("data"), base);
    if (doc.contains("model")) {
      const json& m = doc.at("model");
      read_opt(m, "latent_dim", c.model.latent_dim);
      read_opt(m, "hidden_layers", c.model.hidden_layers);
      read_opt(m, "width", c.model.width);
      read_opt(m, "omega0", c.model.omega0);
      read_opt(m, "fourier_sigma", c.model.fourier_sigma);
      read_opt(m, "fourier_features", c.model.fourier_features);
      if (m.contains("conditioning")) c.model.conditioning = conditioning_from_string(m.at("conditioning").get<std::string>());
      if (m.contains("synth_activation")) {
        c.model.synth_activation = activation_from_string(m.at("synth_activation").get<std::string>());
      }
      if (m.contains("input_encoding")) {
        c.model.input_encoding = input_encoding_from_string(m.at("input_encoding").get<std::string>());
      }
    }
    if (doc.contains("tiles")) {
      read_opt(doc.at("tiles"), "size", c.tiles.size);
      read_opt(doc.at("tiles"), "overlap", c.tiles.overlap);
    }
    if (doc.contains("train")) {
      const json& t = doc.at("train");
      read_opt(t, "steps", c.train.steps);
      read_opt(t, "batch_size", c.train.batch_size);
      read_opt(t, "lr_theta", c.train.lr_theta);
      read_opt(t, "lr_latent", c.train.lr_latent);
      read_opt(t, "latent_init_scale", c.train.latent_init_scale);
      read_opt(t, "eval_every", c.train.eval_every);
      if (t.contains("loss")) c.train.loss = loss_kind_from_string(t.at("loss").get<std::string>());
    }
    if (doc.contains("encoder")) read_opt(doc.at("encoder"), "hidden", c.encoder.hidden);
    read_opt(doc, "seed", c.train.seed);
    read_opt(doc, "deterministic", c.deterministic);
    if (doc.contains("out")) c.out = doc.at("out").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid experiment config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_experiment(doc, path.parent_path());
}

std::vector<SampledSignal> load_signals(const DataSource& data) {
  std::vector<SampledSignal> out;
  switch (data.kind) {
    case DataKind::Image:
      for (const auto& p : data.paths) out.push_back(load_image(p));
      break;
    case DataKind::Perlin:
      out.push_back(perlin_grid(data.perlin));
      break;
    case DataKind::Blobs:
      for (int i = 0; i < data.blob_count; ++i) {
        BlobImageSpec s = data.blobs;
        s.seed += static_cast<std::uint64_t>(i);
        out.push_back(blob_image(s));
      }
      break;
    case DataKind::Sdf: {
      data.shape.validate();
      RngStream rng(data.sdf_seed);
      out.push_back(sdf_to_grid_frame(
          sample_sdf_points(data.shape, data.sdf_points, data.near_fraction, data.near_sigma, rng), data.sdf_extent));
      break;
    }
  }
  return out;
}

}  // namespace modfield::app
