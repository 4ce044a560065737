#include "modfield/formats.hpp"

#include <bit>
#include <cstring>
#include <string_view>

#include <nlohmann/json.hpp>

#include "modfield/image_io.hpp"

namespace modfield {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

using nlohmann::json;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string name) : bytes_(bytes), name_(std::move(name)) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t count, const char* what) {
    need(count, what);
    std::string_view v(bytes_.data() + pos_, count);
    pos_ += count;
    return v;
  }

  void magic(std::string_view expected) {
    if (take(4, "magic") != expected) throw FormatError(name_ + ": bad magic, expected \"" + std::string(expected) + "\"");
  }

  void version(std::uint32_t expected) {
    const auto v = get<std::uint32_t>("version");
    if (v != expected) {
      throw FormatError(name_ + ": unsupported format version " + std::to_string(v) + " (expected " +
                        std::to_string(expected) + ")");
    }
  }

  void finish() const {
    if (pos_ != bytes_.size()) throw FormatError(name_ + ": " + std::to_string(bytes_.size() - pos_) + " trailing bytes");
  }

  [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }
  [[nodiscard]] const std::string& name() const { return name_; }

 private:
  void need(std::size_t count, const char* what) const {
    if (bytes_.size() - pos_ < count) throw FormatError(name_ + ": truncated while reading " + what);
  }

  const std::string& bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

template <typename Derived>
void put_floats(std::string& out, const Eigen::DenseBase<Derived>& m) {
  // Row-major traversal regardless of storage order.
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) put<float>(out, static_cast<float>(m(r, c)));
  }
}

template <typename Derived>
void get_floats(Reader& in, Eigen::DenseBase<Derived>& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = in.get<float>("parameter blob");
  }
}

json config_to_json(const ModelConfig& c) {
  return json{{"input_dim", c.input_dim},
              {"output_dim", c.output_dim},
              {"latent_dim", c.latent_dim},
              {"hidden_layers", c.hidden_layers},
              {"width", c.width},
              {"omega0", c.omega0},
              {"conditioning", to_string(c.conditioning)},
              {"synth_activation", to_string(c.synth_activation)},
              {"input_encoding", to_string(c.input_encoding)},
              {"fourier_sigma", c.fourier_sigma},
              {"fourier_features", c.fourier_features}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.output_dim = j.at("output_dim").get<int>();
  c.latent_dim = j.at("latent_dim").get<int>();
  c.hidden_layers = j.at("hidden_layers").get<int>();
  c.width = j.at("width").get<int>();
  c.omega0 = j.at("omega0").get<double>();
  c.conditioning = conditioning_from_string(j.at("conditioning").get<std::string>());
  c.synth_activation = activation_from_string(j.at("synth_activation").get<std::string>());
  c.input_encoding = input_encoding_from_string(j.at("input_encoding").get<std::string>());
  c.fourier_sigma = j.at("fourier_sigma").get<double>();
  c.fourier_features = j.at("fourier_features").get<int>();
  return c;
}

void describe_layer(json& blocks, const std::string& name, const DenseLayer<float>& l) {
  blocks.push_back({{"name", name + ".weights"}, {"shape", {l.out_dim(), l.in_dim()}}});
  blocks.push_back({{"name", name + ".bias"}, {"shape", {l.out_dim(), 1}}});
}

json block_table(const Checkpoint& ck) {
  json blocks = json::array();
  const auto& p = ck.params;
  for (std::size_t i = 0; i < p.synth.size(); ++i) describe_layer(blocks, "synth." + std::to_string(i), p.synth[i]);
  for (std::size_t i = 0; i < p.modulator.size(); ++i) {
    describe_layer(blocks, "modulator." + std::to_string(i), p.modulator[i]);
  }
  describe_layer(blocks, "output", p.output);
  if (p.fourier.size() > 0) blocks.push_back({{"name", "fourier"}, {"shape", {p.fourier.rows(), p.fourier.cols()}}});
  if (ck.encoder) {
    for (std::size_t i = 0; i < ck.encoder->layers.size(); ++i) {
      describe_layer(blocks, "encoder." + std::to_string(i), ck.encoder->layers[i]);
    }
  }
  return blocks;
}

void put_layer(std::string& out, const DenseLayer<float>& l) {
  put_floats(out, l.weights);
  put_floats(out, l.bias);
}

void get_layer(Reader& in, DenseLayer<float>& l) {
  get_floats(in, l.weights);
  get_floats(in, l.bias);
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ck) {
  ck.params.validate();
  if (ck.encoder) ck.encoder->validate();
  json header;
  header["config"] = config_to_json(ck.params.config);
  header["seed"] = ck.seed;
  header["step"] = ck.step;
  header["tiles"] = {{"size", ck.tiles.size}, {"overlap", ck.tiles.overlap}};
  header["encoder_hidden"] = ck.encoder ? ck.encoder->layers.front().out_dim() : 0;
  header["blocks"] = block_table(ck);
  const std::string text = header.dump();

  std::string out = "MODF";
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& l : ck.params.synth) put_layer(out, l);
  for (const auto& l : ck.params.modulator) put_layer(out, l);
  put_layer(out, ck.params.output);
  if (ck.params.fourier.size() > 0) put_floats(out, ck.params.fourier);
  if (ck.encoder) {
    for (const auto& l : ck.encoder->layers) put_layer(out, l);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& name) {
  Reader in(bytes, name);
  in.magic("MODF");
  in.version(kCheckpointVersion);
  const auto len = in.get<std::uint64_t>("header length");
  if (len > in.remaining()) throw FormatError(name + ": header length exceeds file size");
  const std::string_view text = in.take(static_cast<std::size_t>(len), "header");

  Checkpoint ck;
  json header;
  std::int64_t encoder_hidden = 0;
  try {
    header = json::parse(text);
    ck.params = ModelParams<float>::zeros(config_from_json(header.at("config")));
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.step = header.at("step").get<std::int64_t>();
    ck.tiles.size = header.at("tiles").at("size").get<std::int64_t>();
    ck.tiles.overlap = header.at("tiles").at("overlap").get<std::int64_t>();
    encoder_hidden = header.at("encoder_hidden").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw FormatError(name + ": malformed checkpoint header: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(name + ": invalid model config in header: " + e.what());
  }
  const ModelConfig& cfg = ck.params.config;
  if (cfg.input_encoding == InputEncoding::FourierFeatures) {
    ck.params.fourier = WeightMatrix<float>::Zero(cfg.fourier_features, cfg.input_dim);
  }
  if (encoder_hidden > 0) {
    // Input width is read from the block table; the remaining layers follow from it.
    const json& blocks = header.at("blocks");
    Index in_dim = 0;
    for (const auto& b : blocks) {
      if (b.at("name") == "encoder.0.weights") in_dim = b.at("shape").at(1).get<Index>();
    }
    if (in_dim < 1) throw FormatError(name + ": encoder blocks missing from header");
    TileEncoderParams<float> enc;
    enc.layers.emplace_back(encoder_hidden, in_dim, Activation::ReLU);
    enc.layers.emplace_back(encoder_hidden, encoder_hidden, Activation::ReLU);
    enc.layers.emplace_back(cfg.latent_dim, encoder_hidden, Activation::Identity);
    ck.encoder = std::move(enc);
  }

  // The header's block table must describe exactly the shapes implied by the config.
  if (header.at("blocks") != block_table(ck)) throw FormatError(name + ": block table disagrees with the model config");
  std::size_t floats = 0;
  for (const auto& b : header.at("blocks")) floats += b.at("shape").at(0).get<std::size_t>() * b.at("shape").at(1).get<std::size_t>();
  if (in.remaining() != floats * sizeof(float)) {
    throw FormatError(name + ": parameter blob holds " + std::to_string(in.remaining()) + " bytes, header describes " +
                      std::to_string(floats * sizeof(float)));
  }
  for (auto& l : ck.params.synth) get_layer(in, l);
  for (auto& l : ck.params.modulator) get_layer(in, l);
  get_layer(in, ck.params.output);
  if (ck.params.fourier.size() > 0) get_floats(in, ck.params.fourier);
  if (ck.encoder) {
    for (auto& l : ck.encoder->layers) get_layer(in, l);
  }
  in.finish();
  return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path), path.string()); }

std::string encode_codebook(const Codebook& cb) {
  cb.validate();
  const TileGrid& g = cb.grid;
  std::string out = "MODZ";
  put<std::uint32_t>(out, kCodebookVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(g.dims()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cb.latent_dim()));
  for (int a = 0; a < g.dims(); ++a) {
    put<std::int64_t>(out, g.extent()[a]);
    put<std::int64_t>(out, g.tile_size()[a]);
    put<std::int64_t>(out, g.overlap()[a]);
  }
  const float* data = cb.codes.data();
  out.append(reinterpret_cast<const char*>(data), static_cast<std::size_t>(cb.codes.size()) * sizeof(float));
  return out;
}

Codebook decode_codebook(const std::string& bytes, const std::string& name) {
  Reader in(bytes, name);
  in.magic("MODZ");
  in.version(kCodebookVersion);
  const auto n = in.get<std::uint32_t>("n");
  const auto d = in.get<std::uint32_t>("d");
  if (n < 1 || n > static_cast<std::uint32_t>(kMaxTileDims)) throw FormatError(name + ": invalid grid dimension");
  if (d < 1) throw FormatError(name + ": latent dimension must be >= 1");
  std::vector<std::int64_t> extent(n), tile(n), overlap(n);
  for (std::uint32_t a = 0; a < n; ++a) {
    extent[a] = in.get<std::int64_t>("extent");
    tile[a] = in.get<std::int64_t>("tile size");
    overlap[a] = in.get<std::int64_t>("overlap");
  }
  TileGrid grid;
  try {
    grid = TileGrid(extent, tile, overlap);
  } catch (const ConfigError& e) {
    throw FormatError(name + ": invalid tile grid: " + e.what());
  }
  Codebook cb(grid, d);
  const std::size_t count = static_cast<std::size_t>(cb.codes.size());
  if (in.remaining() != count * sizeof(float)) {
    throw FormatError(name + ": code blob holds " + std::to_string(in.remaining()) + " bytes, expected " +
                      std::to_string(count * sizeof(float)));
  }
  std::memcpy(cb.codes.data(), in.take(count * sizeof(float), "codes").data(), count * sizeof(float));
  in.finish();
  return cb;
}

void save_codebook(const Codebook& cb, const std::filesystem::path& path) { write_file_atomic(path, encode_codebook(cb)); }

Codebook load_codebook(const std::filesystem::path& path) { return decode_codebook(read_file(path), path.string()); }

std::string encode_point_cloud(const Eigen::MatrixXd& points) {
  if (points.rows() != 3) throw DimensionError("point cloud coordinate rows", 3, points.rows());
  std::string out = "MODP";
  put<std::uint32_t>(out, kPointCloudVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(points.cols()));
  for (Index j = 0; j < points.cols(); ++j) {
    for (Index a = 0; a < 3; ++a) put<float>(out, static_cast<float>(points(a, j)));
  }
  return out;
}

Eigen::MatrixXd decode_point_cloud(const std::string& bytes, const std::string& name) {
  Reader in(bytes, name);
  in.magic("MODP");
  in.version(kPointCloudVersion);
  const auto count = in.get<std::uint64_t>("point count");
  if (count > in.remaining() / (3 * sizeof(float)) || in.remaining() != count * 3 * sizeof(float)) {
    throw FormatError(name + ": point blob size disagrees with the point count " + std::to_string(count));
  }
  Eigen::MatrixXd pts(3, static_cast<Index>(count));
  for (Index j = 0; j < pts.cols(); ++j) {
    for (Index a = 0; a < 3; ++a) pts(a, j) = in.get<float>("points");
  }
  in.finish();
  return pts;
}

void save_point_cloud(const Eigen::MatrixXd& points, const std::filesystem::path& path) {
  write_file_atomic(path, encode_point_cloud(points));
}

Eigen::MatrixXd load_point_cloud(const std::filesystem::path& path) {
  return decode_point_cloud(read_file(path), path.string());
}

}  // namespace modfield
