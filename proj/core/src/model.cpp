#include "modfield/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "modfield/init.hpp"

namespace modfield {

namespace {

// Modulator layers start with this bias so that alpha is O(1) when the
// latent codes are near zero; with zero bias every amplitude would start
// at ReLU(~0) and the synthesis network would begin switched off.
constexpr double kModulatorBiasInit = 1.0;

template <typename T>
void check_layer(const DenseLayer<T>& layer, Index out, Index in, const std::string& name) {
  if (layer.out_dim() != out) throw DimensionError(name + " out_dim", out, layer.out_dim());
  if (layer.in_dim() != in) throw DimensionError(name + " in_dim", in, layer.in_dim());
  if (layer.bias.size() != layer.out_dim()) throw DimensionError(name + " bias length", layer.out_dim(), layer.bias.size());
}

template <typename T>
void check_groups(std::span<const Index> groups, Index batch, Index latent_count) {
  if (static_cast<Index>(groups.size()) != batch) {
    throw DimensionError("group index count vs batch size", batch, static_cast<long long>(groups.size()));
  }
  for (const Index g : groups) {
    if (g < 0 || g >= latent_count) throw DimensionError("group index out of range; latent columns", latent_count, g);
  }
}

/// Rows [h; z] for every latent column.
template <typename T>
Matrix<T> stack(const Matrix<T>& top, const Matrix<T>& bottom) {
  Matrix<T> out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Sine: return "sine";
    case Activation::ReLU: return "relu";
    case Activation::Identity: return "identity";
  }
  return "?";
}

Activation activation_from_string(std::string_view name) {
  if (name == "sine") return Activation::Sine;
  if (name == "relu") return Activation::ReLU;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Conditioning c) {
  switch (c) {
    case Conditioning::Modulated: return "modulated";
    case Conditioning::Concat: return "concat";
    case Conditioning::None: return "none";
  }
  return "?";
}

std::string_view to_string(InputEncoding e) {
  return e == InputEncoding::FourierFeatures ? "fourier" : "raw";
}

Conditioning conditioning_from_string(std::string_view name) {
  if (name == "modulated") return Conditioning::Modulated;
  if (name == "concat") return Conditioning::Concat;
  if (name == "none") return Conditioning::None;
  throw ConfigError("unknown conditioning '" + std::string(name) + "'");
}

InputEncoding input_encoding_from_string(std::string_view name) {
  if (name == "raw") return InputEncoding::Raw;
  if (name == "fourier") return InputEncoding::FourierFeatures;
  throw ConfigError("unknown input encoding '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (input_dim < 1 || output_dim < 1 || latent_dim < 1 || hidden_layers < 1 || width < 1) {
    throw ConfigError("model dims n, m, d, K, width must all be >= 1");
  }
  if (!(omega0 > 0.0)) throw ConfigError("omega0 must be > 0");
  if (synth_activation == Activation::Identity) throw ConfigError("synthesis activation must be sine or relu");
  if (input_encoding == InputEncoding::FourierFeatures) {
    if (synth_activation != Activation::ReLU) {
      throw ConfigError("Fourier feature encoding is only defined for ReLU synthesis networks");
    }
    if (fourier_features < 1 || !(fourier_sigma > 0.0)) {
      throw ConfigError("Fourier features need feature_count >= 1 and sigma > 0");
    }
  }
}

template <typename T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& config, RngStream& rng) {
  config.validate();
  ModelParams p;
  p.config = config;
  const Index w = config.width;
  const Index d = config.latent_dim;
  const bool sine = config.synth_activation == Activation::Sine;

  if (config.input_encoding == InputEncoding::FourierFeatures) {
    p.fourier = draw_fourier_matrix<T>(config.fourier_features, config.input_dim, config.fourier_sigma, rng);
  }

  const Index in0 = config.synth_input_dim();
  p.synth.push_back(sine ? init_siren_first<T>(w, in0, rng, config.omega0)
                         : init_kaiming_uniform<T>(w, in0, Activation::ReLU, rng));
  for (int i = 1; i < config.hidden_layers; ++i) {
    p.synth.push_back(sine ? init_siren_hidden<T>(w, w, config.omega0, rng)
                           : init_kaiming_uniform<T>(w, w, Activation::ReLU, rng));
  }
  if (sine) {
    p.output = init_siren_hidden<T>(config.output_dim, w, config.omega0, rng, Activation::Identity);
  } else {
    p.output = detail::uniform_layer<T>(config.output_dim, w, 1.0 / std::sqrt(static_cast<double>(w)),
                                        Activation::Identity, rng);
  }

  if (config.conditioning == Conditioning::Modulated) {
    p.modulator.push_back(init_kaiming_uniform<T>(w, d, Activation::ReLU, rng, kModulatorBiasInit));
    for (int i = 0; i < config.hidden_layers; ++i) {
      p.modulator.push_back(init_kaiming_uniform<T>(w, w + d, Activation::ReLU, rng, kModulatorBiasInit));
    }
  }
  return p;
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  const Index w = config.width;
  const Index d = config.latent_dim;
  p.synth.emplace_back(w, config.synth_input_dim(), config.synth_activation);
  for (int i = 1; i < config.hidden_layers; ++i) p.synth.emplace_back(w, w, config.synth_activation);
  p.output = DenseLayer<T>(config.output_dim, w, Activation::Identity);
  if (config.conditioning == Conditioning::Modulated) {
    p.modulator.emplace_back(w, d, Activation::ReLU);
    for (int i = 0; i < config.hidden_layers; ++i) p.modulator.emplace_back(w, w + d, Activation::ReLU);
  }
  if (config.input_encoding == InputEncoding::FourierFeatures) {
    p.fourier = WeightMatrix<T>::Zero(config.fourier_features, config.input_dim);
  }
  return p;
}

template <typename T>
void ModelParams<T>::validate() const {
  config.validate();
  const Index w = config.width;
  const Index d = config.latent_dim;
  if (static_cast<int>(synth.size()) != config.hidden_layers) {
    throw DimensionError("synthesis layer count", config.hidden_layers, static_cast<long long>(synth.size()));
  }
  check_layer(synth[0], w, config.synth_input_dim(), "synthesis layer 1");
  for (std::size_t i = 1; i < synth.size(); ++i) check_layer(synth[i], w, w, "synthesis layer " + std::to_string(i + 1));
  check_layer(output, config.output_dim, w, "output layer");
  if (config.conditioning == Conditioning::Modulated) {
    if (static_cast<int>(modulator.size()) != config.hidden_layers + 1) {
      throw DimensionError("modulator layer count", config.hidden_layers + 1, static_cast<long long>(modulator.size()));
    }
    check_layer(modulator[0], w, d, "modulator stem");
    for (std::size_t i = 1; i < modulator.size(); ++i) {
      check_layer(modulator[i], w, w + d, "modulator layer " + std::to_string(i));
    }
  } else if (!modulator.empty()) {
    throw DimensionError("modulator layer count (unmodulated model)", 0, static_cast<long long>(modulator.size()));
  }
  if (config.input_encoding == InputEncoding::FourierFeatures) {
    if (fourier.rows() != config.fourier_features || fourier.cols() != config.input_dim) {
      throw DimensionError("Fourier matrix rows", config.fourier_features, fourier.rows());
    }
  }
}

template <typename T>
std::vector<std::span<T>> ModelParams<T>::blocks() {
  std::vector<std::span<T>> out;
  auto add = [&out](DenseLayer<T>& l) {
    out.emplace_back(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  };
  for (auto& l : synth) add(l);
  for (auto& l : modulator) add(l);
  add(output);
  return out;
}

template <typename T>
std::vector<std::span<const T>> ModelParams<T>::blocks() const {
  std::vector<std::span<const T>> out;
  for (auto s : const_cast<ModelParams&>(*this).blocks()) out.emplace_back(s.data(), s.size());
  return out;
}

template <typename T>
Index ModelParams<T>::parameter_count() const {
  Index count = 0;
  for (const auto& b : blocks()) count += static_cast<Index>(b.size());
  return count;
}

template <typename T>
std::vector<T> pack_parameters(const ModelParams<T>& params) {
  std::vector<T> flat;
  flat.reserve(static_cast<std::size_t>(params.parameter_count()));
  for (const auto& b : params.blocks()) flat.insert(flat.end(), b.begin(), b.end());
  return flat;
}

template <typename T>
void unpack_parameters(std::span<const T> flat, ModelParams<T>& params) {
  const auto expected = static_cast<std::size_t>(params.parameter_count());
  if (flat.size() != expected) {
    throw DimensionError("unpack_parameters: flat length", static_cast<long long>(expected),
                         static_cast<long long>(flat.size()));
  }
  std::size_t offset = 0;
  for (auto b : params.blocks()) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), b.size(), b.begin());
    offset += b.size();
  }
}

template <typename T>
WeightMatrix<T> draw_fourier_matrix(Index features, Index input_dim, double sigma, RngStream& rng) {
  WeightMatrix<T> b(features, input_dim);
  for (Index r = 0; r < features; ++r) {
    for (Index c = 0; c < input_dim; ++c) b(r, c) = static_cast<T>(rng.normal(0.0, sigma));
  }
  return b;
}

template <typename T>
Matrix<T> fourier_encode(const WeightMatrix<T>& b, const Matrix<T>& coords) {
  if (coords.rows() != b.cols()) throw DimensionError("fourier_encode: coordinate dim vs B columns", b.cols(), coords.rows());
  const Matrix<T> proj = T(2.0 * std::numbers::pi) * (b * coords);
  Matrix<T> out(2 * b.rows(), coords.cols());
  out.topRows(b.rows()).array() = proj.array().cos();
  out.bottomRows(b.rows()).array() = proj.array().sin();
  return out;
}

template <typename T>
Vector<T> fourier_encode(const WeightMatrix<T>& b, const Vector<T>& x) {
  Matrix<T> col = x;
  return fourier_encode<T>(b, col);
}

template <typename T>
ModulationSignals<T> modulator_forward(const ModelParams<T>& params, const Matrix<T>& latents) {
  if (params.config.conditioning != Conditioning::Modulated) {
    throw ConfigError("modulator_forward requires a Modulated model");
  }
  if (latents.rows() != params.config.latent_dim) {
    throw DimensionError("modulator_forward: latent length vs d", params.config.latent_dim, latents.rows());
  }
  ModulationSignals<T> sig;
  const std::size_t layers = params.modulator.size();
  sig.preacts.reserve(layers);
  sig.hidden.reserve(layers);
  sig.preacts.push_back(linear_forward_batch(params.modulator[0], latents));
  sig.hidden.push_back(activate(sig.preacts.back(), Activation::ReLU));
  for (std::size_t j = 1; j < layers; ++j) {
    const Matrix<T> in = stack<T>(sig.hidden[j - 1], latents);
    sig.preacts.push_back(linear_forward_batch(params.modulator[j], in));
    sig.hidden.push_back(activate(sig.preacts.back(), Activation::ReLU));
  }
  return sig;
}

template <typename T>
ModulationSignals<T> modulator_forward(const ModelParams<T>& params, const Vector<T>& z) {
  const Matrix<T> col = z;
  return modulator_forward<T>(params, col);
}

template <typename T>
Matrix<T> synthesis_input(const ModelParams<T>& params, const Matrix<T>& coords, const Matrix<T>& latents,
                          std::span<const Index> groups) {
  const ModelConfig& cfg = params.config;
  if (coords.rows() != cfg.input_dim) throw DimensionError("coordinate dim vs n", cfg.input_dim, coords.rows());
  Matrix<T> encoded = cfg.input_encoding == InputEncoding::FourierFeatures ? fourier_encode<T>(params.fourier, coords)
                                                                            : coords;
  if (cfg.conditioning != Conditioning::Concat) return encoded;

  if (latents.rows() != cfg.latent_dim) throw DimensionError("latent length vs d", cfg.latent_dim, latents.rows());
  check_groups<T>(groups, coords.cols(), latents.cols());
  Matrix<T> in(encoded.rows() + cfg.latent_dim, coords.cols());
  in.topRows(encoded.rows()) = encoded;
  for (Index b = 0; b < coords.cols(); ++b) {
    in.col(b).tail(cfg.latent_dim) = latents.col(groups[static_cast<std::size_t>(b)]);
  }
  return in;
}

template <typename T>
ForwardTape<T> synthesizer_forward(const ModelParams<T>& params, Matrix<T> input, const ModulationSignals<T>* modulation,
                                   std::vector<Index> groups) {
  const bool modulated = params.config.conditioning == Conditioning::Modulated;
  const std::size_t K = params.synth.size();
  if (input.rows() != params.synth[0].in_dim()) {
    throw DimensionError("synthesizer_forward: input rows vs first layer in_dim", params.synth[0].in_dim(), input.rows());
  }
  if (modulated) {
    if (modulation == nullptr || modulation->hidden.size() != K + 1) {
      throw ConfigError("synthesizer_forward: Modulated mode requires alpha_1..alpha_K");
    }
    check_groups<T>(groups, input.cols(), modulation->groups());
    for (std::size_t i = 1; i <= K; ++i) {
      if (modulation->alpha(i).rows() != params.config.width) {
        throw DimensionError("alpha length vs synthesis width", params.config.width, modulation->alpha(i).rows());
      }
    }
  }

  ForwardTape<T> tape;
  tape.input = std::move(input);
  tape.groups = std::move(groups);
  tape.preacts.reserve(K);
  tape.activations.reserve(K);
  tape.hidden.reserve(K);

  const Matrix<T>* prev = &tape.input;
  for (std::size_t i = 0; i < K; ++i) {
    const DenseLayer<T>& layer = params.synth[i];
    tape.preacts.push_back(linear_forward_batch(layer, *prev));
    tape.activations.push_back(activate(tape.preacts.back(), layer.activation));
    Matrix<T> h = tape.activations.back();
    if (modulated) {
      const Matrix<T>& alpha = modulation->alpha(i + 1);
      for (Index b = 0; b < h.cols(); ++b) {
        h.col(b).array() *= alpha.col(tape.groups[static_cast<std::size_t>(b)]).array();
      }
    }
    tape.hidden.push_back(std::move(h));
    prev = &tape.hidden.back();
  }
  tape.output = linear_forward_batch(params.output, *prev);
  if (modulated) tape.modulation = *modulation;
  return tape;
}

template <typename T>
Vector<T> synthesizer_forward(const ModelParams<T>& params, const Vector<T>& x, std::span<const Vector<T>> alphas) {
  const Matrix<T> coords = x;
  const Matrix<T> input = synthesis_input<T>(params, coords, Matrix<T>(), {});
  if (params.config.conditioning != Conditioning::Modulated) {
    return synthesizer_forward<T>(params, input, nullptr, {0}).output.col(0);
  }
  if (alphas.size() != params.synth.size()) {
    throw DimensionError("synthesizer_forward: alpha count vs K", static_cast<long long>(params.synth.size()),
                         static_cast<long long>(alphas.size()));
  }
  ModulationSignals<T> sig;
  sig.hidden.emplace_back(Matrix<T>::Zero(params.config.width, 1));  // h'_0 slot, unused
  for (const auto& a : alphas) sig.hidden.emplace_back(a);
  return synthesizer_forward<T>(params, input, &sig, {0}).output.col(0);
}

template <typename T>
ForwardTape<T> model_forward(const ModelParams<T>& params, const Matrix<T>& coords, const Matrix<T>& latents,
                             std::span<const Index> groups) {
  const ModelConfig& cfg = params.config;
  std::vector<Index> g(groups.begin(), groups.end());
  if (!cfg.uses_latent()) {
    g = single_group(coords.cols());
    ForwardTape<T> tape = synthesizer_forward<T>(params, synthesis_input<T>(params, coords, latents, g), nullptr, g);
    return tape;
  }
  if (latents.rows() != cfg.latent_dim) throw DimensionError("latent length vs d", cfg.latent_dim, latents.rows());
  check_groups<T>(g, coords.cols(), latents.cols());

  ForwardTape<T> tape;
  if (cfg.conditioning == Conditioning::Modulated) {
    const ModulationSignals<T> sig = modulator_forward<T>(params, latents);
    tape = synthesizer_forward<T>(params, synthesis_input<T>(params, coords, latents, g), &sig, g);
  } else {
    tape = synthesizer_forward<T>(params, synthesis_input<T>(params, coords, latents, g), nullptr, g);
  }
  tape.latents = latents;
  return tape;
}

template <typename T>
Vector<T> model_forward(const ModelParams<T>& params, const Vector<T>& x, const Vector<T>& z) {
  const Matrix<T> coords = x;
  const Matrix<T> latents = params.config.uses_latent() ? Matrix<T>(z) : Matrix<T>();
  const std::vector<Index> g{0};
  return model_forward<T>(params, coords, latents, g).output.col(0);
}

template <typename T>
ModelGradients<T> model_backward(const ModelParams<T>& params, const ForwardTape<T>& tape, const Matrix<T>& upstream,
                                 bool latents_only) {
  const ModelConfig& cfg = params.config;
  const std::size_t K = params.synth.size();
  const Index B = tape.output.cols();
  if (tape.preacts.size() != K || tape.hidden.size() != K) {
    throw DimensionError("model_backward: tape layer count vs K", static_cast<long long>(K),
                         static_cast<long long>(tape.preacts.size()));
  }
  if (upstream.rows() != cfg.output_dim || upstream.cols() != B) {
    throw DimensionError("model_backward: upstream size vs output size", tape.output.size(), upstream.size());
  }
  const bool modulated = cfg.conditioning == Conditioning::Modulated;
  const Index G = cfg.uses_latent() ? tape.latents.cols() : 0;

  ModelGradients<T> grads;
  grads.params = ModelParams<T>::zeros(cfg);
  grads.params.fourier = params.fourier;  // not trained; carried for shape only
  grads.latents = Matrix<T>::Zero(cfg.latent_dim, G);

  // Output head.
  if (!latents_only) {
    grads.params.output.weights.noalias() = upstream * tape.hidden[K - 1].transpose();
    grads.params.output.bias = upstream.rowwise().sum();
  }
  Matrix<T> d_hidden = params.output.weights.transpose() * upstream;

  // d alpha_i accumulated per latent column; index 0 is the unused stem slot.
  std::vector<Matrix<T>> d_alpha;
  if (modulated) d_alpha.assign(K + 1, Matrix<T>::Zero(cfg.width, G));

  Matrix<T> d_pre;
  for (std::size_t li = K; li-- > 0;) {
    if (modulated) {
      const Matrix<T>& alpha = tape.modulation.alpha(li + 1);
      const Matrix<T>& act = tape.activations[li];
      for (Index b = 0; b < B; ++b) {
        const Index g = tape.groups[static_cast<std::size_t>(b)];
        d_alpha[li + 1].col(g).array() += d_hidden.col(b).array() * act.col(b).array();
        d_hidden.col(b).array() *= alpha.col(g).array();
      }
    }
    d_pre = activate_backward(tape.preacts[li], params.synth[li].activation, d_hidden);
    if (!latents_only) {
      const Matrix<T>& layer_in = li == 0 ? tape.input : tape.hidden[li - 1];
      grads.params.synth[li].weights.noalias() = d_pre * layer_in.transpose();
      grads.params.synth[li].bias = d_pre.rowwise().sum();
    }
    if (li > 0) d_hidden = params.synth[li].weights.transpose() * d_pre;
  }

  if (cfg.conditioning == Conditioning::Concat) {
    const Index d = cfg.latent_dim;
    const Matrix<T> d_z = params.synth[0].weights.rightCols(d).transpose() * d_pre;
    for (Index b = 0; b < B; ++b) grads.latents.col(tape.groups[static_cast<std::size_t>(b)]) += d_z.col(b);
  }

  if (modulated) {
    const ModulationSignals<T>& mod = tape.modulation;
    const Matrix<T>& z = tape.latents;
    std::vector<Matrix<T>>& d_h = d_alpha;  // d h'_j starts as d alpha_j
    for (std::size_t j = K; j >= 1; --j) {
      const Matrix<T> dp = activate_backward(mod.preacts[j], Activation::ReLU, d_h[j]);
      if (!latents_only) {
        grads.params.modulator[j].weights.noalias() = dp * stack<T>(mod.hidden[j - 1], z).transpose();
        grads.params.modulator[j].bias = dp.rowwise().sum();
      }
      const Matrix<T> d_in = params.modulator[j].weights.transpose() * dp;
      d_h[j - 1] += d_in.topRows(cfg.width);
      grads.latents += d_in.bottomRows(cfg.latent_dim);
    }
    const Matrix<T> dp0 = activate_backward(mod.preacts[0], Activation::ReLU, d_h[0]);
    if (!latents_only) {
      grads.params.modulator[0].weights.noalias() = dp0 * z.transpose();
      grads.params.modulator[0].bias = dp0.rowwise().sum();
    }
    grads.latents += params.modulator[0].weights.transpose() * dp0;
  }
  return grads;
}

template <typename T>
Vector<T> concat_first_layer_preact(const ModelParams<T>& params, const Vector<T>& x, const Vector<T>& z) {
  if (params.config.conditioning != Conditioning::Concat) {
    throw ConfigError("concat_first_layer_preact requires a Concat model");
  }
  const Matrix<T> coords = x;
  const Matrix<T> latents = z;
  const std::vector<Index> g{0};
  const Matrix<T> in = synthesis_input<T>(params, coords, latents, g);
  return linear_forward<T>(params.synth[0], in.col(0));
}

#define MODFIELD_INSTANTIATE_MODEL(T)                                                                           \
  template struct ModelParams<T>;                                                                               \
  template std::vector<T> pack_parameters<T>(const ModelParams<T>&);                                            \
  template void unpack_parameters<T>(std::span<const T>, ModelParams<T>&);                                      \
  template WeightMatrix<T> draw_fourier_matrix<T>(Index, Index, double, RngStream&);                            \
  template Matrix<T> fourier_encode<T>(const WeightMatrix<T>&, const Matrix<T>&);                               \
  template Vector<T> fourier_encode<T>(const WeightMatrix<T>&, const Vector<T>&);                               \
  template ModulationSignals<T> modulator_forward<T>(const ModelParams<T>&, const Matrix<T>&);                  \
  template ModulationSignals<T> modulator_forward<T>(const ModelParams<T>&, const Vector<T>&);                  \
  template Matrix<T> synthesis_input<T>(const ModelParams<T>&, const Matrix<T>&, const Matrix<T>&,              \
                                        std::span<const Index>);                                                \
  template ForwardTape<T> synthesizer_forward<T>(const ModelParams<T>&, Matrix<T>, const ModulationSignals<T>*, \
                                                 std::vector<Index>);                                           \
  template Vector<T> synthesizer_forward<T>(const ModelParams<T>&, const Vector<T>&, std::span<const Vector<T>>); \
  template ForwardTape<T> model_forward<T>(const ModelParams<T>&, const Matrix<T>&, const Matrix<T>&,           \
                                           std::span<const Index>);                                             \
  template Vector<T> model_forward<T>(const ModelParams<T>&, const Vector<T>&, const Vector<T>&);               \
  template ModelGradients<T> model_backward<T>(const ModelParams<T>&, const ForwardTape<T>&, const Matrix<T>&,    \
                                               bool);                                                          \
  template Vector<T> concat_first_layer_preact<T>(const ModelParams<T>&, const Vector<T>&, const Vector<T>&);

MODFIELD_INSTANTIATE_MODEL(float)
MODFIELD_INSTANTIATE_MODEL(double)

}  // namespace modfield
