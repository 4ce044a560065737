#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "modfield/dense.hpp"
#include "modfield/rng.hpp"

namespace modfield {

/// How the latent code enters the network.
enum class Conditioning {
  Modulated,  ///< ReLU modulator produces per-layer amplitudes for the sine layers.
  Concat,     ///< [x, z] is fed as one input vector.
  None,       ///< Plain coordinate network; latents are ignored.
};

enum class InputEncoding {
  Raw,              ///< coordinates as-is
  FourierFeatures,  ///< concat(cos(2 pi B x), sin(2 pi B x)), B ~ N(0, sigma^2)
};

std::string_view to_string(Conditioning c);
std::string_view to_string(InputEncoding e);
Conditioning conditioning_from_string(std::string_view name);
InputEncoding input_encoding_from_string(std::string_view name);

struct ModelConfig {
  int input_dim = 2;      ///< n
  int output_dim = 3;     ///< m
  int latent_dim = 256;   ///< d
  int hidden_layers = 3;  ///< K
  int width = 256;
  double omega0 = 30.0;
  Conditioning conditioning = Conditioning::Modulated;
  Activation synth_activation = Activation::Sine;
  InputEncoding input_encoding = InputEncoding::Raw;
  double fourier_sigma = 10.0;
  int fourier_features = 128;

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;

  [[nodiscard]] bool uses_latent() const { return conditioning != Conditioning::None; }
  [[nodiscard]] int encoded_input_dim() const {
    return input_encoding == InputEncoding::FourierFeatures ? 2 * fourier_features : input_dim;
  }
  /// Input width of the first synthesis layer.
  [[nodiscard]] int synth_input_dim() const {
    return encoded_input_dim() + (conditioning == Conditioning::Concat ? latent_dim : 0);
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// All trainable state of the conditional field, plus the fixed Fourier matrix.
///
/// Storage order of trainable blocks (used by pack_parameters, the optimizer
/// and the checkpoint blob): synthesis layers 1..K, modulator layers 0..K,
/// output layer; each as row-major weights followed by bias.
template <typename T>
struct ModelParams {
  ModelConfig config;
  std::vector<DenseLayer<T>> synth;      ///< K hidden layers
  std::vector<DenseLayer<T>> modulator;  ///< stem + K layers; empty unless Modulated
  DenseLayer<T> output;                  ///< linear head, width -> m, never modulated
  WeightMatrix<T> fourier;               ///< [features x n]; empty unless FourierFeatures

  /// Random initialization. Draw order: Fourier matrix, synthesis layers,
  /// output layer, modulator layers.
  static ModelParams init(const ModelConfig& config, RngStream& rng);
  /// Same shapes, all values zero (gradient accumulator).
  static ModelParams zeros(const ModelConfig& config);

  /// Throws DimensionError if the layer chain is inconsistent with config.
  void validate() const;

  [[nodiscard]] std::vector<std::span<T>> blocks();
  [[nodiscard]] std::vector<std::span<const T>> blocks() const;
  [[nodiscard]] Index parameter_count() const;

  template <typename U>
  [[nodiscard]] ModelParams<U> cast() const {
    ModelParams<U> out;
    out.config = config;
    for (const auto& l : synth) out.synth.push_back(l.template cast<U>());
    for (const auto& l : modulator) out.modulator.push_back(l.template cast<U>());
    out.output = output.template cast<U>();
    out.fourier = fourier.template cast<U>();
    return out;
  }
};

template <typename T>
std::vector<T> pack_parameters(const ModelParams<T>& params);
template <typename T>
void unpack_parameters(std::span<const T> flat, ModelParams<T>& params);

/// Modulator outputs for G latent codes (one column each).
template <typename T>
struct ModulationSignals {
  std::vector<Matrix<T>> preacts;  ///< stem then layers 1..K, [width x G]
  std::vector<Matrix<T>> hidden;   ///< h'_0 .. h'_K

  /// alpha_i for i in 1..K (alpha_i = h'_i); h'_0 is not a modulation signal.
  [[nodiscard]] const Matrix<T>& alpha(std::size_t i) const { return hidden.at(i); }
  [[nodiscard]] Index groups() const { return hidden.empty() ? 0 : hidden.front().cols(); }
};

/// Cached intermediates of one batched forward pass.
template <typename T>
struct ForwardTape {
  Matrix<T> input;                     ///< synthesis input (encoded coords, plus z for Concat)
  Matrix<T> latents;                   ///< [d x G], empty for None
  std::vector<Index> groups;           ///< latent column of every sample
  std::vector<Matrix<T>> preacts;      ///< K synthesis pre-activations
  std::vector<Matrix<T>> activations;  ///< act(preacts)
  std::vector<Matrix<T>> hidden;       ///< h_i = alpha_i * act (or act when unmodulated)
  Matrix<T> output;                    ///< [m x B]
  ModulationSignals<T> modulation;     ///< empty unless Modulated
};

template <typename T>
struct ModelGradients {
  ModelParams<T> params;
  Matrix<T> latents;  ///< [d x G]
};

/// Fourier matrix with entries ~ N(0, sigma^2), drawn row-major.
template <typename T>
WeightMatrix<T> draw_fourier_matrix(Index features, Index input_dim, double sigma, RngStream& rng);

/// concat(cos(2 pi B x), sin(2 pi B x)) per column of coords.
template <typename T>
Matrix<T> fourier_encode(const WeightMatrix<T>& b, const Matrix<T>& coords);
template <typename T>
Vector<T> fourier_encode(const WeightMatrix<T>& b, const Vector<T>& x);

/// Batched modulator: one latent per column.
template <typename T>
ModulationSignals<T> modulator_forward(const ModelParams<T>& params, const Matrix<T>& latents);
template <typename T>
ModulationSignals<T> modulator_forward(const ModelParams<T>& params, const Vector<T>& z);

/// Encoded coordinates, with each sample's latent appended in Concat mode.
template <typename T>
Matrix<T> synthesis_input(const ModelParams<T>& params, const Matrix<T>& coords, const Matrix<T>& latents,
                          std::span<const Index> groups);

/// Runs the K synthesis layers and the output head over a prepared input.
/// `modulation` is required in Modulated mode and ignored otherwise.
template <typename T>
ForwardTape<T> synthesizer_forward(const ModelParams<T>& params, Matrix<T> input,
                                   const ModulationSignals<T>* modulation, std::vector<Index> groups);

/// Single sample; alphas holds alpha_1..alpha_K (ignored unless Modulated).
template <typename T>
Vector<T> synthesizer_forward(const ModelParams<T>& params, const Vector<T>& x, std::span<const Vector<T>> alphas);

/// Full conditional field on a batch. coords [n x B]; latents [d x G];
/// groups[b] selects the latent column for sample b.
template <typename T>
ForwardTape<T> model_forward(const ModelParams<T>& params, const Matrix<T>& coords, const Matrix<T>& latents,
                             std::span<const Index> groups);

/// f(x; z) for one sample.
template <typename T>
Vector<T> model_forward(const ModelParams<T>& params, const Vector<T>& x, const Vector<T>& z);

/// Reverse pass given dL/dy [m x B]. Summation over samples runs in column
/// order, so results are reproducible bit for bit. With latents_only the
/// parameter gradients are left at zero and only dL/dz is computed.
template <typename T>
ModelGradients<T> model_backward(const ModelParams<T>& params, const ForwardTape<T>& tape, const Matrix<T>& upstream,
                                 bool latents_only = false);

/// First-layer pre-activation w_x x + w_z z + b of a Concat model.
template <typename T>
Vector<T> concat_first_layer_preact(const ModelParams<T>& params, const Vector<T>& x, const Vector<T>& z);

/// Single-group convenience: all B samples share latents.col(0).
inline std::vector<Index> single_group(Index batch) { return std::vector<Index>(static_cast<std::size_t>(batch), 0); }

}  // namespace modfield
