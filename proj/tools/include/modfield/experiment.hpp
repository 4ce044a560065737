#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "modfield/model.hpp"
#include "modfield/perlin.hpp"
#include "modfield/sdf.hpp"
#include "modfield/signal.hpp"
#include "modfield/training.hpp"

namespace modfield::app {

enum class DataKind { Image, Perlin, Blobs, Sdf };

struct DataSource {
  DataKind kind = DataKind::Image;
  std::vector<std::filesystem::path> paths;  ///< Image
  PerlinSpec perlin;                         ///< Perlin
  BlobImageSpec blobs;                       ///< Blobs; image i uses seed + i
  int blob_count = 1;
  SdfShape shape;                            ///< Sdf
  Eigen::Index sdf_points = 50000;
  double near_fraction = 0.5;
  double near_sigma = 0.01;
  std::int64_t sdf_extent = 64;
  std::uint64_t sdf_seed = 0;
};

enum class TrainMode { Autodecoder, Autoencoder };

/// Everything a fit or compare run needs. Built from a JSON document;
/// command-line flags override individual fields afterwards.
struct ExperimentConfig {
  TrainMode mode = TrainMode::Autodecoder;
  DataSource data;
  ModelConfig model;  ///< input_dim and output_dim are filled in from the data
  TileShape tiles;
  TrainConfig train;
  EncoderConfig encoder;
  bool deterministic = true;
  std::filesystem::path out = "out";

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

/// Relative data paths resolve against `base`; the output directory stays
/// relative to the working directory.
ExperimentConfig parse_experiment(const nlohmann::json& doc, const std::filesystem::path& base);
ExperimentConfig load_experiment(const std::filesystem::path& path);

SdfShape parse_shape(const nlohmann::json& j);
SdfShape load_scene(const std::filesystem::path& path);

/// Signals in the training frame. SDF points are mapped to the grid frame.
std::vector<SampledSignal> load_signals(const DataSource& data);

}  // namespace modfield::app
