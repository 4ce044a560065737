#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "modfield/encoder.hpp"
#include "modfield/model.hpp"
#include "modfield/tiling.hpp"
#include "modfield/training.hpp"

namespace modfield {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kCodebookVersion = 1;
inline constexpr std::uint32_t kPointCloudVersion = 1;

/// Trained field plus the metadata needed to reuse it.
struct Checkpoint {
  ModelParams<float> params;
  std::optional<TileEncoderParams<float>> encoder;
  TileShape tiles;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
};

/// Checkpoint file layout:
///
///     "MODF"                  4 bytes
///     version                 u32 little-endian
///     header length L         u64 little-endian
///     header                  L bytes of UTF-8 JSON (keys sorted, compact)
///     blob                    f32 little-endian
///
/// The header holds the model config, seed, step, tiling and the name and
/// [rows, cols] shape of every blob block, in blob order: synthesis layers,
/// modulator layers, output layer (each weights row-major then bias), the
/// Fourier matrix if present, then the encoder layers if present.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& name = "<memory>");
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Codebook file layout (all little-endian):
///
///     "MODZ", version u32, n u32, d u32,
///     n x (extent i64, tile i64, overlap i64),
///     tile_count * d f32, code after code in linear tile order
std::string encode_codebook(const Codebook& cb);
Codebook decode_codebook(const std::string& bytes, const std::string& name = "<memory>");
void save_codebook(const Codebook& cb, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

/// Point cloud: "MODP", version u32, count u64, count x (x, y, z) f32.
std::string encode_point_cloud(const Eigen::MatrixXd& points);
Eigen::MatrixXd decode_point_cloud(const std::string& bytes, const std::string& name = "<memory>");
void save_point_cloud(const Eigen::MatrixXd& points, const std::filesystem::path& path);
Eigen::MatrixXd load_point_cloud(const std::filesystem::path& path);

}  // namespace modfield
