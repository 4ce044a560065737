#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "modfield/dense.hpp"
#include "modfield/model.hpp"

namespace modfield {

inline constexpr int kMaxTileDims = 4;

using GridIndex = std::array<std::int64_t, kMaxTileDims>;

/// One tile of a grid: multi-index, footprint origin and row-major linear index.
struct TileRef {
  GridIndex index{};
  GridIndex origin{};
  std::int64_t linear = 0;

  friend bool operator==(const TileRef&, const TileRef&) = default;
};

/// Regular grid of overlapping tiles over an n-dimensional sample domain.
///
/// Along each axis the domain is [0, extent]. Tile i covers the half-open
/// footprint [origin_i, origin_i + t) with origin_i = min(i * s, extent - t),
/// stride s = t - o, and ceil((extent - o) / s) tiles. The last tile is clamped
/// to end exactly at the extent and its footprint is closed there, so every
/// point of the domain is covered.
///
/// Linear tile indices are row-major with axis 0 varying fastest (for images:
/// x fastest, then y), matching the dense sample layout of SampledSignal.
class TileGrid {
 public:
  TileGrid() = default;
  TileGrid(std::vector<std::int64_t> extent, std::vector<std::int64_t> tile_size, std::vector<std::int64_t> overlap);

  /// Same tile size and overlap on every axis.
  static TileGrid uniform(std::vector<std::int64_t> extent, std::int64_t tile_size, std::int64_t overlap);

  [[nodiscard]] int dims() const { return static_cast<int>(extent_.size()); }
  [[nodiscard]] const std::vector<std::int64_t>& extent() const { return extent_; }
  [[nodiscard]] const std::vector<std::int64_t>& tile_size() const { return tile_; }
  [[nodiscard]] const std::vector<std::int64_t>& overlap() const { return overlap_; }
  [[nodiscard]] std::int64_t stride(int axis) const { return tile_[axis] - overlap_[axis]; }
  [[nodiscard]] std::int64_t tiles_along(int axis) const { return counts_[axis]; }
  [[nodiscard]] std::int64_t tile_count() const { return total_; }
  [[nodiscard]] std::int64_t origin(int axis, std::int64_t i) const;
  /// Number of samples in one tile footprint: product of tile sizes.
  [[nodiscard]] std::int64_t samples_per_tile() const;

  [[nodiscard]] TileRef tile(std::int64_t linear) const;
  [[nodiscard]] TileRef tile(std::span<const std::int64_t> index) const;

  [[nodiscard]] bool contains(std::span<const double> p) const;

  friend bool operator==(const TileGrid&, const TileGrid&) = default;

 private:
  std::vector<std::int64_t> extent_, tile_, overlap_, counts_;
  std::int64_t total_ = 0;
};

/// All tiles whose footprint holds p (between 1 and 2^n entries for grids
/// without clamping overlap). Throws ConfigError if p is outside the domain.
std::vector<TileRef> tiles_containing(const TileGrid& grid, std::span<const double> p);

/// Local coordinate (p - origin) / t in [0, 1]^n. The closed footprint is
/// accepted; anything outside throws ConfigError.
std::vector<double> to_local(const TileGrid& grid, const TileRef& tile, std::span<const double> p);

/// Inverse of to_local.
std::vector<double> to_global(const TileGrid& grid, const TileRef& tile, std::span<const double> x);

/// n-linear blend weights of the covering tiles.
///
/// Per axis, a tile's weight is 1 where no neighbour overlaps it and falls
/// linearly to 0 across each overlap band, reaching 0 at the footprint edge:
///
///     left  = (p - origin_i) / (end_{i-1} - origin_i)        if tile i-1 exists
///     right = (end_i - p)    / (end_i - origin_{i+1})        if tile i+1 exists
///     w_axis = clamp(min(left, right), 0, 1)
///
/// The tile weight is the product over axes, and weights are renormalized
/// to sum to 1. Inside an interior 2^n junction this is exact n-linear
/// interpolation; at the domain boundary the missing neighbour has ramp 1.
std::vector<std::pair<TileRef, double>> blend_weights(const TileGrid& grid, std::span<const double> p);

/// One latent code per tile, stored as columns of a [d x tile_count] matrix
/// (so the codes are contiguous in memory, tile after tile).
struct Codebook {
  TileGrid grid;
  Matrix<float> codes;

  Codebook() = default;
  Codebook(TileGrid g, Index latent_dim);

  [[nodiscard]] Index latent_dim() const { return codes.rows(); }
  /// Throws DimensionError if the code count disagrees with the grid.
  void validate() const;

  friend bool operator==(const Codebook& a, const Codebook& b) {
    return a.grid == b.grid && a.codes.rows() == b.codes.rows() && a.codes.cols() == b.codes.cols() &&
           a.codes == b.codes;
  }
};

/// sum_k w_k f(to_local(tile_k, p); z_k) at one point.
Vector<float> blended_decode(const ModelParams<float>& params, const Codebook& codebook, std::span<const double> p);

/// Batched blended decode of points [n x N]; returns [m x N]. Evaluations are
/// grouped by tile and each point accumulates its contributions in increasing
/// tile order.
Matrix<float> blended_decode_points(const ModelParams<float>& params, const Codebook& codebook,
                                    const Eigen::MatrixXd& points);

}  // namespace modfield
