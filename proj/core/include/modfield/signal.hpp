#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "modfield/error.hpp"

namespace modfield {

/// Samples of a signal y in R^m taken at coordinates x in R^n.
///
/// Coordinates live in the global sample frame: along each axis the domain
/// is [0, extent], and pixel k has its centre at k + 0.5. A dense signal has
/// exactly one sample per pixel, ordered with axis 0 varying fastest (for an
/// image: x fastest, rows top to bottom).
struct SampledSignal {
  int n = 0;
  int m = 0;
  std::vector<std::int64_t> extent;
  Eigen::MatrixXd coords;  ///< [n x N]
  Eigen::MatrixXd values;  ///< [m x N]
  bool dense = false;

  [[nodiscard]] Eigen::Index size() const { return values.cols(); }

  /// Dense signal with coordinates at pixel centres and zero values.
  static SampledSignal dense_grid(std::vector<std::int64_t> extent, int m);

  /// Throws DimensionError if the arrays disagree with n, m or the extent.
  void validate() const;

  /// Value channel c of a dense 2-D signal at pixel (x, y).
  [[nodiscard]] double at(std::int64_t x, std::int64_t y, int c = 0) const {
    return values(c, y * extent[0] + x);
  }
};

/// Centres of a (factor * extent) grid expressed in the original frame:
/// coordinate k maps to (k + 0.5) / factor along each axis. Columns are
/// ordered axis 0 fastest.
Eigen::MatrixXd pixel_center_grid(const std::vector<std::int64_t>& extent, int factor);

/// Bilinear interpolation of a dense 2-D signal at the pixel centres of a
/// new extent. Source samples are treated as point values at their pixel
/// centres; lookups beyond the outermost centres clamp to the border.
SampledSignal bilinear_resample(const SampledSignal& signal, const std::vector<std::int64_t>& new_extent);

/// Procedural image family: a random linear colour gradient plus `blobs`
/// Gaussian bumps with random centre, width in [width_min, width_max]
/// (fractions of the image side) and signed colour amplitude. Values are
/// clamped to [0, 1]. Images drawn with different seeds come from the same
/// distribution.
struct BlobImageSpec {
  std::int64_t width = 64;
  std::int64_t height = 64;
  int channels = 3;
  int blobs = 6;
  double width_min = 0.08;
  double width_max = 0.25;
  std::uint64_t seed = 0;
};

SampledSignal blob_image(const BlobImageSpec& spec);

}  // namespace modfield
