#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "modfield/signal.hpp"

namespace modfield {

/// Classic 2-D lattice gradient noise (Perlin's improved noise restricted
/// to two dimensions).
///
/// The permutation table is the identity 0..255 shuffled by Fisher-Yates
/// with RngStream(seed).below(i + 1) for i = 255 down to 1, then doubled to
/// 512 entries. The corner gradient is chosen by hash & 7 from
/// (1,1) (-1,1) (1,-1) (-1,-1) (1,0) (-1,0) (0,1) (0,-1), and the
/// interpolant is the quintic fade 6t^5 - 15t^4 + 10t^3. The result is
/// exactly zero at integer lattice points and lies in [-1, 1].
class PerlinNoise {
 public:
  explicit PerlinNoise(std::uint64_t seed);
  [[nodiscard]] double operator()(double x, double y) const;

 private:
  std::array<std::uint8_t, 512> perm_{};
};

/// Grid of noise patches whose frequencies grow from the top-left to the
/// bottom-right patch.
struct PerlinSpec {
  int rows = 4;
  int cols = 4;
  int patch_size = 32;            ///< pixels per patch side
  std::vector<double> freq_x;     ///< cycles per patch, raster order (rows * cols)
  std::vector<double> freq_y;
  std::uint64_t seed = 0;

  /// Geometric progression f_min .. f_max over the patches in raster order,
  /// the same frequency on both axes.
  static PerlinSpec sweep(int rows, int cols, int patch_size, double f_min, double f_max, std::uint64_t seed);

  /// Throws ConfigError unless sizes are positive and frequencies are
  /// positive and strictly increase along raster order.
  void validate() const;
};

/// Renders the patch grid as a dense single-channel image of size
/// (cols * patch) x (rows * patch). Patch k samples the noise at
/// (offset_k + fx * u, offset_k + fy * v) with u, v the pixel-centre
/// position inside the patch in [0, 1); offsets are integers, so lattice
/// points still map to 0.5. Values are 0.5 + 0.5 * noise, clamped to [0, 1].
SampledSignal perlin_grid(const PerlinSpec& spec);

/// Sample indices of perlin_grid(spec) that fall in the second half of the
/// patches in raster order (the higher-frequency half).
std::vector<Eigen::Index> high_frequency_samples(const PerlinSpec& spec);

}  // namespace modfield
