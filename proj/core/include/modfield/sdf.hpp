#pragma once

#include <functional>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "modfield/model.hpp"
#include "modfield/rng.hpp"
#include "modfield/signal.hpp"
#include "modfield/tiling.hpp"

namespace modfield {

using Vec3 = Eigen::Vector3d;

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

struct Box {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Ones();
};

/// Ring in the xz-plane around `center`, symmetric about the y axis.
struct Torus {
  Vec3 center = Vec3::Zero();
  double major_radius = 0.5;
  double minor_radius = 0.1;
};

struct SdfShape;

/// min over children: exact when the children are disjoint, a lower bound
/// on the true distance where they overlap.
struct SdfUnion {
  std::vector<SdfShape> children;
};

struct SdfShape {
  std::variant<Sphere, Box, Torus, SdfUnion> kind;

  /// Throws ConfigError on non-positive radii/extents or an empty union.
  void validate() const;
};

/// Signed distance: negative inside, zero on the surface, positive outside.
double sdf_eval(const SdfShape& shape, const Vec3& p);

/// Training points for an SDF, in world coordinates.
///
/// round(count * near_fraction) points are taken near the surface: a
/// uniform point of the unit ball is projected onto the surface by Newton
/// steps along the (finite-difference) SDF gradient, then jittered by
/// N(0, near_sigma^2) per axis. The rest are uniform in the unit ball.
/// Values are sdf_eval at the final positions. The returned signal has
/// n = 3, m = 1, an empty extent and dense = false.
SampledSignal sample_sdf_points(const SdfShape& shape, Eigen::Index count, double near_fraction, double near_sigma,
                                RngStream& rng);

/// Maps world coordinates in [-1, 1]^3 to the grid frame [0, extent]^3.
SampledSignal sdf_to_grid_frame(const SampledSignal& world, std::int64_t extent);
Vec3 world_to_grid(const Vec3& p, std::int64_t extent);

struct SdfGridMetrics {
  double mean_abs_error = 0.0;
  double sign_agreement = 0.0;  ///< fraction of cells where (f < 0) == (sdf < 0)
};

/// Compares a field with the analytic SDF on the resolution^3 cell centres
/// of [-1, 1]^3.
SdfGridMetrics sdf_grid_metrics(const std::function<double(const Vec3&)>& field, const SdfShape& shape,
                                int resolution);

/// Learned field version. With a codebook the field is the blended decode
/// on the codebook's grid; without one, the model is evaluated directly at
/// x = (p + 1) / 2 in [0, 1]^3 (unconditioned models only).
SdfGridMetrics sdf_grid_metrics(const ModelParams<float>& params, const Codebook* codebook, const SdfShape& shape,
                                int resolution);

}  // namespace modfield
