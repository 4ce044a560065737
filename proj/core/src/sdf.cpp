#include "modfield/sdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "modfield/error.hpp"

namespace modfield {

namespace {

constexpr int kMaxProjectionSteps = 32;
constexpr int kMaxProjectionRetries = 64;

Vec3 uniform_in_ball(RngStream& rng) {
  for (;;) {
    Vec3 p(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    if (p.squaredNorm() <= 1.0) return p;
  }
}

Vec3 gradient(const SdfShape& shape, const Vec3& p) {
  constexpr double h = 1e-6;
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 lo = p, hi = p;
    lo[a] -= h;
    hi[a] += h;
    g[a] = (sdf_eval(shape, hi) - sdf_eval(shape, lo)) / (2.0 * h);
  }
  return g;
}

bool project_to_surface(const SdfShape& shape, Vec3& p) {
  for (int step = 0; step < kMaxProjectionSteps; ++step) {
    const double d = sdf_eval(shape, p);
    if (std::abs(d) < 1e-9) return true;
    const Vec3 g = gradient(shape, p);
    const double norm = g.norm();
    if (!(norm > 1e-12)) return false;
    p -= d * g / norm;
  }
  return std::abs(sdf_eval(shape, p)) < 1e-7;
}

}  // namespace

void SdfShape::validate() const {
  std::visit(
      [](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Sphere>) {
          if (!(s.radius > 0.0)) throw ConfigError("sphere radius must be > 0");
        } else if constexpr (std::is_same_v<S, Box>) {
          if (!(s.half_extents.minCoeff() > 0.0)) throw ConfigError("box half extents must be > 0");
        } else if constexpr (std::is_same_v<S, Torus>) {
          if (!(s.major_radius > 0.0 && s.minor_radius > 0.0)) throw ConfigError("torus radii must be > 0");
        } else {
          if (s.children.empty()) throw ConfigError("union needs at least one child");
          for (const auto& c : s.children) c.validate();
        }
      },
      kind);
}

double sdf_eval(const SdfShape& shape, const Vec3& p) {
  return std::visit(
      [&p](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Sphere>) {
          return (p - s.center).norm() - s.radius;
        } else if constexpr (std::is_same_v<S, Box>) {
          const Vec3 q = (p - s.center).cwiseAbs() - s.half_extents;
          return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
        } else if constexpr (std::is_same_v<S, Torus>) {
          const Vec3 r = p - s.center;
          const double ring = std::hypot(r.x(), r.z()) - s.major_radius;
          return std::hypot(ring, r.y()) - s.minor_radius;
        } else {
          double d = std::numeric_limits<double>::infinity();
          for (const auto& c : s.children) d = std::min(d, sdf_eval(c, p));
          return d;
        }
      },
      shape.kind);
}

SampledSignal sample_sdf_points(const SdfShape& shape, Eigen::Index count, double near_fraction, double near_sigma,
                                RngStream& rng) {
  shape.validate();
  if (count < 0) throw ConfigError("sample_sdf_points: count must be >= 0");
  if (!(near_fraction >= 0.0 && near_fraction <= 1.0)) throw ConfigError("near_fraction must be in [0, 1]");
  if (!(near_sigma >= 0.0)) throw ConfigError("near_sigma must be >= 0");

  SampledSignal s;
  s.n = 3;
  s.m = 1;
  s.coords.resize(3, count);
  s.values.resize(1, count);
  const auto near = static_cast<Eigen::Index>(std::llround(static_cast<double>(count) * near_fraction));

  for (Eigen::Index i = 0; i < count; ++i) {
    Vec3 p;
    if (i < near) {
      bool ok = false;
      for (int attempt = 0; attempt < kMaxProjectionRetries && !ok; ++attempt) {
        p = uniform_in_ball(rng);
        ok = project_to_surface(shape, p);
      }
      if (!ok) throw NumericalError("sample_sdf_points: surface projection did not converge");
      for (int a = 0; a < 3; ++a) p[a] += near_sigma * rng.normal();
    } else {
      p = uniform_in_ball(rng);
    }
    s.coords.col(i) = p;
    s.values(0, i) = sdf_eval(shape, p);
  }
  return s;
}

Vec3 world_to_grid(const Vec3& p, std::int64_t extent) {
  return (p.array() + 1.0) * (0.5 * static_cast<double>(extent));
}

SampledSignal sdf_to_grid_frame(const SampledSignal& world, std::int64_t extent) {
  if (world.n != 3) throw DimensionError("sdf_to_grid_frame: signal n", 3, world.n);
  if (extent < 1) throw ConfigError("sdf_to_grid_frame: extent must be >= 1");
  SampledSignal out = world;
  out.extent = {extent, extent, extent};
  out.coords = (world.coords.array() + 1.0) * (0.5 * static_cast<double>(extent));
  const double lo = out.coords.minCoeff();
  const double hi = out.coords.maxCoeff();
  if (lo < 0.0 || hi > static_cast<double>(extent)) {
    throw ConfigError("sdf_to_grid_frame: sample points fall outside [-1, 1]^3");
  }
  return out;
}

SdfGridMetrics sdf_grid_metrics(const std::function<double(const Vec3&)>& field, const SdfShape& shape,
                                int resolution) {
  if (resolution < 2) throw ConfigError("sdf_grid_metrics: resolution must be >= 2");
  shape.validate();
  const double cell = 2.0 / resolution;
  double abs_sum = 0.0;
  long long agree = 0;
  for (int k = 0; k < resolution; ++k) {
    for (int j = 0; j < resolution; ++j) {
      for (int i = 0; i < resolution; ++i) {
        const Vec3 p(-1.0 + (i + 0.5) * cell, -1.0 + (j + 0.5) * cell, -1.0 + (k + 0.5) * cell);
        const double truth = sdf_eval(shape, p);
        const double f = field(p);
        abs_sum += std::abs(f - truth);
        agree += (f < 0.0) == (truth < 0.0) ? 1 : 0;
      }
    }
  }
  const double total = static_cast<double>(resolution) * resolution * resolution;
  return {abs_sum / total, static_cast<double>(agree) / total};
}

SdfGridMetrics sdf_grid_metrics(const ModelParams<float>& params, const Codebook* codebook, const SdfShape& shape,
                                int resolution) {
  if (resolution < 2) throw ConfigError("sdf_grid_metrics: resolution must be >= 2");
  if (params.config.input_dim != 3 || params.config.output_dim != 1) {
    throw DimensionError("sdf_grid_metrics: model must map R^3 -> R^1; n", 3, params.config.input_dim);
  }
  const Eigen::Index total = static_cast<Eigen::Index>(resolution) * resolution * resolution;
  Eigen::MatrixXd world(3, total);
  const double cell = 2.0 / resolution;
  Eigen::Index col = 0;
  for (int k = 0; k < resolution; ++k) {
    for (int j = 0; j < resolution; ++j) {
      for (int i = 0; i < resolution; ++i, ++col) {
        world.col(col) = Vec3(-1.0 + (i + 0.5) * cell, -1.0 + (j + 0.5) * cell, -1.0 + (k + 0.5) * cell);
      }
    }
  }

  Matrix<float> values;
  if (codebook != nullptr) {
    const auto& ext = codebook->grid.extent();
    if (ext.size() != 3) throw DimensionError("sdf_grid_metrics: codebook grid dims", 3, static_cast<long long>(ext.size()));
    Eigen::MatrixXd pts(3, total);
    for (int a = 0; a < 3; ++a) pts.row(a) = (world.row(a).array() + 1.0) * (0.5 * static_cast<double>(ext[a]));
    values = blended_decode_points(params, *codebook, pts);
  } else {
    if (params.config.uses_latent()) {
      throw ConfigError("sdf_grid_metrics: a conditioned model needs a codebook");
    }
    const Matrix<float> x = ((world.array() + 1.0) * 0.5).cast<float>();
    values = model_forward<float>(params, x, Matrix<float>(), single_group(total)).output;
  }

  // The callback is invoked in the same cell order used to build `world`.
  Eigen::Index idx = 0;
  return sdf_grid_metrics([&](const Vec3&) { return static_cast<double>(values(0, idx++)); }, shape, resolution);
}

}  // namespace modfield
