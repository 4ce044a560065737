#include "modfield/signal.hpp"

#include <algorithm>
#include <cmath>

#include "modfield/error.hpp"
#include "modfield/rng.hpp"

namespace modfield {

SampledSignal SampledSignal::dense_grid(std::vector<std::int64_t> extent, int m) {
  SampledSignal s;
  s.n = static_cast<int>(extent.size());
  s.m = m;
  s.coords = pixel_center_grid(extent, 1);
  s.values = Eigen::MatrixXd::Zero(m, s.coords.cols());
  s.extent = std::move(extent);
  s.dense = true;
  return s;
}

void SampledSignal::validate() const {
  if (n < 1 || m < 1) throw ConfigError("signal needs n >= 1 and m >= 1");
  if ((dense || !extent.empty()) && static_cast<int>(extent.size()) != n) {
    throw DimensionError("signal extent length vs n", n, static_cast<long long>(extent.size()));
  }
  if (coords.rows() != n) throw DimensionError("signal coordinate rows vs n", n, coords.rows());
  if (values.rows() != m) throw DimensionError("signal value rows vs m", m, values.rows());
  if (coords.cols() != values.cols()) throw DimensionError("signal coordinate count vs value count", coords.cols(), values.cols());
  if (dense) {
    std::int64_t total = 1;
    for (auto e : extent) total *= e;
    if (values.cols() != total) throw DimensionError("dense signal sample count vs product(extent)", total, values.cols());
  }
}

Eigen::MatrixXd pixel_center_grid(const std::vector<std::int64_t>& extent, int factor) {
  if (factor < 1) throw ConfigError("pixel_center_grid: factor must be >= 1");
  const int n = static_cast<int>(extent.size());
  std::vector<std::int64_t> fine(extent);
  std::int64_t total = 1;
  for (auto& e : fine) {
    e *= factor;
    total *= e;
  }
  Eigen::MatrixXd out(n, total);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n), 0);
  for (std::int64_t j = 0; j < total; ++j) {
    for (int a = 0; a < n; ++a) out(a, j) = (static_cast<double>(idx[a]) + 0.5) / factor;
    for (int a = 0; a < n; ++a) {
      if (++idx[a] < fine[a]) break;
      idx[a] = 0;
    }
  }
  return out;
}

SampledSignal bilinear_resample(const SampledSignal& signal, const std::vector<std::int64_t>& new_extent) {
  if (!signal.dense || signal.n != 2) throw ConfigError("bilinear_resample requires a dense 2-D signal");
  if (new_extent.size() != 2 || new_extent[0] < 1 || new_extent[1] < 1) {
    throw ConfigError("bilinear_resample: new extent must be two positive sizes");
  }
  const std::int64_t sw = signal.extent[0], sh = signal.extent[1];
  const std::int64_t dw = new_extent[0], dh = new_extent[1];
  SampledSignal out = SampledSignal::dense_grid(new_extent, signal.m);

  auto source_pos = [](std::int64_t k, std::int64_t src, std::int64_t dst, std::int64_t& i0, std::int64_t& i1,
                       double& frac) {
    // Target centre (k + 0.5) in target pixels -> source pixel-index space.
    const double u = (static_cast<double>(k) + 0.5) * static_cast<double>(src) / static_cast<double>(dst) - 0.5;
    const double clamped = std::clamp(u, 0.0, static_cast<double>(src - 1));
    i0 = static_cast<std::int64_t>(std::floor(clamped));
    i1 = std::min(i0 + 1, src - 1);
    frac = clamped - static_cast<double>(i0);
  };

  for (std::int64_t y = 0; y < dh; ++y) {
    std::int64_t y0, y1;
    double fy;
    source_pos(y, sh, dh, y0, y1, fy);
    for (std::int64_t x = 0; x < dw; ++x) {
      std::int64_t x0, x1;
      double fx;
      source_pos(x, sw, dw, x0, x1, fx);
      for (int c = 0; c < signal.m; ++c) {
        const double top = (1.0 - fx) * signal.at(x0, y0, c) + fx * signal.at(x1, y0, c);
        const double bottom = (1.0 - fx) * signal.at(x0, y1, c) + fx * signal.at(x1, y1, c);
        out.values(c, y * dw + x) = (1.0 - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

SampledSignal blob_image(const BlobImageSpec& spec) {
  if (spec.width < 1 || spec.height < 1 || spec.channels < 1 || spec.blobs < 0) {
    throw ConfigError("blob_image: sizes must be positive");
  }
  if (!(spec.width_min > 0.0) || spec.width_max < spec.width_min) throw ConfigError("blob_image: bad blob width range");
  RngStream rng(spec.seed);
  const int m = spec.channels;
  SampledSignal s = SampledSignal::dense_grid({spec.width, spec.height}, m);

  Eigen::VectorXd base(m), gx(m), gy(m);
  for (int c = 0; c < m; ++c) {
    base(c) = rng.uniform(0.3, 0.7);
    gx(c) = rng.uniform(-0.3, 0.3);
    gy(c) = rng.uniform(-0.3, 0.3);
  }
  struct Blob {
    double cx, cy, inv2s2;
    Eigen::VectorXd amp;
  };
  std::vector<Blob> blobs;
  const double side = static_cast<double>(std::max(spec.width, spec.height));
  for (int b = 0; b < spec.blobs; ++b) {
    Blob blob;
    blob.cx = rng.uniform(0.0, static_cast<double>(spec.width));
    blob.cy = rng.uniform(0.0, static_cast<double>(spec.height));
    const double sigma = rng.uniform(spec.width_min, spec.width_max) * side;
    blob.inv2s2 = 1.0 / (2.0 * sigma * sigma);
    blob.amp.resize(m);
    for (int c = 0; c < m; ++c) blob.amp(c) = rng.uniform(-0.5, 0.5);
    blobs.push_back(std::move(blob));
  }
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    const double x = s.coords(0, j), y = s.coords(1, j);
    Eigen::VectorXd v = base + gx * (x / spec.width - 0.5) + gy * (y / spec.height - 0.5);
    for (const Blob& b : blobs) {
      const double r2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
      v += b.amp * std::exp(-r2 * b.inv2s2);
    }
    s.values.col(j) = v.cwiseMax(0.0).cwiseMin(1.0);
  }
  return s;
}

}  // namespace modfield
