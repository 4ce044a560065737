#include "modfield/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace modfield {

namespace {

std::string point_string(std::span<const double> p) {
  std::string s = "(";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(p[i]);
  }
  return s + ")";
}

/// Tiles along one axis whose footprint holds coordinate v.
void axis_candidates(const TileGrid& grid, int axis, double v, std::vector<std::int64_t>& out) {
  out.clear();
  const std::int64_t t = grid.tile_size()[axis];
  const std::int64_t s = grid.stride(axis);
  const std::int64_t count = grid.tiles_along(axis);
  const double extent = static_cast<double>(grid.extent()[axis]);
  const std::int64_t lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((v - t) / s)) - 1);
  for (std::int64_t i = lo; i < count; ++i) {
    const double a = static_cast<double>(grid.origin(axis, i));
    if (a > v) break;
    const double end = a + static_cast<double>(t);
    if (v < end || (i == count - 1 && v == extent)) out.push_back(i);
  }
}

/// Linear ramp weight of tile i along one axis.
double axis_ramp(const TileGrid& grid, int axis, std::int64_t i, double v) {
  const double t = static_cast<double>(grid.tile_size()[axis]);
  const double a = static_cast<double>(grid.origin(axis, i));
  const double end = a + t;
  double w = 1.0;
  if (i > 0) {
    const double band = static_cast<double>(grid.origin(axis, i - 1)) + t - a;
    if (band > 0.0) w = std::min(w, (v - a) / band);
  }
  if (i + 1 < grid.tiles_along(axis)) {
    const double band = end - static_cast<double>(grid.origin(axis, i + 1));
    if (band > 0.0) w = std::min(w, (end - v) / band);
  }
  return std::clamp(w, 0.0, 1.0);
}

}  // namespace

TileGrid::TileGrid(std::vector<std::int64_t> extent, std::vector<std::int64_t> tile_size,
                   std::vector<std::int64_t> overlap)
    : extent_(std::move(extent)), tile_(std::move(tile_size)), overlap_(std::move(overlap)) {
  const std::size_t n = extent_.size();
  if (n < 1 || n > static_cast<std::size_t>(kMaxTileDims)) {
    throw ConfigError("tile grid dimension must be in 1.." + std::to_string(kMaxTileDims));
  }
  if (tile_.size() != n || overlap_.size() != n) {
    throw DimensionError("tile grid: tile_size/overlap length vs extent length", static_cast<long long>(n),
                         static_cast<long long>(tile_.size() != n ? tile_.size() : overlap_.size()));
  }
  counts_.resize(n);
  total_ = 1;
  for (std::size_t a = 0; a < n; ++a) {
    if (tile_[a] < 1) throw ConfigError("tile size must be >= 1");
    if (overlap_[a] < 0 || overlap_[a] >= tile_[a]) throw ConfigError("overlap must satisfy 0 <= overlap < tile size");
    if (extent_[a] < tile_[a]) {
      throw ConfigError("tile size " + std::to_string(tile_[a]) + " exceeds signal extent " + std::to_string(extent_[a]));
    }
    const std::int64_t s = tile_[a] - overlap_[a];
    counts_[a] = (extent_[a] - overlap_[a] + s - 1) / s;
    total_ *= counts_[a];
  }
}

TileGrid TileGrid::uniform(std::vector<std::int64_t> extent, std::int64_t tile_size, std::int64_t overlap) {
  const std::size_t n = extent.size();
  return TileGrid(std::move(extent), std::vector<std::int64_t>(n, tile_size), std::vector<std::int64_t>(n, overlap));
}

std::int64_t TileGrid::origin(int axis, std::int64_t i) const {
  return std::min(i * stride(axis), extent_[axis] - tile_[axis]);
}

std::int64_t TileGrid::samples_per_tile() const {
  std::int64_t s = 1;
  for (const auto t : tile_) s *= t;
  return s;
}

TileRef TileGrid::tile(std::int64_t linear) const {
  if (linear < 0 || linear >= total_) throw DimensionError("tile index out of range; tile count", total_, linear);
  TileRef ref;
  ref.linear = linear;
  std::int64_t rest = linear;
  for (int a = 0; a < dims(); ++a) {
    ref.index[a] = rest % counts_[a];
    rest /= counts_[a];
    ref.origin[a] = origin(a, ref.index[a]);
  }
  return ref;
}

TileRef TileGrid::tile(std::span<const std::int64_t> index) const {
  if (static_cast<int>(index.size()) != dims()) {
    throw DimensionError("tile multi-index length", dims(), static_cast<long long>(index.size()));
  }
  std::int64_t linear = 0;
  for (int a = dims() - 1; a >= 0; --a) {
    if (index[a] < 0 || index[a] >= counts_[a]) throw DimensionError("tile index along axis", counts_[a], index[a]);
    linear = linear * counts_[a] + index[a];
  }
  return tile(linear);
}

bool TileGrid::contains(std::span<const double> p) const {
  if (static_cast<int>(p.size()) != dims()) return false;
  for (int a = 0; a < dims(); ++a) {
    if (!(p[a] >= 0.0 && p[a] <= static_cast<double>(extent_[a]))) return false;
  }
  return true;
}

std::vector<TileRef> tiles_containing(const TileGrid& grid, std::span<const double> p) {
  if (static_cast<int>(p.size()) != grid.dims()) {
    throw DimensionError("tiles_containing: point dim vs grid dim", grid.dims(), static_cast<long long>(p.size()));
  }
  if (!grid.contains(p)) throw ConfigError("point " + point_string(p) + " lies outside the tile grid domain");

  std::array<std::vector<std::int64_t>, kMaxTileDims> per_axis;
  for (int a = 0; a < grid.dims(); ++a) axis_candidates(grid, a, p[a], per_axis[a]);

  std::vector<TileRef> out;
  GridIndex idx{};
  std::array<std::size_t, kMaxTileDims> pos{};
  // Cartesian product, axis 0 fastest, so results come in increasing linear order.
  for (;;) {
    for (int a = 0; a < grid.dims(); ++a) idx[a] = per_axis[a][pos[a]];
    out.push_back(grid.tile(std::span<const std::int64_t>(idx.data(), static_cast<std::size_t>(grid.dims()))));
    int a = 0;
    while (a < grid.dims() && ++pos[a] == per_axis[a].size()) pos[a++] = 0;
    if (a == grid.dims()) break;
  }
  return out;
}

std::vector<double> to_local(const TileGrid& grid, const TileRef& tile, std::span<const double> p) {
  if (static_cast<int>(p.size()) != grid.dims()) {
    throw DimensionError("to_local: point dim vs grid dim", grid.dims(), static_cast<long long>(p.size()));
  }
  std::vector<double> x(p.size());
  for (int a = 0; a < grid.dims(); ++a) {
    const double t = static_cast<double>(grid.tile_size()[a]);
    const double rel = p[a] - static_cast<double>(tile.origin[a]);
    if (!(rel >= 0.0 && rel <= t)) {
      throw ConfigError("point " + point_string(p) + " lies outside tile " + std::to_string(tile.linear));
    }
    x[a] = rel / t;
  }
  return x;
}

std::vector<double> to_global(const TileGrid& grid, const TileRef& tile, std::span<const double> x) {
  if (static_cast<int>(x.size()) != grid.dims()) {
    throw DimensionError("to_global: point dim vs grid dim", grid.dims(), static_cast<long long>(x.size()));
  }
  std::vector<double> p(x.size());
  for (int a = 0; a < grid.dims(); ++a) {
    p[a] = static_cast<double>(tile.origin[a]) + x[a] * static_cast<double>(grid.tile_size()[a]);
  }
  return p;
}

std::vector<std::pair<TileRef, double>> blend_weights(const TileGrid& grid, std::span<const double> p) {
  const std::vector<TileRef> tiles = tiles_containing(grid, p);
  std::vector<std::pair<TileRef, double>> out;
  out.reserve(tiles.size());
  double total = 0.0;
  for (const TileRef& t : tiles) {
    double w = 1.0;
    for (int a = 0; a < grid.dims(); ++a) w *= axis_ramp(grid, a, t.index[a], p[a]);
    out.emplace_back(t, w);
    total += w;
  }
  if (!(total > 0.0)) throw NumericalError("blend weights vanish at " + point_string(p));
  for (auto& [t, w] : out) w /= total;
  return out;
}

Codebook::Codebook(TileGrid g, Index latent_dim)
    : grid(std::move(g)), codes(Matrix<float>::Zero(latent_dim, grid.tile_count())) {}

void Codebook::validate() const {
  if (codes.cols() != grid.tile_count()) {
    throw DimensionError("codebook code count vs tile count", grid.tile_count(), codes.cols());
  }
}

Vector<float> blended_decode(const ModelParams<float>& params, const Codebook& codebook, std::span<const double> p) {
  Eigen::MatrixXd pts(static_cast<Index>(p.size()), 1);
  for (std::size_t i = 0; i < p.size(); ++i) pts(static_cast<Index>(i), 0) = p[i];
  return blended_decode_points(params, codebook, pts).col(0);
}

Matrix<float> blended_decode_points(const ModelParams<float>& params, const Codebook& codebook,
                                    const Eigen::MatrixXd& points) {
  const TileGrid& grid = codebook.grid;
  const ModelConfig& cfg = params.config;
  if (points.rows() != grid.dims()) throw DimensionError("blended_decode: point dim vs grid dim", grid.dims(), points.rows());
  if (cfg.input_dim != grid.dims()) throw DimensionError("blended_decode: model n vs grid dim", grid.dims(), cfg.input_dim);
  const bool conditioned = cfg.uses_latent();
  if (conditioned) {
    codebook.validate();
    if (codebook.latent_dim() != cfg.latent_dim) {
      throw DimensionError("blended_decode: codebook d vs model d", cfg.latent_dim, codebook.latent_dim());
    }
  }

  struct Entry {
    Index point;
    double weight;
  };
  const Index N = points.cols();
  const int n = grid.dims();
  std::vector<std::vector<Entry>> per_tile(static_cast<std::size_t>(grid.tile_count()));
  for (Index j = 0; j < N; ++j) {
    const std::span<const double> p(points.col(j).data(), static_cast<std::size_t>(n));
    for (const auto& [tile, w] : blend_weights(grid, p)) {
      if (w > 0.0) per_tile[static_cast<std::size_t>(tile.linear)].push_back({j, w});
    }
  }

  // Tiles are visited in increasing order, so each point sums its terms in that order.
  Matrix<float> out = Matrix<float>::Zero(cfg.output_dim, N);
  constexpr Index kChunk = 8192;
  const std::vector<Index> one{0};
  for (std::int64_t t = 0; t < grid.tile_count(); ++t) {
    const auto& entries = per_tile[static_cast<std::size_t>(t)];
    if (entries.empty()) continue;
    const TileRef ref = grid.tile(t);
    const Matrix<float> z = conditioned ? Matrix<float>(codebook.codes.col(t)) : Matrix<float>();
    for (std::size_t start = 0; start < entries.size(); start += kChunk) {
      const Index count = std::min<Index>(kChunk, static_cast<Index>(entries.size() - start));
      Matrix<float> local(n, count);
      for (Index k = 0; k < count; ++k) {
        const Index j = entries[start + static_cast<std::size_t>(k)].point;
        for (int a = 0; a < n; ++a) {
          local(a, k) = static_cast<float>((points(a, j) - static_cast<double>(ref.origin[a])) /
                                           static_cast<double>(grid.tile_size()[a]));
        }
      }
      const ForwardTape<float> tape = model_forward<float>(params, local, z, single_group(count));
      for (Index k = 0; k < count; ++k) {
        const Entry& e = entries[start + static_cast<std::size_t>(k)];
        out.col(e.point) += static_cast<float>(e.weight) * tape.output.col(k);
      }
    }
  }
  return out;
}

}  // namespace modfield
