#include "modfield/perlin.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "modfield/error.hpp"
#include "modfield/rng.hpp"

namespace modfield {

namespace {

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double lerp(double a, double b, double t) { return a + t * (b - a); }

double corner(std::uint8_t hash, double x, double y) {
  switch (hash & 7) {
    case 0: return x + y;
    case 1: return -x + y;
    case 2: return x - y;
    case 3: return -x - y;
    case 4: return x;
    case 5: return -x;
    case 6: return y;
    default: return -y;
  }
}

}  // namespace

PerlinNoise::PerlinNoise(std::uint64_t seed) {
  std::array<std::uint8_t, 256> p{};
  std::iota(p.begin(), p.end(), std::uint8_t{0});
  RngStream rng(seed);
  for (std::size_t i = 255; i >= 1; --i) std::swap(p[i], p[rng.below(i + 1)]);
  for (std::size_t i = 0; i < 512; ++i) perm_[i] = p[i & 255];
}

double PerlinNoise::operator()(double x, double y) const {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const int xi = static_cast<int>(static_cast<long long>(fx) & 255);
  const int yi = static_cast<int>(static_cast<long long>(fy) & 255);
  const double rx = x - fx;
  const double ry = y - fy;
  const std::uint8_t aa = perm_[perm_[xi] + yi];
  const std::uint8_t ab = perm_[perm_[xi] + yi + 1];
  const std::uint8_t ba = perm_[perm_[xi + 1] + yi];
  const std::uint8_t bb = perm_[perm_[xi + 1] + yi + 1];
  const double u = fade(rx);
  const double v = fade(ry);
  const double bottom = lerp(corner(aa, rx, ry), corner(ba, rx - 1.0, ry), u);
  const double top = lerp(corner(ab, rx, ry - 1.0), corner(bb, rx - 1.0, ry - 1.0), u);
  return lerp(bottom, top, v);
}

PerlinSpec PerlinSpec::sweep(int rows, int cols, int patch_size, double f_min, double f_max, std::uint64_t seed) {
  PerlinSpec spec;
  spec.rows = rows;
  spec.cols = cols;
  spec.patch_size = patch_size;
  spec.seed = seed;
  const int count = rows * cols;
  for (int k = 0; k < count; ++k) {
    const double t = count > 1 ? static_cast<double>(k) / (count - 1) : 0.0;
    const double f = f_min * std::pow(f_max / f_min, t);
    spec.freq_x.push_back(f);
    spec.freq_y.push_back(f);
  }
  spec.validate();
  return spec;
}

void PerlinSpec::validate() const {
  if (rows < 1 || cols < 1 || patch_size < 1) throw ConfigError("perlin grid sizes must be >= 1");
  const auto count = static_cast<std::size_t>(rows * cols);
  if (freq_x.size() != count || freq_y.size() != count) {
    throw ConfigError("perlin spec needs one frequency pair per patch");
  }
  for (std::size_t k = 0; k < count; ++k) {
    if (!(freq_x[k] > 0.0 && freq_y[k] > 0.0)) throw ConfigError("perlin frequencies must be > 0");
    if (k > 0 && !(freq_x[k] > freq_x[k - 1] && freq_y[k] > freq_y[k - 1])) {
      throw ConfigError("perlin frequencies must increase from the top-left to the bottom-right patch");
    }
  }
}

SampledSignal perlin_grid(const PerlinSpec& spec) {
  spec.validate();
  const PerlinNoise noise(spec.seed);
  const std::int64_t P = spec.patch_size;
  const std::int64_t W = spec.cols * P;
  SampledSignal s = SampledSignal::dense_grid({W, spec.rows * P}, 1);
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      const auto k = static_cast<std::size_t>(r * spec.cols + c);
      const double ox = 37.0 * static_cast<double>(k);
      const double oy = 91.0 * static_cast<double>(k);
      for (std::int64_t j = 0; j < P; ++j) {
        for (std::int64_t i = 0; i < P; ++i) {
          const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(P);
          const double v = (static_cast<double>(j) + 0.5) / static_cast<double>(P);
          const double raw = noise(ox + spec.freq_x[k] * u, oy + spec.freq_y[k] * v);
          const std::int64_t x = c * P + i;
          const std::int64_t y = r * P + j;
          s.values(0, y * W + x) = std::clamp(0.5 + 0.5 * raw, 0.0, 1.0);
        }
      }
    }
  }
  return s;
}

std::vector<Eigen::Index> high_frequency_samples(const PerlinSpec& spec) {
  spec.validate();
  const int patches = spec.rows * spec.cols;
  const std::int64_t p = spec.patch_size;
  const std::int64_t width = static_cast<std::int64_t>(spec.cols) * p;
  std::vector<Eigen::Index> out;
  for (int k = patches - patches / 2; k < patches; ++k) {
    const std::int64_t x0 = (k % spec.cols) * p, y0 = (k / spec.cols) * p;
    for (std::int64_t y = y0; y < y0 + p; ++y) {
      for (std::int64_t x = x0; x < x0 + p; ++x) out.push_back(y * width + x);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace modfield
