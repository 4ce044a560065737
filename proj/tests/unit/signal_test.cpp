#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <vector>

#include "modfield/dense.hpp"
#include "modfield/image_io.hpp"
#include "modfield/metrics.hpp"
#include "modfield/perlin.hpp"
#include "modfield/rng.hpp"
#include "modfield/signal.hpp"

using namespace modfield;

TEST(ImageIo, WhitePpmPixelLoadsAsOnes) {
  const std::string bytes = std::string("P6\n1 1\n255\n") + "\xff\xff\xff";
  const SampledSignal s = decode_image(bytes);
  EXPECT_EQ(s.extent, (std::vector<std::int64_t>{1, 1}));
  EXPECT_EQ(s.m, 3);
  EXPECT_TRUE((s.values.array() == 1.0).all());
  EXPECT_DOUBLE_EQ(s.coords(0, 0), 0.5);
}

TEST(ImageIo, PpmRejectsOtherMaxvalAndTruncation) {
  EXPECT_THROW(decode_image(std::string("P6\n1 1\n65535\n") + std::string(6, '\0')), FormatError);
  EXPECT_THROW(decode_image(std::string("P6\n2 1\n255\n") + "\x01\x02\x03"), FormatError);
  EXPECT_THROW(decode_image("P3\n1 1\n255\n1 2 3\n"), FormatError);
  EXPECT_THROW(decode_image(""), FormatError);
}

TEST(ImageIo, PpmQuantizesToNearestLevel) {
  SampledSignal s = SampledSignal::dense_grid({2, 1}, 3);
  s.values << 0.0, 0.5, 1.2, -0.1, 1.0, 0.25;
  s.values.resize(3, 2);
  const SampledSignal back = decode_image(encode_ppm(s));
  for (Index i = 0; i < s.values.size(); ++i) {
    const double clamped = std::clamp(s.values.data()[i], 0.0, 1.0);
    EXPECT_NEAR(back.values.data()[i], std::round(clamped * 255) / 255, 1e-12);
  }
}

TEST(ImageIo, PfmRoundTripIsBitExactForFloats) {
  SampledSignal s = SampledSignal::dense_grid({3, 2}, 3);
  RngStream rng(1);
  for (Index i = 0; i < s.values.size(); ++i) s.values.data()[i] = static_cast<float>(rng.normal());
  const std::string bytes = encode_pfm(s);
  const SampledSignal back = decode_image(bytes);
  EXPECT_EQ(back.values, s.values);
  EXPECT_EQ(encode_pfm(back), bytes);

  SampledSignal grey = SampledSignal::dense_grid({2, 2}, 1);
  grey.values << 0.1, 0.2, 0.3, 0.4;
  EXPECT_EQ(decode_image(encode_pfm(grey)).values, grey.values.cast<float>().cast<double>());
}

TEST(ImageIo, PfmRowsAreStoredBottomToTop) {
  SampledSignal s = SampledSignal::dense_grid({1, 2}, 1);
  s.values << 0.25, 0.75;  // top row, bottom row
  const std::string bytes = encode_pfm(s);
  float first;
  std::memcpy(&first, bytes.data() + bytes.size() - 2 * sizeof(float), sizeof(float));
  EXPECT_EQ(first, 0.75f);
}

TEST(ImageIo, FileRoundTripAndMissingFile) {
  const auto dir = std::filesystem::temp_directory_path() / "modfield_io_test";
  std::filesystem::create_directories(dir);
  SampledSignal s = SampledSignal::dense_grid({4, 3}, 3);
  s.values.setConstant(0.5);
  save_image(s, dir / "a.pfm");
  EXPECT_EQ(load_image(dir / "a.pfm").values, s.values);
  save_image(s, dir / "a.ppm");
  EXPECT_NEAR(load_image(dir / "a.ppm").values(0, 0), 128.0 / 255, 1e-12);
  EXPECT_THROW(load_image(dir / "missing.ppm"), IoError);
  std::filesystem::remove_all(dir);
}

TEST(PixelGrid, CentresInTheOriginalFrame) {
  const auto a = pixel_center_grid({2}, 1);
  ASSERT_EQ(a.cols(), 2);
  EXPECT_DOUBLE_EQ(a(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(a(0, 1), 1.5);
  const auto b = pixel_center_grid({1}, 2);
  EXPECT_DOUBLE_EQ(b(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(b(0, 1), 0.75);
  for (int f = 1; f <= 4; ++f) {
    const auto g = pixel_center_grid({3, 5}, f);
    EXPECT_EQ(g.cols(), f * f * 15);
    EXPECT_GT(g.minCoeff(), 0.0);
    EXPECT_LT(g.row(0).maxCoeff(), 3.0);
    EXPECT_LT(g.row(1).maxCoeff(), 5.0);
  }
  EXPECT_THROW(pixel_center_grid({2}, 0), ConfigError);
}

TEST(Bilinear, ConstantStaysConstant) {
  SampledSignal s = SampledSignal::dense_grid({5, 3}, 2);
  s.values.row(0).setConstant(0.3);
  s.values.row(1).setConstant(0.9);
  const SampledSignal up = bilinear_resample(s, {13, 7});
  EXPECT_EQ(up.size(), 91);
  EXPECT_LT((up.values.row(0).array() - 0.3).abs().maxCoeff(), 1e-15);
  EXPECT_LT((up.values.row(1).array() - 0.9).abs().maxCoeff(), 1e-15);
}

TEST(Bilinear, TwoPixelsUpsampledToFour) {
  SampledSignal s = SampledSignal::dense_grid({2, 1}, 1);
  s.values << 0.0, 1.0;
  const SampledSignal up = bilinear_resample(s, {4, 1});
  // Target centres 0.5, 1.5, 2.5, 3.5 map to source positions -0.25, 0.25, 0.75, 1.25.
  EXPECT_NEAR(up.values(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(up.values(0, 1), 0.25, 1e-15);
  EXPECT_NEAR(up.values(0, 2), 0.75, 1e-15);
  EXPECT_NEAR(up.values(0, 3), 1.0, 1e-15);
}

TEST(Bilinear, DownThenUpReproducesARampAwayFromBorders) {
  SampledSignal s = SampledSignal::dense_grid({64, 48}, 1);
  for (Index j = 0; j < s.size(); ++j) s.values(0, j) = 0.01 * s.coords(0, j) - 0.005 * s.coords(1, j) + 0.4;
  const SampledSignal down = bilinear_resample(s, {32, 24});
  const SampledSignal back = bilinear_resample(down, {64, 48});
  for (std::int64_t y = 2; y < 46; ++y) {
    for (std::int64_t x = 2; x < 62; ++x) EXPECT_NEAR(back.at(x, y), s.at(x, y), 1e-6);
  }
  SampledSignal sparse = s;
  sparse.dense = false;
  EXPECT_THROW(bilinear_resample(sparse, {4, 4}), ConfigError);
}

TEST(Signal, ValidateChecksShapes) {
  SampledSignal s = SampledSignal::dense_grid({4, 4}, 1);
  EXPECT_NO_THROW(s.validate());
  s.values.resize(1, 15);
  EXPECT_THROW(s.validate(), DimensionError);
  SampledSignal world;
  world.n = 3;
  world.m = 1;
  world.coords = Eigen::MatrixXd::Zero(3, 2);
  world.values = Eigen::MatrixXd::Zero(1, 2);
  EXPECT_NO_THROW(world.validate());
}

TEST(Perlin, ZeroAtLatticePoints) {
  const PerlinNoise noise(5);
  for (int i = -3; i < 4; ++i) {
    for (int j = -2; j < 5; ++j) EXPECT_EQ(noise(i, j), 0.0);
  }
  // A one-pixel patch samples u = 0.5, so frequency 2 lands on a lattice point.
  PerlinSpec spec{.rows = 1, .cols = 2, .patch_size = 1, .freq_x = {2, 4}, .freq_y = {2, 4}, .seed = 3};
  const SampledSignal g = perlin_grid(spec);
  EXPECT_EQ(g.values(0, 0), 0.5);
  EXPECT_EQ(g.values(0, 1), 0.5);
}

TEST(Perlin, SeedDeterministicAndInRange) {
  const PerlinSpec spec = PerlinSpec::sweep(4, 4, 32, 2, 16, 11);
  const SampledSignal a = perlin_grid(spec), b = perlin_grid(spec);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, perlin_grid(PerlinSpec::sweep(4, 4, 32, 2, 16, 12)).values);
  EXPECT_GE(a.values.minCoeff(), 0.0);
  EXPECT_LE(a.values.maxCoeff(), 1.0);
  EXPECT_EQ(a.extent, (std::vector<std::int64_t>{128, 128}));
  // Mean over a high-frequency patch.
  double mean = 0;
  for (std::int64_t y = 96; y < 128; ++y) {
    for (std::int64_t x = 96; x < 128; ++x) mean += a.at(x, y);
  }
  EXPECT_NEAR(mean / 1024, 0.5, 0.05);
}

TEST(Perlin, SpecValidation) {
  EXPECT_THROW(PerlinSpec::sweep(2, 2, 8, 4, 2, 0).validate(), ConfigError);
  PerlinSpec s = PerlinSpec::sweep(2, 2, 8, 2, 8, 0);
  s.freq_y[3] = s.freq_y[2];
  EXPECT_THROW(s.validate(), ConfigError);
  s = PerlinSpec::sweep(2, 2, 8, 2, 8, 0);
  s.freq_x.pop_back();
  EXPECT_THROW(s.validate(), ConfigError);
}

namespace {

// Magnitude-weighted mean radial frequency of a patch, DC excluded.
double spectral_centroid(const SampledSignal& img, std::int64_t x0, std::int64_t y0, int size) {
  double num = 0, den = 0;
  for (int ky = 0; ky < size; ++ky) {
    for (int kx = 0; kx < size; ++kx) {
      if (kx == 0 && ky == 0) continue;
      std::complex<double> acc = 0;
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const double phase = -2 * std::numbers::pi * (double(kx) * x + double(ky) * y) / size;
          acc += img.at(x0 + x, y0 + y) * std::polar(1.0, phase);
        }
      }
      const int fx = kx <= size / 2 ? kx : size - kx;
      const int fy = ky <= size / 2 ? ky : size - ky;
      num += std::abs(acc) * std::hypot(fx, fy);
      den += std::abs(acc);
    }
  }
  return num / den;
}

}  // namespace

TEST(Perlin, SpectralCentroidGrowsAlongTheDiagonal) {
  const int p = 16;
  const SampledSignal img = perlin_grid(PerlinSpec::sweep(3, 3, p, 1, 8, 4));
  for (int r = 1; r < 3; ++r) {
    for (int c = 1; c < 3; ++c) {
      EXPECT_GT(spectral_centroid(img, c * p, r * p, p), spectral_centroid(img, (c - 1) * p, (r - 1) * p, p))
          << "patch " << r << "," << c;
    }
  }
}

TEST(Chamfer, BasicValues) {
  Eigen::MatrixXd a(1, 1), b(1, 1);
  a << 0;
  b << 1;
  EXPECT_DOUBLE_EQ(chamfer_distance(a, b), 2.0);
  EXPECT_DOUBLE_EQ(chamfer_distance_brute(a, b), 2.0);
  Eigen::MatrixXd s(2, 3);
  s << 0, 1, 2, 3, 4, 5;
  EXPECT_EQ(chamfer_distance(s, s), 0.0);
  EXPECT_THROW(chamfer_distance(s, Eigen::MatrixXd(2, 0)), ConfigError);
  EXPECT_THROW(chamfer_distance(s, Eigen::MatrixXd::Zero(3, 2)), DimensionError);
}

TEST(Chamfer, SweepMatchesBruteForce) {
  RngStream rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd a(3, 150 + trial), b(3, 90);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
    for (Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-1, 1);
    const double fast = chamfer_distance(a, b);
    EXPECT_NEAR(fast, chamfer_distance_brute(a, b), 1e-9);
    EXPECT_NEAR(fast, chamfer_distance(b, a), 1e-12);
    EXPECT_GE(fast, 0.0);
  }
}

TEST(Chamfer, ZeroExactlyForEqualSets) {
  Eigen::MatrixXd a(2, 3), b(2, 3), c(2, 3);
  a << 0, 1, 2, 0, 0, 1;
  b << 2, 0, 1, 1, 0, 0;  // same points, permuted
  c << 2, 0, 1, 1, 0, 1;
  EXPECT_EQ(chamfer_distance(a, b), 0.0);
  EXPECT_GT(chamfer_distance(a, c), 0.0);
}
