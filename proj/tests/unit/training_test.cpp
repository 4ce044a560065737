#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "modfield/gradcheck.hpp"
#include "modfield/training.hpp"

using namespace modfield;

TEST(Loss, Examples) {
  const Vector<double> zero = Vector<double>::Zero(2);
  for (const auto kind : {LossKind::L2, LossKind::L1}) {
    const auto [l, g] = reconstruction_loss<double>(zero, zero, kind);
    EXPECT_EQ(l, 0.0);
    EXPECT_TRUE(g.isZero());
  }
  const auto [l2, g2] = reconstruction_loss<double>(Eigen::Vector2d(1, 0), zero, LossKind::L2);
  EXPECT_DOUBLE_EQ(l2, 1.0);
  EXPECT_EQ(g2, Eigen::Vector2d(2, 0));
  const auto [l1, g1] = reconstruction_loss<double>(Eigen::Vector2d(1, -2), zero, LossKind::L1);
  EXPECT_DOUBLE_EQ(l1, 3.0);
  EXPECT_EQ(g1, Eigen::Vector2d(1, -1));
  EXPECT_THROW(reconstruction_loss<double>(Vector<double>::Zero(3), zero, LossKind::L2), DimensionError);
}

TEST(Loss, BatchLossIsMeanOfPerSampleLosses) {
  RngStream rng(1);
  Matrix<double> pred(3, 5), target(3, 5);
  for (Index i = 0; i < 15; ++i) {
    pred.data()[i] = rng.normal();
    target.data()[i] = rng.normal();
  }
  for (const auto kind : {LossKind::L2, LossKind::L1}) {
    Matrix<double> grad;
    const double mean = batch_loss(pred, target, kind, grad);
    double sum = 0;
    for (Index b = 0; b < 5; ++b) {
      const auto [l, g] = reconstruction_loss<double>(pred.col(b), target.col(b), kind);
      sum += l;
      EXPECT_LT((grad.col(b) - g / 5.0).norm(), 1e-15);
    }
    EXPECT_NEAR(mean, sum / 5, 1e-14);
  }
  EXPECT_EQ(loss_kind_from_string("l1"), LossKind::L1);
  EXPECT_THROW(loss_kind_from_string("huber"), ConfigError);
}

TEST(Psnr, FormulaAndSentinel) {
  EXPECT_NEAR(psnr_from_mse(0.01), 20.0, 1e-12);
  EXPECT_NEAR(psnr_from_mse(1e-4), 40.0, 1e-12);
  EXPECT_EQ(psnr_from_mse(0.0), std::numeric_limits<double>::infinity());
  SampledSignal a = SampledSignal::dense_grid({2, 2}, 1);
  a.values << 0.1, 0.2, 0.3, 0.4;
  EXPECT_EQ(psnr(a, a), std::numeric_limits<double>::infinity());
  SampledSignal b = a;
  b.values.array() += 0.1;
  EXPECT_NEAR(psnr(b, a), 20.0, 1e-9);
  EXPECT_THROW(psnr(a, SampledSignal::dense_grid({2, 3}, 1)), DimensionError);
}

TEST(Latents, InitScaleAndDeterminism) {
  RngStream tiny(1);
  const Matrix<float> t = init_latents(10, 8, 1e-12, tiny);
  EXPECT_LT(t.cwiseAbs().maxCoeff(), 1e-9f);

  RngStream rng(2);
  const Matrix<float> z = init_latents(1000, 1000, 1e-2, rng);
  const double mean = z.cast<double>().mean();
  const double sd = std::sqrt((z.cast<double>().array() - mean).square().mean());
  EXPECT_NEAR(sd, 1e-2, 2e-4);

  RngStream a(3), b(3);
  EXPECT_EQ(init_latents(4, 5, 1e-2, a), init_latents(4, 5, 1e-2, b));
  EXPECT_THROW(init_latents(4, 5, 0.0, a), ConfigError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lr_latent = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.latent_init_scale = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

namespace {

ModelConfig grey_model(int width, int layers, int d) {
  ModelConfig c;
  c.input_dim = 2;
  c.output_dim = 1;
  c.latent_dim = d;
  c.hidden_layers = layers;
  c.width = width;
  c.omega0 = 10;
  return c;
}

SampledSignal gradient_image(std::int64_t size) {
  SampledSignal s = SampledSignal::dense_grid({size, size}, 1);
  for (Index j = 0; j < s.size(); ++j) s.values(0, j) = (s.coords(0, j) + s.coords(1, j)) / (2.0 * size);
  return s;
}

TrainConfig quick_train(int steps, int batch) {
  TrainConfig t;
  t.steps = steps;
  t.batch_size = batch;
  t.lr_theta = 1e-3;
  t.lr_latent = 1e-2;
  t.seed = 5;
  return t;
}

}  // namespace

TEST(Autodecoder, ZeroTargetIsLearnedQuickly) {
  SampledSignal zero = SampledSignal::dense_grid({16, 16}, 1);
  TrainConfig t = quick_train(500, 1024);
  t.lr_theta = 1e-2;
  const auto r = train_autodecoder({zero}, TileShape{8, 2}, grey_model(8, 1, 4), t);
  EXPECT_LT(r.report.step_losses.back(), 1e-6);
  ASSERT_EQ(r.report.rows.size(), 1u);
  EXPECT_EQ(r.report.rows.back().step, 500);
}

TEST(Autodecoder, GradientImageReachesFortyDecibels) {
  const SampledSignal img = gradient_image(64);
  TrainConfig t = quick_train(2000, 1024);
  t.lr_theta = 5e-4;
  t.eval_every = 500;
  const auto r = train_autodecoder({img}, TileShape{32, 8}, grey_model(32, 2, 16), t);
  EXPECT_GE(r.report.final_psnr_1x, 40.0);
  ASSERT_EQ(r.report.rows.size(), 4u);
  for (std::size_t i = 1; i < r.report.rows.size(); ++i) EXPECT_GT(r.report.rows[i].step, r.report.rows[i - 1].step);
  // Loss trend: on every 200-step window the last 50 steps beat the first 50.
  const auto& l = r.report.step_losses;
  for (std::size_t w = 0; w + 200 <= l.size(); w += 200) {
    const double head = std::accumulate(l.begin() + w, l.begin() + w + 50, 0.0);
    const double tail = std::accumulate(l.begin() + w + 150, l.begin() + w + 200, 0.0);
    EXPECT_LT(tail, head) << "window at step " << w;
  }
}

TEST(Autodecoder, IdenticalRunsAreBitIdentical) {
  const SampledSignal img = gradient_image(32);
  const TrainConfig t = quick_train(60, 256);
  const auto a = train_autodecoder({img}, TileShape{16, 4}, grey_model(8, 2, 4), t);
  const auto b = train_autodecoder({img}, TileShape{16, 4}, grey_model(8, 2, 4), t);
  EXPECT_EQ(a.report.step_losses, b.report.step_losses);
  EXPECT_EQ(pack_parameters(a.params), pack_parameters(b.params));
  EXPECT_EQ(a.codebooks[0], b.codebooks[0]);
}

TEST(Autodecoder, PerfectFitLeavesParametersUnchanged) {
  const ModelConfig cfg = grey_model(8, 2, 4);
  RngStream rng(3);
  ModelParams<float> p = ModelParams<float>::init(cfg, rng);
  p.output.weights.setZero();
  p.output.bias(0) = 0.375f;
  SampledSignal flat = SampledSignal::dense_grid({16, 16}, 1);
  flat.values.setConstant(0.375);
  // 256 samples, no overlap: 256 pairs; draw that many per step for an epoch.
  const TrainConfig t = quick_train(1, 256);
  Codebook cb(TileShape{8, 0}.grid_for(flat.extent), 4);
  cb.codes = init_latents(4, 4, 0.5, rng);
  const std::vector<Codebook> cbs{cb};
  const auto r = train_autodecoder({flat}, TileShape{8, 0}, cfg, t, AutodecoderInit{&p, &cbs});
  EXPECT_EQ(r.report.step_losses[0], 0.0);
  EXPECT_EQ(pack_parameters(r.params), pack_parameters(p));
  EXPECT_EQ(r.codebooks[0], cb);
}

TEST(Autodecoder, NonFiniteLossNamesStepAndTile) {
  SampledSignal img = gradient_image(16);
  img.values(0, 16 * 12 + 13) = std::numeric_limits<double>::quiet_NaN();  // pixel (13, 12), only in tile 3
  const TrainConfig t = quick_train(50, 4096);
  try {
    train_autodecoder({img}, TileShape{8, 0}, grey_model(4, 1, 2), t);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("tile 3"), std::string::npos) << e.what();
  }
}

TEST(Autodecoder, RejectsBadInputs) {
  const TrainConfig t = quick_train(1, 8);
  EXPECT_THROW(train_autodecoder({}, TileShape{}, grey_model(4, 1, 2), t), ConfigError);
  const SampledSignal rgb = SampledSignal::dense_grid({8, 8}, 3);
  EXPECT_THROW(train_autodecoder({rgb}, TileShape{4, 1}, grey_model(4, 1, 2), t), DimensionError);
  EXPECT_THROW(train_autodecoder({gradient_image(8), rgb}, TileShape{4, 1}, grey_model(4, 1, 2), t), ConfigError);
  EXPECT_THROW(train_autodecoder({gradient_image(8)}, TileShape{16, 1}, grey_model(4, 1, 2), t), ConfigError);
}

TEST(Autodecoder, WholeSignalTileShape) {
  const TileGrid g = TileShape{0, 0}.grid_for({20, 12});
  EXPECT_EQ(g.tile_count(), 1);
  EXPECT_EQ(g.tile_size(), (std::vector<std::int64_t>{20, 12}));
}

class Inference : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    image_ = new SampledSignal(gradient_image(48));
    TrainConfig t = quick_train(1500, 1024);
    trained_ = new AutodecoderResult(train_autodecoder({*image_}, TileShape{16, 4}, grey_model(32, 2, 8), t));
  }
  static void TearDownTestSuite() {
    delete image_;
    delete trained_;
  }
  static TrainConfig infer_config() {
    TrainConfig t = quick_train(600, 512);
    t.lr_latent = 2e-2;
    t.seed = 17;
    return t;
  }
  static SampledSignal* image_;
  static AutodecoderResult* trained_;
};

SampledSignal* Inference::image_ = nullptr;
AutodecoderResult* Inference::trained_ = nullptr;

TEST_F(Inference, LeavesParametersBitIdentical) {
  const auto before = pack_parameters(trained_->params);
  const Codebook cb = infer_latents(trained_->params, *image_, TileShape{16, 4}, infer_config());
  EXPECT_EQ(pack_parameters(trained_->params), before);
  EXPECT_EQ(cb.grid, trained_->codebooks[0].grid);
}

TEST_F(Inference, TileOrderDoesNotMatter) {
  const TileShape ts{16, 4};
  const Codebook a = infer_latents(trained_->params, *image_, ts, infer_config());
  std::vector<std::int64_t> order(static_cast<std::size_t>(a.grid.tile_count()));
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  std::swap(order[1], order[5]);
  const Codebook b = infer_latents(trained_->params, *image_, ts, infer_config(), order);
  EXPECT_EQ(a, b);
  order.pop_back();
  EXPECT_THROW(infer_latents(trained_->params, *image_, ts, infer_config(), order), ConfigError);
}

TEST_F(Inference, ReachesTrainingQualityOnATrainingSignal) {
  const double trained = score_signal(trained_->params, trained_->codebooks[0], *image_).psnr_1x;
  const Codebook cb = infer_latents(trained_->params, *image_, TileShape{16, 4}, infer_config());
  const double inferred = score_signal(trained_->params, cb, *image_).psnr_1x;
  EXPECT_GE(inferred, trained - 1.0) << "trained " << trained << " inferred " << inferred;
}

TEST_F(Inference, RejectsIncompatibleSignals) {
  EXPECT_THROW(infer_latents(trained_->params, SampledSignal::dense_grid({48, 48}, 3), TileShape{16, 4}, infer_config()),
               DimensionError);
}

TEST(Encoder, GradientMatchesFiniteDifferences) {
  RngStream rng(4);
  auto enc = TileEncoderParams<double>::init(6, 5, 3, rng);
  for (auto b : enc.blocks()) {
    for (auto& v : b) v += rng.uniform(-0.1, 0.1);
  }
  Matrix<double> tiles(6, 3), up(3, 3);
  for (Index i = 0; i < tiles.size(); ++i) tiles.data()[i] = rng.uniform(0, 1);
  for (Index i = 0; i < up.size(); ++i) up.data()[i] = rng.normal();
  const auto loss = [&](const TileEncoderParams<double>& e) {
    return (encoder_forward(e, tiles).latents().array() * up.array()).sum();
  };
  const auto grads = encoder_backward(enc, encoder_forward(enc, tiles), up);
  std::vector<double> flat, analytic;
  for (const auto b : enc.blocks()) flat.insert(flat.end(), b.begin(), b.end());
  for (const auto b : grads.blocks()) analytic.insert(analytic.end(), b.begin(), b.end());
  const auto fd = finite_difference_grad(
      [&](std::span<const double> q) {
        auto e = enc;
        std::size_t k = 0;
        for (auto b : e.blocks()) {
          for (auto& v : b) v = q[k++];
        }
        return loss(e);
      },
      flat, 1e-6);
  for (std::size_t k = 0; k < fd.size(); ++k) EXPECT_NEAR(fd[k], analytic[k], 1e-6 * std::max(1.0, std::abs(fd[k])));
}

TEST(Encoder, TileValuesFlattenPixelsWithChannelsInnermost) {
  SampledSignal s = SampledSignal::dense_grid({6, 4}, 2);
  for (Index j = 0; j < s.size(); ++j) {
    s.values(0, j) = static_cast<double>(j);
    s.values(1, j) = -static_cast<double>(j);
  }
  const TileGrid g = TileGrid::uniform({6, 4}, 2, 0);
  const Vector<float> v = tile_values(s, g, g.tile(std::vector<std::int64_t>{1, 1}).linear);
  // Tile (1,1) covers pixels x in {2,3}, y in {2,3}.
  const std::vector<float> expected{14, -14, 15, -15, 20, -20, 21, -21};
  ASSERT_EQ(v.size(), 8);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(v(i), expected[static_cast<std::size_t>(i)]);
}

TEST(Autoencoder, TrainsAndEncodesInOnePass) {
  std::vector<SampledSignal> train;
  for (std::uint64_t s = 0; s < 3; ++s) train.push_back(blob_image({.width = 32, .height = 32, .channels = 1, .seed = s}));
  ModelConfig cfg = grey_model(16, 2, 8);
  TrainConfig t = quick_train(600, 512);
  t.eval_every = 50;
  const auto r = train_autoencoder(train, TileShape{16, 4}, EncoderConfig{32}, cfg, t);
  EXPECT_EQ(r.encoder.input_dim(), 256);
  EXPECT_EQ(r.encoder.latent_dim(), 8);
  EXPECT_LT(r.report.step_losses.back(), r.report.step_losses.front());

  const SampledSignal unseen = blob_image({.width = 32, .height = 32, .channels = 1, .seed = 99});
  const TileGrid grid = TileShape{16, 4}.grid_for(unseen.extent);
  const Codebook cb = encode_signal(r.encoder, unseen, grid);
  EXPECT_EQ(cb.codes.cols(), grid.tile_count());
  // Same decoder path as the auto-decoder: decoding is a pure function of (θ, codes).
  EXPECT_EQ(decode_dense(r.params, cb, 1).values, decode_dense(r.params, cb, 1).values);
  EXPECT_THROW(train_autoencoder(train, TileShape{16, 4}, EncoderConfig{0}, cfg, t), ConfigError);
}

TEST(Autoencoder, HeldOutImageFromTheSameFamily) {
  std::vector<SampledSignal> train;
  for (std::uint64_t s = 100; s < 104; ++s) train.push_back(blob_image({.seed = s}));
  ModelConfig cfg;
  cfg.latent_dim = 16;
  cfg.hidden_layers = 3;
  cfg.width = 32;
  TrainConfig t = quick_train(500, 4096);
  t.lr_theta = 2e-3;
  const TileShape tiles{8, 2};
  const auto r = train_autoencoder(train, tiles, EncoderConfig{}, cfg, t);
  const SampledSignal unseen = blob_image({.seed = 200});
  const Codebook cb = encode_signal(r.encoder, unseen, tiles.grid_for(unseen.extent));
  EXPECT_GE(score_signal(r.params, cb, unseen).psnr_1x, 25.0);
}
