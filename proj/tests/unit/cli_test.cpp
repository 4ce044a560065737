#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "modfield/app.hpp"
#include "modfield/formats.hpp"
#include "modfield/image_io.hpp"

using namespace modfield;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = app::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("modfield_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    SampledSignal img = SampledSignal::dense_grid({16, 16}, 1);
    for (Index j = 0; j < img.size(); ++j) img.values(0, j) = (img.coords(0, j) + 2 * img.coords(1, j)) / 48.0;
    save_image(img, dir_ / "grad.pfm");
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const nlohmann::json& data, const std::string& name = "config.json") {
    nlohmann::json doc = {
        {"data", data},
        {"model", {{"latent_dim", 8}, {"hidden_layers", 2}, {"width", 16}, {"omega0", 10.0}}},
        {"tiles", {{"size", 8}, {"overlap", 2}}},
        {"train", {{"steps", 40}, {"batch_size", 256}, {"lr_theta", 1e-3}, {"lr_latent", 1e-2}, {"eval_every", 20}}},
        {"seed", 3},
        {"out", (dir_ / "run").string()},
    };
    const fs::path p = dir_ / name;
    std::ofstream(p) << doc.dump(2);
    return p;
  }
  fs::path image_config() { return write_config({{"type", "image"}, {"path", (dir_ / "grad.pfm").string()}}); }

  fs::path dir_;
};

}  // namespace

TEST(CsvNumber, SentinelsAndRoundTrip) {
  EXPECT_EQ(app::csv_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(app::csv_number(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(app::csv_number(std::nan("")), "nan");
  EXPECT_EQ(std::stod(app::csv_number(0.1 + 0.2)), 0.1 + 0.2);
}

TEST_F(Cli, FitWritesArtifactsThatRoundTrip) {
  const CliResult r = run({"fit", "--config", image_config().string(), "--deterministic"});
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path out = dir_ / "run";
  const std::string ck_bytes = read_file(out / "checkpoint.modf");
  EXPECT_EQ(encode_checkpoint(decode_checkpoint(ck_bytes)), ck_bytes);
  const std::string cb_bytes = read_file(out / "codebook_0.modz");
  const Codebook cb = decode_codebook(cb_bytes);
  EXPECT_EQ(cb.grid.tile_count(), 9);
  EXPECT_EQ(encode_codebook(cb), cb_bytes);

  std::istringstream csv(read_file(out / "metrics.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "step,loss,psnr_1x,psnr_2x,wall_ms");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "0");
  }
  EXPECT_EQ(rows, 2);
}

TEST_F(Cli, DeterministicRerunGivesIdenticalOutputs) {
  const fs::path cfg = image_config();
  ASSERT_EQ(run({"fit", "--config", cfg.string(), "--deterministic", "--out", (dir_ / "a").string()}).code, 0);
  ASSERT_EQ(run({"fit", "--config", cfg.string(), "--deterministic", "--out", (dir_ / "b").string()}).code, 0);
  for (const char* f : {"metrics.csv", "checkpoint.modf", "codebook_0.modz"}) {
    EXPECT_EQ(read_file(dir_ / "a" / f), read_file(dir_ / "b" / f)) << f;
  }
  ASSERT_EQ(run({"fit", "--config", cfg.string(), "--deterministic", "--seed", "4", "--out", (dir_ / "c").string()}).code, 0);
  EXPECT_NE(read_file(dir_ / "a" / "checkpoint.modf"), read_file(dir_ / "c" / "checkpoint.modf"));
}

TEST_F(Cli, FlagsOverrideConfig) {
  ASSERT_EQ(run({"fit", "--config", image_config().string(), "--steps", "5", "--width", "12", "--layers", "1",
                 "--latent-dim", "4", "--tile-size", "16", "--overlap", "0", "--loss", "l1"})
                .code,
            0);
  const Checkpoint ck = load_checkpoint(dir_ / "run" / "checkpoint.modf");
  EXPECT_EQ(ck.params.config.width, 12);
  EXPECT_EQ(ck.params.config.hidden_layers, 1);
  EXPECT_EQ(ck.params.config.latent_dim, 4);
  EXPECT_EQ(ck.step, 5);
  EXPECT_EQ(load_codebook(dir_ / "run" / "codebook_0.modz").grid.tile_count(), 1);
}

TEST_F(Cli, MissingInputIsAnIoError) {
  const fs::path cfg = write_config({{"type", "image"}, {"path", (dir_ / "nope.ppm").string()}});
  const CliResult r = run({"fit", "--config", cfg.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.ppm"), std::string::npos) << r.err;
  EXPECT_EQ(run({"fit", "--config", (dir_ / "missing.json").string()}).code, 2);
}

TEST_F(Cli, BadConfigAndFlagsExitWithThree) {
  EXPECT_EQ(run({"fit"}).code, 3);
  EXPECT_EQ(run({"fit", "--config", image_config().string(), "--bogus"}).code, 3);
  EXPECT_EQ(run({"fit", "--config", image_config().string(), "--overlap", "8"}).code, 3);
  EXPECT_EQ(run({"compare", "--config", image_config().string(), "--baselines", "relu,gan"}).code, 3);
  EXPECT_EQ(run({"fit", "--config", image_config().string(), "--loss", "huber"}).code, 3);
  EXPECT_EQ(run({}).code, 3);
}

TEST_F(Cli, InferRejectsMismatchedSignal) {
  ASSERT_EQ(run({"fit", "--config", image_config().string(), "--deterministic"}).code, 0);
  SampledSignal rgb = SampledSignal::dense_grid({16, 16}, 3);
  save_image(rgb, dir_ / "rgb.ppm");
  const CliResult r = run({"infer", "--checkpoint", (dir_ / "run" / "checkpoint.modf").string(), (dir_ / "rgb.ppm").string(),
                     "--out", (dir_ / "z.modz").string()});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "z.modz"));
}

TEST_F(Cli, InferLeavesCheckpointAndIsDeterministic) {
  ASSERT_EQ(run({"fit", "--config", image_config().string(), "--deterministic"}).code, 0);
  const fs::path ck = dir_ / "run" / "checkpoint.modf";
  const std::string before = read_file(ck);
  for (const char* name : {"z1.modz", "z2.modz"}) {
    const CliResult r = run({"infer", "--checkpoint", ck.string(), (dir_ / "grad.pfm").string(), "--steps", "20", "--out",
                       (dir_ / name).string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("psnr_1x ", 0), 0u);
  }
  EXPECT_EQ(read_file(ck), before);
  EXPECT_EQ(read_file(dir_ / "z1.modz"), read_file(dir_ / "z2.modz"));
}

TEST_F(Cli, DecodeScalesDimensions) {
  ASSERT_EQ(run({"fit", "--config", image_config().string(), "--deterministic"}).code, 0);
  const fs::path ck = dir_ / "run" / "checkpoint.modf";
  const fs::path cb = dir_ / "run" / "codebook_0.modz";
  ASSERT_EQ(run({"decode", "--checkpoint", ck.string(), "--codebook", cb.string(), "--factor", "2", "--out",
                 (dir_ / "x2.pfm").string()})
                .code,
            0);
  const SampledSignal x2 = load_image(dir_ / "x2.pfm");
  EXPECT_EQ(x2.extent, (std::vector<std::int64_t>{32, 32}));
  ASSERT_EQ(run({"decode", "--checkpoint", ck.string(), "--codebook", cb.string(), "--out", (dir_ / "y.pfm").string()})
                .code,
            0);
  ASSERT_EQ(run({"decode", "--checkpoint", ck.string(), "--codebook", cb.string(), "--out", (dir_ / "y2.pfm").string()})
                .code,
            0);
  EXPECT_EQ(read_file(dir_ / "y.pfm"), read_file(dir_ / "y2.pfm"));
  EXPECT_EQ(load_image(dir_ / "y.pfm").extent, (std::vector<std::int64_t>{16, 16}));
  EXPECT_EQ(run({"decode", "--checkpoint", ck.string(), "--codebook", cb.string(), "--factor", "0", "--out",
                 (dir_ / "z.pfm").string()})
                .code,
            3);
}

TEST_F(Cli, EvalSentinelsAndColumns) {
  const std::string img = (dir_ / "grad.pfm").string();
  CliResult r = run({"eval", img, img, "--metric", "psnr"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "metric,value,aux\npsnr,inf,\n");
  r = run({"eval", img, img, "--metric", "l1"});
  EXPECT_EQ(r.out, "metric,value,aux\nl1,0,\n");

  Eigen::MatrixXd pts = Eigen::MatrixXd::Random(3, 50);
  save_point_cloud(pts, dir_ / "a.modp");
  r = run({"eval", (dir_ / "a.modp").string(), (dir_ / "a.modp").string(), "--metric", "chamfer"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "metric,value,aux\nchamfer,0,\n");
  EXPECT_EQ(run({"eval", img, img, "--metric", "ssim"}).code, 3);
}

TEST_F(Cli, CompareHasOneRowPerMethodWithEqualBudgets) {
  const CliResult r = run({"compare", "--config", image_config().string(), "--baselines", "relu,ffn,concat,modulated",
                     "--steps", "10", "--deterministic"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(r.out);
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "method,local,steps,psnr_1x,psnr_2x,psnr_hf,wall_ms");
  std::vector<std::string> methods;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 7u) << line;
    methods.push_back(cells[0]);
    EXPECT_EQ(cells[2], "10");
  }
  EXPECT_EQ(methods, (std::vector<std::string>{"relu", "ffn", "concat", "modulated"}));
}

TEST_F(Cli, AutoencoderCheckpointCarriesTheEncoder) {
  const fs::path cfg = dir_ / "ae.json";
  std::ofstream(cfg) << R"({"mode": "autoencoder", "data": {"type": "blobs", "count": 2, "width": 16, "height": 16},
    "model": {"latent_dim": 4, "hidden_layers": 1, "width": 8}, "tiles": {"size": 8, "overlap": 2},
    "encoder": {"hidden": 8}, "train": {"steps": 5, "batch_size": 64}})";
  ASSERT_EQ(run({"fit", "--config", cfg.string(), "--out", (dir_ / "ae").string()}).code, 0);
  const Checkpoint ck = load_checkpoint(dir_ / "ae" / "checkpoint.modf");
  ASSERT_TRUE(ck.encoder.has_value());
  EXPECT_EQ(ck.encoder->input_dim(), 8 * 8 * 3);
  EXPECT_TRUE(fs::exists(dir_ / "ae" / "codebook_1.modz"));
}

TEST_F(Cli, SdfFitAndGridMetric) {
  const fs::path cfg = dir_ / "sdf.json";
  std::ofstream(cfg) << R"({"data": {"type": "sdf", "points": 2000, "extent": 16,
    "shape": [{"type": "sphere", "radius": 0.4}, {"type": "box", "center": [0.6, 0, 0], "half_extents": [0.1, 0.1, 0.1]}]},
    "model": {"latent_dim": 4, "hidden_layers": 1, "width": 8}, "tiles": {"size": 8, "overlap": 2},
    "train": {"steps": 5, "batch_size": 64, "loss": "l1"}})";
  ASSERT_EQ(run({"fit", "--config", cfg.string(), "--out", (dir_ / "s").string()}).code, 0);
  const CliResult r = run({"eval", (dir_ / "s" / "checkpoint.modf").string(), cfg.string(), "--metric", "sdf-grid",
                           "--codebook", (dir_ / "s" / "codebook_0.modz").string(), "--resolution", "8"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("metric,value,aux\nsdf-grid,", 0), 0u) << r.out;
}

TEST_F(Cli, DecodedOverfitFixtureReachesFortyDecibels) {
  const fs::path cfg = image_config();
  ASSERT_EQ(run({"fit", "--config", cfg.string(), "--steps", "1500", "--width", "32", "--deterministic"}).code, 0);
  const fs::path out = dir_ / "run";
  ASSERT_EQ(run({"decode", "--checkpoint", (out / "checkpoint.modf").string(), "--codebook",
                 (out / "codebook_0.modz").string(), "--out", (dir_ / "y.pfm").string()})
                .code,
            0);
  const CliResult r = run({"eval", (dir_ / "y.pfm").string(), (dir_ / "grad.pfm").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string row = r.out.substr(r.out.find('\n') + 1);
  EXPECT_GE(std::stod(row.substr(row.find(',') + 1)), 40.0) << r.out;
}
