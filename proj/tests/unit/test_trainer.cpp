#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "hdiff/dataset.hpp"
#include "hdiff/grad/checkpoint.hpp"
#include "hdiff/rng.hpp"
#include "hdiff/trainer.hpp"

namespace hdiff {
namespace fs = std::filesystem;
namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.data_count = 16;
  c.resolution = 16;
  c.batch_size = 4;
  c.width = 8;
  c.time_dim = 16;
  c.kernel_size = 3;
  c.inner_res = 8;
  c.sparse_blocks = 1;
  c.diffusion_steps = 100;
  c.subsample_rate = 4.0;
  c.threads = 1;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hdiff_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST(Dataset, ValuesWithinUnitRange) {
  for (const char* gen : {"gaussian_bumps", "stripes"}) {
    for (const Field& f : generate_toy(gen, 20, 16, 3, 5)) {
      EXPECT_EQ(f.grid, RegularGrid::square(16));
      EXPECT_EQ(f.channels(), 3);
      EXPECT_LE(f.values.cwiseAbs().maxCoeff(), 1.0);
    }
  }
  EXPECT_THROW(generate_toy("spirals", 1, 8, 1, 0), Error);
}

TEST(Dataset, BumpCentresUniform) {
  constexpr int kBins = 10;
  std::vector<double> counts(kBins * kBins, 0.0);
  Rng rng(2024);
  double n = 0.0;
  for (int i = 0; i < 10000; ++i) {
    for (const Bump& b : draw_bumps(rng)) {
      const int bx = std::min(kBins - 1, static_cast<int>(b.cx * kBins));
      const int by = std::min(kBins - 1, static_cast<int>(b.cy * kBins));
      counts[static_cast<std::size_t>(by * kBins + bx)] += 1.0;
      n += 1.0;
    }
  }
  const double expected = n / (kBins * kBins);
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(kBins * kBins - 1);
  EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.01) << "chi2=" << chi2;
}

TEST_F(TempDir, DatasetFilesReproducible) {
  write_dataset((dir_ / "a").string(), generate_toy("gaussian_bumps", 1, 16, 1, 9));
  write_dataset((dir_ / "b").string(), generate_toy("gaussian_bumps", 1, 16, 1, 9));
  const std::string a = slurp(dir_ / "a" / "sample_00000.idf1");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir_ / "b" / "sample_00000.idf1"));
  const auto loaded = load_dataset((dir_ / "a").string());
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].values, generate_toy("gaussian_bumps", 1, 16, 1, 9)[0].values.cast<float>().cast<double>());
}

TEST(TrainerTest, CoordinatesPerItem) {
  for (const double rate : {1.0, 2.0, 4.0, 8.0}) {
    TrainConfig c = tiny_config();
    c.subsample_rate = rate;
    Trainer tr(c, generate_toy(c.dataset, c.data_count, c.resolution, 1, 0));
    EXPECT_EQ(tr.coords_per_item(), static_cast<std::size_t>(std::llround(256.0 / rate)));
    EXPECT_EQ(tr.step().coords_used, tr.coords_per_item());
  }
}

TEST(TrainerTest, BitIdenticalTrajectories) {
  const TrainConfig c = tiny_config();
  const auto data = generate_toy(c.dataset, c.data_count, c.resolution, 1, 0);
  Trainer a(c, data), b(c, data);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(a.step().loss, b.step().loss);
  EXPECT_EQ(a.model().params().at(3).value, b.model().params().at(3).value);
}

TEST(TrainerTest, ThreadCountDoesNotChangeResults) {
  TrainConfig c1 = tiny_config();
  TrainConfig c3 = tiny_config();
  c3.threads = 3;
  const auto data = generate_toy(c1.dataset, c1.data_count, c1.resolution, 1, 0);
  Trainer a(c1, data), b(c3, data);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a.step().loss, b.step().loss);
}

TEST(TrainerTest, InitialLossIsMollifiedNoiseEnergy) {
  const TrainConfig c = tiny_config();
  const Trainer tr(c, generate_toy(c.dataset, c.data_count, c.resolution, 1, 0));
  double expected = 0.0;
  for (double s : tr.mollifier().symbol()) expected += s * s;
  expected *= tr.mollifier().noise_std() * tr.mollifier().noise_std() / 256.0;
  double mean = 0.0;
  const int n = 400;
  for (int i = 0; i < n; ++i) mean += tr.item_loss(tr.draw_item(i / 4, i % 4));
  mean /= n;
  EXPECT_NEAR(mean / expected, 1.0, 0.1) << "measured " << mean << " expected " << expected;
}

TEST(TrainerTest, LossRateInvariantWithFrozenParams) {
  std::vector<double> means;
  for (const double rate : {1.0, 2.0, 4.0, 8.0}) {
    TrainConfig c = tiny_config();
    c.subsample_rate = rate;
    Trainer tr(c, generate_toy(c.dataset, c.data_count, c.resolution, 1, 0));
    Rng rng(31);
    for (auto& p : tr.model().params()) {
      if (p.name == "out.w") {
        for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = 0.3 * rng.normal();
      }
    }
    double m = 0.0;
    for (int s = 0; s < 200; ++s) {
      for (int item = 0; item < c.batch_size; ++item) m += tr.item_loss(tr.draw_item(s, item));
    }
    means.push_back(m / (200.0 * c.batch_size));
  }
  for (double m : means) EXPECT_NEAR(m / means[0], 1.0, 0.1);
}

TEST(TrainerTest, X0PredTrainsFinite) {
  TrainConfig c = tiny_config();
  c.param_mode = ParamMode::X0Pred;
  Trainer tr(c, generate_toy(c.dataset, c.data_count, c.resolution, 1, 0));
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(std::isfinite(tr.step().loss));
}

TEST_F(TempDir, TrainLoopZeroStepsWritesCheckpointOnly) {
  TrainConfig c = tiny_config();
  c.steps = 0;
  c.checkpoint = (dir_ / "m.idck").string();
  c.metrics = (dir_ / "m.csv").string();
  train_loop(c);
  EXPECT_TRUE(fs::exists(c.checkpoint));
  std::ifstream is(c.metrics);
  std::string header, row;
  std::getline(is, header);
  EXPECT_EQ(header, "step,loss,wall_ms,coords_used");
  EXPECT_FALSE(std::getline(is, row));
}

TEST_F(TempDir, TrainLoopCsvRowsAndCheckpointRoundTrip) {
  TrainConfig c = tiny_config();
  c.steps = 6;
  c.checkpoint_every = 4;
  c.checkpoint = (dir_ / "m.idck").string();
  c.metrics = (dir_ / "m.csv").string();
  train_loop(c);
  std::ifstream is(c.metrics);
  std::string line;
  int rows = -1;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 6);

  const LoadedModel lm = load_model(c.checkpoint);
  TrainConfig stored = c;
  stored.checkpoint = TrainConfig{}.checkpoint;
  stored.metrics = TrainConfig{}.metrics;
  stored.threads = TrainConfig{}.threads;
  EXPECT_EQ(lm.config.to_text(), stored.to_text());
  const grad::Checkpoint ck = grad::read_checkpoint(c.checkpoint);
  ASSERT_TRUE(ck.optimizer.has_value());
  EXPECT_EQ(ck.optimizer->step, 6);

  // Re-saving the loaded model reproduces identical forward outputs.
  Trainer tr(c, generate_toy(c.dataset, c.data_count, c.resolution, 1, 0));
  grad::load_params(tr.model().params(), ck);
  const auto path2 = (dir_ / "again.idck").string();
  tr.save(path2);
  const LoadedModel lm2 = load_model(path2);
  const Geometry g = lm.model->prepare(grid_coords(RegularGrid::square(16)));
  Rng rng(3);
  Mat x(256, 1);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  EXPECT_EQ(lm.model->predict(g, x, 50), lm2.model->predict(g, x, 50));
}

TEST_F(TempDir, DivergenceDumpsStateAndThrows) {
  TrainConfig c = tiny_config();
  c.lr = 1e200;
  c.steps = 20;
  c.checkpoint = (dir_ / "m.idck").string();
  c.metrics = (dir_ / "m.csv").string();
  try {
    train_loop(c);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("training diverged at step"), std::string::npos);
  }
  EXPECT_TRUE(fs::exists(c.checkpoint + ".diverged"));
}

}  // namespace
}  // namespace hdiff
