#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "hdiff/config.hpp"

namespace hdiff {
namespace {

TEST(ConfigParse, EmptyGivesDefaults) {
  const TrainConfig c = config_parse("");
  const TrainConfig d;
  EXPECT_EQ(c.to_text(), d.to_text());
  EXPECT_EQ(c.diffusion_steps, 1000);
  EXPECT_EQ(c.schedule, "cosine");
  EXPECT_DOUBLE_EQ(c.lr, 1e-3);
  EXPECT_NO_THROW(c.validate());
}

TEST(ConfigParse, CommentsAndWhitespace) {
  const TrainConfig c = config_parse("# header\n  rate = 8   # trailing\n\nwidth=32\n");
  EXPECT_DOUBLE_EQ(c.subsample_rate, 8.0);
  EXPECT_EQ(c.width, 32);
}

TEST(ConfigParse, DuplicateKeyLastWinsWithWarning) {
  std::vector<std::string> warnings;
  const TrainConfig c = config_parse("seed = 1\nseed = 7\n", &warnings);
  EXPECT_EQ(c.seed, 7u);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("seed"), std::string::npos);
}

TEST(ConfigParse, UnknownKeysListedTogether) {
  try {
    config_parse("bogus = 1\nwidth = 8\nalso_bad = 2\n");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("bogus"), std::string::npos);
    EXPECT_NE(msg.find("also_bad"), std::string::npos);
  }
}

TEST(ConfigParse, MalformedValuesRejected) {
  EXPECT_THROW(config_parse("width = wide\n"), Error);
  EXPECT_THROW(config_parse("just a line\n"), Error);
  EXPECT_THROW(config_parse("param_mode = vpred\n"), Error);
  EXPECT_THROW(config_parse("sigma2 = maybe\n"), Error);
}

TEST(ConfigParse, TextRoundTrip) {
  TrainConfig c;
  c.seed = 42;
  c.subsample_rate = 2.5;
  c.channel_mults = {1, 2, 4};
  c.param_mode = ParamMode::X0Pred;
  c.sigma2 = Sigma2Choice::Beta;
  c.jacobian_free = true;
  EXPECT_EQ(config_parse(c.to_text()).to_text(), c.to_text());
}

TEST(ConfigValidate, RejectsBadValues) {
  TrainConfig c;
  c.subsample_rate = 0.5;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.sampler = "euler";
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.sample_steps = 2000;
  EXPECT_THROW(c.validate(), Error);
}

TEST(ConfigLoad, MissingFileThrows) { EXPECT_THROW(config_load("/nonexistent/run.cfg"), Error); }

TEST(ConfigLoad, ReadsFile) {
  const auto path = std::filesystem::temp_directory_path() / "hdiff_config_test.cfg";
  std::ofstream(path) << "rate = 4\nsteps = 12\n";
  const TrainConfig c = config_load(path.string());
  EXPECT_DOUBLE_EQ(c.subsample_rate, 4.0);
  EXPECT_EQ(c.steps, 12);
  std::filesystem::remove(path);
}

TEST(ConfigModel, DerivedValues) {
  TrainConfig c;
  c.resolution = 32;
  c.blur_variance = 1.0;
  EXPECT_DOUBLE_EQ(c.mollifier_l(), 0.5 / (32.0 * 32.0));
  EXPECT_EQ(c.model().train_res, 32);
  EXPECT_DOUBLE_EQ(c.model().radius(), 3.0 / 32.0);
  EXPECT_EQ(c.noise_schedule().steps(), 1000);
}

}  // namespace
}  // namespace hdiff
