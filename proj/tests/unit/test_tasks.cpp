#include <gtest/gtest.h>

#include <optional>

#include "hdiff/dataset.hpp"
#include "hdiff/rng.hpp"
#include "hdiff/tasks.hpp"

namespace hdiff {
namespace {

class TasksTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg_.resolution = 16;
    cfg_.width = 8;
    cfg_.time_dim = 16;
    cfg_.kernel_size = 3;
    cfg_.inner_res = 8;
    cfg_.sparse_blocks = 1;
    cfg_.diffusion_steps = 100;
    net_ = std::make_unique<Denoiser>(cfg_.model());
    // A small random output layer so the network is not identically zero.
    Rng rng(1);
    for (auto& p : net_->params()) {
      if (p.name == "out.w") {
        for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = 0.05 * rng.normal();
      }
    }
    m_ = DiffusionModel::from(*net_, cfg_);
    opts_.steps = 10;
    opts_.seed = 7;
  }

  TrainConfig cfg_;
  std::unique_ptr<Denoiser> net_;
  std::optional<DiffusionModel> m_;
  const DiffusionModel& model() const { return *m_; }
  SampleOptions opts_;
};

TEST_F(TasksTest, SampleOnTargetGridFiniteAndClamped) {
  const SampleResult r = sample(model(), RegularGrid::square(16), opts_);
  EXPECT_EQ(r.demollified.grid, RegularGrid::square(16));
  EXPECT_EQ(r.raw.grid, RegularGrid::square(16));
  EXPECT_TRUE(r.raw.values.allFinite());
  EXPECT_LE(r.demollified.values.cwiseAbs().maxCoeff(), 1.0);
}

TEST_F(TasksTest, ClippedDdimEndsInDataRange) {
  // The last DDIM step lands on the T x0 estimate itself, so clipping bounds it.
  opts_.sampler = Sampler::Ddim;
  const Mat clipped = sample(model(), RegularGrid::square(16), opts_).raw.values;
  EXPECT_LE(clipped.cwiseAbs().maxCoeff(), 1.0);
  opts_.clip_denoised = false;
  const Mat free = sample(model(), RegularGrid::square(16), opts_).raw.values;
  EXPECT_TRUE(free.allFinite());
  EXPECT_GT(free.cwiseAbs().maxCoeff(), 1.0);
}

TEST_F(TasksTest, SampleDeterministic) {
  for (const Sampler s : {Sampler::Ddim, Sampler::Ancestral}) {
    opts_.sampler = s;
    const SampleResult a = sample(model(), RegularGrid::square(16), opts_);
    const SampleResult b = sample(model(), RegularGrid::square(16), opts_);
    EXPECT_EQ(a.raw.values, b.raw.values);
  }
  SampleOptions other = opts_;
  other.seed = 8;
  EXPECT_NE(sample(model(), RegularGrid::square(16), opts_).raw.values,
            sample(model(), RegularGrid::square(16), other).raw.values);
}

TEST_F(TasksTest, DdimTrajectoriesFiniteAcrossResolutions) {
  opts_.steps = 4;
  for (const int res : {16, 32, 64, 128}) {
    bool finite = true;
    opts_.on_step = [&](int, const Mat& x) { finite = finite && x.allFinite(); };
    const SampleResult r = sample(model(), RegularGrid::square(res), opts_);
    EXPECT_TRUE(finite) << "res=" << res;
    EXPECT_EQ(r.raw.size(), static_cast<std::size_t>(res * res));
  }
}

TEST_F(TasksTest, StepCallbackSeesEveryStepDownToZero) {
  std::vector<int> seen;
  opts_.on_step = [&](int t, const Mat&) { seen.push_back(t); };
  sample(model(), RegularGrid::square(16), opts_);
  ASSERT_EQ(seen.size(), 10u);
  EXPECT_EQ(seen.back(), 0);
}

TEST_F(TasksTest, SuperResolveZeroStartIsInterpolation) {
  const Field low = generate_toy("gaussian_bumps", 1, 8, 1, 3)[0];
  const SampleResult r = super_resolve(model(), low, RegularGrid::square(16), 0, opts_);
  const Mat want = knn_interpolate(low, grid_coords(RegularGrid::square(16)), cfg_.knn);
  EXPECT_EQ(r.demollified.values, want);
  EXPECT_EQ(r.demollified.grid, RegularGrid::square(16));
}

TEST_F(TasksTest, SuperResolveDeterministic) {
  const Field low = generate_toy("gaussian_bumps", 1, 8, 1, 4)[0];
  const SampleResult a = super_resolve(model(), low, RegularGrid::square(16), 30, opts_);
  const SampleResult b = super_resolve(model(), low, RegularGrid::square(16), 30, opts_);
  EXPECT_EQ(a.raw.values, b.raw.values);
  EXPECT_THROW(super_resolve(model(), low, RegularGrid::square(16), 101, opts_), Error);
}

TEST_F(TasksTest, InpaintLambdaZeroIsUnguided) {
  const Field obs = generate_toy("gaussian_bumps", 1, 16, 1, 5)[0];
  Mat mask(256, 1);
  Rng rng(6);
  for (Eigen::Index i = 0; i < 256; ++i) mask(i, 0) = rng.uniform() < 0.5 ? 1.0 : 0.0;
  InpaintOptions o;
  o.sampling = opts_;
  o.lambda = 0.0;
  const SampleResult unguided = inpaint(model(), obs, mask, o);
  // Guidance with an empty mask has zero gradient, so it must coincide.
  o.lambda = 1.0;
  const SampleResult empty_mask = inpaint(model(), obs, Mat::Zero(256, 1), o);
  EXPECT_EQ(unguided.raw.values, empty_mask.raw.values);
  o.jacobian_free = true;
  EXPECT_EQ(unguided.raw.values, inpaint(model(), obs, Mat::Zero(256, 1), o).raw.values);
}

TEST_F(TasksTest, InpaintFullMaskSmallStartReconstructs) {
  const Field obs = generate_toy("gaussian_bumps", 1, 16, 1, 8)[0];
  InpaintOptions o;
  o.sampling = opts_;
  o.sampling.steps = 5;
  o.t_start = 5;
  o.lambda = 1.0;
  const SampleResult r = inpaint(model(), obs, Mat::Ones(256, 1), o);
  const Mollifier moll = model().mollifier(RegularGrid::square(16));
  const Mat tobs = moll.apply(obs.values);
  const double err = (r.raw.values - tobs).squaredNorm() / 256.0;
  const double var = (tobs.array() - tobs.mean()).square().mean();
  EXPECT_LT(err, 0.05 * var);
}

TEST_F(TasksTest, InpaintValidatesInputs) {
  const Field obs = generate_toy("gaussian_bumps", 1, 16, 1, 9)[0];
  InpaintOptions o;
  o.sampling = opts_;
  EXPECT_THROW(inpaint(model(), obs, Mat::Ones(10, 1), o), Error);
  o.lambda = -1.0;
  EXPECT_THROW(inpaint(model(), obs, Mat::Ones(256, 1), o), Error);
}

TEST_F(TasksTest, DemollifyClampsAndInvertsSmoothData) {
  const Mollifier moll = model().mollifier(RegularGrid::square(16));
  const Field f = generate_toy("gaussian_bumps", 1, 16, 1, 10)[0];
  const Field d = demollify(moll.mollify(f), moll, {1e-4});
  EXPECT_LE(d.values.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_LT((d.values - f.values).cwiseAbs().maxCoeff(), 0.05);
}

TEST(SamplerParse, Names) {
  EXPECT_EQ(parse_sampler("ddim"), Sampler::Ddim);
  EXPECT_EQ(parse_sampler("ancestral"), Sampler::Ancestral);
  EXPECT_THROW(parse_sampler("euler"), Error);
}

}  // namespace
}  // namespace hdiff
