#include <benchmark/benchmark.h>

#include <memory>

#include "hdiff/config.hpp"
#include "hdiff/dataset.hpp"
#include "hdiff/field.hpp"
#include "hdiff/mollifier.hpp"
#include "hdiff/rng.hpp"
#include "hdiff/sparse_conv.hpp"
#include "hdiff/trainer.hpp"

namespace {

hdiff::Mat random_mat(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  hdiff::Rng rng(seed);
  hdiff::Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Full-grid depthwise conv; range(0) = resolution, range(1) = channels.
void BM_SparseConvForward(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  const auto channels = static_cast<Eigen::Index>(state.range(1));
  constexpr int k = 7;
  const hdiff::Mat coords = hdiff::grid_coords(hdiff::RegularGrid::square(res));
  const auto stencil = hdiff::build_stencil(coords, (k - 1) / (2.0 * res), k);
  const hdiff::Mat x = random_mat(coords.rows(), channels, 1);
  const hdiff::Mat kernel = random_mat(k * k, channels, 2);
  for (auto _ : state) benchmark::DoNotOptimize(hdiff::sparse_depthwise_conv(x, kernel, stencil));
  state.SetItemsProcessed(state.iterations() * coords.rows());
}
BENCHMARK(BM_SparseConvForward)->Args({32, 32})->Args({32, 64})->Args({64, 32})->Unit(benchmark::kMicrosecond);

void BM_BuildStencil(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  const hdiff::Mat coords = hdiff::grid_coords(hdiff::RegularGrid::square(res));
  for (auto _ : state) benchmark::DoNotOptimize(hdiff::build_stencil(coords, 3.0 / 32.0, 7));
}
BENCHMARK(BM_BuildStencil)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_Mollify(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  const hdiff::Mollifier moll(hdiff::l_from_pixel_variance(1.0, res), hdiff::RegularGrid::square(res));
  const hdiff::Mat x = random_mat(static_cast<Eigen::Index>(res) * res, 1, 3);
  for (auto _ : state) benchmark::DoNotOptimize(moll.apply(x));
}
BENCHMARK(BM_Mollify)->Arg(32)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

// One optimizer step at the small model size; range(0) = subsampling rate.
void BM_TrainStep(benchmark::State& state) {
  hdiff::TrainConfig cfg;
  cfg.data_count = 64;
  cfg.batch_size = 4;
  cfg.width = 16;
  cfg.time_dim = 32;
  cfg.threads = 1;
  cfg.subsample_rate = static_cast<double>(state.range(0));
  hdiff::Trainer trainer(cfg, hdiff::generate_toy(cfg.dataset, cfg.data_count, cfg.resolution, cfg.channels, 0));
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
  state.counters["coords"] = static_cast<double>(trainer.coords_per_item());
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
