#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "hdiff/config.hpp"
#include "hdiff/denoiser.hpp"
#include "hdiff/grad/adam.hpp"

namespace hdiff {

struct StepStats {
  std::int64_t step = 0;  // 1-based index of the completed step
  double loss = 0.0;      // mean over the batch
  double wall_ms = 0.0;
  std::size_t coords_used = 0;  // per item
  std::size_t tape_bytes = 0;   // largest per-item tape
};

/// Per-item training sample: everything drawn from the RNG for one item.
struct ItemDraw {
  std::size_t data_index;
  int t;
  std::uint64_t noise_seed;
  std::uint64_t subset_seed;
};

/// Coordinate-subsampled diffusion training on full-grid data.
///
/// Each item draws t uniformly, diffuses on the full grid, selects a fresh
/// coordinate subset and evaluates the loss there. Items run on separate
/// tapes; gradients are summed in item order, so results do not depend on
/// the thread count.
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<Field> data);

  StepStats step();
  /// Loss of one item without updating anything (frozen parameters).
  double item_loss(const ItemDraw& draw) const;
  ItemDraw draw_item(std::int64_t step, int item) const;

  const TrainConfig& config() const { return cfg_; }
  Denoiser& model() { return *model_; }
  const Denoiser& model() const { return *model_; }
  grad::AdamState& optimizer() { return opt_; }
  const NoiseSchedule& schedule() const { return sched_; }
  const Mollifier& mollifier() const { return moll_; }
  std::int64_t steps_done() const { return steps_done_; }
  std::size_t coords_per_item() const;

  /// Rounds parameters to the checkpoint precision, then writes model,
  /// optimizer and config.
  void save(const std::string& path);

 private:
  struct ItemResult {
    double loss;
    std::vector<Mat> grads;
    std::size_t tape_bytes;
  };
  ItemResult run_item(const ItemDraw& draw, bool with_grad) const;

  TrainConfig cfg_;
  std::vector<Field> data_;
  NoiseSchedule sched_;
  Mollifier moll_;
  std::unique_ptr<Denoiser> model_;
  grad::AdamState opt_;
  std::int64_t steps_done_ = 0;
  int threads_ = 1;
};

/// Runs cfg.steps steps, writing the metrics CSV (one row per step) and the
/// checkpoint every cfg.checkpoint_every steps and at the end.
void train_loop(const TrainConfig& cfg, const std::function<void(const StepStats&)>& progress = {});

/// Loads a checkpoint written by Trainer::save, restoring its config.
struct LoadedModel {
  TrainConfig config;
  std::unique_ptr<Denoiser> model;
};
LoadedModel load_model(const std::string& path);

}  // namespace hdiff
