#include "hdiff/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "hdiff/dataset.hpp"
#include "hdiff/grad/checkpoint.hpp"
#include "hdiff/grad/ops.hpp"
#include "hdiff/parallel.hpp"

namespace hdiff {
namespace {

// Output locations and the thread count do not affect the model, so they are
// left out to keep checkpoints byte-identical across runs that differ only there.
std::string checkpoint_metadata(TrainConfig cfg) {
  const TrainConfig defaults;
  cfg.checkpoint = defaults.checkpoint;
  cfg.metrics = defaults.metrics;
  cfg.threads = defaults.threads;
  return cfg.to_text();
}

}  // namespace

Trainer::Trainer(TrainConfig cfg, std::vector<Field> data)
    : cfg_(std::move(cfg)),
      data_(std::move(data)),
      sched_(cfg_.noise_schedule()),
      moll_(cfg_.mollifier_l(), RegularGrid::square(cfg_.resolution)) {
  cfg_.validate();
  if (data_.empty()) throw Error("trainer: empty dataset");
  for (const Field& f : data_) {
    if (!f.grid || *f.grid != moll_.grid() || f.channels() != cfg_.channels) {
      throw Error("trainer: every sample must be a full grid at the training resolution");
    }
  }
  model_ = std::make_unique<Denoiser>(cfg_.model());
  opt_ = grad::AdamState::zeros_like(model_->params(), grad::AdamConfig{cfg_.lr});
  threads_ = resolve_threads(cfg_.threads);
}

std::size_t Trainer::coords_per_item() const { return subsample_count(moll_.grid().size(), cfg_.subsample_rate); }

ItemDraw Trainer::draw_item(std::int64_t step, int item) const {
  Rng rng(mix_seed(cfg_.seed, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(item)));
  ItemDraw d{};
  d.data_index = static_cast<std::size_t>(rng.below(data_.size()));
  d.t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sched_.steps())));
  d.noise_seed = rng.next();
  d.subset_seed = rng.next();
  return d;
}

Trainer::ItemResult Trainer::run_item(const ItemDraw& draw, bool with_grad) const {
  const Field& x0 = data_[draw.data_index];
  const DiffusionState st = forward_sample(x0, draw.t, sched_, moll_, draw.noise_seed);
  const CoordinateSubset subset = draw_subset(x0.size(), cfg_.subsample_rate, draw.subset_seed);
  const Geometry geom = model_->prepare(select_rows(x0.coords, subset));

  grad::Tape tape(with_grad);
  grad::Var pred = model_->forward(tape, geom, tape.constant(select_rows(st.x_t.values, subset)), draw.t);
  grad::Var loss;
  if (cfg_.param_mode == ParamMode::NoisePred) {
    loss = grad::mse(pred, tape.constant(select_rows(st.t_xi->values, subset)));
  } else {
    // beta_t stands in for sigma_t^2, which is zero at t = 1 under beta_tilde.
    const double w = loss_x0_weight(draw.t, sched_, sched_.at(draw.t).beta);
    loss = grad::scale(grad::mse(pred, tape.constant(select_rows(x0.values, subset))), w);
  }
  ItemResult r{loss.value()(0, 0), {}, tape.memory_bytes()};
  if (with_grad) {
    tape.backward(loss);
    r.grads = tape.param_grads(model_->params());
    r.tape_bytes = tape.memory_bytes();
  }
  return r;
}

double Trainer::item_loss(const ItemDraw& draw) const { return run_item(draw, false).loss; }

StepStats Trainer::step() {
  const auto start = std::chrono::steady_clock::now();
  const int batch = cfg_.batch_size;
  std::vector<ItemResult> results(static_cast<std::size_t>(batch));
  parallel_for(results.size(), threads_, [&](std::size_t i) {
    results[i] = run_item(draw_item(steps_done_, static_cast<int>(i)), true);
  });

  grad::ParamStore& params = model_->params();
  params.zero_grad();
  StepStats s;
  for (const ItemResult& r : results) {
    s.loss += r.loss;
    s.tape_bytes = std::max(s.tape_bytes, r.tape_bytes);
    for (std::size_t p = 0; p < params.size(); ++p) params.at(p).grad += r.grads[p];
  }
  s.loss /= batch;
  ++steps_done_;
  s.step = steps_done_;
  if (!std::isfinite(s.loss)) {
    const std::string dump = cfg_.checkpoint + ".diverged";
    grad::write_checkpoint(dump, params, &opt_, checkpoint_metadata(cfg_));
    throw Error("training diverged at step " + std::to_string(steps_done_) + " (state written to " + dump + ")");
  }
  for (grad::Parameter& p : params) p.grad /= batch;
  grad::adam_step(params, opt_);
  s.coords_used = coords_per_item();
  s.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return s;
}

void Trainer::save(const std::string& path) {
  grad::round_to_f32(model_->params());
  grad::write_checkpoint(path, model_->params(), &opt_, checkpoint_metadata(cfg_));
}

void train_loop(const TrainConfig& cfg, const std::function<void(const StepStats&)>& progress) {
  Trainer trainer(cfg, make_dataset(cfg.dataset, cfg.data_count, cfg.resolution, cfg.channels, cfg.seed));
  std::ofstream csv(cfg.metrics);
  if (!csv) throw Error("cannot open metrics file for writing: " + cfg.metrics);
  csv.precision(10);
  csv << "step,loss,wall_ms,coords_used\n";
  if (cfg.steps == 0) trainer.save(cfg.checkpoint);
  for (int i = 0; i < cfg.steps; ++i) {
    const StepStats s = trainer.step();
    csv << s.step << ',' << s.loss << ',' << s.wall_ms << ',' << s.coords_used << '\n';
    if (progress) progress(s);
    if (s.step % cfg.checkpoint_every == 0 || i + 1 == cfg.steps) trainer.save(cfg.checkpoint);
  }
  csv.flush();
  if (!csv) throw Error("write failed: " + cfg.metrics);
}

LoadedModel load_model(const std::string& path) {
  const grad::Checkpoint ck = grad::read_checkpoint(path);
  LoadedModel m;
  m.config = config_parse(ck.metadata);
  m.model = std::make_unique<Denoiser>(m.config.model());
  grad::load_params(m.model->params(), ck);
  return m;
}

}  // namespace hdiff
