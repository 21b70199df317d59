#include "hdiff/tasks.hpp"

#include <cmath>

#include "hdiff/grad/ops.hpp"

namespace hdiff {

using grad::Var;

Sampler parse_sampler(std::string_view s) {
  if (s == "ddim") return Sampler::Ddim;
  if (s == "ancestral") return Sampler::Ancestral;
  throw Error("unknown sampler '" + std::string(s) + "' (expected ddim or ancestral)");
}

DiffusionModel DiffusionModel::from(const Denoiser& net, const TrainConfig& cfg) {
  return DiffusionModel{&net, cfg.noise_schedule(), cfg.mollifier_l(), cfg.resolution, cfg.param_mode, cfg.wiener()};
}

Mollifier DiffusionModel::mollifier(const RegularGrid& grid) const {
  std::size_t ref = 1;
  for (int i = 0; i < grid.rank(); ++i) ref *= static_cast<std::size_t>(train_res);
  return Mollifier(l, grid, ref);
}

Field demollify(const Field& field, const Mollifier& moll, const WienerConfig& cfg) {
  Field out = moll.wiener_inverse(field, cfg);
  out.values = out.values.cwiseMax(-1.0).cwiseMin(1.0);
  return out;
}

namespace {

// Differentiable T; self-adjoint, so the adjoint rule reuses apply().
Var mollify_var(Var x, const Mollifier& moll) {
  const int ix = x.id();
  return x.tape()->record(moll.apply(x.value()), {x}, [ix, &moll](grad::Tape& t, int self) {
    t.grad(ix) += moll.apply_adjoint(t.grad_or_empty(self));
  });
}

struct Guidance {
  const Mat* target = nullptr;  // T obs
  const Mat* mask = nullptr;    // m x 1
  double lambda = 0.0;
  bool jacobian_free = false;
};

struct Evaluation {
  Mat f;     // raw network output
  Mat eps;   // T xi estimate
  Mat grad;  // guidance gradient w.r.t. x_t, empty without guidance
};

class ReverseProcess {
 public:
  ReverseProcess(const DiffusionModel& model, const RegularGrid& grid)
      : model_(model), grid_(grid), moll_(model.mollifier(grid)), geom_(model.net->prepare(grid_coords(grid), grid)) {}

  const Mollifier& mollifier() const { return moll_; }

  Mat run(Mat x, int t_start, const SampleOptions& opts, const Guidance* guide) const {
    const NoiseSchedule& sched = model_.schedule;
    const std::vector<int> ts = strided_timesteps(sched.steps(), opts.steps, t_start);
    const NoiseSchedule respaced = opts.sampler == Sampler::Ancestral ? sched.respaced(ts) : sched;
    for (std::size_t j = ts.size(); j-- > 0;) {
      const int t = ts[j];
      const int t_prev = j > 0 ? ts[j - 1] : 0;
      Evaluation ev = evaluate(x, t, guide);
      ParamMode mode = model_.mode;
      if (opts.clip_denoised) {
        const double ab = sched.alpha_bar(t);
        const Mat tx0 = estimate_tx0(x, ev.eps, t, sched).cwiseMax(-1.0).cwiseMin(1.0);
        ev.eps = (x - std::sqrt(ab) * tx0) / std::sqrt(1.0 - ab);
        mode = ParamMode::NoisePred;
      }
      Mat next;
      if (opts.sampler == Sampler::Ddim) {
        next = ddim_step(x, ev.eps, t, t_prev, sched);
      } else {
        const Mat& f = mode == ParamMode::X0Pred ? ev.f : ev.eps;
        next = ancestral_step(x, f, static_cast<int>(j) + 1, respaced, moll_, mode, mix_seed(opts.seed, 0xA5CE, j));
      }
      if (ev.grad.size() > 0) {
        const double lambda_eff = guide->lambda * std::sqrt(sched.alpha_bar(t) * sched.alpha_bar(t_prev)) / 2.0;
        next -= lambda_eff * ev.grad;
      }
      x = std::move(next);
      if (opts.on_step) opts.on_step(t_prev, x);
    }
    return x;
  }

 private:
  Evaluation evaluate(const Mat& x, int t, const Guidance* guide) const {
    const double ab = model_.schedule.alpha_bar(t);
    Evaluation ev;
    const bool guided = guide && guide->lambda > 0.0;
    if (!guided || guide->jacobian_free) {
      ev.f = model_.net->predict(geom_, x, t);
      ev.eps = model_.mode == ParamMode::X0Pred ? noise_from_x0pred(x, ev.f, t, model_.schedule, moll_) : ev.f;
      if (guided) {
        const Mat tx0 = estimate_tx0(x, ev.eps, t, model_.schedule);
        const Mat r = (tx0 - *guide->target).array().colwise() * guide->mask->col(0).array();
        ev.grad = 2.0 / std::sqrt(ab) * r;
      }
      return ev;
    }
    grad::Tape tape(false);
    Var xv = tape.input(x, true);
    Var f = model_.net->forward(tape, geom_, xv, t);
    Var tx0;
    if (model_.mode == ParamMode::X0Pred) {
      tx0 = mollify_var(f, moll_);
    } else {
      tx0 = grad::scale(grad::sub(xv, grad::scale(f, std::sqrt(1.0 - ab))), 1.0 / std::sqrt(ab));
    }
    Mat mask_full = guide->mask->col(0).replicate(1, x.cols());
    Var r = grad::mul(grad::sub(tx0, tape.constant(*guide->target)), tape.constant(std::move(mask_full)));
    Var loss = grad::sum(grad::mul(r, r));
    tape.backward(loss);
    ev.f = f.value();
    ev.eps = model_.mode == ParamMode::X0Pred ? noise_from_x0pred(x, ev.f, t, model_.schedule, moll_) : ev.f;
    ev.grad = tape.grad(xv.id());
    return ev;
  }

  const DiffusionModel& model_;
  RegularGrid grid_;
  Mollifier moll_;
  Geometry geom_;
};

int channels_of(const DiffusionModel& model) { return model.net->config().channels; }

}  // namespace

SampleResult sample(const DiffusionModel& model, const RegularGrid& grid, const SampleOptions& opts) {
  const ReverseProcess rp(model, grid);
  Mat x = rp.mollifier().sample_noise(mix_seed(opts.seed, 0x5A3F), channels_of(model)).values;
  Field raw = Field::on_grid(grid, rp.run(std::move(x), model.schedule.steps(), opts, nullptr));
  return {demollify(raw, rp.mollifier(), model.wiener), raw};
}

SampleResult super_resolve(const DiffusionModel& model, const Field& input, const RegularGrid& target, int t_start,
                           const SampleOptions& opts) {
  if (!input.grid) throw Error("super_resolve: input must be a full grid");
  if (target.rank() != input.grid->rank() || target.size() < input.grid->size()) {
    throw Error("super_resolve: target grid is coarser than the input");
  }
  for (int a = 0; a < target.rank(); ++a) {
    if (target.dims[a] < input.grid->dims[a]) throw Error("super_resolve: target grid is coarser than the input");
  }
  if (t_start < 0 || t_start > model.schedule.steps()) throw Error("super_resolve: t_start out of range");
  const Field up = Field::on_grid(target, knn_interpolate(input, grid_coords(target), 4));
  if (t_start == 0) return {up, up};
  const ReverseProcess rp(model, target);
  const DiffusionState st = forward_sample(up, t_start, model.schedule, rp.mollifier(), mix_seed(opts.seed, 0x5E7));
  Field raw = Field::on_grid(target, rp.run(st.x_t.values, t_start, opts, nullptr));
  return {demollify(raw, rp.mollifier(), model.wiener), raw};
}

SampleResult inpaint(const DiffusionModel& model, const Field& observed, const Mat& mask, const InpaintOptions& opts) {
  if (!observed.grid) throw Error("inpaint: observation must be a full grid");
  if (opts.lambda < 0.0) throw Error("inpaint: lambda must be >= 0");
  if (mask.rows() != observed.values.rows() || mask.cols() != 1) throw Error("inpaint: mask must be m x 1");
  const int T = model.schedule.steps();
  const int t_start = opts.t_start == 0 ? T : opts.t_start;
  if (t_start < 1 || t_start > T) throw Error("inpaint: t_start out of range");
  const ReverseProcess rp(model, *observed.grid);
  const Mat target = rp.mollifier().apply(observed.values);
  const DiffusionState st =
      forward_sample(observed, t_start, model.schedule, rp.mollifier(), mix_seed(opts.sampling.seed, 0x1A9));
  const Guidance guide{&target, &mask, opts.lambda, opts.jacobian_free};
  Field raw = Field::on_grid(*observed.grid, rp.run(st.x_t.values, t_start, opts.sampling, &guide));
  return {demollify(raw, rp.mollifier(), model.wiener), raw};
}

}  // namespace hdiff
