#include "hdiff/grad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hdiff/rng.hpp"

namespace hdiff::grad {
namespace {

double eval(const LossBuilder& loss) {
  Tape tape;
  return loss(tape).value()(0, 0);
}

}  // namespace

double relative_error(double analytic, double numeric, double abs_floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), abs_floor});
}

GradCheckReport grad_check(ParamStore& params, const LossBuilder& loss, const GradCheckOptions& opts) {
  std::vector<Mat> analytic;
  {
    Tape tape;
    Var l = loss(tape);
    tape.backward(l);
    analytic = tape.param_grads(params);
  }
  GradCheckReport report;
  Rng rng(opts.seed);
  for (std::size_t g = 0; g < params.size(); ++g) {
    Parameter& p = params.at(g);
    const auto size = static_cast<std::size_t>(p.value.size());
    const std::size_t take = std::min(size, static_cast<std::size_t>(std::max(opts.per_group, 1)));
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < take; ++i) std::swap(idx[i], idx[i + rng.below(size - i)]);
    idx.resize(take);
    std::sort(idx.begin(), idx.end());
    ++report.groups;
    for (std::size_t i : idx) {
      double& x = p.value.data()[i];
      const double saved = x;
      x = saved + opts.h;
      const double up = eval(loss);
      x = saved - opts.h;
      const double down = eval(loss);
      x = saved;
      const double numeric = (up - down) / (2.0 * opts.h);
      const double a = analytic[g].data()[i];
      const double err = relative_error(a, numeric, opts.abs_floor);
      report.entries.push_back({p.name, i, a, numeric, err});
      report.max_rel_err = std::max(report.max_rel_err, err);
    }
  }
  report.passed = !report.entries.empty() && report.max_rel_err <= opts.tol;
  return report;
}

}  // namespace hdiff::grad
