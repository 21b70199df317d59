#include "hdiff/oracles/suite.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <numbers>
#include <ostream>

#include "hdiff/denoiser.hpp"
#include "hdiff/diffusion.hpp"
#include "hdiff/grad/gradcheck.hpp"
#include "hdiff/grad/ops.hpp"
#include "hdiff/mollifier.hpp"
#include "hdiff/oracles/dense.hpp"
#include "hdiff/rng.hpp"
#include "hdiff/sparse_conv.hpp"

namespace hdiff::oracle {
namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

double max_abs(const Mat& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

double rel_err(const Mat& a, const Mat& b) { return max_abs(a - b) / std::max(max_abs(b), 1e-12); }

double knn_check(std::uint64_t seed) {
  Rng rng(seed);
  double err = 0.0;
  for (int trial = 0; trial < 4; ++trial) {
    const Eigen::Index m = 64 << trial;
    const Mat src = random_mat(m, 2, rng, 0.0, 1.0);
    const Mat dst = random_mat(200, 2, rng, 0.0, 1.0);
    const Mat vals = random_mat(m, 3, rng);
    const int k = 1 + trial * 2;
    const InterpWeights w = knn_weights(src, dst, k);
    for (Eigen::Index q = 0; q < dst.rows(); ++q) {
      const auto nb = knn(src, dst.row(q).eval().data(), k);
      for (int j = 0; j < k; ++j) {
        if (w.index[static_cast<std::size_t>(q) * k + j] != nb[j].second) err += 1.0;
      }
    }
    err = std::max(err, max_abs(w.apply(vals) - oracle::knn_interpolate(src, vals, dst, k)));
  }
  return err;
}

double downsample_check(std::uint64_t seed) {
  Rng rng(seed);
  const Mat src = random_mat(300, 2, rng, 0.0, 1.0);
  const Field f(src, random_mat(300, 1, rng));
  const RegularGrid g = RegularGrid::square(12);
  return max_abs(downsample_to_grid(f, g, 4).values - oracle::knn_interpolate(src, f.values, grid_coords(g), 4));
}

double mollify_dense_check(std::uint64_t seed) {
  Rng rng(seed);
  double err = 0.0;
  for (int res : {8, 16}) {
    const RegularGrid g = RegularGrid::square(res);
    const double l = l_from_pixel_variance(1.0, res);
    const Mat t = mollifier_matrix(l, g);
    const Mat x = random_mat(static_cast<Eigen::Index>(g.size()), 2, rng);
    err = std::max(err, max_abs(Mollifier(l, g).apply(x) - t * x));
  }
  return err;
}

double adjoint_check(std::uint64_t seed) {
  Rng rng(seed);
  const RegularGrid g = RegularGrid::square(16);
  const Mollifier moll(l_from_pixel_variance(2.0, 16), g);
  double err = 0.0;
  for (int i = 0; i < 10; ++i) {
    const Mat x = random_mat(256, 1, rng);
    const Mat y = random_mat(256, 1, rng);
    err = std::max(err, std::abs(moll.apply(x).cwiseProduct(y).sum() - x.cwiseProduct(moll.apply_adjoint(y)).sum()));
  }
  const Mat t = mollifier_matrix(moll.l(), g);
  return std::max(err, max_abs(t - t.transpose()));
}

double noise_cov_check(std::uint64_t seed) {
  const RegularGrid g({8});
  const double l = l_from_pixel_variance(1.0, 8);
  const Mollifier moll(l, g);
  const Mat t = mollifier_matrix(l, g);
  const Mat cov = t * t.transpose();
  Mat acc = Mat::Zero(8, 8);
  Mat mean = Mat::Zero(8, 1);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Mat s = moll.sample_noise(mix_seed(seed, static_cast<std::uint64_t>(i))).values;
    acc += s * s.transpose();
    mean += s;
  }
  return std::max(max_abs(acc / n - cov), max_abs(mean / n));
}

double parseval_check() {
  const RegularGrid g = RegularGrid::square(8);
  const double l = l_from_pixel_variance(1.5, 8);
  const Mat t = mollifier_matrix(l, g);
  const Mollifier moll(l, g);
  double s2 = 0.0;
  for (double s : moll.symbol()) s2 += s * s;
  return std::abs((t * t.transpose()).trace() - s2);
}

double kernel_centre_check() {
  const RegularGrid g({64});
  const double l = 1.0 / (64.0 * 64.0);
  const Mat k = kernel_weights(l, g);
  // Direct evaluation: unnormalised centre over the unnormalised periodic sum.
  double total = 0.0;
  for (int j = 0; j < 64; ++j) {
    for (int img = -8; img <= 8; ++img) {
      const double y = j / 64.0 + img;
      total += std::exp(-y * y / (4.0 * l));
    }
  }
  double centre = 0.0;
  for (int img = -8; img <= 8; ++img) centre += std::exp(-(1.0 * img * img) / (4.0 * l));
  return std::abs(k(0, 0) - centre / total);
}

double cosine_table_check() {
  const int steps = 10;
  const double s = 0.008;
  const NoiseSchedule sched = NoiseSchedule::cosine(steps, s, 0.999);
  auto f = [&](double t) {
    const double c = std::cos((t / steps + s) / (1.0 + s) * std::numbers::pi / 2.0);
    return c * c;
  };
  double err = 0.0;
  for (int t = 1; t <= steps; ++t) {
    const double beta = std::min(1.0 - f(t) / f(t - 1), 0.999);
    err = std::max(err, std::abs(sched.at(t).beta - beta));
    const StepCoefficients c = sched.at(t);
    err = std::max(err, std::abs(c.beta_tilde - (1.0 - c.alpha_bar_prev) / (1.0 - c.alpha_bar) * c.beta));
  }
  return err;
}

double forward_mc_check(std::uint64_t seed) {
  const RegularGrid g({8});
  const double l = l_from_pixel_variance(1.0, 8);
  const Mollifier moll(l, g);
  const NoiseSchedule sched = NoiseSchedule::cosine(10);
  const int t = 4;
  Rng rng(seed);
  const Field x0 = Field::on_grid(g, random_mat(8, 1, rng));
  const Mat tm = mollifier_matrix(l, g);
  const double ab = sched.alpha_bar(t);
  const Mat mean_ref = std::sqrt(ab) * tm * x0.values;
  const Mat cov_ref = (1.0 - ab) * tm * tm.transpose();
  Mat mean = Mat::Zero(8, 1);
  Mat acc = Mat::Zero(8, 8);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Mat x = forward_sample(x0, t, sched, moll, mix_seed(seed, 1, static_cast<std::uint64_t>(i))).x_t.values;
    mean += x;
    acc += (x - mean_ref) * (x - mean_ref).transpose();
  }
  return std::max(max_abs(mean / n - mean_ref), max_abs(acc / n - cov_ref));
}

double composition_check() {
  const RegularGrid g({16});
  const Mat tm = mollifier_matrix(l_from_pixel_variance(1.0, 16), g);
  const NoiseSchedule sched = NoiseSchedule::cosine(10);
  const Mat c = tm * tm.transpose();
  double err = 0.0;
  for (int t = 1; t <= 10; ++t) {
    err = std::max(err, max_abs(composed_covariance(tm, t, sched) - (1.0 - sched.alpha_bar(t)) * c));
  }
  return err;
}

double posterior_check(std::uint64_t seed) {
  Rng rng(seed);
  const NoiseSchedule sched = NoiseSchedule::cosine(10);
  double err = 0.0;
  for (int m : {8, 16, 64}) {
    for (double var_px : {0.25, 0.5, 1.0}) {
      const RegularGrid g({m});
      const double l = l_from_pixel_variance(var_px, m);
      const Mat tm = mollifier_matrix(l, g);
      const Mollifier moll(l, g);
      for (int t = 2; t <= 10; ++t) {
        const Mat x0 = random_mat(m, 1, rng);
        const Mat xt = forward_sample(Field::on_grid(g, x0), t, sched, moll, rng.next()).x_t.values;
        const GaussianPosterior ref = condition_posterior(tm, x0, xt, t, sched);
        const Posterior p = posterior_params(xt, moll.apply(x0), t, sched);
        err = std::max(err, rel_err(p.mean, ref.mean));
        err = std::max(err, rel_err(p.variance * tm * tm.transpose(), ref.cov));
      }
    }
  }
  return err;
}

double parameterisation_check(std::uint64_t seed) {
  Rng rng(seed);
  const RegularGrid g = RegularGrid::square(8);
  const Mollifier moll(l_from_pixel_variance(0.5, 8), g);
  const NoiseSchedule sched = NoiseSchedule::cosine(100);
  double err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int t = 1 + static_cast<int>(rng.below(100));
    const Mat xt = random_mat(64, 1, rng);
    const Mat eps = moll.apply(random_mat(64, 1, rng));
    const double ab = sched.alpha_bar(t);
    const Mat x0 = moll.apply_exact_inverse(xt - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
    err = std::max(err, max_abs(mu_from_noisepred(xt, eps, t, sched) - mu_from_x0pred(xt, x0, t, sched, moll)));
  }
  return err;
}

double ddim_affine_check(std::uint64_t seed) {
  // Toy denoiser eps = a x + b keeps every DDIM step affine, so the chain
  // collapses to x_0 = A x_T + B computed in scalar arithmetic.
  Rng rng(seed);
  const NoiseSchedule sched = NoiseSchedule::cosine(100);
  const std::vector<int> ts = strided_timesteps(100, 10);
  const double a = 0.3;
  const Mat b = random_mat(16, 1, rng, -0.1, 0.1);
  const Mat x_start = random_mat(16, 1, rng);
  Mat x = x_start;
  double A = 1.0;
  Mat B = Mat::Zero(16, 1);
  for (std::size_t j = ts.size(); j-- > 0;) {
    const int t = ts[j];
    const int tp = j > 0 ? ts[j - 1] : 0;
    x = ddim_step(x, a * x + b, t, tp, sched);
    const double ab = sched.alpha_bar(t);
    const double abp = sched.alpha_bar(tp);
    // x' = c1 x + c2 eps with c1 = sqrt(abp/ab), c2 = sqrt(1-abp) - sqrt(abp (1-ab) / ab)
    const double c1 = std::sqrt(abp / ab);
    const double c2 = std::sqrt(1.0 - abp) - std::sqrt(abp * (1.0 - ab) / ab);
    B = (c1 + c2 * a) * B + c2 * b;
    A = (c1 + c2 * a) * A;
  }
  return max_abs(x - (A * x_start + B));
}

double ancestral_posterior_check(std::uint64_t seed) {
  Rng rng(seed);
  const RegularGrid g = RegularGrid::square(8);
  const Mollifier moll(l_from_pixel_variance(1.0, 8), g);
  const NoiseSchedule sched = NoiseSchedule::cosine(50, 0.008, 0.999, Sigma2Choice::BetaTilde);
  double err = 0.0;
  for (int t : {1, 2, 10, 50}) {
    const Field x0 = Field::on_grid(g, random_mat(64, 1, rng));
    const DiffusionState st = forward_sample(x0, t, sched, moll, rng.next());
    const Mat mean = posterior_params(st.x_t.values, st.tx0->values, t, sched).mean;
    err = std::max(err, max_abs(mu_from_noisepred(st.x_t.values, st.t_xi->values, t, sched) - mean));
    if (t == 1) {
      // sigma_1 = 0 under beta_tilde, so the step is the posterior mean.
      err = std::max(err, max_abs(ancestral_step(st.x_t.values, x0.values, 1, sched, moll, ParamMode::X0Pred, 1) - mean));
      err = std::max(err, max_abs(ancestral_step(st.x_t.values, st.t_xi->values, 1, sched, moll, ParamMode::NoisePred,
                                                 1) - mean));
    }
  }
  return err;
}

double sparse_dense_check(std::uint64_t seed) {
  Rng rng(seed);
  double err = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int res = 4 + static_cast<int>(rng.below(29));
    const int k = 1 + 2 * static_cast<int>(rng.below(4));
    const int ch = 1 + static_cast<int>(rng.below(4));
    const Mat coords = grid_coords(RegularGrid::square(res));
    const Mat v = random_mat(coords.rows(), ch, rng);
    const Mat kern = random_mat(k * k, ch, rng);
    // Footprint radius (k-1)/2 pixels at this resolution.
    const double radius = k > 1 ? 0.5 * (k - 1) / res : 0.25 / res;
    const ConvStencil st = build_stencil(coords, radius, k);
    err = std::max(err, max_abs(sparse_depthwise_conv(v, kern, st) - dense_depthwise_conv(v, res, res, kern, k)));
  }
  return err;
}

double resize_check(std::uint64_t seed) {
  Rng rng(seed);
  const Mat k = random_mat(49, 3, rng);
  double err = max_abs(kernel_resize(k, 7, 13, 2) - bilinear_resize(k, 7, 13));
  err = std::max(err, max_abs(kernel_resize(k, 7, 7, 2) - k));
  return std::max(err, max_abs(kernel_resize(k, 7, 5, 2) - bilinear_resize(k, 7, 5)));
}

double primitive_grad_check(std::uint64_t seed) {
  using namespace grad;
  Rng rng(seed);
  ParamStore ps;
  ps.add("a", random_mat(6, 4, rng));
  ps.add("b", random_mat(4, 5, rng));
  ps.add("c", random_mat(6, 4, rng));
  ps.add("row", random_mat(1, 4, rng));
  ps.add("row2", random_mat(1, 4, rng));
  ps.add("img", random_mat(16, 3, rng));
  ps.add("w", random_mat(27, 2, rng));
  ps.add("bias", random_mat(1, 2, rng));
  auto weights = std::make_shared<InterpWeights>(knn_weights(random_mat(6, 2, rng, 0, 1), random_mat(5, 2, rng, 0, 1), 3));
  const std::vector<std::uint32_t> idx{0, 2, 2, 5, 1};
  const Mat r1 = random_mat(6, 5, rng);
  const Mat r2 = random_mat(6, 4, rng);
  const Mat r3 = random_mat(16, 2, rng);
  const Mat r4 = random_mat(5, 4, rng);
  const Mat r5 = random_mat(16, 3, rng);
  auto loss = [&](Tape& t) {
    Var a = t.param(ps.at(0));
    Var b = t.param(ps.at(1));
    Var c = t.param(ps.at(2));
    Var row = t.param(ps.at(3));
    Var row2 = t.param(ps.at(4));
    Var img = t.param(ps.at(5));
    Var w = t.param(ps.at(6));
    Var bias = t.param(ps.at(7));
    Var s = sum(mul(matmul(a, b), t.constant(r1)));
    s = add(s, sum(mul(silu(add_row(mul(a, c), row)), t.constant(r2))));
    s = add(s, sum(mul(modulate(layer_norm(sub(a, c)), row, row2), t.constant(r2))));
    s = add(s, sum(mul(conv3x3(img, 4, 4, w, bias), t.constant(r3))));
    s = add(s, sum(mul(gather_rows(scale(a, 1.5), idx), t.constant(r4))));
    s = add(s, sum(mul(scatter_add_rows(gather_rows(c, idx), idx, 6), t.constant(r2))));
    s = add(s, sum(mul(interpolate(c, weights), t.constant(r4))));
    s = add(s, sum(mul(upsample2(avg_pool2(img, 4, 4), 2, 2), t.constant(r5))));
    s = add(s, mse(slice_cols(a, 1, 3), slice_cols(c, 0, 3)));
    s = add(s, mean(mul(affine(a, b, t.constant(Mat::Ones(1, 5))), t.constant(r1))));
    return s;
  };
  GradCheckOptions o;
  o.per_group = 1000;
  return grad_check(ps, loss, o).max_rel_err;
}

double denoiser_grad_check(std::uint64_t seed) {
  DenoiserConfig cfg;
  cfg.width = 16;
  cfg.time_dim = 32;
  cfg.train_res = 8;
  cfg.kernel_size = 3;
  cfg.inner_res = 16;
  cfg.zero_init = false;
  cfg.seed = seed;
  Denoiser net(cfg);
  Rng rng(seed);
  const RegularGrid g = RegularGrid::square(8);
  const Geometry geom = net.prepare(grid_coords(g), g);
  const Mat x = random_mat(64, 1, rng);
  const Mat r = random_mat(64, 1, rng);
  auto loss = [&](grad::Tape& t) {
    return grad::sum(grad::mul(net.forward(t, geom, t.constant(x), 37), t.constant(r)));
  };
  grad::GradCheckOptions o;
  o.seed = seed;
  return grad::grad_check(net.params(), loss, o).max_rel_err;
}

}  // namespace

std::vector<Check> all_checks(std::uint64_t seed) {
  return {
      {"knn_vs_exhaustive", 1e-12, [=] { return knn_check(mix_seed(seed, 1)); }},
      {"downsample_to_grid_vs_exhaustive", 1e-12, [=] { return downsample_check(mix_seed(seed, 2)); }},
      {"mollify_vs_dense_matrix", 1e-6, [=] { return mollify_dense_check(mix_seed(seed, 3)); }},
      {"mollify_adjoint_and_symmetry", 1e-9, [=] { return adjoint_check(mix_seed(seed, 4)); }},
      {"mollified_noise_covariance_mc", 0.02, [=] { return noise_cov_check(mix_seed(seed, 5)); }},
      {"noise_trace_parseval", 1e-9, [] { return parseval_check(); }},
      {"kernel_centre_direct_formula", 1e-12, [] { return kernel_centre_check(); }},
      {"cosine_schedule_table", 1e-12, [] { return cosine_table_check(); }},
      {"forward_marginal_mc", 0.02, [=] { return forward_mc_check(mix_seed(seed, 6)); }},
      {"marginal_composition", 1e-9, [] { return composition_check(); }},
      {"posterior_vs_conditioning", 1e-6, [=] { return posterior_check(mix_seed(seed, 7)); }},
      {"parameterisation_equivalence", 1e-5, [=] { return parameterisation_check(mix_seed(seed, 8)); }},
      {"ddim_affine_composition", 1e-7, [=] { return ddim_affine_check(mix_seed(seed, 9)); }},
      {"ancestral_posterior_mean", 1e-6, [=] { return ancestral_posterior_check(mix_seed(seed, 10)); }},
      {"sparse_conv_vs_dense", 1e-6, [=] { return sparse_dense_check(mix_seed(seed, 11)); }},
      {"kernel_resize_vs_bilinear", 1e-12, [=] { return resize_check(mix_seed(seed, 12)); }},
      {"primitive_gradients_fd", 1e-4, [=] { return primitive_grad_check(mix_seed(seed, 13)); }},
      {"denoiser_gradient_fd", 1e-4, [=] { return denoiser_grad_check(mix_seed(seed, 14)); }},
  };
}

CheckResult run_check(const Check& check) {
  const auto start = std::chrono::steady_clock::now();
  double err = 0.0;
  try {
    err = check.measure();
  } catch (const std::exception&) {
    err = std::numeric_limits<double>::infinity();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {check.name, err, check.tolerance, err <= check.tolerance, secs};
}

std::vector<CheckResult> run_suite(const std::vector<Check>& checks) {
  std::vector<CheckResult> out;
  for (const Check& c : checks) out.push_back(run_check(c));
  return out;
}

void write_table(std::ostream& os, const std::vector<CheckResult>& results) {
  os << "name,error,tolerance,status,seconds\n";
  for (const auto& r : results) {
    os << r.name << ',' << r.error << ',' << r.tolerance << ',' << (r.passed ? "PASS" : "FAIL") << ',' << r.seconds
       << '\n';
  }
}

}  // namespace hdiff::oracle
