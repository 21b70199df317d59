#include "hdiff/eval.hpp"

#include <fftw3.h>
#include <sys/resource.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "fftw_lock.hpp"
#include "hdiff/dataset.hpp"
#include "hdiff/trainer.hpp"

namespace hdiff {
namespace {

Mat flatten(const std::vector<Field>& fields) {
  if (fields.empty()) return {};
  const Eigen::Index n = fields.front().values.size();
  Mat out(static_cast<Eigen::Index>(fields.size()), n);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].values.size() != n) throw Error("mmd: fields must share a size");
    out.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(fields[i].values.data(), n);
  }
  return out;
}

Mat sq_dists(const Mat& a, const Mat& b) {
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Mat d = (-2.0 * a * b.transpose()).eval();
  d.colwise() += na;
  d.rowwise() += nb.transpose();
  return d.cwiseMax(0.0);
}

}  // namespace

double psnr(const Mat& reference, const Mat& estimate) {
  if (reference.rows() != estimate.rows() || reference.cols() != estimate.cols() || reference.size() == 0) {
    throw Error("psnr: shape mismatch");
  }
  const double mse = (reference - estimate).squaredNorm() / static_cast<double>(reference.size());
  const double peak = reference.maxCoeff() - reference.minCoeff();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double median_pairwise_distance(const std::vector<Field>& a, const std::vector<Field>& b) {
  std::vector<Field> all(a);
  all.insert(all.end(), b.begin(), b.end());
  const Mat x = flatten(all);
  const Mat d = sq_dists(x, x);
  std::vector<double> v;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < d.cols(); ++j) v.push_back(std::sqrt(d(i, j)));
  }
  if (v.empty()) throw Error("mmd: need at least two fields");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

double mmd(const std::vector<Field>& a, const std::vector<Field>& b, const MmdOptions& opts) {
  if (a.size() < 2 || b.size() < 2) throw Error("mmd: each sample set needs at least two fields");
  double bw = opts.bandwidth > 0.0 ? opts.bandwidth : median_pairwise_distance(a, b);
  if (!(bw > 0.0)) bw = 1.0;
  const Mat xa = flatten(a);
  const Mat xb = flatten(b);
  const double g = -1.0 / (2.0 * bw * bw);
  const Mat kaa = (sq_dists(xa, xa) * g).array().exp().matrix();
  const Mat kbb = (sq_dists(xb, xb) * g).array().exp().matrix();
  const Mat kab = (sq_dists(xa, xb) * g).array().exp().matrix();
  const auto n = static_cast<double>(a.size());
  const auto m = static_cast<double>(b.size());
  if (opts.unbiased) {
    return (kaa.sum() - kaa.trace()) / (n * (n - 1)) + (kbb.sum() - kbb.trace()) / (m * (m - 1)) -
           2.0 * kab.sum() / (n * m);
  }
  return kaa.sum() / (n * n) + kbb.sum() / (m * m) - 2.0 * kab.sum() / (n * m);
}

std::vector<double> radial_spectrum(const Field& field) {
  if (!field.grid || field.grid->rank() != 2) throw Error("radial_spectrum requires a 2D grid field");
  const int h = field.grid->dims[0];
  const int w = field.grid->dims[1];
  const int bins = std::min(h, w) / 2 + 1;
  std::vector<double> power(static_cast<std::size_t>(bins), 0.0);
  std::vector<int> count(static_cast<std::size_t>(bins), 0);
  const double m = static_cast<double>(h) * w;
  const int wc = w / 2 + 1;
  std::vector<double> in(static_cast<std::size_t>(h) * w);
  std::vector<fftw_complex> out(static_cast<std::size_t>(h) * wc);
  fftw_plan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_2d(h, w, in.data(), out.data(), FFTW_ESTIMATE);
  }
  for (int c = 0; c < field.channels(); ++c) {
    for (std::size_t i = 0; i < in.size(); ++i) in[i] = field.values(static_cast<Eigen::Index>(i), c);
    fftw_execute(plan);
    for (int ky = 0; ky < h; ++ky) {
      const int fy = ky <= h / 2 ? ky : ky - h;
      for (int kx = 0; kx < w; ++kx) {
        const int fx = kx <= w / 2 ? kx : kx - w;
        const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(fx * fx + fy * fy))));
        if (r >= bins) continue;
        // The r2c output stores half the spectrum; mirror for the rest.
        const int sx = kx < wc ? kx : w - kx;
        const int sy = kx < wc ? ky : (h - ky) % h;
        const fftw_complex& z = out[static_cast<std::size_t>(sy) * wc + sx];
        power[r] += (z[0] * z[0] + z[1] * z[1]) / (m * m);
        ++count[r];
      }
    }
  }
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  for (int r = 0; r < bins; ++r) {
    if (count[r] > 0) power[r] /= count[r];
  }
  return power;
}

std::vector<double> mean_radial_spectrum(const std::vector<Field>& fields) {
  if (fields.empty()) throw Error("mean_radial_spectrum: no fields");
  std::vector<double> acc;
  for (const Field& f : fields) {
    const std::vector<double> s = radial_spectrum(f);
    if (acc.empty()) acc.assign(s.size(), 0.0);
    if (s.size() != acc.size()) throw Error("mean_radial_spectrum: fields must share a resolution");
    for (std::size_t i = 0; i < s.size(); ++i) acc[i] += s[i];
  }
  for (double& v : acc) v /= static_cast<double>(fields.size());
  return acc;
}

std::vector<ChannelStats> channel_stats(const std::vector<Field>& fields) {
  if (fields.empty()) throw Error("channel_stats: no fields");
  const int d = fields.front().channels();
  std::vector<ChannelStats> out(static_cast<std::size_t>(d));
  for (int c = 0; c < d; ++c) {
    double s = 0.0;
    double s2 = 0.0;
    double n = 0.0;
    for (const Field& f : fields) {
      s += f.values.col(c).sum();
      s2 += f.values.col(c).squaredNorm();
      n += static_cast<double>(f.values.rows());
    }
    const double mean = s / n;
    out[static_cast<std::size_t>(c)] = {mean, std::sqrt(std::max(s2 / n - mean * mean, 0.0))};
  }
  return out;
}

std::vector<DenoiseRow> denoise_mse_curve(const Denoiser& net, const TrainConfig& cfg, const std::vector<Field>& data,
                                          const std::vector<int>& ts, int draws, std::uint64_t seed) {
  if (data.empty()) throw Error("denoise_mse_curve: empty dataset");
  const NoiseSchedule sched = cfg.noise_schedule();
  const Mollifier moll(cfg.mollifier_l(), *data.front().grid);
  const Geometry geom = net.prepare(data.front().coords, data.front().grid);
  std::vector<DenoiseRow> rows;
  for (int t : ts) {
    double mse = 0.0;
    double base = 0.0;
    for (int i = 0; i < draws; ++i) {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i)));
      const Field& x0 = data[rng.below(data.size())];
      const DiffusionState st = forward_sample(x0, t, sched, moll, rng.next());
      Mat pred = net.predict(geom, st.x_t.values, t);
      if (cfg.param_mode == ParamMode::X0Pred) pred = noise_from_x0pred(st.x_t.values, pred, t, sched, moll);
      mse += loss_simple(pred, st.t_xi->values);
      base += st.t_xi->values.squaredNorm() / static_cast<double>(st.t_xi->values.size());
    }
    rows.push_back({t, mse / draws, base / draws});
  }
  return rows;
}

std::vector<ResolutionRow> discretisation_report(const DiffusionModel& model, const std::vector<int>& resolutions,
                                                 int n_samples, const SampleOptions& opts) {
  if (n_samples < 2) throw Error("discretisation_report: need at least two samples");
  const RegularGrid native = RegularGrid::square(model.train_res);
  const Mat native_coords = grid_coords(native);
  auto draw = [&](int res) {
    std::vector<Field> out;
    for (int i = 0; i < n_samples; ++i) {
      SampleOptions o = opts;
      o.seed = mix_seed(opts.seed, static_cast<std::uint64_t>(i));
      out.push_back(sample(model, RegularGrid::square(res), o).raw);
    }
    return out;
  };
  const std::vector<Field> ref = draw(model.train_res);
  std::vector<ResolutionRow> rows;
  for (int res : resolutions) {
    const std::vector<Field> s = res == model.train_res ? ref : draw(res);
    std::vector<Field> resampled;
    for (const Field& f : s) resampled.push_back(Field::on_grid(native, knn_interpolate(f, native_coords, 4)));
    rows.push_back({res, channel_stats(s), mean_radial_spectrum(s), mmd(resampled, ref)});
  }
  return rows;
}

namespace {

long peak_rss_kb() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return u.ru_maxrss;
}

}  // namespace

std::vector<RateRow> rate_bench(const TrainConfig& cfg, const std::vector<double>& rates, int steps_per_rate) {
  if (steps_per_rate < 1) throw Error("rate_bench: need at least one step per rate");
  const std::vector<Field> data = make_dataset(cfg.dataset, cfg.data_count, cfg.resolution, cfg.channels, cfg.seed);
  std::vector<RateRow> rows;
  for (double rate : rates) {
    TrainConfig c = cfg;
    c.subsample_rate = rate;
    Trainer trainer(c, data);
    std::vector<double> ms;
    std::size_t tape = 0;
    for (int i = 0; i < steps_per_rate; ++i) {
      const StepStats s = trainer.step();
      ms.push_back(s.wall_ms);
      tape = std::max(tape, s.tape_bytes);
    }
    std::sort(ms.begin(), ms.end());
    const std::size_t n = ms.size();
    const double median = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
    rows.push_back({rate, trainer.coords_per_item(), median, peak_rss_kb(), tape});
  }
  return rows;
}

void write_denoise_csv(std::ostream& os, const std::vector<DenoiseRow>& rows) {
  os << "t,mse,baseline\n";
  for (const auto& r : rows) os << r.t << ',' << r.mse << ',' << r.baseline << '\n';
}

void write_resolution_csv(std::ostream& os, const std::vector<ResolutionRow>& rows) {
  os << "res,channel,mean,std,mmd_vs_native,spectrum\n";
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.stats.size(); ++c) {
      os << r.res << ',' << c << ',' << r.stats[c].mean << ',' << r.stats[c].std << ',' << r.mmd_vs_native << ',';
      for (std::size_t k = 0; k < r.spectrum.size(); ++k) os << (k ? ";" : "") << r.spectrum[k];
      os << '\n';
    }
  }
}

void write_rate_csv(std::ostream& os, const std::vector<RateRow>& rows) {
  os << "rate,coords_used,median_ms,peak_rss_kb,tape_bytes\n";
  for (const auto& r : rows) {
    os << r.rate << ',' << r.coords_used << ',' << r.median_ms << ',' << r.peak_rss_kb << ',' << r.tape_bytes << '\n';
  }
}

}  // namespace hdiff
