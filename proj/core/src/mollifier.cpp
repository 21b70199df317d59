#include "hdiff/mollifier.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>

#include "hdiff/rng.hpp"
#include "fftw_lock.hpp"

namespace hdiff {

std::mutex& detail::fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

namespace {

std::vector<double> periodic_gaussian_1d(double l, int n) {
  std::vector<double> g(n, 0.0);
  // Images beyond |y| = sqrt(160 l) contribute below exp(-40).
  const int images = 1 + static_cast<int>(std::ceil(std::sqrt(160.0 * l)));
  for (int o = 0; o < n; ++o) {
    double s = 0.0;
    for (int j = -images; j <= images; ++j) {
      const double y = static_cast<double>(o) / n + j;
      s += std::exp(-y * y / (4.0 * l));
    }
    g[o] = s;
  }
  return g;
}

std::size_t half_size(const RegularGrid& grid) {
  if (grid.rank() == 1) return static_cast<std::size_t>(grid.dims[0] / 2 + 1);
  return static_cast<std::size_t>(grid.dims[0]) * (grid.dims[1] / 2 + 1);
}

}  // namespace

Mat kernel_weights(double l, const RegularGrid& grid) {
  if (!(l > 0.0)) throw Error("mollifier smoothing parameter must be positive");
  const std::size_t m = grid.size();
  Mat k(static_cast<Eigen::Index>(m), 1);
  // exp(-|y|^2/4l) factorises over axes; the (4 pi l)^{-n/2} prefactor
  // cancels in the renormalisation.
  const std::vector<double> gy = periodic_gaussian_1d(l, grid.dims[0]);
  if (grid.rank() == 1) {
    for (std::size_t i = 0; i < m; ++i) k(static_cast<Eigen::Index>(i), 0) = gy[i];
  } else {
    const std::vector<double> gx = periodic_gaussian_1d(l, grid.dims[1]);
    const int w = grid.dims[1];
    for (int i = 0; i < grid.dims[0]; ++i) {
      for (int j = 0; j < w; ++j) k(static_cast<Eigen::Index>(i) * w + j, 0) = gy[i] * gx[j];
    }
  }
  k /= k.sum();
  return k;
}

struct Mollifier::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  ~Plans() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

Mollifier::Mollifier(double l, RegularGrid grid, std::size_t reference_points)
    : l_(l), grid_(std::move(grid)), kernel_(kernel_weights(l, grid_)) {
  const std::size_t m = grid_.size();
  const std::size_t half = half_size(grid_);
  if (reference_points == 0) reference_points = m;
  noise_std_ = std::sqrt(static_cast<double>(m) / static_cast<double>(reference_points));

  double* real = fftw_alloc_real(m);
  fftw_complex* spec = fftw_alloc_complex(half);
  plans_ = std::make_shared<Plans>();
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    const int rank = grid_.rank();
    plans_->forward = fftw_plan_dft_r2c(rank, grid_.dims.data(), real, spec, FFTW_ESTIMATE);
    plans_->backward = fftw_plan_dft_c2r(rank, grid_.dims.data(), spec, real, FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
  }
  for (std::size_t i = 0; i < m; ++i) real[i] = kernel_(static_cast<Eigen::Index>(i), 0);
  fftw_execute_dft_r2c(plans_->forward, real, spec);
  half_symbol_.resize(half);
  for (std::size_t i = 0; i < half; ++i) half_symbol_[i] = spec[i][0];
  fftw_free(real);
  fftw_free(spec);

  symbol_.resize(m);
  if (grid_.rank() == 1) {
    const int n = grid_.dims[0];
    for (int f = 0; f < n; ++f) symbol_[f] = half_symbol_[std::min(f, n - f)];
  } else {
    const int h = grid_.dims[0];
    const int w = grid_.dims[1];
    const int wh = w / 2 + 1;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const int ii = j < wh ? i : (h - i) % h;
        const int jj = j < wh ? j : w - j;
        symbol_[static_cast<std::size_t>(i) * w + j] = half_symbol_[static_cast<std::size_t>(ii) * wh + jj];
      }
    }
  }
}

template <typename Gain>
Mat Mollifier::filter(const Mat& values, Gain gain) const {
  const std::size_t m = grid_.size();
  if (static_cast<std::size_t>(values.rows()) != m) throw Error("mollify requires full grid");
  const std::size_t half = half_size(grid_);
  double* real = fftw_alloc_real(m);
  fftw_complex* spec = fftw_alloc_complex(half);
  Mat out(values.rows(), values.cols());
  const double inv_m = 1.0 / static_cast<double>(m);
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    for (std::size_t i = 0; i < m; ++i) real[i] = values(static_cast<Eigen::Index>(i), c);
    fftw_execute_dft_r2c(plans_->forward, real, spec);
    for (std::size_t i = 0; i < half; ++i) {
      const double g = gain(half_symbol_[i], i) * inv_m;
      spec[i][0] *= g;
      spec[i][1] *= g;
    }
    fftw_execute_dft_c2r(plans_->backward, spec, real);
    for (std::size_t i = 0; i < m; ++i) out(static_cast<Eigen::Index>(i), c) = real[i];
  }
  fftw_free(real);
  fftw_free(spec);
  return out;
}

Mat Mollifier::apply(const Mat& values) const {
  return filter(values, [](double s, std::size_t) { return s; });
}

Mat Mollifier::apply_adjoint(const Mat& values) const {
  // Real symmetric kernel: the adjoint symbol is the conjugate, which is itself.
  return filter(values, [](double s, std::size_t) { return s; });
}

Mat Mollifier::apply_exact_inverse(const Mat& values) const {
  for (std::size_t i = 0; i < symbol_.size(); ++i) {
    if (std::abs(symbol_[i]) < 1e-12) {
      throw Error("inverse ill-conditioned at frequency " + std::to_string(i));
    }
  }
  return filter(values, [](double s, std::size_t) { return 1.0 / s; });
}

Mat Mollifier::apply_wiener_inverse(const Mat& values, const WienerConfig& cfg) const {
  if (!(cfg.eps > 0.0)) throw Error("Wiener eps must be positive");
  const double e2 = cfg.eps * cfg.eps;
  return filter(values, [e2](double s, std::size_t) { return s / (s * s + e2); });
}

void Mollifier::check_field(const Field& field) const {
  if (!field.grid) throw Error("mollify requires full grid");
  if (!(*field.grid == grid_)) throw Error("field grid does not match mollifier grid");
}

Field Mollifier::mollify(const Field& field) const {
  check_field(field);
  return Field(field.coords, apply(field.values), field.grid);
}

Field Mollifier::mollify_adjoint(const Field& field) const {
  check_field(field);
  return Field(field.coords, apply_adjoint(field.values), field.grid);
}

Field Mollifier::exact_inverse(const Field& field) const {
  check_field(field);
  return Field(field.coords, apply_exact_inverse(field.values), field.grid);
}

Field Mollifier::wiener_inverse(const Field& field, const WienerConfig& cfg) const {
  check_field(field);
  return Field(field.coords, apply_wiener_inverse(field.values, cfg), field.grid);
}

Mat Mollifier::white_noise(std::uint64_t seed, int channels) const {
  Rng rng(seed);
  Mat xi(static_cast<Eigen::Index>(grid_.size()), channels);
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi.data()[i] = noise_std_ * rng.normal();
  return xi;
}

Field Mollifier::sample_noise(std::uint64_t seed, int channels) const {
  return Field::on_grid(grid_, apply(white_noise(seed, channels)));
}

Field sample_mollified_noise(const RegularGrid& grid, double l, std::uint64_t seed, int channels) {
  return Mollifier(l, grid).sample_noise(seed, channels);
}

}  // namespace hdiff
