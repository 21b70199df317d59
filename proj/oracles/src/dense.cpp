#include "hdiff/oracles/dense.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

namespace hdiff::oracle {

Mat mollifier_matrix(double l, const RegularGrid& grid) {
  const Mat c = grid_coords(grid);
  const auto m = c.rows();
  const int n = grid.rank();
  Mat t(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      double k = 1.0;
      for (int a = 0; a < n; ++a) {
        // Periodic images within +-8 domain lengths; the tail is far below double precision.
        double s = 0.0;
        for (int img = -8; img <= 8; ++img) {
          const double y = c(i, a) - c(j, a) + img;
          s += std::exp(-y * y / (4.0 * l)) / std::sqrt(4.0 * std::numbers::pi * l);
        }
        k *= s;
      }
      t(i, j) = k;
    }
  }
  // Row normalisation so the discrete kernel sums to 1.
  for (Eigen::Index i = 0; i < m; ++i) t.row(i) /= t.row(i).sum();
  return t;
}

std::vector<std::pair<double, std::uint32_t>> knn(const Mat& points, const double* query, int k) {
  std::vector<std::pair<double, std::uint32_t>> all;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double d2 = 0.0;
    for (Eigen::Index a = 0; a < points.cols(); ++a) d2 += (points(i, a) - query[a]) * (points(i, a) - query[a]);
    all.emplace_back(d2, static_cast<std::uint32_t>(i));
  }
  std::sort(all.begin(), all.end());
  all.resize(std::min<std::size_t>(all.size(), static_cast<std::size_t>(k)));
  return all;
}

Mat knn_interpolate(const Mat& src_coords, const Mat& src_values, const Mat& dst_coords, int k) {
  Mat out = Mat::Zero(dst_coords.rows(), src_values.cols());
  for (Eigen::Index q = 0; q < dst_coords.rows(); ++q) {
    const Eigen::RowVectorXd p = dst_coords.row(q);
    const auto nb = knn(src_coords, p.data(), k);
    bool exact = false;
    for (const auto& [d2, i] : nb) {
      if (d2 == 0.0) {
        out.row(q) = src_values.row(i);
        exact = true;
        break;
      }
    }
    if (exact) continue;
    double total = 0.0;
    for (const auto& [d2, i] : nb) total += 1.0 / (std::sqrt(d2) + 1e-8);
    for (const auto& [d2, i] : nb) out.row(q) += (1.0 / (std::sqrt(d2) + 1e-8)) / total * src_values.row(i);
  }
  return out;
}

GaussianPosterior condition_posterior(const Mat& T, const Mat& x0, const Mat& x_t, int t, const NoiseSchedule& sched) {
  const Mat C = T * T.transpose();
  const double ab_t = sched.alpha_bar(t);
  const double ab_p = sched.alpha_bar(t - 1);
  const double alpha_t = ab_t / ab_p;
  // x_{t-1} = sqrt(ab_p) T x0 + sqrt(1-ab_p) T e1
  // x_t = sqrt(alpha_t) x_{t-1} + sqrt(1-alpha_t) T e2
  const Mat mu1 = std::sqrt(ab_p) * T * x0;
  const Mat mu2 = std::sqrt(ab_t) * T * x0;
  const Mat s11 = (1.0 - ab_p) * C;
  const Mat s12 = std::sqrt(alpha_t) * (1.0 - ab_p) * C;
  const Mat s22 = alpha_t * (1.0 - ab_p) * C + (1.0 - alpha_t) * C;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt{Eigen::MatrixXd(s22)};
  const Eigen::MatrixXd gain = ldlt.solve(Eigen::MatrixXd(s12.transpose())).transpose();
  GaussianPosterior post;
  post.mean = mu1 + gain * (x_t - mu2);
  post.cov = s11 - gain * s12.transpose();
  return post;
}

Mat composed_covariance(const Mat& T, int t, const NoiseSchedule& sched) {
  const Mat C = T * T.transpose();
  Mat cov = Mat::Zero(C.rows(), C.cols());
  for (int s = 1; s <= t; ++s) {
    const double beta = sched.betas()[static_cast<std::size_t>(s - 1)];
    cov = (1.0 - beta) * cov + beta * C;
  }
  return cov;
}

Mat dense_depthwise_conv(const Mat& values, int h, int w, const Mat& kernel, int kernel_size) {
  const int r = kernel_size / 2;
  Mat out = Mat::Zero(values.rows(), values.cols());
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      int count = 0;
      for (int a = 0; a < kernel_size; ++a) {
        for (int b = 0; b < kernel_size; ++b) {
          // Kernel cell (a, b) holds offset c - y = (a - r, b - r).
          const int yi = i - (a - r);
          const int yj = j - (b - r);
          if (yi < 0 || yi >= h || yj < 0 || yj >= w) continue;
          ++count;
          out.row(i * w + j) += kernel.row(a * kernel_size + b).cwiseProduct(values.row(yi * w + yj));
        }
      }
      out.row(i * w + j) /= count;
    }
  }
  return out;
}

Mat bilinear_resize(const Mat& kernel, int from, int to) {
  Mat out(to * to, kernel.cols());
  auto at = [&](int i, int j) { return kernel.row(i * from + j); };
  for (int a = 0; a < to; ++a) {
    for (int b = 0; b < to; ++b) {
      const double u = to == 1 ? 0.5 * (from - 1) : a * (from - 1.0) / (to - 1.0);
      const double v = to == 1 ? 0.5 * (from - 1) : b * (from - 1.0) / (to - 1.0);
      const int i0 = std::min(static_cast<int>(u), from - 1);
      const int j0 = std::min(static_cast<int>(v), from - 1);
      const int i1 = std::min(i0 + 1, from - 1);
      const int j1 = std::min(j0 + 1, from - 1);
      const double fu = u - i0;
      const double fv = v - j0;
      out.row(a * to + b) = (1 - fu) * (1 - fv) * at(i0, j0) + (1 - fu) * fv * at(i0, j1) +
                            fu * (1 - fv) * at(i1, j0) + fu * fv * at(i1, j1);
    }
  }
  return out;
}

Mat numeric_gradient(const std::function<double(const Mat&)>& f, const Mat& x, double h) {
  Mat g(x.rows(), x.cols());
  Mat xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double s = xp.data()[i];
    xp.data()[i] = s + h;
    const double up = f(xp);
    xp.data()[i] = s - h;
    const double down = f(xp);
    xp.data()[i] = s;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace hdiff::oracle
