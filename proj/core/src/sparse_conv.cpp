#include "hdiff/sparse_conv.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "hdiff/field.hpp"

namespace hdiff {
namespace {

// Snaps near-integer cell positions so grid-aligned offsets use one tap.
constexpr double kSnap = 1e-9;

struct Linear1d {
  std::array<int, 2> cell{};
  std::array<double, 2> w{};
};

Linear1d linear_taps(double u, int k) {
  const double r = std::round(u);
  if (std::abs(u - r) < kSnap) u = r;
  u = std::clamp(u, 0.0, static_cast<double>(k - 1));
  int lo = static_cast<int>(std::floor(u));
  if (lo >= k - 1) lo = k - 1;
  const double frac = u - lo;
  Linear1d t;
  t.cell = {lo, std::min(lo + 1, k - 1)};
  t.w = {1.0 - frac, frac};
  return t;
}

}  // namespace

ConvStencil build_stencil(const Mat& coords, double radius, int kernel_size) {
  if (kernel_size < 1 || kernel_size % 2 == 0) throw Error("sparse conv: kernel size must be odd and positive");
  if (!(radius > 0.0)) throw Error("sparse conv: radius must be positive");
  const int dim = static_cast<int>(coords.cols());
  ConvStencil s;
  s.dim = dim;
  s.kernel_size = kernel_size;
  s.radius = radius;
  s.points = static_cast<std::size_t>(coords.rows());
  s.edge_start.push_back(0);
  s.tap_start.push_back(0);
  if (s.points == 0) return s;

  const SpatialHash hash(coords, radius);
  const double centre = 0.5 * (kernel_size - 1);
  const double spacing = kernel_size > 1 ? radius / centre : 1.0;
  std::vector<std::uint32_t> nb;
  for (std::size_t c = 0; c < s.points; ++c) {
    hash.within_box(coords.row(static_cast<Eigen::Index>(c)).data(), radius, nb);
    for (std::uint32_t y : nb) {
      std::array<Linear1d, 2> axis{};
      for (int a = 0; a < dim; ++a) {
        const double off = coords(static_cast<Eigen::Index>(c), a) - coords(y, a);
        axis[a] = kernel_size > 1 ? linear_taps(off / spacing + centre, kernel_size) : Linear1d{{0, 0}, {1.0, 0.0}};
      }
      const std::size_t before = s.tap.size();
      if (dim == 1) {
        for (int i = 0; i < 2; ++i) {
          if (axis[0].w[i] == 0.0) continue;
          s.tap.push_back(static_cast<std::uint32_t>(axis[0].cell[i]));
          s.tap_weight.push_back(axis[0].w[i]);
        }
      } else {
        for (int i = 0; i < 2; ++i) {
          for (int j = 0; j < 2; ++j) {
            const double w = axis[0].w[i] * axis[1].w[j];
            if (w == 0.0) continue;
            s.tap.push_back(static_cast<std::uint32_t>(axis[0].cell[i] * kernel_size + axis[1].cell[j]));
            s.tap_weight.push_back(w);
          }
        }
      }
      if (s.tap.size() == before) continue;
      s.neighbour.push_back(y);
      s.tap_start.push_back(static_cast<std::uint32_t>(s.tap.size()));
    }
    s.edge_start.push_back(static_cast<std::uint32_t>(s.neighbour.size()));
    s.inv_count.push_back(1.0 / static_cast<double>(nb.size()));
  }
  return s;
}

namespace {

void check_shapes(const char* op, const Mat& values, const Mat& kernel, const ConvStencil& s) {
  if (static_cast<std::size_t>(values.rows()) != s.points) {
    throw Error(std::string(op) + ": value rows do not match stencil points");
  }
  const auto cells = static_cast<Eigen::Index>(std::pow(s.kernel_size, s.dim));
  if (kernel.rows() != cells || kernel.cols() != values.cols()) {
    throw Error(std::string(op) + ": kernel must be K^n x channels");
  }
}

// Effective per-channel weight of one edge, accumulated into `w`.
void edge_weight(const ConvStencil& s, std::size_t e, const Mat& kernel, Eigen::Ref<Eigen::RowVectorXd> w) {
  w.setZero();
  for (std::uint32_t q = s.tap_start[e]; q < s.tap_start[e + 1]; ++q) w += s.tap_weight[q] * kernel.row(s.tap[q]);
}

}  // namespace

Mat sparse_depthwise_conv(const Mat& values, const Mat& kernel, const ConvStencil& s) {
  check_shapes("sparse_depthwise_conv", values, kernel, s);
  Mat out = Mat::Zero(values.rows(), values.cols());
  Eigen::RowVectorXd w(values.cols());
  for (std::size_t c = 0; c < s.points; ++c) {
    auto row = out.row(static_cast<Eigen::Index>(c));
    for (std::uint32_t e = s.edge_start[c]; e < s.edge_start[c + 1]; ++e) {
      edge_weight(s, e, kernel, w);
      row += w.cwiseProduct(values.row(s.neighbour[e]));
    }
    row *= s.inv_count[c];
  }
  return out;
}

namespace grad {

Var sparse_depthwise_conv(Var values, Var kernel, std::shared_ptr<const ConvStencil> stencil) {
  const int iv = values.id();
  const int ik = kernel.id();
  Mat out = hdiff::sparse_depthwise_conv(values.value(), kernel.value(), *stencil);
  return values.tape()->record(std::move(out), {values, kernel}, [iv, ik, stencil](Tape& t, int self) {
    const ConvStencil& s = *stencil;
    const Mat& g = t.grad_or_empty(self);
    const Mat& v = t.value(iv);
    const Mat& k = t.value(ik);
    const bool want_v = t.requires_grad(iv);
    const bool want_k = t.requires_grad(ik);
    Mat* gv = want_v ? &t.grad(iv) : nullptr;
    Mat* gk = want_k ? &t.grad(ik) : nullptr;
    Eigen::RowVectorXd w(v.cols());
    Eigen::RowVectorXd gc(v.cols());
    for (std::size_t c = 0; c < s.points; ++c) {
      gc = g.row(static_cast<Eigen::Index>(c)) * s.inv_count[c];
      for (std::uint32_t e = s.edge_start[c]; e < s.edge_start[c + 1]; ++e) {
        const std::uint32_t y = s.neighbour[e];
        if (gv) {
          w.setZero();
          for (std::uint32_t q = s.tap_start[e]; q < s.tap_start[e + 1]; ++q) w += s.tap_weight[q] * k.row(s.tap[q]);
          gv->row(y) += w.cwiseProduct(gc);
        }
        if (gk) {
          for (std::uint32_t q = s.tap_start[e]; q < s.tap_start[e + 1]; ++q) {
            gk->row(s.tap[q]) += s.tap_weight[q] * gc.cwiseProduct(v.row(y));
          }
        }
      }
    }
  });
}

}  // namespace grad

Mat kernel_resize_matrix(int from, int to, int dim) {
  if (from < 1 || to < 1) throw Error("kernel_resize: sizes must be positive");
  if (dim < 1 || dim > 2) throw Error("kernel_resize: dim must be 1 or 2");
  Mat r1 = Mat::Zero(to, from);
  for (int j = 0; j < to; ++j) {
    if (from == 1) {
      r1(j, 0) = 1.0;
      continue;
    }
    const double u = to == 1 ? 0.5 * (from - 1) : static_cast<double>(j) * (from - 1) / (to - 1);
    const Linear1d t = linear_taps(u, from);
    r1(j, t.cell[0]) += t.w[0];
    r1(j, t.cell[1]) += t.w[1];
  }
  if (dim == 1) return r1;
  // Row-major 2D cells: the tensor product of the 1D maps.
  Mat r2(to * to, from * from);
  for (int a = 0; a < to; ++a) {
    for (int b = 0; b < to; ++b) {
      for (int i = 0; i < from; ++i) {
        for (int j = 0; j < from; ++j) r2(a * to + b, i * from + j) = r1(a, i) * r1(b, j);
      }
    }
  }
  return r2;
}

Mat kernel_resize(const Mat& kernel, int from, int to, int dim) {
  const Mat r = kernel_resize_matrix(from, to, dim);
  if (kernel.rows() != r.cols()) throw Error("kernel_resize: kernel rows must be from^dim");
  return r * kernel;
}

}  // namespace hdiff
