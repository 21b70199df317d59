#include "hdiff/grad/ops.hpp"

#include <cmath>
#include <memory>
#include <string>

namespace hdiff::grad {
namespace {

void require(bool ok, const char* op, const std::string& msg) {
  if (!ok) throw Error(std::string(op) + ": " + msg);
}

void same_shape(const Var& a, const Var& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), op, "shape mismatch");
}

void same_tape(const Var& a, const Var& b, const char* op) { require(a.tape() == b.tape(), op, "tapes differ"); }

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b, "matmul");
  require(a.cols() == b.rows(), "matmul", "inner dimensions differ");
  const int ia = a.id();
  const int ib = b.id();
  Mat out = a.value() * b.value();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    if (t.requires_grad(ia)) t.grad(ia).noalias() += g * t.value(ib).transpose();
    if (t.requires_grad(ib)) t.grad(ib).noalias() += t.value(ia).transpose() * g;
  });
}

Var add(Var a, Var b) {
  same_tape(a, b, "add");
  same_shape(a, b, "add");
  const int ia = a.id();
  const int ib = b.id();
  return a.tape()->record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) t.grad(ib) += g;
  });
}

Var sub(Var a, Var b) {
  same_tape(a, b, "sub");
  same_shape(a, b, "sub");
  const int ia = a.id();
  const int ib = b.id();
  return a.tape()->record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ib)) t.grad(ib) -= g;
  });
}

Var mul(Var a, Var b) {
  same_tape(a, b, "mul");
  same_shape(a, b, "mul");
  const int ia = a.id();
  const int ib = b.id();
  Mat out = a.value().cwiseProduct(b.value());
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    if (t.requires_grad(ia)) t.grad(ia) += g.cwiseProduct(t.value(ib));
    if (t.requires_grad(ib)) t.grad(ib) += g.cwiseProduct(t.value(ia));
  });
}

Var scale(Var a, double c) {
  const int ia = a.id();
  return a.tape()->record(c * a.value(), {a}, [ia, c](Tape& t, int self) { t.grad(ia) += c * t.grad_or_empty(self); });
}

Var add_row(Var a, Var row) {
  same_tape(a, row, "add_row");
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row", "row must be 1 x cols");
  const int ia = a.id();
  const int ir = row.id();
  Mat out = a.value().rowwise() + row.value().row(0);
  return a.tape()->record(std::move(out), {a, row}, [ia, ir](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    if (t.requires_grad(ia)) t.grad(ia) += g;
    if (t.requires_grad(ir)) t.grad(ir) += g.colwise().sum();
  });
}

Var modulate(Var a, Var scale_row, Var shift_row) {
  same_tape(a, scale_row, "modulate");
  same_tape(a, shift_row, "modulate");
  require(scale_row.rows() == 1 && scale_row.cols() == a.cols(), "modulate", "scale must be 1 x cols");
  require(shift_row.rows() == 1 && shift_row.cols() == a.cols(), "modulate", "shift must be 1 x cols");
  const int ia = a.id();
  const int is = scale_row.id();
  const int ih = shift_row.id();
  const Eigen::RowVectorXd gain = (scale_row.value().row(0).array() + 1.0).matrix();
  Mat out = (a.value().array().rowwise() * gain.array()).matrix();
  out.rowwise() += shift_row.value().row(0);
  return a.tape()->record(std::move(out), {a, scale_row, shift_row}, [ia, is, ih](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    if (t.requires_grad(ia)) {
      const Eigen::RowVectorXd gain = (t.value(is).row(0).array() + 1.0).matrix();
      t.grad(ia) += (g.array().rowwise() * gain.array()).matrix();
    }
    if (t.requires_grad(is)) t.grad(is) += g.cwiseProduct(t.value(ia)).colwise().sum();
    if (t.requires_grad(ih)) t.grad(ih) += g.colwise().sum();
  });
}

Var affine(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

Var silu(Var a) {
  const int ia = a.id();
  const Mat& x = a.value();
  Mat out = x.array() / (1.0 + (-x.array()).exp());
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, int self) {
    const Mat& x = t.value(ia);
    const Eigen::ArrayXXd s = 1.0 / (1.0 + (-x.array()).exp());
    t.grad(ia).array() += t.grad_or_empty(self).array() * (s + x.array() * s * (1.0 - s));
  });
}

Var layer_norm(Var a, double eps) {
  const int ia = a.id();
  const Mat& x = a.value();
  const Eigen::Index n = x.cols();
  require(n > 0, "layer_norm", "empty rows");
  Mat out(x.rows(), n);
  auto inv_std = std::make_shared<Eigen::VectorXd>(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)(r) = is;
    out.row(r) = (x.row(r).array() - mu) * is;
  }
  return a.tape()->record(std::move(out), {a}, [ia, inv_std](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    const Mat& y = t.value(self);
    Mat& dx = t.grad(ia);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double gm = g.row(r).mean();
      const double gy = g.row(r).dot(y.row(r)) / static_cast<double>(g.cols());
      dx.row(r).array() += (*inv_std)(r) * (g.row(r).array() - gm - y.row(r).array() * gy);
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols", "range out of bounds");
  const int ia = a.id();
  Mat out = a.value().middleCols(start, count);
  return a.tape()->record(std::move(out), {a}, [ia, start, count](Tape& t, int self) {
    t.grad(ia).middleCols(start, count) += t.grad_or_empty(self);
  });
}

Var gather_rows(Var a, const std::vector<std::uint32_t>& index) {
  const int ia = a.id();
  Mat out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] < a.rows(), "gather_rows", "index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  auto idx = std::make_shared<std::vector<std::uint32_t>>(index);
  return a.tape()->record(std::move(out), {a}, [ia, idx](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    Mat& da = t.grad(ia);
    for (std::size_t i = 0; i < idx->size(); ++i) da.row((*idx)[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var scatter_add_rows(Var a, const std::vector<std::uint32_t>& index, Eigen::Index out_rows) {
  require(static_cast<Eigen::Index>(index.size()) == a.rows(), "scatter_add_rows", "index length != rows");
  const int ia = a.id();
  Mat out = Mat::Zero(out_rows, a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] < out_rows, "scatter_add_rows", "index out of range");
    out.row(index[i]) += a.value().row(static_cast<Eigen::Index>(i));
  }
  auto idx = std::make_shared<std::vector<std::uint32_t>>(index);
  return a.tape()->record(std::move(out), {a}, [ia, idx](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    Mat& da = t.grad(ia);
    for (std::size_t i = 0; i < idx->size(); ++i) da.row(static_cast<Eigen::Index>(i)) += g.row((*idx)[i]);
  });
}

Var interpolate(Var a, std::shared_ptr<const InterpWeights> w) {
  const int ia = a.id();
  Mat out = w->apply(a.value());
  return a.tape()->record(std::move(out), {a}, [ia, w](Tape& t, int self) {
    t.grad(ia) += w->apply_transpose(t.grad_or_empty(self));
  });
}

Var sum(Var a) {
  const int ia = a.id();
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(std::move(out), {a}, [ia](Tape& t, int self) {
    t.grad(ia).array() += t.grad_or_empty(self)(0, 0);
  });
}

Var mean(Var a) {
  require(a.value().size() > 0, "mean", "empty input");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var mse(Var a, Var b) {
  same_tape(a, b, "mse");
  same_shape(a, b, "mse");
  require(a.value().size() > 0, "mse", "empty input");
  const int ia = a.id();
  const int ib = b.id();
  const double n = static_cast<double>(a.value().size());
  Mat out(1, 1);
  out(0, 0) = (a.value() - b.value()).squaredNorm() / n;
  return a.tape()->record(std::move(out), {a, b}, [ia, ib, n](Tape& t, int self) {
    const double g = t.grad_or_empty(self)(0, 0) * 2.0 / n;
    const Mat diff = t.value(ia) - t.value(ib);
    if (t.requires_grad(ia)) t.grad(ia) += g * diff;
    if (t.requires_grad(ib)) t.grad(ib) -= g * diff;
  });
}

namespace {

Mat im2col3x3(const Mat& x, int h, int w) {
  const Eigen::Index c = x.cols();
  Mat cols = Mat::Zero(static_cast<Eigen::Index>(h) * w, 9 * c);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * w + j;
      for (int dy = 0; dy < 3; ++dy) {
        const int y = i + dy - 1;
        if (y < 0 || y >= h) continue;
        for (int dx = 0; dx < 3; ++dx) {
          const int xx = j + dx - 1;
          if (xx < 0 || xx >= w) continue;
          cols.block(r, (3 * dy + dx) * c, 1, c) = x.row(static_cast<Eigen::Index>(y) * w + xx);
        }
      }
    }
  }
  return cols;
}

void col2im3x3(const Mat& cols, int h, int w, Mat& dx) {
  const Eigen::Index c = dx.cols();
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * w + j;
      for (int dy = 0; dy < 3; ++dy) {
        const int y = i + dy - 1;
        if (y < 0 || y >= h) continue;
        for (int ddx = 0; ddx < 3; ++ddx) {
          const int xx = j + ddx - 1;
          if (xx < 0 || xx >= w) continue;
          dx.row(static_cast<Eigen::Index>(y) * w + xx) += cols.block(r, (3 * dy + ddx) * c, 1, c);
        }
      }
    }
  }
}

}  // namespace

Var conv3x3(Var x, int h, int w, Var weight, Var bias) {
  same_tape(x, weight, "conv3x3");
  same_tape(x, bias, "conv3x3");
  require(x.rows() == static_cast<Eigen::Index>(h) * w, "conv3x3", "input rows != h*w");
  require(weight.rows() == 9 * x.cols(), "conv3x3", "weight rows != 9*c_in");
  require(bias.rows() == 1 && bias.cols() == weight.cols(), "conv3x3", "bias must be 1 x c_out");
  const int ix = x.id();
  const int iw = weight.id();
  const int ib = bias.id();
  auto cols = std::make_shared<Mat>(im2col3x3(x.value(), h, w));
  Mat out = (*cols) * weight.value();
  out.rowwise() += bias.value().row(0);
  return x.tape()->record(std::move(out), {x, weight, bias}, [ix, iw, ib, cols, h, w](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    if (t.requires_grad(iw)) t.grad(iw).noalias() += cols->transpose() * g;
    if (t.requires_grad(ib)) t.grad(ib) += g.colwise().sum();
    if (t.requires_grad(ix)) {
      const Mat dcols = g * t.value(iw).transpose();
      col2im3x3(dcols, h, w, t.grad(ix));
    }
  });
}

Var avg_pool2(Var x, int h, int w) {
  require(h % 2 == 0 && w % 2 == 0, "avg_pool2", "grid dims must be even");
  require(x.rows() == static_cast<Eigen::Index>(h) * w, "avg_pool2", "input rows != h*w");
  const int ix = x.id();
  const int ho = h / 2;
  const int wo = w / 2;
  Mat out = Mat::Zero(static_cast<Eigen::Index>(ho) * wo, x.cols());
  const Mat& v = x.value();
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      out.row(static_cast<Eigen::Index>(i / 2) * wo + j / 2) += 0.25 * v.row(static_cast<Eigen::Index>(i) * w + j);
    }
  }
  return x.tape()->record(std::move(out), {x}, [ix, h, w, wo](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    Mat& dx = t.grad(ix);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        dx.row(static_cast<Eigen::Index>(i) * w + j) += 0.25 * g.row(static_cast<Eigen::Index>(i / 2) * wo + j / 2);
      }
    }
  });
}

Var upsample2(Var x, int h, int w) {
  require(x.rows() == static_cast<Eigen::Index>(h) * w, "upsample2", "input rows != h*w");
  const int ix = x.id();
  const int ho = 2 * h;
  const int wo = 2 * w;
  Mat out(static_cast<Eigen::Index>(ho) * wo, x.cols());
  const Mat& v = x.value();
  for (int i = 0; i < ho; ++i) {
    for (int j = 0; j < wo; ++j) {
      out.row(static_cast<Eigen::Index>(i) * wo + j) = v.row(static_cast<Eigen::Index>(i / 2) * w + j / 2);
    }
  }
  return x.tape()->record(std::move(out), {x}, [ix, w, ho, wo](Tape& t, int self) {
    const Mat& g = t.grad_or_empty(self);
    Mat& dx = t.grad(ix);
    for (int i = 0; i < ho; ++i) {
      for (int j = 0; j < wo; ++j) {
        dx.row(static_cast<Eigen::Index>(i / 2) * w + j / 2) += g.row(static_cast<Eigen::Index>(i) * wo + j);
      }
    }
  });
}

}  // namespace hdiff::grad
