#include "hdiff/field.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hdiff/rng.hpp"

namespace hdiff {

RegularGrid::RegularGrid(std::vector<int> d) : dims(std::move(d)) {
  if (dims.empty() || dims.size() > 2) throw Error("grid rank must be 1 or 2");
  for (int v : dims) {
    if (v < 1) throw Error("grid dims must be >= 1");
  }
}

std::size_t RegularGrid::size() const {
  std::size_t m = 1;
  for (int v : dims) m *= static_cast<std::size_t>(v);
  return m;
}

Mat grid_coords(const RegularGrid& grid) {
  const std::size_t m = grid.size();
  Mat c(static_cast<Eigen::Index>(m), grid.rank());
  if (grid.rank() == 1) {
    const int n = grid.dims[0];
    for (int i = 0; i < n; ++i) c(i, 0) = (i + 0.5) / n;
    return c;
  }
  const int h = grid.dims[0];
  const int w = grid.dims[1];
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * w + j;
      c(r, 0) = (i + 0.5) / h;
      c(r, 1) = (j + 0.5) / w;
    }
  }
  return c;
}

Field::Field(Mat c, Mat v, std::optional<RegularGrid> g)
    : coords(std::move(c)), values(std::move(v)), grid(std::move(g)) {
  if (coords.rows() != values.rows()) throw Error("field coords and values row counts differ");
}

Field Field::on_grid(const RegularGrid& grid, Mat values) {
  if (static_cast<std::size_t>(values.rows()) != grid.size()) {
    throw Error("value rows do not match grid size");
  }
  return Field(grid_coords(grid), std::move(values), grid);
}

std::size_t subsample_count(std::size_t m, double rate) {
  if (rate <= 1.0) return m;
  return static_cast<std::size_t>(std::llround(static_cast<double>(m) / rate));
}

CoordinateSubset draw_subset(std::size_t m, double rate, std::uint64_t seed) {
  if (m == 0) throw Error("cannot subsample an empty field");
  CoordinateSubset subset;
  subset.parent_count = m;
  const std::size_t k = subsample_count(m, rate);
  if (k == 0) throw Error("subsampling rate leaves no coordinates");
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (k < m) {
    Rng rng(seed);
    // Partial Fisher-Yates: the first k slots are a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(m - i));
      std::swap(perm[i], perm[j]);
    }
    perm.resize(k);
    std::sort(perm.begin(), perm.end());
  }
  subset.indices = std::move(perm);
  return subset;
}

Mat select_rows(const Mat& m, const CoordinateSubset& subset) {
  Mat out(static_cast<Eigen::Index>(subset.size()), m.cols());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(subset.indices[i]));
  }
  return out;
}

Field select(const Field& field, const CoordinateSubset& subset) {
  if (subset.parent_count != field.size()) throw Error("subset parent count does not match field");
  std::optional<RegularGrid> grid;
  if (subset.size() == field.size()) grid = field.grid;
  return Field(select_rows(field.coords, subset), select_rows(field.values, subset), grid);
}

std::pair<Field, CoordinateSubset> subsample(const Field& field, double rate, std::uint64_t seed) {
  CoordinateSubset subset = draw_subset(field.size(), rate, seed);
  Field out = select(field, subset);
  return {std::move(out), std::move(subset)};
}

// ---------------------------------------------------------------------------
// SpatialHash

SpatialHash::SpatialHash(const Mat& points, double cell_size)
    : points_(points), dim_(static_cast<int>(points.cols())), cell_(cell_size) {
  if (dim_ < 1 || dim_ > 2) throw Error("spatial hash supports 1D and 2D coordinates");
  cell_ = std::max(cell_, 1.0 / 4096.0);
  cells_ = std::max(1, static_cast<int>(std::ceil(1.0 / cell_)));
  const std::size_t ncell = dim_ == 1 ? cells_ : static_cast<std::size_t>(cells_) * cells_;
  std::vector<std::uint32_t> count(ncell + 1, 0);
  std::vector<std::size_t> cell_ids(size());
  for (std::size_t i = 0; i < size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const int cx = cell_of(points_(r, 0));
    const int cy = dim_ == 2 ? cell_of(points_(r, 1)) : 0;
    cell_ids[i] = flat(cx, cy);
    ++count[cell_ids[i] + 1];
  }
  for (std::size_t c = 0; c < ncell; ++c) count[c + 1] += count[c];
  start_ = count;
  ids_.resize(size());
  std::vector<std::uint32_t> cursor(count.begin(), count.end() - 1);
  // Ascending point order inside each bucket.
  for (std::size_t i = 0; i < size(); ++i) ids_[cursor[cell_ids[i]]++] = static_cast<std::uint32_t>(i);
}

int SpatialHash::cell_of(double x) const {
  const int c = static_cast<int>(std::floor(x / cell_));
  return std::clamp(c, 0, cells_ - 1);
}

void SpatialHash::knn(const double* q, int k, std::vector<std::pair<double, std::uint32_t>>& out) const {
  out.clear();
  if (k <= 0) return;
  const int qx = cell_of(q[0]);
  const int qy = dim_ == 2 ? cell_of(q[1]) : 0;
  auto visit = [&](int cx, int cy) {
    if (cx < 0 || cx >= cells_ || cy < 0 || (dim_ == 2 && cy >= cells_)) return;
    const std::size_t c = flat(cx, cy);
    for (std::uint32_t s = start_[c]; s < start_[c + 1]; ++s) {
      const std::uint32_t id = ids_[s];
      double d2 = 0.0;
      for (int a = 0; a < dim_; ++a) {
        const double diff = points_(id, a) - q[a];
        d2 += diff * diff;
      }
      out.emplace_back(d2, id);
    }
  };
  const auto want = static_cast<std::size_t>(k);
  for (int r = 0;; ++r) {
    if (r == 0) {
      visit(qx, qy);
    } else if (dim_ == 1) {
      visit(qx - r, 0);
      visit(qx + r, 0);
    } else {
      for (int dx = -r; dx <= r; ++dx) {
        visit(qx + dx, qy - r);
        visit(qx + dx, qy + r);
      }
      for (int dy = -r + 1; dy <= r - 1; ++dy) {
        visit(qx - r, qy + dy);
        visit(qx + r, qy + dy);
      }
    }
    const bool exhausted = r >= cells_;
    if (out.size() >= want) {
      std::nth_element(out.begin(), out.begin() + (want - 1), out.end());
      const double bound = r * cell_;
      if (out[want - 1].first < bound * bound || exhausted) break;
    } else if (exhausted) {
      break;
    }
  }
  const std::size_t keep = std::min(want, out.size());
  std::partial_sort(out.begin(), out.begin() + keep, out.end());
  out.resize(keep);
}

void SpatialHash::within_box(const double* q, double radius, std::vector<std::uint32_t>& out) const {
  out.clear();
  const double tol = 1e-9;
  const int x0 = cell_of(q[0] - radius - tol);
  const int x1 = cell_of(q[0] + radius + tol);
  const int y0 = dim_ == 2 ? cell_of(q[1] - radius - tol) : 0;
  const int y1 = dim_ == 2 ? cell_of(q[1] + radius + tol) : 0;
  for (int cy = y0; cy <= y1; ++cy) {
    for (int cx = x0; cx <= x1; ++cx) {
      const std::size_t c = flat(cx, cy);
      for (std::uint32_t s = start_[c]; s < start_[c + 1]; ++s) {
        const std::uint32_t id = ids_[s];
        bool inside = true;
        for (int a = 0; a < dim_ && inside; ++a) {
          inside = std::abs(points_(id, a) - q[a]) <= radius + tol;
        }
        if (inside) out.push_back(id);
      }
    }
  }
  std::sort(out.begin(), out.end());
}

// ---------------------------------------------------------------------------
// Interpolation

Mat InterpWeights::apply(const Mat& src) const {
  if (static_cast<std::size_t>(src.rows()) != src_rows) throw Error("interpolation source row mismatch");
  Mat out = Mat::Zero(static_cast<Eigen::Index>(dst_rows), src.cols());
  for (std::size_t i = 0; i < dst_rows; ++i) {
    for (int j = 0; j < k; ++j) {
      const std::size_t e = i * k + j;
      if (weight[e] != 0.0) out.row(static_cast<Eigen::Index>(i)) += weight[e] * src.row(index[e]);
    }
  }
  return out;
}

Mat InterpWeights::apply_transpose(const Mat& dst) const {
  if (static_cast<std::size_t>(dst.rows()) != dst_rows) throw Error("interpolation destination row mismatch");
  Mat out = Mat::Zero(static_cast<Eigen::Index>(src_rows), dst.cols());
  for (std::size_t i = 0; i < dst_rows; ++i) {
    for (int j = 0; j < k; ++j) {
      const std::size_t e = i * k + j;
      if (weight[e] != 0.0) out.row(index[e]) += weight[e] * dst.row(static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

InterpWeights knn_weights(const Mat& src, const Mat& dst, int k) {
  if (src.rows() == 0) throw Error("empty source field");
  if (k < 1) throw Error("k must be >= 1");
  if (src.rows() < k) throw Error("source field has fewer points than k");
  if (src.cols() != dst.cols()) throw Error("coordinate dimension mismatch");
  const double spacing = std::pow(1.0 / static_cast<double>(src.rows()), 1.0 / static_cast<double>(src.cols()));
  SpatialHash hash(src, spacing);
  InterpWeights w;
  w.src_rows = static_cast<std::size_t>(src.rows());
  w.dst_rows = static_cast<std::size_t>(dst.rows());
  w.k = k;
  w.index.resize(w.dst_rows * k);
  w.weight.resize(w.dst_rows * k);
  std::vector<std::pair<double, std::uint32_t>> nn;
  for (std::size_t i = 0; i < w.dst_rows; ++i) {
    hash.knn(dst.row(static_cast<Eigen::Index>(i)).data(), k, nn);
    const bool exact = nn.front().first == 0.0;
    double total = 0.0;
    for (int j = 0; j < k; ++j) {
      const double wj = exact ? (j == 0 ? 1.0 : 0.0) : 1.0 / (std::sqrt(nn[j].first) + kInterpEps);
      w.index[i * k + j] = nn[j].second;
      w.weight[i * k + j] = wj;
      total += wj;
    }
    for (int j = 0; j < k; ++j) w.weight[i * k + j] /= total;
  }
  return w;
}

Mat knn_interpolate(const Field& src, const Mat& dst_coords, int k) {
  if (src.size() == 0) throw Error("empty source field");
  return knn_weights(src.coords, dst_coords, k).apply(src.values);
}

Field downsample_to_grid(const Field& field, const RegularGrid& grid, int k) {
  Mat coords = grid_coords(grid);
  Mat values = knn_interpolate(field, coords, k);
  return Field(std::move(coords), std::move(values), grid);
}

}  // namespace hdiff
