#include "hdiff/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "hdiff/field_io.hpp"

namespace hdiff {

namespace fs = std::filesystem;

std::vector<Bump> draw_bumps(Rng& rng) {
  const int n = 1 + static_cast<int>(rng.below(4));
  std::vector<Bump> out;
  for (int i = 0; i < n; ++i) {
    Bump b{};
    b.cx = rng.uniform();
    b.cy = rng.uniform();
    b.width_px = rng.uniform(2.0, 6.0);
    b.amplitude = rng.uniform(0.3, 1.0);
    out.push_back(b);
  }
  return out;
}

Field render_bumps(const std::vector<Bump>& bumps, int res, int channels) {
  const RegularGrid grid = RegularGrid::square(res);
  const Mat coords = grid_coords(grid);
  Mat v = Mat::Zero(coords.rows(), channels);
  for (Eigen::Index p = 0; p < coords.rows(); ++p) {
    double s = 0.0;
    for (const Bump& b : bumps) {
      const double w = b.width_px / res;
      const double dx = coords(p, 0) - b.cx;
      const double dy = coords(p, 1) - b.cy;
      s += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * w * w));
    }
    v.row(p).setConstant(std::clamp(s, -1.0, 1.0));
  }
  return Field::on_grid(grid, std::move(v));
}

namespace {

Field render_stripes(Rng& rng, int res, int channels) {
  const RegularGrid grid = RegularGrid::square(res);
  const Mat coords = grid_coords(grid);
  const double theta = rng.uniform(0.0, std::numbers::pi);
  const double freq = rng.uniform(1.0, 4.0);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double amp = rng.uniform(0.5, 1.0);
  Mat v(coords.rows(), channels);
  for (Eigen::Index p = 0; p < coords.rows(); ++p) {
    const double u = coords(p, 0) * std::cos(theta) + coords(p, 1) * std::sin(theta);
    v.row(p).setConstant(amp * std::sin(2.0 * std::numbers::pi * freq * u + phase));
  }
  return Field::on_grid(grid, std::move(v));
}

}  // namespace

std::vector<Field> generate_toy(const std::string& generator, int count, int res, int channels, std::uint64_t seed) {
  if (count < 0 || res < 1 || channels < 1) throw Error("generate_toy: bad count, resolution or channels");
  std::vector<Field> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, 0xDA7A, static_cast<std::uint64_t>(i)));
    if (generator == "gaussian_bumps") {
      out.push_back(render_bumps(draw_bumps(rng), res, channels));
    } else if (generator == "stripes") {
      out.push_back(render_stripes(rng, res, channels));
    } else {
      throw Error("unknown generator '" + generator + "' (expected gaussian_bumps or stripes)");
    }
  }
  return out;
}

void write_dataset(const std::string& dir, const std::vector<Field>& fields) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%05zu.idf1", i);
    write_idf1((fs::path(dir) / name).string(), fields[i]);
  }
}

std::vector<Field> load_dataset(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error("dataset directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".idf1") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Field> out;
  for (const auto& f : files) out.push_back(read_idf1(f.string()));
  if (out.empty()) throw Error("no .idf1 files in " + dir);
  return out;
}

std::vector<Field> make_dataset(const std::string& spec, int count, int res, int channels, std::uint64_t seed) {
  if (spec == "gaussian_bumps" || spec == "stripes") return generate_toy(spec, count, res, channels, seed);
  std::vector<Field> data = load_dataset(spec);
  for (const Field& f : data) {
    if (!f.grid || *f.grid != RegularGrid::square(res) || f.channels() != channels) {
      throw Error("dataset " + spec + " does not match resolution " + std::to_string(res) + " with " +
                  std::to_string(channels) + " channels");
    }
  }
  return data;
}

}  // namespace hdiff
