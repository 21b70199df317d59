#include "hdiff/field_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace hdiff {
namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b.data(), 4);
}

void put_f32(std::ostream& os, double v) { put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw Error("IDF1: truncated stream");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f32(std::istream& is) { return static_cast<double>(std::bit_cast<float>(get_u32(is))); }

}  // namespace

void write_idf1(std::ostream& os, const Field& field) {
  os.write("IDF1", 4);
  put_u32(os, static_cast<std::uint32_t>(field.dim()));
  put_u32(os, static_cast<std::uint32_t>(field.channels()));
  put_u32(os, static_cast<std::uint32_t>(field.size()));
  put_u32(os, field.grid ? 1U : 0U);
  if (field.grid) {
    for (int d : field.grid->dims) put_u32(os, static_cast<std::uint32_t>(d));
  } else {
    for (Eigen::Index i = 0; i < field.coords.size(); ++i) put_f32(os, field.coords.data()[i]);
  }
  for (Eigen::Index i = 0; i < field.values.size(); ++i) put_f32(os, field.values.data()[i]);
}

Field read_idf1(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || std::memcmp(magic.data(), "IDF1", 4) != 0) throw Error("IDF1: bad magic");
  const std::uint32_t n = get_u32(is);
  const std::uint32_t d = get_u32(is);
  const std::uint32_t m = get_u32(is);
  const std::uint32_t grid_flag = get_u32(is);
  if (n < 1 || n > 2) throw Error("IDF1: unsupported coordinate dimension");
  if (grid_flag > 1) throw Error("IDF1: bad grid flag");
  Mat coords;
  std::optional<RegularGrid> grid;
  if (grid_flag == 1) {
    std::vector<int> dims(n);
    for (auto& v : dims) v = static_cast<int>(get_u32(is));
    grid = RegularGrid(dims);
    if (grid->size() != m) throw Error("IDF1: grid dims do not match point count");
    coords = grid_coords(*grid);
  } else {
    coords.resize(m, n);
    for (Eigen::Index i = 0; i < coords.size(); ++i) coords.data()[i] = get_f32(is);
  }
  Mat values(m, d);
  for (Eigen::Index i = 0; i < values.size(); ++i) values.data()[i] = get_f32(is);
  return Field(std::move(coords), std::move(values), std::move(grid));
}

void write_idf1(const std::string& path, const Field& field) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  write_idf1(os, field);
  if (!os) throw Error("write failed: " + path);
}

Field read_idf1(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open for reading: " + path);
  return read_idf1(is);
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::string& path, const Field& field) {
  if (!field.grid || field.grid->rank() != 2) throw Error("PNG export requires a 2D grid field");
  const int channels = field.channels();
  if (channels != 1 && channels != 3) throw Error("PNG export supports 1 or 3 channels");
  const int h = field.grid->dims[0];
  const int w = field.grid->dims[1];

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialisation failed");
  }
  std::vector<png_byte> pixels(static_cast<std::size_t>(h) * w * channels);
  for (Eigen::Index i = 0; i < field.values.size(); ++i) {
    const double v = std::clamp((field.values.data()[i] + 1.0) * 0.5 * 255.0, 0.0, 255.0);
    pixels[static_cast<std::size_t>(i)] = static_cast<png_byte>(std::lround(v));
  }
  std::vector<png_bytep> rows(h);
  for (int r = 0; r < h; ++r) rows[r] = pixels.data() + static_cast<std::size_t>(r) * w * channels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Field read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw Error("cannot open for reading: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("PNG read failed: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_expand(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error("PNG import supports gray or RGB images");
  }
  std::vector<png_byte> pixels(static_cast<std::size_t>(h) * w * channels);
  std::vector<png_bytep> rows(h);
  for (int r = 0; r < h; ++r) rows[r] = pixels.data() + static_cast<std::size_t>(r) * w * channels;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  const RegularGrid grid({h, w});
  Mat values(static_cast<Eigen::Index>(grid.size()), channels);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    values.data()[i] = pixels[static_cast<std::size_t>(i)] / 255.0 * 2.0 - 1.0;
  }
  return Field::on_grid(grid, std::move(values));
}

}  // namespace hdiff
