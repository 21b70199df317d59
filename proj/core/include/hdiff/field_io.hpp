#pragma once

#include <iosfwd>
#include <string>

#include "hdiff/field.hpp"

namespace hdiff {

// IDF1 layout (all little-endian):
//   "IDF1" | u32 n | u32 d | u32 m | u32 grid_flag | u32 dims[n] if grid_flag
//   | f32 coords[m*n] unless grid_flag | f32 values[m*d]
void write_idf1(std::ostream& os, const Field& field);
Field read_idf1(std::istream& is);
void write_idf1(const std::string& path, const Field& field);
Field read_idf1(const std::string& path);

/// 8-bit PNG for 2D grid fields with 1 or 3 channels; [-1,1] maps to [0,255].
void write_png(const std::string& path, const Field& field);
Field read_png(const std::string& path);

}  // namespace hdiff
