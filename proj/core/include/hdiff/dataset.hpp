#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hdiff/field.hpp"
#include "hdiff/rng.hpp"

namespace hdiff {

struct Bump {
  double cx;        // centre, domain units
  double cy;
  double width_px;  // Gaussian standard deviation in pixels, [2, 6]
  double amplitude; // [0.3, 1]
};

/// 1 to 4 bumps with uniform centres in (0,1)^2.
std::vector<Bump> draw_bumps(Rng& rng);
/// Sum of bumps on a zero background, clamped to [-1, 1]; every channel
/// gets the same image.
Field render_bumps(const std::vector<Bump>& bumps, int res, int channels);

/// Generators: "gaussian_bumps", "stripes". Sample i depends only on (seed, i).
std::vector<Field> generate_toy(const std::string& generator, int count, int res, int channels, std::uint64_t seed);

/// Writes sample_00000.idf1, sample_00001.idf1, ... into `dir` (created if missing).
void write_dataset(const std::string& dir, const std::vector<Field>& fields);
/// Loads every *.idf1 file in `dir` in lexicographic order.
std::vector<Field> load_dataset(const std::string& dir);

/// Generator name or directory; directories must hold grid fields at `res`.
std::vector<Field> make_dataset(const std::string& spec, int count, int res, int channels, std::uint64_t seed);

}  // namespace hdiff
