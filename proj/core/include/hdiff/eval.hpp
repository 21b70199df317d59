#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hdiff/config.hpp"
#include "hdiff/tasks.hpp"

namespace hdiff {

struct MmdOptions {
  double bandwidth = 0.0;  // <= 0: median pairwise distance over A and B
  bool unbiased = true;
};

/// Squared MMD with kernel exp(-|a - b|^2 / (2 bw^2)) on flattened values.
double mmd(const std::vector<Field>& a, const std::vector<Field>& b, const MmdOptions& opts = {});
double median_pairwise_distance(const std::vector<Field>& a, const std::vector<Field>& b);

/// 10 log10(peak^2 / MSE) with peak = max(reference) - min(reference).
/// Returns +inf for an exact match.
double psnr(const Mat& reference, const Mat& estimate);

/// Radially averaged power of the unitary-normalised DFT (|F_k / m|^2),
/// averaged over channels, binned by round(|k|) for integer frequencies.
/// Entry r covers radius r; the result has floor(res / 2) + 1 bins.
std::vector<double> radial_spectrum(const Field& field);
std::vector<double> mean_radial_spectrum(const std::vector<Field>& fields);

struct ChannelStats {
  double mean = 0.0;
  double std = 0.0;
};
/// Pooled per-channel statistics over every point of every field.
std::vector<ChannelStats> channel_stats(const std::vector<Field>& fields);

struct DenoiseRow {
  int t;
  double mse;       // mean loss_simple of the model
  double baseline;  // mean |T xi|^2 per entry, the zero-predictor loss
};
std::vector<DenoiseRow> denoise_mse_curve(const Denoiser& net, const TrainConfig& cfg, const std::vector<Field>& data,
                                          const std::vector<int>& ts, int draws, std::uint64_t seed);

struct ResolutionRow {
  int res;
  std::vector<ChannelStats> stats;
  std::vector<double> spectrum;
  double mmd_vs_native;  // after k-NN resampling to the native grid
};
/// Statistics of raw samples (the T x0 estimates) at each resolution. The
/// Wiener inverse is left out: it re-amplifies residual noise differently per grid.
std::vector<ResolutionRow> discretisation_report(const DiffusionModel& model, const std::vector<int>& resolutions,
                                                 int n_samples, const SampleOptions& opts);

struct RateRow {
  double rate;
  std::size_t coords_used;
  double median_ms;
  long peak_rss_kb;  // process peak after the rate's steps
  std::size_t tape_bytes;
};
std::vector<RateRow> rate_bench(const TrainConfig& cfg, const std::vector<double>& rates, int steps_per_rate);

void write_denoise_csv(std::ostream& os, const std::vector<DenoiseRow>& rows);
/// Columns: res,channel,mean,std,mmd_vs_native,spectrum (bins joined by ';').
void write_resolution_csv(std::ostream& os, const std::vector<ResolutionRow>& rows);
void write_rate_csv(std::ostream& os, const std::vector<RateRow>& rows);

}  // namespace hdiff
