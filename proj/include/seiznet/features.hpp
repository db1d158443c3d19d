#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "seiznet/tensor.hpp"

namespace seiznet {

// Feature pipeline knobs. The 26-dim per-frame vector is 9 base features
// (cepstra c1..c7, frame log-energy, differential energy) + 9 first
// derivatives + 8 second derivatives (all base features except differential
// energy). The frame step is pinned at 10 frames/second by the 21 s / 210
// frame window; the rest is configuration.
struct FeatureConfig {
  double frame_len_s = 0.2;
  double frame_step_s = 0.1;
  std::size_t n_filters = 24;
  std::size_t n_ceps = 8;  // c0..c7 computed; the vector uses c1..c7
  double log_floor = 1e-10;
  std::size_t delta_halfspan = 2;         // 5-frame regression window
  std::size_t diff_energy_context = 9;    // frames, centered, odd
  double window_s = 21.0;
  double window_stride_s = 1.0;

  std::size_t frames_per_second() const;
  std::size_t window_frames() const;  // 210 in the reference config
  std::size_t base_features() const { return (n_ceps - 1) + 2; }
  std::size_t feature_width() const {
    return 2 * base_features() + (base_features() - 1);
  }
};

inline constexpr std::size_t kMontageChannels = 22;

struct SignalRecord {
  double sample_rate = 0.0;
  std::vector<std::string> channel_names;
  std::vector<std::vector<double>> samples;  // [channel][sample]

  std::size_t n_channels() const { return samples.size(); }
  std::size_t n_samples() const { return samples.empty() ? 0 : samples[0].size(); }
  double duration_s() const {
    return sample_rate > 0.0 ? static_cast<double>(n_samples()) / sample_rate
                             : 0.0;
  }
  void validate() const;
};

// CSV: header `time,ch1,...,chN`, one row per sample; the rate comes from the
// time column. EEGR: little-endian {magic "EEGR", u32 sample_rate,
// u32 n_channels, u64 n_samples} followed by 32-bit floats channel-major.
SignalRecord read_signal_csv(const std::string& path);
SignalRecord read_signal_eegr(const std::string& path);
void write_signal_csv(const std::string& path, const SignalRecord& sig);
void write_signal_eegr(const std::string& path, const SignalRecord& sig);
// Dispatch on extension (.csv / anything else -> EEGR).
SignalRecord read_signal(const std::string& path);

// Hamming-windowed analysis blocks for one channel; block k covers
// [k*step, k*step + len) and the count is floor((dur - len)/step) + 1.
std::vector<std::vector<double>> frame_signal(const std::vector<double>& samples,
                                              double sample_rate,
                                              double frame_len_s,
                                              double frame_step_s);

// Per-channel blocks for a whole record.
std::vector<std::vector<std::vector<double>>> frame_signal(
    const SignalRecord& sig, double frame_len_s, double frame_step_s);

struct LfccResult {
  std::vector<double> ceps;  // c0..c_{n_ceps-1}
  double log_energy = 0.0;
};

// Magnitude FFT -> linear triangular filterbank over [0, nyquist] -> floored
// log energies -> DCT-II. The frame energy is the floored log of the sum of
// squared samples.
LfccResult lfcc(const std::vector<double>& block, double sample_rate,
                std::size_t n_filters, std::size_t n_ceps, double log_floor);

// Filterbank internals, exposed for direct testing.
std::vector<double> lfcc_filter_energies(const std::vector<double>& block,
                                         double sample_rate,
                                         std::size_t n_filters);
double lfcc_filter_center_hz(std::size_t filter_index, std::size_t n_filters,
                             double sample_rate);

// 2-point linear-regression deltas with edge replication:
// d_t = sum_k k*(x[t+k] - x[t-k]) / (2*sum_k k^2), k = 1..halfspan.
// order 2 applies the regression twice.
std::vector<std::vector<double>> deltas(
    const std::vector<std::vector<double>>& series, int order,
    std::size_t halfspan = 2);

struct FeatureWindow {
  Tensor frames;  // [T, H, W, 1]
  double start_time_s = 0.0;
};

// Full pipeline: per-channel LFCC tracks + derivatives, stacked into
// (T, 22, 26, 1) windows advancing by the stride. The analysis frame count
// can fall one short of T*n_windows at the signal tail; missing trailing
// frames replicate the last computed frame.
std::vector<FeatureWindow> build_windows(const SignalRecord& sig,
                                         const FeatureConfig& cfg = {});

// Per-channel per-frame feature tracks before windowing; [channel][frame] is
// a feature_width()-dim vector. Exposed for tests.
std::vector<std::vector<std::vector<double>>> feature_tracks(
    const SignalRecord& sig, const FeatureConfig& cfg);

}  // namespace seiznet
