#include "seiznet/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "seiznet/error.hpp"

namespace seiznet {

std::size_t FeatureConfig::frames_per_second() const {
  const double fps = 1.0 / frame_step_s;
  return static_cast<std::size_t>(std::lround(fps));
}

std::size_t FeatureConfig::window_frames() const {
  return static_cast<std::size_t>(std::lround(window_s * (1.0 / frame_step_s)));
}

void SignalRecord::validate() const {
  if (sample_rate <= 0.0) throw FormatError("signal sample rate must be > 0");
  if (samples.empty()) throw FormatError("signal has no channels");
  const std::size_t n = samples[0].size();
  for (const auto& ch : samples) {
    if (ch.size() != n) {
      throw FormatError("signal channels have unequal lengths");
    }
  }
}

// ---------------------------------------------------------------------------
// Signal I/O
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

SignalRecord read_signal_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open signal file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError("signal file '" + path + "' is empty");
  }
  auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "time") {
    throw FormatError("signal file '" + path +
                      "' must start with header time,ch1,...");
  }
  SignalRecord sig;
  const std::size_t n_ch = header.size() - 1;
  sig.channel_names.assign(header.begin() + 1, header.end());
  sig.samples.resize(n_ch);

  std::vector<double> times;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != n_ch + 1) {
      throw FormatError("signal file '" + path + "' line " +
                        std::to_string(lineno) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(n_ch + 1));
    }
    try {
      times.push_back(std::stod(fields[0]));
      for (std::size_t c = 0; c < n_ch; ++c) {
        sig.samples[c].push_back(std::stod(fields[c + 1]));
      }
    } catch (const std::exception&) {
      throw FormatError("signal file '" + path + "' line " +
                        std::to_string(lineno) + " is not numeric");
    }
  }
  if (times.size() < 2) {
    throw FormatError("signal file '" + path + "' needs at least two samples");
  }
  const double span = times.back() - times.front();
  if (span <= 0.0) {
    throw FormatError("signal file '" + path + "' time column must increase");
  }
  sig.sample_rate =
      std::lround(static_cast<double>(times.size() - 1) / span);
  sig.validate();
  return sig;
}

void write_signal_csv(const std::string& path, const SignalRecord& sig) {
  sig.validate();
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write signal file '" + path + "'");
  out << "time";
  for (std::size_t c = 0; c < sig.n_channels(); ++c) {
    out << ","
        << (c < sig.channel_names.size() ? sig.channel_names[c]
                                         : "ch" + std::to_string(c + 1));
  }
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < sig.n_samples(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g",
                  static_cast<double>(i) / sig.sample_rate);
    out << buf;
    for (std::size_t c = 0; c < sig.n_channels(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g", sig.samples[c][i]);
      out << "," << buf;
    }
    out << "\n";
  }
}

namespace {

constexpr char kEegrMagic[4] = {'E', 'E', 'G', 'R'};

template <typename T>
T read_le(std::istream& in) {
  T value;
  char bytes[sizeof(T)];
  in.read(bytes, sizeof(T));
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.write(bytes, sizeof(T));
}

}  // namespace

SignalRecord read_signal_eegr(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open signal file '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kEegrMagic, 4) != 0) {
    throw FormatError("signal file '" + path + "' lacks the EEGR magic");
  }
  const auto rate = read_le<std::uint32_t>(in);
  const auto n_ch = read_le<std::uint32_t>(in);
  const auto n_samp = read_le<std::uint64_t>(in);
  if (!in || rate == 0 || n_ch == 0) {
    throw FormatError("signal file '" + path + "' has a malformed header");
  }
  SignalRecord sig;
  sig.sample_rate = rate;
  sig.samples.resize(n_ch);
  for (std::uint32_t c = 0; c < n_ch; ++c) {
    sig.channel_names.push_back("ch" + std::to_string(c + 1));
    sig.samples[c].resize(n_samp);
    for (std::uint64_t i = 0; i < n_samp; ++i) {
      sig.samples[c][i] = read_le<float>(in);
    }
  }
  if (!in) throw FormatError("signal file '" + path + "' is truncated");
  sig.validate();
  return sig;
}

void write_signal_eegr(const std::string& path, const SignalRecord& sig) {
  sig.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write signal file '" + path + "'");
  out.write(kEegrMagic, 4);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(sig.sample_rate));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(sig.n_channels()));
  write_le<std::uint64_t>(out, sig.n_samples());
  for (const auto& ch : sig.samples) {
    for (double v : ch) write_le<float>(out, static_cast<float>(v));
  }
}

SignalRecord read_signal(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    return read_signal_csv(path);
  }
  return read_signal_eegr(path);
}

// ---------------------------------------------------------------------------
// Framing and LFCC
// ---------------------------------------------------------------------------

namespace {

// floor with a guard against 20.8/0.1 = 207.999... style binary artifacts.
double tolerant_floor(double x) { return std::floor(x + 1e-9); }

}  // namespace

std::vector<std::vector<double>> frame_signal(const std::vector<double>& samples,
                                              double sample_rate,
                                              double frame_len_s,
                                              double frame_step_s) {
  if (frame_step_s <= 0.0 || frame_len_s < frame_step_s) {
    throw ConfigError("frame length must be >= step > 0");
  }
  const std::size_t len =
      static_cast<std::size_t>(std::lround(frame_len_s * sample_rate));
  if (len < 2) {
    throw ConfigError("frame shorter than two samples at this rate");
  }
  if (samples.size() < len) {
    throw FormatError("signal shorter than one analysis frame (" +
                      std::to_string(samples.size()) + " < " +
                      std::to_string(len) + " samples)");
  }
  // count = floor((dur - len)/step) + 1; starts live on the time grid so the
  // frame rate is exactly 1/step regardless of the sample rate.
  const double duration = static_cast<double>(samples.size()) / sample_rate;
  const std::size_t count = static_cast<std::size_t>(
      tolerant_floor((duration - frame_len_s) / frame_step_s)) + 1;

  std::vector<double> hamming(len);
  for (std::size_t i = 0; i < len; ++i) {
    hamming[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i /
                                        static_cast<double>(len - 1));
  }

  std::vector<std::vector<double>> blocks(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t start = static_cast<std::size_t>(
        std::lround(static_cast<double>(k) * frame_step_s * sample_rate));
    if (start + len > samples.size()) start = samples.size() - len;
    blocks[k].resize(len);
    const double* src = samples.data() + start;
    for (std::size_t i = 0; i < len; ++i) blocks[k][i] = src[i] * hamming[i];
  }
  return blocks;
}

std::vector<std::vector<std::vector<double>>> frame_signal(
    const SignalRecord& sig, double frame_len_s, double frame_step_s) {
  sig.validate();
  std::vector<std::vector<std::vector<double>>> blocks(sig.n_channels());
  for (std::size_t c = 0; c < sig.n_channels(); ++c) {
    blocks[c] =
        frame_signal(sig.samples[c], sig.sample_rate, frame_len_s, frame_step_s);
  }
  return blocks;
}

namespace {

// Iterative radix-2 FFT over a zero-padded copy of the block.
void fft_magnitude(const std::vector<double>& block, std::size_t n_fft,
                   std::vector<double>& mag) {
  std::vector<std::complex<double>> buf(n_fft);
  for (std::size_t i = 0; i < block.size(); ++i) buf[i] = block[i];

  // bit reversal
  for (std::size_t i = 1, j = 0; i < n_fft; ++i) {
    std::size_t bit = n_fft >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(buf[i], buf[j]);
  }
  for (std::size_t len = 2; len <= n_fft; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n_fft; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = buf[i + k];
        const std::complex<double> v = buf[i + k + len / 2] * w;
        buf[i + k] = u + v;
        buf[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  mag.resize(n_fft / 2 + 1);
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(buf[i]);
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

double lfcc_filter_center_hz(std::size_t filter_index, std::size_t n_filters,
                             double sample_rate) {
  const double nyquist = sample_rate / 2.0;
  // Band edges are n_filters + 2 evenly spaced points over [0, nyquist];
  // filter i peaks at edge i+1.
  return nyquist * static_cast<double>(filter_index + 1) /
         static_cast<double>(n_filters + 1);
}

std::vector<double> lfcc_filter_energies(const std::vector<double>& block,
                                         double sample_rate,
                                         std::size_t n_filters) {
  if (block.size() < 2) throw ConfigError("lfcc block needs >= 2 samples");
  const std::size_t n_fft = next_pow2(block.size());
  std::vector<double> mag;
  fft_magnitude(block, n_fft, mag);

  const double nyquist = sample_rate / 2.0;
  const double bin_hz = sample_rate / static_cast<double>(n_fft);
  std::vector<double> energies(n_filters, 0.0);
  for (std::size_t f = 0; f < n_filters; ++f) {
    const double lo = nyquist * static_cast<double>(f) /
                      static_cast<double>(n_filters + 1);
    const double mid = nyquist * static_cast<double>(f + 1) /
                       static_cast<double>(n_filters + 1);
    const double hi = nyquist * static_cast<double>(f + 2) /
                      static_cast<double>(n_filters + 1);
    for (std::size_t b = 0; b < mag.size(); ++b) {
      const double freq = static_cast<double>(b) * bin_hz;
      double weight = 0.0;
      if (freq > lo && freq < mid) {
        weight = (freq - lo) / (mid - lo);
      } else if (freq >= mid && freq < hi) {
        weight = (hi - freq) / (hi - mid);
      }
      if (weight > 0.0) energies[f] += weight * mag[b] * mag[b];
    }
  }
  return energies;
}

LfccResult lfcc(const std::vector<double>& block, double sample_rate,
                std::size_t n_filters, std::size_t n_ceps, double log_floor) {
  if (n_ceps > n_filters) {
    throw ConfigError("n_ceps must be <= n_filters");
  }
  std::vector<double> energies =
      lfcc_filter_energies(block, sample_rate, n_filters);
  std::vector<double> log_e(n_filters);
  for (std::size_t f = 0; f < n_filters; ++f) {
    log_e[f] = std::log(std::max(energies[f], log_floor));
  }

  LfccResult r;
  r.ceps.resize(n_ceps);
  const double m = static_cast<double>(n_filters);
  for (std::size_t j = 0; j < n_ceps; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n_filters; ++i) {
      acc += log_e[i] * std::cos(std::numbers::pi * static_cast<double>(j) *
                                 (static_cast<double>(i) + 0.5) / m);
    }
    r.ceps[j] = acc;
  }

  double energy = 0.0;
  for (double v : block) energy += v * v;
  r.log_energy = std::log(std::max(energy, log_floor));
  return r;
}

// ---------------------------------------------------------------------------
// Deltas and track assembly
// ---------------------------------------------------------------------------

std::vector<std::vector<double>> deltas(
    const std::vector<std::vector<double>>& series, int order,
    std::size_t halfspan) {
  if (order != 1 && order != 2) {
    throw ConfigError("delta order must be 1 or 2");
  }
  const std::size_t span = 2 * halfspan + 1;
  if (series.size() < span) {
    throw FormatError("delta regression needs at least " +
                      std::to_string(span) + " frames, got " +
                      std::to_string(series.size()));
  }
  const std::size_t n = series.size();
  const std::size_t dim = series[0].size();
  double denom = 0.0;
  for (std::size_t k = 1; k <= halfspan; ++k) {
    denom += static_cast<double>(k * k);
  }
  denom *= 2.0;

  std::vector<std::vector<double>> out(n, std::vector<double>(dim, 0.0));
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t k = 1; k <= halfspan; ++k) {
      const std::size_t ahead = std::min(t + k, n - 1);
      const std::size_t behind = t >= k ? t - k : 0;
      for (std::size_t d = 0; d < dim; ++d) {
        out[t][d] += static_cast<double>(k) *
                     (series[ahead][d] - series[behind][d]);
      }
    }
    for (std::size_t d = 0; d < dim; ++d) out[t][d] /= denom;
  }
  if (order == 2) return deltas(out, 1, halfspan);
  return out;
}

std::vector<std::vector<std::vector<double>>> feature_tracks(
    const SignalRecord& sig, const FeatureConfig& cfg) {
  sig.validate();
  const std::size_t n_base = cfg.base_features();
  const std::size_t width = cfg.feature_width();

  std::vector<std::vector<std::vector<double>>> tracks(sig.n_channels());
  for (std::size_t ch = 0; ch < sig.n_channels(); ++ch) {
    auto blocks = frame_signal(sig.samples[ch], sig.sample_rate,
                               cfg.frame_len_s, cfg.frame_step_s);
    const std::size_t n_frames = blocks.size();

    // Base vector: c1..c_{n_ceps-1}, log-energy, differential energy.
    std::vector<std::vector<double>> base(
        n_frames, std::vector<double>(n_base, 0.0));
    std::vector<double> log_energy(n_frames);
    for (std::size_t t = 0; t < n_frames; ++t) {
      LfccResult r = lfcc(blocks[t], sig.sample_rate, cfg.n_filters,
                          cfg.n_ceps, cfg.log_floor);
      for (std::size_t j = 1; j < cfg.n_ceps; ++j) base[t][j - 1] = r.ceps[j];
      base[t][cfg.n_ceps - 1] = r.log_energy;
      log_energy[t] = r.log_energy;
    }
    // Differential energy: max - min of the log-energy track over a centered
    // context window, edges clamped.
    const std::size_t half = cfg.diff_energy_context / 2;
    for (std::size_t t = 0; t < n_frames; ++t) {
      const std::size_t lo = t >= half ? t - half : 0;
      const std::size_t hi = std::min(t + half, n_frames - 1);
      double mn = log_energy[lo], mx = log_energy[lo];
      for (std::size_t u = lo + 1; u <= hi; ++u) {
        mn = std::min(mn, log_energy[u]);
        mx = std::max(mx, log_energy[u]);
      }
      base[t][n_base - 1] = mx - mn;
    }

    auto d1 = deltas(base, 1, cfg.delta_halfspan);
    // Second derivatives of everything except differential energy.
    std::vector<std::vector<double>> head(n_frames,
                                          std::vector<double>(n_base - 1));
    for (std::size_t t = 0; t < n_frames; ++t) {
      for (std::size_t d = 0; d + 1 < n_base; ++d) head[t][d] = base[t][d];
    }
    auto d2 = deltas(deltas(head, 1, cfg.delta_halfspan), 1, cfg.delta_halfspan);

    tracks[ch].assign(n_frames, std::vector<double>(width, 0.0));
    for (std::size_t t = 0; t < n_frames; ++t) {
      std::size_t w = 0;
      for (std::size_t d = 0; d < n_base; ++d) tracks[ch][t][w++] = base[t][d];
      for (std::size_t d = 0; d < n_base; ++d) tracks[ch][t][w++] = d1[t][d];
      for (std::size_t d = 0; d + 1 < n_base; ++d) tracks[ch][t][w++] = d2[t][d];
    }
  }
  return tracks;
}

std::vector<FeatureWindow> build_windows(const SignalRecord& sig,
                                         const FeatureConfig& cfg) {
  sig.validate();
  if (sig.n_channels() != kMontageChannels) {
    throw FormatError("montage error: expected " +
                      std::to_string(kMontageChannels) + " channels, got " +
                      std::to_string(sig.n_channels()));
  }
  const double dur = sig.duration_s();
  if (dur < cfg.window_s) {
    throw FormatError("signal too short: " + std::to_string(dur) +
                      " s < window " + std::to_string(cfg.window_s) + " s");
  }

  auto tracks = feature_tracks(sig, cfg);
  const std::size_t n_frames = tracks[0].size();
  const std::size_t T = cfg.window_frames();
  const std::size_t H = kMontageChannels;
  const std::size_t W = cfg.feature_width();
  const std::size_t stride_frames = static_cast<std::size_t>(
      std::lround(cfg.window_stride_s * cfg.frames_per_second()));

  const std::size_t n_windows = static_cast<std::size_t>(
      tolerant_floor((dur - cfg.window_s) / cfg.window_stride_s)) + 1;

  std::vector<FeatureWindow> windows;
  windows.reserve(n_windows);
  for (std::size_t k = 0; k < n_windows; ++k) {
    FeatureWindow win;
    win.start_time_s = static_cast<double>(k) * cfg.window_stride_s;
    win.frames = Tensor({T, H, W, 1});
    double* out = win.frames.data();
    for (std::size_t t = 0; t < T; ++t) {
      // The 0.2 s analysis frame can overrun the signal tail by one step;
      // replicate the last computed frame there.
      const std::size_t frame = std::min(k * stride_frames + t, n_frames - 1);
      for (std::size_t h = 0; h < H; ++h) {
        const std::vector<double>& vec = tracks[h][frame];
        for (std::size_t w = 0; w < W; ++w) {
          out[(t * H + h) * W + w] = vec[w];
        }
      }
    }
    windows.push_back(std::move(win));
  }
  return windows;
}

}  // namespace seiznet
