#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "seiznet/features.hpp"
#include "seiznet/rng.hpp"

using namespace seiznet;

namespace {

SignalRecord synth_signal(std::size_t n_channels, double duration_s,
                          double sample_rate, std::uint64_t seed) {
  SignalRecord sig;
  sig.sample_rate = sample_rate;
  const std::size_t n = static_cast<std::size_t>(duration_s * sample_rate);
  Rng rng(seed);
  for (std::size_t c = 0; c < n_channels; ++c) {
    sig.channel_names.push_back("ch" + std::to_string(c + 1));
    std::vector<double> samples(n);
    const double freq = 3.0 + static_cast<double>(c);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sample_rate;
      samples[i] = std::sin(2.0 * std::numbers::pi * freq * t) +
                   0.25 * rng.normal();
    }
    sig.samples.push_back(std::move(samples));
  }
  return sig;
}

}  // namespace

TEST_CASE("feature width decomposition is 9 + 9 + 8 = 26") {
  FeatureConfig cfg;
  CHECK(cfg.base_features() == 9);
  CHECK(cfg.feature_width() == 26);
  CHECK(cfg.frames_per_second() == 10);
  CHECK(cfg.window_frames() == 210);
}

TEST_CASE("frame count follows the floor formula") {
  // 21 s at 250 Hz, len 0.2 s, step 0.1 s:
  // floor((5250 - 50) / 25) + 1 = 209 blocks.
  std::vector<double> samples(21 * 250, 1.0);
  auto blocks = frame_signal(samples, 250.0, 0.2, 0.1);
  CHECK(blocks.size() == 209);
  for (const auto& b : blocks) CHECK(b.size() == 50);
}

TEST_CASE("constant signals give identical blocks") {
  std::vector<double> samples(1000, 2.5);
  auto blocks = frame_signal(samples, 100.0, 0.2, 0.1);
  REQUIRE(blocks.size() > 2);
  for (std::size_t k = 1; k < blocks.size(); ++k) {
    for (std::size_t i = 0; i < blocks[k].size(); ++i) {
      CHECK(blocks[k][i] == blocks[0][i]);
    }
  }
}

TEST_CASE("step == len partitions the signal") {
  std::vector<double> samples(60);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = static_cast<double>(i);
  }
  auto blocks = frame_signal(samples, 100.0, 0.1, 0.1);
  CHECK(blocks.size() == 6);
  // Hamming weights divide out: block k element i came from sample k*10+i.
  auto window = frame_signal(std::vector<double>(10, 1.0), 100.0, 0.1, 0.1);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    for (std::size_t i = 0; i < 10; ++i) {
      const double expected = samples[k * 10 + i] * window[0][i];
      CHECK(blocks[k][i] == doctest::Approx(expected));
    }
  }
}

TEST_CASE("too-short signals are rejected") {
  std::vector<double> samples(10, 0.0);
  CHECK_THROWS_AS(frame_signal(samples, 250.0, 0.2, 0.1), FormatError);
}

TEST_CASE("lfcc of a flat spectrum concentrates in coefficient zero") {
  // A unit impulse has a flat magnitude spectrum, so every filter sees a
  // near-equal share and the DCT collapses onto c0.
  std::vector<double> block(512, 0.0);
  block[0] = 1.0;
  LfccResult r = lfcc(block, 512.0, 24, 8, 1e-10);
  for (std::size_t j = 1; j < 8; ++j) {
    CHECK(std::fabs(r.ceps[j]) < 0.05 * std::fabs(r.ceps[0]));
  }
}

TEST_CASE("a sinusoid at a filter center dominates non-adjacent filters") {
  const double rate = 256.0;
  const std::size_t n_filters = 24;
  const std::size_t target = 10;
  const double freq = lfcc_filter_center_hz(target, n_filters, rate);
  std::vector<double> block(256);
  for (std::size_t i = 0; i < block.size(); ++i) {
    block[i] = std::sin(2.0 * std::numbers::pi * freq *
                        static_cast<double>(i) / rate);
  }
  auto energies = lfcc_filter_energies(block, rate, n_filters);
  for (std::size_t f = 0; f < n_filters; ++f) {
    if (f + 1 >= target && f <= target + 1) continue;  // adjacent filters
    CHECK(energies[target] > 10.0 * energies[f]);
  }
}

TEST_CASE("zero blocks floor to finite cepstra") {
  std::vector<double> block(50, 0.0);
  LfccResult r = lfcc(block, 250.0, 24, 8, 1e-10);
  // log floor everywhere -> DCT of a constant -> c0 = 24*log(1e-10), rest 0.
  CHECK(r.ceps[0] == doctest::Approx(24.0 * std::log(1e-10)));
  for (std::size_t j = 1; j < 8; ++j) {
    CHECK(r.ceps[j] == doctest::Approx(0.0).epsilon(1e-9));
  }
  CHECK(r.log_energy == doctest::Approx(std::log(1e-10)));
  CHECK(std::isfinite(r.ceps[0]));
}

TEST_CASE("deltas of a constant series vanish") {
  std::vector<std::vector<double>> series(10, std::vector<double>{3.0, -2.0});
  auto d = deltas(series, 1);
  for (const auto& row : d) {
    CHECK(row[0] == doctest::Approx(0.0));
    CHECK(row[1] == doctest::Approx(0.0));
  }
}

TEST_CASE("deltas of a ramp equal the slope in the interior") {
  std::vector<std::vector<double>> series;
  for (int t = 0; t < 12; ++t) {
    series.push_back({0.5 * static_cast<double>(t)});
  }
  auto d = deltas(series, 1);
  for (std::size_t t = 2; t + 2 < series.size(); ++t) {
    CHECK(d[t][0] == doctest::Approx(0.5));
  }
}

TEST_CASE("deltas match a direct formula recomputation") {
  Rng rng(211);
  std::vector<std::vector<double>> series;
  for (int t = 0; t < 15; ++t) {
    series.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
  }
  auto got = deltas(series, 1);
  const std::size_t n = series.size();
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t d = 0; d < 2; ++d) {
      auto at = [&](std::ptrdiff_t idx) {
        if (idx < 0) idx = 0;
        if (idx >= static_cast<std::ptrdiff_t>(n)) idx = n - 1;
        return series[idx][d];
      };
      const double expected =
          (1.0 * (at(t + 1) - at(static_cast<std::ptrdiff_t>(t) - 1)) +
           2.0 * (at(t + 2) - at(static_cast<std::ptrdiff_t>(t) - 2))) /
          (2.0 * (1.0 + 4.0));
      CHECK(got[t][d] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("deltas reject series shorter than the regression span") {
  std::vector<std::vector<double>> series(4, std::vector<double>{1.0});
  CHECK_THROWS_AS(deltas(series, 1), FormatError);
}

TEST_CASE("build_windows shapes, counts and determinism") {
  SignalRecord sig = synth_signal(kMontageChannels, 30.0, 250.0, 5);
  auto windows = build_windows(sig);
  CHECK(windows.size() == 10);  // floor(30 - 21) + 1
  for (std::size_t k = 0; k < windows.size(); ++k) {
    CHECK(windows[k].frames.shape() ==
          std::vector<std::size_t>{210, 22, 26, 1});
    CHECK(windows[k].start_time_s == doctest::Approx(static_cast<double>(k)));
    CHECK(windows[k].frames.all_finite());
  }

  auto again = build_windows(sig);
  for (std::size_t k = 0; k < windows.size(); ++k) {
    for (std::size_t i = 0; i < windows[k].frames.size(); ++i) {
      CHECK(windows[k].frames[i] == again[k].frames[i]);
    }
  }
}

TEST_CASE("identical channels give identical feature rows") {
  SignalRecord sig = synth_signal(kMontageChannels, 22.0, 250.0, 7);
  sig.samples[3] = sig.samples[11];
  auto windows = build_windows(sig);
  const Tensor& frames = windows[0].frames;
  for (std::size_t t = 0; t < 210; ++t) {
    for (std::size_t w = 0; w < 26; ++w) {
      CHECK(frames.at({t, 3, w, 0}) == frames.at({t, 11, w, 0}));
    }
  }
}

TEST_CASE("montage and length errors") {
  SignalRecord narrow = synth_signal(4, 25.0, 250.0, 9);
  CHECK_THROWS_AS(build_windows(narrow), FormatError);
  SignalRecord brief = synth_signal(kMontageChannels, 10.0, 250.0, 9);
  CHECK_THROWS_AS(build_windows(brief), FormatError);
}

TEST_CASE("all-zero signals produce finite features") {
  SignalRecord sig;
  sig.sample_rate = 250.0;
  for (std::size_t c = 0; c < kMontageChannels; ++c) {
    sig.channel_names.push_back("ch" + std::to_string(c + 1));
    sig.samples.emplace_back(22 * 250, 0.0);
  }
  auto windows = build_windows(sig);
  for (const auto& win : windows) CHECK(win.frames.all_finite());
}

TEST_CASE("amplitude scaling keeps counts and shapes") {
  SignalRecord sig = synth_signal(kMontageChannels, 23.0, 250.0, 13);
  SignalRecord scaled = sig;
  for (auto& ch : scaled.samples) {
    for (double& v : ch) v *= 7.5;
  }
  auto a = build_windows(sig);
  auto b = build_windows(scaled);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].frames.shape() == b[k].frames.shape());
  }
}

TEST_CASE("signal csv and eegr round-trips") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "seiznet_feat_test";
  fs::create_directories(dir);

  SignalRecord sig = synth_signal(3, 2.0, 100.0, 17);

  const std::string csv = (dir / "sig.csv").string();
  write_signal_csv(csv, sig);
  SignalRecord from_csv = read_signal(csv);
  CHECK(from_csv.sample_rate == doctest::Approx(100.0));
  REQUIRE(from_csv.n_channels() == 3);
  REQUIRE(from_csv.n_samples() == sig.n_samples());
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < sig.n_samples(); ++i) {
      CHECK(from_csv.samples[c][i] ==
            doctest::Approx(sig.samples[c][i]).epsilon(1e-6));
    }
  }

  const std::string bin = (dir / "sig.eegr").string();
  write_signal_eegr(bin, sig);
  SignalRecord from_bin = read_signal(bin);
  CHECK(from_bin.sample_rate == doctest::Approx(100.0));
  REQUIRE(from_bin.n_samples() == sig.n_samples());
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < sig.n_samples(); ++i) {
      CHECK(from_bin.samples[c][i] ==
            doctest::Approx(sig.samples[c][i]).epsilon(1e-6));
    }
  }

  CHECK_THROWS_AS(read_signal((dir / "missing.csv").string()), FormatError);
  fs::remove_all(dir);
}
