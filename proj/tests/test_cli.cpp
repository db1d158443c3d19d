#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "seiznet/checkpoint.hpp"
#include "seiznet/features.hpp"
#include "seiznet/rng.hpp"
#include "seiznet/scoring.hpp"
#include "seiznet/train.hpp"

using namespace seiznet;
namespace fs = std::filesystem;

namespace {

const char* cli_path() { return SEIZNET_CLI_PATH; }

int run(const std::string& args, std::string* output = nullptr) {
  const std::string redirect = output ? " >" + std::string("/tmp/seiznet_cli_out.txt") + " 2>&1" : " >/dev/null 2>&1";
  const std::string cmd = std::string(cli_path()) + " " + args + redirect;
  const int status = std::system(cmd.c_str());
  if (output) {
    std::ifstream in("/tmp/seiznet_cli_out.txt");
    std::stringstream ss;
    ss << in.rdbuf();
    *output = ss.str();
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 40 s, 22-channel synthetic record whose first half carries a strong
// rhythmic burst (the "seizure") and whose second half is low noise.
void write_synth_csv(const fs::path& path, std::uint64_t seed) {
  SignalRecord sig;
  sig.sample_rate = 64.0;
  const std::size_t n = 40 * 64;
  Rng rng(seed);
  for (std::size_t c = 0; c < kMontageChannels; ++c) {
    sig.channel_names.push_back("ch" + std::to_string(c + 1));
    std::vector<double> samples(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sig.sample_rate;
      const bool burst = t < 20.0;
      const double tone =
          burst ? 3.0 * std::sin(2.0 * 3.14159265358979 * 7.0 * t) : 0.0;
      samples[i] = tone + 0.3 * rng.normal();
    }
    sig.samples.push_back(std::move(samples));
  }
  write_signal_csv(path.string(), sig);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const std::string kToyArch =
    " --conv-channels 2,3 --rnn-hidden 3,4 --conv1d-channels 4 "
    "--pool1d-size 8 ";

}  // namespace

TEST_CASE("features command extracts deterministic windows") {
  TempDir dir("seiznet_cli_features");
  const fs::path sig = dir.path / "rec.csv";
  write_synth_csv(sig, 3);

  std::string out;
  const int rc = run("features " + sig.string() + " --out-dir " +
                         (dir.path / "f1").string(),
                     &out);
  CHECK(rc == 0);
  CHECK(out.find("20 windows") != std::string::npos);  // floor(40-21)+1

  Container c = read_container((dir.path / "f1" / "rec.feat").string());
  CHECK(c.config_value("kind") == "features");
  CHECK(c.config_value("n_windows") == "20");
  const Tensor* w0 = c.find("window_00000");
  REQUIRE(w0 != nullptr);
  CHECK(w0->shape() == std::vector<std::size_t>{210, 22, 26, 1});

  // Rerun with identical flags: byte-identical output.
  fs::rename(dir.path / "f1" / "rec.feat", dir.path / "first.feat");
  CHECK(run("features " + sig.string() + " --out-dir " +
            (dir.path / "f1").string()) == 0);
  CHECK(slurp(dir.path / "f1" / "rec.feat") == slurp(dir.path / "first.feat"));
}

TEST_CASE("features command reports too-short inputs with nonzero exit") {
  TempDir dir("seiznet_cli_short");
  SignalRecord sig;
  sig.sample_rate = 64.0;
  for (std::size_t c = 0; c < kMontageChannels; ++c) {
    sig.channel_names.push_back("ch" + std::to_string(c + 1));
    sig.samples.emplace_back(20 * 64, 0.0);  // 20 s < 21 s window
  }
  const fs::path path = dir.path / "short.csv";
  write_signal_csv(path.string(), sig);
  std::string out;
  const int rc = run("features " + path.string() + " --out-dir " +
                         (dir.path / "out").string(),
                     &out);
  CHECK(rc != 0);
  CHECK(out.find("too short") != std::string::npos);
}

TEST_CASE("train then eval end to end with scoring artifacts") {
  TempDir dir("seiznet_cli_train");
  const fs::path sig = dir.path / "rec.csv";
  write_synth_csv(sig, 11);
  REQUIRE(run("features " + sig.string() + " --out-dir " + dir.path.string()) ==
          0);
  const std::string feat = (dir.path / "rec.feat").string();

  // Windows 0..9 center in the burst (midpoint < 20 s), the rest outside.
  EventList ann = EventList::from_events(
      {{0.0, 20.0, Label::seiz}, {20.0, 40.0, Label::bckg}});
  const std::string ann_path = (dir.path / "ref.csv").string();
  write_annotations_csv(ann_path, ann);

  const std::string ckpt = (dir.path / "model.sznt").string();
  const std::string log = (dir.path / "loss.csv").string();
  std::string out;
  const int rc = run("train --features " + feat + " --ann " + ann_path +
                         " --out " + ckpt + " --loss-log " + log + kToyArch +
                         " --rnn gru --init orthogonal --seed 7 --epochs 4 "
                         "--batch 5 --lr 0.01",
                     &out);
  CHECK(rc == 0);
  CHECK(fs::exists(ckpt));
  CHECK(slurp(log).find("step,data_loss,penalty,total") != std::string::npos);

  std::string eval_out;
  const int eval_rc =
      run("eval --ckpt " + ckpt + " --features " + feat + " --ann " +
              ann_path + " --out-dir " + (dir.path / "eval").string(),
          &eval_out);
  CHECK(eval_rc == 0);
  CHECK(fs::exists(dir.path / "eval" / "posteriors.csv"));
  CHECK(fs::exists(dir.path / "eval" / "report.txt"));
  CHECK(fs::exists(dir.path / "eval" / "det.csv"));
  CHECK(eval_out.find("Sensitivity") != std::string::npos);

  const std::string det = slurp(dir.path / "eval" / "det.csv");
  CHECK(det.find("threshold,fa_per_24h,miss_pct") != std::string::npos);
  CHECK(det.find("# cli.threshold=") != std::string::npos);

  // Data rows strictly ordered by threshold, miss non-decreasing.
  std::istringstream rows(det);
  std::string line;
  double prev_threshold = -1.0, prev_miss = -1.0;
  std::size_t n_rows = 0;
  while (std::getline(rows, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 't') continue;
    double threshold = 0.0, fa = 0.0, miss = 0.0;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &threshold, &fa, &miss) ==
            3);
    CHECK(threshold > prev_threshold);
    CHECK(miss >= prev_miss);
    prev_threshold = threshold;
    prev_miss = miss;
    ++n_rows;
  }
  CHECK(n_rows >= 101);
}

TEST_CASE("gru checkpoints hold fewer parameters than lstm") {
  TempDir dir("seiznet_cli_counts");
  const fs::path sig = dir.path / "rec.csv";
  write_synth_csv(sig, 13);
  REQUIRE(run("features " + sig.string() + " --out-dir " + dir.path.string()) ==
          0);
  const std::string feat = (dir.path / "rec.feat").string();
  EventList ann = EventList::from_events(
      {{0.0, 20.0, Label::seiz}, {20.0, 40.0, Label::bckg}});
  const std::string ann_path = (dir.path / "ref.csv").string();
  write_annotations_csv(ann_path, ann);

  auto param_total = [](const std::string& path) {
    Container c = read_container(path);
    std::size_t total = 0;
    for (const auto& [name, tensor] : c.tensors) total += tensor.size();
    return total;
  };

  const std::string base = "train --features " + feat + " --ann " + ann_path +
                           kToyArch + " --seed 3 --epochs 1 --batch 20";
  const std::string lstm_ckpt = (dir.path / "lstm.sznt").string();
  const std::string gru_ckpt = (dir.path / "gru.sznt").string();
  REQUIRE(run(base + " --rnn lstm --out " + lstm_ckpt) == 0);
  REQUIRE(run(base + " --rnn gru --out " + gru_ckpt) == 0);

  // Difference per layer/direction: one (n*m + n^2 + n) block plus 3n.
  const std::size_t m1 = 4, n1 = 3, n2 = 4;  // conv1d-channels 4; hidden 3,4
  const std::size_t expected = 2 * ((n1 * m1 + n1 * n1 + n1) + 3 * n1) +
                               2 * ((n2 * 2 * n1 + n2 * n2 + n2) + 3 * n2);
  CHECK(param_total(lstm_ckpt) - param_total(gru_ckpt) == expected);
}

TEST_CASE("zeros init emits a stall warning") {
  TempDir dir("seiznet_cli_stall");
  const fs::path sig = dir.path / "rec.csv";
  write_synth_csv(sig, 17);
  REQUIRE(run("features " + sig.string() + " --out-dir " + dir.path.string()) ==
          0);
  EventList ann = EventList::from_events(
      {{0.0, 20.0, Label::seiz}, {20.0, 40.0, Label::bckg}});
  const std::string ann_path = (dir.path / "ref.csv").string();
  write_annotations_csv(ann_path, ann);

  std::string out;
  const int rc = run("train --features " + (dir.path / "rec.feat").string() +
                         " --ann " + ann_path + " --out " +
                         (dir.path / "z.sznt").string() + kToyArch +
                         " --init zeros --seed 5 --epochs 60 --batch 20",
                     &out);
  CHECK(rc == 0);
  CHECK(out.find("stalled") != std::string::npos);
}

TEST_CASE("eval rejects checkpoints whose chain mismatches the features") {
  TempDir dir("seiznet_cli_mismatch");
  const fs::path sig = dir.path / "rec.csv";
  write_synth_csv(sig, 31);
  REQUIRE(run("features " + sig.string() + " --out-dir " + dir.path.string()) ==
          0);
  EventList ann = EventList::from_events(
      {{0.0, 20.0, Label::seiz}, {20.0, 40.0, Label::bckg}});
  const std::string ann_path = (dir.path / "ref.csv").string();
  write_annotations_csv(ann_path, ann);

  // Checkpoint built for a much smaller input chain.
  NetworkConfig small;
  small.input_frames = 12;
  small.input_height = 6;
  small.input_width = 8;
  small.conv_channels = {2};
  small.conv1d_channels = 3;
  small.pool1d_size = 2;
  small.rnn_hidden = {3};
  Network net(small);
  const std::string ckpt = (dir.path / "small.sznt").string();
  save_checkpoint(ckpt, net, {});

  std::string out;
  const int rc = run("eval --ckpt " + ckpt + " --features " +
                         (dir.path / "rec.feat").string() + " --ann " +
                         ann_path + " --out-dir " + (dir.path / "e").string(),
                     &out);
  CHECK(rc != 0);
  CHECK(out.find("(210,22,26,1)") != std::string::npos);  // found shape
  CHECK(out.find("(12,") != std::string::npos);           // expected chain
}

TEST_CASE("label coverage gaps list the uncovered windows") {
  TempDir dir("seiznet_cli_gaps");
  const fs::path sig = dir.path / "rec.csv";
  write_synth_csv(sig, 29);
  REQUIRE(run("features " + sig.string() + " --out-dir " + dir.path.string()) ==
          0);
  // Annotation covers only the first 20 s of the 40 s record, so windows
  // whose midpoints fall after 20 s carry no label.
  EventList partial = EventList::from_events({{0.0, 20.0, Label::seiz}});
  const std::string ann_path = (dir.path / "partial.csv").string();
  write_annotations_csv(ann_path, partial);

  std::string out;
  const int rc = run("train --features " + (dir.path / "rec.feat").string() +
                         " --ann " + ann_path + " --out " +
                         (dir.path / "x.sznt").string() + kToyArch +
                         " --epochs 1 --batch 20 --seed 1",
                     &out);
  CHECK(rc != 0);
  CHECK(out.find("does not cover") != std::string::npos);
  CHECK(out.find("window 10") != std::string::npos);
  CHECK(out.find("window 19") != std::string::npos);
}

TEST_CASE("usage errors exit nonzero") {
  CHECK(run("train --out /tmp/x.sznt") != 0);      // missing required flags
  CHECK(run("unknown-command") != 0);
  CHECK(run("score --ref /nonexistent.csv --hyp /nonexistent.csv") != 0);
}

TEST_CASE("score command mirrors the library on oracle annotations") {
  TempDir dir("seiznet_cli_score");
  EventList ref = EventList::from_events(
      {{0.0, 10.0, Label::seiz}, {10.0, 100.0, Label::bckg}});
  EventList hyp = EventList::from_events(
      {{0.0, 3.0, Label::seiz}, {3.0, 100.0, Label::bckg}});
  const std::string ref_path = (dir.path / "ref.csv").string();
  const std::string hyp_path = (dir.path / "hyp.csv").string();
  write_annotations_csv(ref_path, ref);
  write_annotations_csv(hyp_path, hyp);

  std::string out;
  CHECK(run("score --ref " + ref_path + " --hyp " + hyp_path, &out) == 0);
  CHECK(out.find("30.00%") != std::string::npos);

  std::string perfect;
  CHECK(run("score --ref " + ref_path + " --hyp " + ref_path, &perfect) == 0);
  CHECK(perfect.find("100.00%") != std::string::npos);
}

TEST_CASE("config file values apply and unknown keys are rejected") {
  TempDir dir("seiznet_cli_config");
  const fs::path sig = dir.path / "rec.csv";
  write_synth_csv(sig, 19);
  REQUIRE(run("features " + sig.string() + " --out-dir " + dir.path.string()) ==
          0);
  EventList ann = EventList::from_events(
      {{0.0, 20.0, Label::seiz}, {20.0, 40.0, Label::bckg}});
  const std::string ann_path = (dir.path / "ref.csv").string();
  write_annotations_csv(ann_path, ann);

  {
    std::ofstream cfg(dir.path / "run.cfg");
    cfg << "epochs=1\nrnn=gru\nconv-channels=2,3\nrnn-hidden=3,4\n"
        << "conv1d-channels=4\npool1d-size 8\n";
  }
  // Malformed key in the config file -> rejected.
  std::string out;
  int rc = run("train --features " + (dir.path / "rec.feat").string() +
                   " --ann " + ann_path + " --out " +
                   (dir.path / "c.sznt").string() + " --config " +
                   (dir.path / "run.cfg").string() + " --batch 20",
               &out);
  CHECK(rc != 0);

  {
    std::ofstream cfg(dir.path / "run2.cfg");
    cfg << "epochs=1\nrnn=gru\nconv-channels=2,3\nrnn-hidden=3,4\n"
        << "conv1d-channels=4\npool1d-size=8\nnot_a_real_key=1\n";
  }
  rc = run("train --features " + (dir.path / "rec.feat").string() + " --ann " +
               ann_path + " --out " + (dir.path / "c.sznt").string() +
               " --config " + (dir.path / "run2.cfg").string() + " --batch 20",
           &out);
  CHECK(rc != 0);

  {
    std::ofstream cfg(dir.path / "run3.cfg");
    cfg << "epochs=1\nrnn=gru\nconv-channels=2,3\nrnn-hidden=3,4\n"
        << "conv1d-channels=4\npool1d-size=8\n";
  }
  rc = run("train --features " + (dir.path / "rec.feat").string() + " --ann " +
               ann_path + " --out " + (dir.path / "c.sznt").string() +
               " --config " + (dir.path / "run3.cfg").string() +
               " --batch 20 --seed 2",
           &out);
  CHECK(rc == 0);
  Container c = read_container((dir.path / "c.sznt").string());
  CHECK(c.config_value("net.rnn_kind") == "gru");  // config file applied

  // Command-line flags win over config file values.
  rc = run("train --features " + (dir.path / "rec.feat").string() + " --ann " +
               ann_path + " --out " + (dir.path / "d.sznt").string() +
               " --config " + (dir.path / "run3.cfg").string() +
               " --rnn lstm --batch 20 --seed 2",
           &out);
  CHECK(rc == 0);
  Container d = read_container((dir.path / "d.sznt").string());
  CHECK(d.config_value("net.rnn_kind") == "lstm");
}

TEST_CASE("SEIZENET_SEED env var seeds the run when --seed is absent") {
  TempDir dir("seiznet_cli_env");
  const fs::path sig = dir.path / "rec.csv";
  write_synth_csv(sig, 23);
  REQUIRE(run("features " + sig.string() + " --out-dir " + dir.path.string()) ==
          0);
  EventList ann = EventList::from_events(
      {{0.0, 20.0, Label::seiz}, {20.0, 40.0, Label::bckg}});
  const std::string ann_path = (dir.path / "ref.csv").string();
  write_annotations_csv(ann_path, ann);

  const std::string cmd =
      std::string("SEIZENET_SEED=4242 ") + cli_path() + " train --features " +
      (dir.path / "rec.feat").string() + " --ann " + ann_path + " --out " +
      (dir.path / "env.sznt").string() + kToyArch +
      " --epochs 1 --batch 20 >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  REQUIRE(WEXITSTATUS(status) == 0);
  Container c = read_container((dir.path / "env.sznt").string());
  CHECK(c.config_value("seed") == "4242");
}
