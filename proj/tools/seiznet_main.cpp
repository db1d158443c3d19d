// seiznet: feature extraction, training, evaluation and scoring for the
// convolutional gated-recurrent seizure detector.
//
// Commands:
//   seiznet features <signals...> --out-dir DIR
//   seiznet train --features F.feat --ann R.csv --out ckpt.sznt [...]
//   seiznet eval --ckpt ckpt.sznt --features F.feat --ann R.csv --out-dir DIR
//   seiznet score --ref R.csv --hyp H.csv

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seiznet/checkpoint.hpp"
#include "seiznet/error.hpp"
#include "seiznet/features.hpp"
#include "seiznet/network.hpp"
#include "seiznet/scoring.hpp"
#include "seiznet/train.hpp"

namespace fs = std::filesystem;
using namespace seiznet;

namespace {

using ConfigMap = std::map<std::string, std::string>;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + tmp + "'");
    out << text;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw FormatError("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

std::string config_comment_block(const ConfigMap& config) {
  std::string out;
  for (const auto& [key, value] : config) {
    out += "# " + key + "=" + value + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared option bundles
// ---------------------------------------------------------------------------

struct ArchOptions {
  std::string conv_channels = "16,32,64";
  std::string rnn_hidden = "128,256";
  std::size_t conv1d_channels = 16;
  std::size_t conv1d_kernel = 3;
  std::size_t pool1d_size = 8;
  std::string rnn = "lstm";

  void attach(CLI::App* cmd) {
    cmd->add_option("--rnn", rnn, "Recurrent cell: lstm or gru")
        ->default_str(rnn);
    cmd->add_option("--conv-channels", conv_channels,
                    "2D conv channel plan, comma separated")
        ->default_str(conv_channels);
    cmd->add_option("--rnn-hidden", rnn_hidden,
                    "Recurrent hidden sizes per layer, comma separated")
        ->default_str(rnn_hidden);
    cmd->add_option("--conv1d-channels", conv1d_channels,
                    "1D conv output channels")
        ->default_str(std::to_string(conv1d_channels));
    cmd->add_option("--conv1d-kernel", conv1d_kernel, "1D conv kernel size")
        ->default_str(std::to_string(conv1d_kernel));
    cmd->add_option("--pool1d-size", pool1d_size, "1D max pool size")
        ->default_str(std::to_string(pool1d_size));
  }

  NetworkConfig to_network_config(const FeatureConfig& feat) const {
    NetworkConfig cfg;
    cfg.input_frames = feat.window_frames();
    cfg.input_height = kMontageChannels;
    cfg.input_width = feat.feature_width();
    cfg.input_channels = 1;
    cfg.conv_channels.clear();
    std::istringstream conv(conv_channels);
    std::string item;
    while (std::getline(conv, item, ',')) {
      if (!item.empty()) cfg.conv_channels.push_back(std::stoull(item));
    }
    cfg.rnn_hidden.clear();
    std::istringstream hidden(rnn_hidden);
    while (std::getline(hidden, item, ',')) {
      if (!item.empty()) cfg.rnn_hidden.push_back(std::stoull(item));
    }
    cfg.conv1d_channels = conv1d_channels;
    cfg.conv1d_kernel = conv1d_kernel;
    cfg.pool1d_size = pool1d_size;
    cfg.rnn_kind = rnn_kind_from_name(rnn);
    return cfg;
  }
};

// key=value config file applied after flag parsing; flags win, unknown keys
// are rejected. Values land in the same CLI11 options the flags use.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config file '" + path + "' line " +
                        std::to_string(lineno) + " is not key=value: " + line);
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr || opt->get_positional()) {
      throw ConfigError("config file '" + path + "' has unknown key '" + key +
                        "'");
    }
    if (opt->count() > 0) continue;  // command-line flags win
    opt->add_result(value);
    opt->run_callback();
  }
}

// Every value the run actually used, echoed into artifact headers.
ConfigMap effective_config(const CLI::App* cmd) {
  ConfigMap map;
  for (const CLI::Option* opt : cmd->get_options()) {
    const std::string name = opt->get_lnames().empty() ? opt->get_name()
                                                       : opt->get_lnames()[0];
    if (name.empty() || name == "help" || name == "config") continue;
    std::string value = opt->count() ? opt->results().back()
                                     : opt->get_default_str();
    if (value.empty() && opt->count()) value = "true";
    if (!value.empty()) map["cli." + name] = value;
  }
  return map;
}

// ---------------------------------------------------------------------------
// features
// ---------------------------------------------------------------------------

int run_features(const std::vector<std::string>& inputs,
                 const std::string& out_dir, const CLI::App* cmd) {
  fs::create_directories(out_dir);
  const FeatureConfig feat;
  ConfigMap base_config = effective_config(cmd);
  base_config["kind"] = "features";
  base_config["feat.window_s"] = fmt_double(feat.window_s);
  base_config["feat.window_stride_s"] = fmt_double(feat.window_stride_s);
  base_config["feat.frame_len_s"] = fmt_double(feat.frame_len_s);
  base_config["feat.frame_step_s"] = fmt_double(feat.frame_step_s);
  base_config["feat.n_filters"] = std::to_string(feat.n_filters);
  base_config["feat.n_ceps"] = std::to_string(feat.n_ceps);
  base_config["feat.width"] = std::to_string(feat.feature_width());

  int failures = 0;
  for (const std::string& input : inputs) {
    try {
      SignalRecord sig = read_signal(input);
      std::vector<FeatureWindow> windows = build_windows(sig, feat);

      Container container;
      container.config = base_config;
      container.config["source.path"] = fs::path(input).filename().string();
      container.config["source.sample_rate"] = fmt_double(sig.sample_rate);
      container.config["source.duration_s"] = fmt_double(sig.duration_s());
      container.config["n_windows"] = std::to_string(windows.size());

      Tensor starts({windows.size()});
      for (std::size_t i = 0; i < windows.size(); ++i) {
        starts[i] = windows[i].start_time_s;
      }
      container.tensors.emplace_back("start_times", std::move(starts));
      for (std::size_t i = 0; i < windows.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "window_%05zu", i);
        container.tensors.emplace_back(name, std::move(windows[i].frames));
      }

      const std::string out_path =
          (fs::path(out_dir) / fs::path(input).stem()).string() + ".feat";
      write_container(out_path, container);
      std::cout << input << " -> " << out_path << " (" << windows.size()
                << " windows)\n";
    } catch (const std::exception& err) {
      std::cerr << "error: " << input << ": " << err.what() << "\n";
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct FeatureSet {
  std::vector<Tensor> windows;
  std::vector<double> start_times;
  double duration_s = 0.0;
  double window_s = 21.0;
  ConfigMap config;
};

FeatureSet load_features(const std::string& path) {
  Container container = read_container(path);
  if (container.config_value("kind") != "features") {
    throw FormatError("'" + path + "' is not a feature container");
  }
  FeatureSet set;
  set.config = container.config;
  set.duration_s = std::stod(container.config_value("source.duration_s"));
  set.window_s = std::stod(container.config_value("feat.window_s"));
  const Tensor* starts = container.find("start_times");
  if (!starts) throw FormatError("'" + path + "' misses start_times");
  for (auto& [name, tensor] : container.tensors) {
    if (name.rfind("window_", 0) == 0) {
      set.windows.push_back(std::move(tensor));
      set.start_times.push_back((*starts)[set.windows.size() - 1]);
    }
  }
  if (set.windows.empty()) throw FormatError("'" + path + "' holds no windows");
  return set;
}

int run_train(const std::vector<std::string>& feature_paths,
              const std::vector<std::string>& ann_paths,
              const std::string& out_path, const std::string& loss_log_path,
              const ArchOptions& arch, const std::string& init_name,
              const std::string& reg_name, double reg_strength,
              bool reg_strength_set, std::uint64_t seed, std::size_t epochs,
              std::size_t batch_size, double learning_rate,
              const CLI::App* cmd) {
  if (ann_paths.size() != feature_paths.size()) {
    throw ConfigError("need one --ann per --features (got " +
                      std::to_string(ann_paths.size()) + " for " +
                      std::to_string(feature_paths.size()) + ")");
  }

  std::vector<LabeledWindow> dataset;
  double window_s = 21.0;
  for (std::size_t f = 0; f < feature_paths.size(); ++f) {
    FeatureSet set = load_features(feature_paths[f]);
    window_s = set.window_s;
    EventList ann = read_annotations_csv(ann_paths[f]);
    std::vector<std::string> uncovered;
    for (std::size_t i = 0; i < set.windows.size(); ++i) {
      const double midpoint = set.start_times[i] + set.window_s / 2.0;
      auto label = ann.find_label(midpoint);
      if (!label) {
        uncovered.push_back(feature_paths[f] + ":window " + std::to_string(i) +
                            " (midpoint " + fmt_double(midpoint) + " s)");
        continue;
      }
      dataset.push_back({std::move(set.windows[i]), *label == Label::seiz});
    }
    if (!uncovered.empty()) {
      std::string msg = "annotation does not cover every window midpoint:";
      for (const std::string& u : uncovered) msg += "\n  " + u;
      throw ConfigError(msg);
    }
  }

  FeatureConfig feat;
  feat.window_s = window_s;
  NetworkConfig net_cfg = arch.to_network_config(feat);
  Network net(net_cfg);

  TrainConfig train_cfg;
  train_cfg.epochs = epochs;
  train_cfg.batch_size = batch_size;
  train_cfg.learning_rate = learning_rate;
  train_cfg.seed = seed;
  train_cfg.init.scheme = init_scheme_from_name(init_name);
  train_cfg.init.seed = seed;
  train_cfg.reg.kind = reg_kind_from_name(reg_name);
  if (reg_strength_set) {
    train_cfg.reg.lambda1 = reg_strength;
    train_cfg.reg.lambda2 = reg_strength;
    train_cfg.reg.noise_stddev = reg_strength;
    if (train_cfg.reg.kind == RegKind::dropout) {
      train_cfg.reg.p_drop = reg_strength;
    }
  }

  TrainResult result = train(net, dataset, train_cfg);

  ConfigMap config = effective_config(cmd);
  config["seed"] = std::to_string(seed);
  config["train.steps"] = std::to_string(result.steps);
  config["train.windows"] = std::to_string(dataset.size());

  if (!loss_log_path.empty()) {
    write_loss_log_csv(loss_log_path, result.log, config);
  }
  save_checkpoint(out_path, net, config);

  if (result.aborted_non_finite) {
    std::cerr << "error: " << result.abort_reason
              << "; last good checkpoint retained at " << out_path << "\n";
    return 1;
  }
  if (result.stalled) {
    std::cerr << "warning: training stalled (loss decreased < 1% over the "
                 "first 50 steps); check the initialization scheme\n";
  }
  std::cout << "trained " << result.steps << " steps over " << dataset.size()
            << " windows; checkpoint " << out_path << " ("
            << net.parameter_count() << " parameters)\n";
  if (!result.log.empty()) {
    std::cout << "final loss " << result.log.back().total << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int run_eval(const std::string& ckpt_path, const std::string& features_path,
             const std::string& ann_path, double threshold,
             const std::string& out_dir, const CLI::App* cmd) {
  LoadedCheckpoint loaded = load_checkpoint(ckpt_path);
  FeatureSet set = load_features(features_path);

  const NetworkConfig& net_cfg = loaded.net.config();
  const Tensor& probe = set.windows.front();
  const std::vector<std::size_t> expected{net_cfg.input_frames,
                                          net_cfg.input_height,
                                          net_cfg.input_width,
                                          net_cfg.input_channels};
  if (probe.shape() != expected) {
    throw DimError("feature windows " + shape_str(probe.shape()) +
                   " do not match checkpoint chain " +
                   loaded.net.chain().to_string());
  }

  // Window k classifies its final epoch; epochs before the first complete
  // window carry no evidence and read as posterior zero.
  const std::size_t n_epochs =
      static_cast<std::size_t>(std::floor(set.duration_s));
  std::vector<double> values(n_epochs, 0.0);
  for (std::size_t i = 0; i < set.windows.size(); ++i) {
    const double end = set.start_times[i] + set.window_s;
    const std::ptrdiff_t epoch = std::llround(end) - 1;
    if (epoch < 0 || epoch >= static_cast<std::ptrdiff_t>(n_epochs)) continue;
    const Tensor pred = loaded.net.predict(set.windows[i]);
    values[static_cast<std::size_t>(epoch)] = pred[0];
  }
  EpochPosteriors posteriors = EpochPosteriors::from_values(values);

  EventList ref = read_annotations_csv(ann_path);
  if (ref.total_duration_s < set.duration_s) {
    // Annotations may end at the last event; extend to the record.
    ref.total_duration_s = std::floor(set.duration_s);
  }

  fs::create_directories(out_dir);
  ConfigMap config = effective_config(cmd);
  for (const auto& [key, value] : loaded.config) {
    if (key.rfind("cli.", 0) != 0) config["ckpt." + key] = value;
  }

  // Posteriors CSV.
  {
    std::string text = config_comment_block(config);
    text += "epoch,posterior\n";
    for (std::size_t k = 0; k < posteriors.values.size(); ++k) {
      text += std::to_string(k) + "," + fmt_double(posteriors.values[k]) + "\n";
    }
    write_text_atomic((fs::path(out_dir) / "posteriors.csv").string(), text);
  }

  // Operating-point report.
  EventList hyp = posteriors_to_events(posteriors, threshold);
  ScoreReport report = score_epochs(ref, hyp);
  OverlapScore overlap = overlap_score(ref, hyp);
  std::string report_text = config_comment_block(config);
  report_text += format_report(rnn_kind_name(net_cfg.rnn_kind) == "lstm"
                                   ? "CNN/LSTM"
                                   : "CNN/GRU",
                               report);
  char overlap_line[160];
  std::snprintf(overlap_line, sizeof(overlap_line),
                "overlap: hits=%zu misses=%zu false_alarms=%zu (ref=%zu "
                "hyp=%zu seizure events)\n",
                overlap.hits, overlap.misses, overlap.false_alarms,
                overlap.ref_seizures, overlap.hyp_seizures);
  report_text += overlap_line;
  write_text_atomic((fs::path(out_dir) / "report.txt").string(), report_text);
  std::cout << report_text;

  // DET sweep.
  std::vector<DetPoint> det =
      det_curve(posteriors, ref, default_threshold_sweep(posteriors));
  std::vector<std::pair<std::string, std::string>> det_header(config.begin(),
                                                              config.end());
  write_det_csv((fs::path(out_dir) / "det.csv").string(), det, det_header);
  return 0;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

int run_score(const std::string& ref_path, const std::string& hyp_path,
              double duration_override) {
  EventList ref = read_annotations_csv(ref_path);
  EventList hyp = read_annotations_csv(hyp_path);
  if (duration_override > 0.0) {
    ref.total_duration_s = duration_override;
    hyp.total_duration_s = duration_override;
  } else {
    const double total =
        std::max(ref.total_duration_s, hyp.total_duration_s);
    ref.total_duration_s = total;
    hyp.total_duration_s = total;
  }
  ScoreReport report = score_epochs(ref, hyp);
  OverlapScore overlap = overlap_score(ref, hyp);
  std::cout << format_report("score", report);
  char overlap_line[160];
  std::snprintf(overlap_line, sizeof(overlap_line),
                "overlap: hits=%zu misses=%zu false_alarms=%zu (ref=%zu "
                "hyp=%zu seizure events)\n",
                overlap.hits, overlap.misses, overlap.false_alarms,
                overlap.ref_seizures, overlap.hyp_seizures);
  std::cout << overlap_line;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"convolutional gated-recurrent seizure detection toolkit"};
  app.require_subcommand(1);

  // --- features ---
  CLI::App* features_cmd =
      app.add_subcommand("features", "Extract LFCC feature windows");
  std::vector<std::string> feature_inputs;
  std::string features_out_dir;
  features_cmd->add_option("inputs", feature_inputs, "Signal files (.csv or EEGR)")
      ->required();
  features_cmd->add_option("--out-dir", features_out_dir, "Output directory")
      ->required();
  std::string features_config;
  features_cmd->add_option("--config", features_config,
                           "key=value config file (flags win)");

  // --- train ---
  CLI::App* train_cmd = app.add_subcommand("train", "Train a detector");
  std::vector<std::string> train_features, train_anns;
  std::string train_out = "checkpoint.sznt";
  std::string train_loss_log;
  ArchOptions train_arch;
  std::string init_name = "orthogonal";
  std::string reg_name = "none";
  double reg_strength = 0.01;
  std::uint64_t seed = 0;
  std::size_t epochs = 10, batch_size = 8;
  double learning_rate = 0.001;
  train_cmd->add_option("--features", train_features, "Feature files")
      ->required();
  train_cmd->add_option("--ann", train_anns,
                        "Annotation CSV per feature file (start_s,stop_s,label)")
      ->required();
  train_cmd->add_option("--out", train_out, "Checkpoint path")
      ->default_str(train_out);
  train_cmd->add_option("--loss-log", train_loss_log, "Loss log CSV path");
  train_arch.attach(train_cmd);
  train_cmd->add_option("--init", init_name, "Weight initialization scheme")
      ->default_str(init_name);
  train_cmd->add_option("--reg", reg_name,
                        "Regularizer: l1|l2|l1l2|dropout|gaussian|none")
      ->default_str(reg_name);
  CLI::Option* reg_strength_opt = train_cmd->add_option(
      "--reg-strength", reg_strength,
      "Penalty weight / noise stddev / drop probability");
  train_cmd->add_option("--seed", seed, "Run seed")
      ->envname("SEIZENET_SEED")
      ->default_str("0");
  train_cmd->add_option("--epochs", epochs, "Training epochs")
      ->default_str(std::to_string(epochs));
  train_cmd->add_option("--batch", batch_size, "Batch size")
      ->default_str(std::to_string(batch_size));
  train_cmd->add_option("--lr", learning_rate, "Adam learning rate")
      ->default_str(fmt_double(learning_rate));
  std::string train_config;
  train_cmd->add_option("--config", train_config,
                        "key=value config file (flags win)");

  // --- eval ---
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Evaluate a checkpoint against annotations");
  std::string eval_ckpt, eval_features, eval_ann, eval_out_dir = ".";
  double eval_threshold = 0.5;
  eval_cmd->add_option("--ckpt", eval_ckpt, "Checkpoint path")->required();
  eval_cmd->add_option("--features", eval_features, "Feature file")->required();
  eval_cmd->add_option("--ann", eval_ann, "Reference annotation CSV")
      ->required();
  eval_cmd->add_option("--threshold", eval_threshold,
                       "Operating-point threshold")
      ->default_str("0.5");
  eval_cmd->add_option("--out-dir", eval_out_dir, "Output directory")
      ->default_str(".");
  std::string eval_config;
  eval_cmd->add_option("--config", eval_config,
                       "key=value config file (flags win)");

  // --- score ---
  CLI::App* score_cmd =
      app.add_subcommand("score", "Score hypothesis against reference");
  std::string score_ref, score_hyp;
  double score_duration = 0.0;
  score_cmd->add_option("--ref", score_ref, "Reference annotation CSV")
      ->required();
  score_cmd->add_option("--hyp", score_hyp, "Hypothesis annotation CSV")
      ->required();
  score_cmd->add_option("--duration", score_duration,
                        "Record duration override (seconds)");
  std::string score_config;
  score_cmd->add_option("--config", score_config,
                        "key=value config file (flags win)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!features_config.empty()) apply_config_file(features_cmd, features_config);
    if (!train_config.empty()) apply_config_file(train_cmd, train_config);
    if (!eval_config.empty()) apply_config_file(eval_cmd, eval_config);
    if (!score_config.empty()) apply_config_file(score_cmd, score_config);
    if (features_cmd->parsed()) {
      return run_features(feature_inputs, features_out_dir, features_cmd);
    }
    if (train_cmd->parsed()) {
      return run_train(train_features, train_anns, train_out, train_loss_log,
                       train_arch, init_name, reg_name, reg_strength,
                       reg_strength_opt->count() > 0, seed, epochs, batch_size,
                       learning_rate, train_cmd);
    }
    if (eval_cmd->parsed()) {
      return run_eval(eval_ckpt, eval_features, eval_ann, eval_threshold,
                      eval_out_dir, eval_cmd);
    }
    if (score_cmd->parsed()) {
      return run_score(score_ref, score_hyp, score_duration);
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
