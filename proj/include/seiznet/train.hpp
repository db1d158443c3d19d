#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "seiznet/checkpoint.hpp"
#include "seiznet/network.hpp"
#include "seiznet/regularize.hpp"
#include "seiznet/tensor.hpp"

namespace seiznet {

struct MseResult {
  double loss = 0.0;
  Tensor grad;
};

// Mean of squared differences over the 2-way one-hot target; the gradient is
// 2*(pred - target)/2 = pred - target.
MseResult mse_loss(const Tensor& pred, const Tensor& target);

// Targets: (1,0) = seizure, (0,1) = background.
Tensor one_hot_target(bool seizure);

struct AdamConfig {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-parameter first/second moment state, keyed like the parameter list.
class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  // One update over aligned (name, param) / (name, grad) lists. Aborts on a
  // non-finite gradient, naming the offending tensor and the step.
  void step(std::vector<std::pair<std::string, Tensor*>>& params,
            const GradList& grads);

  std::size_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::map<std::string, Tensor> m_, v_;
  std::size_t t_ = 0;
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double learning_rate = 0.001;
  std::uint64_t seed = 0;
  InitSpec init;      // applied before the first step
  RegSpec reg;
  bool apply_init = true;
};

struct TrainLogEntry {
  std::size_t step = 0;
  double data_loss = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

struct TrainResult {
  std::vector<TrainLogEntry> log;
  std::size_t steps = 0;
  bool aborted_non_finite = false;
  std::string abort_reason;
  // Relative data-loss decrease over the first 50 steps was below 1%.
  bool stalled = false;
};

struct LabeledWindow {
  Tensor window;      // [T, H, W, 1]
  bool seizure = false;
};

// Seeded, deterministic training loop: shuffled batches, batch-mean
// gradients, penalties on the first two conv kernels, Adam updates. A
// non-finite loss aborts the run with the last good parameters restored.
TrainResult train(Network& net, const std::vector<LabeledWindow>& dataset,
                  const TrainConfig& cfg);

// Fraction of windows whose larger head output matches the label.
double training_accuracy(const Network& net,
                         const std::vector<LabeledWindow>& dataset);

void write_loss_log_csv(const std::string& path,
                        const std::vector<TrainLogEntry>& log,
                        const std::map<std::string, std::string>& header);

// Checkpoint = container with the network config plus caller metadata in the
// config block and one record per parameter tensor.
std::map<std::string, std::string> network_config_map(const NetworkConfig& cfg);
NetworkConfig network_config_from_map(
    const std::map<std::string, std::string>& map);

void save_checkpoint(const std::string& path, const Network& net,
                     const std::map<std::string, std::string>& extra_config);
struct LoadedCheckpoint {
  Network net;
  std::map<std::string, std::string> config;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace seiznet
