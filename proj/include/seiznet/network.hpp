#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "seiznet/init.hpp"
#include "seiznet/layers.hpp"
#include "seiznet/recurrent.hpp"
#include "seiznet/regularize.hpp"
#include "seiznet/tensor.hpp"

namespace seiznet {

// Architecture of the convolutional recurrent network: repeated 2D conv+pool
// stages, per-frame flatten, a 1D conv+pool over time, a bidirectional
// recurrent stack, and a 2-way sigmoid head. Defaults are the reference
// configuration.
struct NetworkConfig {
  std::size_t input_frames = 210;
  std::size_t input_height = 22;
  std::size_t input_width = 26;
  std::size_t input_channels = 1;
  std::vector<std::size_t> conv_channels = {16, 32, 64};
  std::size_t conv2d_kernel = 3;  // square kernels
  std::size_t pool_h = 2;
  std::size_t pool_w = 2;
  std::size_t conv1d_channels = 16;
  std::size_t conv1d_kernel = 3;
  std::size_t pool1d_size = 8;
  std::vector<std::size_t> rnn_hidden = {128, 256};
  RnnKind rnn_kind = RnnKind::lstm;
  bool bidirectional = true;
};

// Per-stage shapes derived while validating a NetworkConfig.
struct ShapeChain {
  struct Frame {
    std::size_t t, h, w, c;
    bool operator==(const Frame&) const = default;
  };
  std::vector<Frame> after_conv;  // one per 2D stage (post conv, pre pool)
  std::vector<Frame> after_pool;  // one per 2D stage
  std::size_t flat_frames = 0, flat_width = 0;      // e.g. (210, 384)
  std::size_t conv1d_frames = 0, conv1d_width = 0;  // e.g. (210, 16)
  std::size_t pooled_frames = 0, pooled_width = 0;  // e.g. (26, 16)
  std::size_t head_input = 0;                       // e.g. 512

  std::string to_string() const;
};

// Walks the configured chain and throws DimError on any stage that cannot be
// built (pool on an extent < pool size, conv kernel longer than the sequence,
// empty plans, ...).
ShapeChain validate_network_config(const NetworkConfig& cfg);

struct ForwardCache {
  struct ConvStage {
    Tensor input;
    Tensor pre;        // conv output (pre-ELU)
    Tensor elu;
    MaxPool2DResult pool;
    Tensor dropout_mask;  // empty when unused
  };
  std::vector<ConvStage> conv_stages;
  Tensor conv1d_input;  // flattened frames
  Tensor conv1d_pre;
  Tensor conv1d_elu;
  MaxPool1DResult pool1d;
  RnnStackCache rnn;
  HeadCache head;
};

// Named gradient set, aligned with Network::parameters() order.
using GradList = std::vector<std::pair<std::string, Tensor>>;

// The full model. Parameters live in explicit layer structs; forward and
// backward are hand-written per layer so every gradient is testable against
// finite differences.
class Network {
 public:
  explicit Network(NetworkConfig cfg);

  const NetworkConfig& config() const { return cfg_; }
  const ShapeChain& chain() const { return chain_; }

  // Applies the scheme to weight matrices and kernels; biases and peepholes
  // start at zero.
  void initialize(const InitSpec& spec);

  // Deterministically ordered (name, tensor) views over every parameter.
  std::vector<std::pair<std::string, Tensor*>> parameters();
  std::vector<std::pair<std::string, const Tensor*>> parameters() const;
  std::size_t parameter_count() const;

  // Kernel tensors of the first two 2D conv stages (the regularized layers).
  std::vector<const Tensor*> regularized_params() const;

  // window [T, H, W, C] -> two sigmoid outputs (seizure, background).
  // Dropout / noise apply in train mode after the first two conv stages; rng
  // may be null in eval mode or when the spec needs no randomness.
  Tensor forward(const Tensor& window, Mode mode, const RegSpec& reg,
                 Rng* rng, ForwardCache* cache = nullptr) const;

  // Eval shorthand.
  Tensor predict(const Tensor& window) const;

  // Data-loss gradients for every parameter given d(pred); penalty gradients
  // are the trainer's concern.
  GradList backward(const ForwardCache& cache, const Tensor& d_pred,
                    const RegSpec& reg) const;

  std::vector<Conv2DLayer>& conv2d_layers() { return conv2d_; }
  Conv1DLayer& conv1d_layer() { return conv1d_; }
  RnnStack& rnn_stack() { return rnn_; }
  DenseSigmoidHead& head() { return head_; }

 private:
  NetworkConfig cfg_;
  ShapeChain chain_;
  std::vector<Conv2DLayer> conv2d_;
  Conv1DLayer conv1d_;
  RnnStack rnn_;
  DenseSigmoidHead head_;
};

}  // namespace seiznet
