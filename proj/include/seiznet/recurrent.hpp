#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "seiznet/tensor.hpp"

namespace seiznet {

enum class RnnKind { lstm, gru };

RnnKind rnn_kind_from_name(const std::string& name);
std::string rnn_kind_name(RnnKind kind);

// Peephole LSTM cell parameters. Gate order everywhere: input, forget, cell,
// output. Peepholes are per-unit vectors, not matrices.
struct LstmParams {
  Tensor U_i, U_f, U_c, U_o;  // input weights [n, m]
  Tensor W_i, W_f, W_c, W_o;  // recurrent weights [n, n]
  Tensor p_i, p_f, p_o;       // peepholes [n]
  Tensor b_i, b_f, b_c, b_o;  // biases [n]

  static LstmParams zeros(std::size_t n, std::size_t m);
  std::size_t hidden_size() const { return U_i.extent(0); }
  std::size_t input_size() const { return U_i.extent(1); }
  std::size_t count() const;  // stored scalars
};

// GRU cell parameters: no peepholes, no separate cell state. Gate order:
// reset, update, candidate.
struct GruParams {
  Tensor U_r, U_z, U_s;  // [n, m]
  Tensor W_r, W_z, W_s;  // [n, n]
  Tensor b_r, b_z, b_s;  // [n]

  static GruParams zeros(std::size_t n, std::size_t m);
  std::size_t hidden_size() const { return U_r.extent(0); }
  std::size_t input_size() const { return U_r.extent(1); }
  std::size_t count() const;
};

struct CellState {
  Tensor s;  // hidden/block output [n]
  Tensor c;  // cell state [n], LSTM only

  static CellState zeros(std::size_t n) {
    return CellState{Tensor({n}), Tensor({n})};
  }
};

struct LstmStepCache {
  Tensor x, s_prev, c_prev;
  Tensor i, f, g, o;  // gate activations; g = tanh cell candidate
  Tensor c, tanh_c;
};

struct GruStepCache {
  Tensor x, s_prev;
  Tensor r, z, wr, h;  // wr = W_s * s_prev (pre reset gating), h = candidate
};

// One step of the peephole LSTM recurrence. Input and forget peepholes read
// c_{t-1}; the output peephole reads c_t.
CellState lstm_step(const Tensor& x, const CellState& prev,
                    const LstmParams& p, LstmStepCache* cache = nullptr);

// One step of the GRU recurrence; the reset gate applies inside the
// candidate's recurrent term.
Tensor gru_step(const Tensor& x, const Tensor& s_prev, const GruParams& p,
                GruStepCache* cache = nullptr);

// A recurrent layer of one kind; exactly one of the parameter bundles is
// active.
struct RecurrentLayer {
  RnnKind kind = RnnKind::lstm;
  LstmParams lstm;
  GruParams gru;

  static RecurrentLayer zeros(RnnKind kind, std::size_t n, std::size_t m);
  std::size_t hidden_size() const;
  std::size_t input_size() const;
  std::size_t count() const;
};

enum class Direction { forward, backward };

struct SequenceCache {
  Direction direction = Direction::forward;
  // Step caches in scan order (reversed time for the backward direction).
  std::vector<LstmStepCache> lstm_steps;
  std::vector<GruStepCache> gru_steps;
};

// Scans xs [T, m] from zero initial state and returns outputs [T, n] in
// original time order. The backward direction reverses the input, scans, and
// reverses the output.
Tensor run_sequence(const Tensor& xs, const RecurrentLayer& layer,
                    Direction direction, SequenceCache* cache = nullptr);

struct SequenceGrads {
  Tensor d_inputs;       // [T, m]
  RecurrentLayer d_params;  // gradient holder shaped like the layer
};

// Exact reverse-mode gradients through the unrolled scan. d_outputs is given
// in original time order, matching run_sequence's output.
SequenceGrads bptt(const RecurrentLayer& layer, const SequenceCache& cache,
                   const Tensor& d_outputs);

// Stack of (optionally bidirectional) recurrent layers. Between layers the
// two directions concatenate per step; the final feature concatenates each
// direction's own last state (for the backward scan that is its step over
// the first input frame).
struct RnnStackLayer {
  bool bidirectional = true;
  RecurrentLayer fwd;
  RecurrentLayer bwd;
};

struct RnnStackLayerCache {
  SequenceCache fwd;
  SequenceCache bwd;
  Tensor out_fwd;  // [T, n]
  Tensor out_bwd;  // [T, n], original time order
};

struct RnnStackCache {
  std::vector<RnnStackLayerCache> layers;
  std::size_t steps = 0;
};

class RnnStack {
 public:
  RnnStack() = default;
  RnnStack(RnnKind kind, std::size_t input_size,
           const std::vector<std::size_t>& hidden_sizes, bool bidirectional);

  // xs [T, m] -> final feature [2*n_last] (or [n_last] unidirectional).
  Tensor forward(const Tensor& xs, RnnStackCache* cache = nullptr) const;

  struct Grads {
    Tensor d_inputs;
    std::vector<RnnStackLayer> d_layers;
  };
  Grads backward(const RnnStackCache& cache, const Tensor& d_final) const;

  std::size_t output_size() const;
  std::size_t count() const;

  std::vector<RnnStackLayer>& layers() { return layers_; }
  const std::vector<RnnStackLayer>& layers() const { return layers_; }

 private:
  std::vector<RnnStackLayer> layers_;
};

}  // namespace seiznet
