#pragma once

#include <string>
#include <vector>

#include "seiznet/rng.hpp"
#include "seiznet/tensor.hpp"

namespace seiznet {

enum class RegKind { none, l1, l2, l1l2, dropout, gaussian_noise };

RegKind reg_kind_from_name(const std::string& name);
std::string reg_kind_name(RegKind kind);

enum class Mode { train, eval };

struct RegSpec {
  RegKind kind = RegKind::none;
  double lambda1 = 0.01;      // L1 penalty weight
  double lambda2 = 0.01;      // L2 penalty weight
  double p_drop = 0.5;        // dropout probability
  double noise_stddev = 0.1;  // Gaussian noise std

  bool is_penalty() const {
    return kind == RegKind::l1 || kind == RegKind::l2 || kind == RegKind::l1l2;
  }
};

// Weight penalty over a set of parameter tensors. L1 uses the subgradient
// sign(w) with sign(0) = 0.
struct PenaltyResult {
  double loss = 0.0;
  std::vector<Tensor> grads;  // one per input tensor, same shapes
};

PenaltyResult penalty(const std::vector<const Tensor*>& params,
                      const RegSpec& spec);

// Inverted dropout: train-mode outputs are scaled by 1/(1-p) so the eval
// pass needs no rescaling and is exactly the identity.
struct DropoutResult {
  Tensor y;
  Tensor mask;  // kept elements are 1, dropped 0
};

DropoutResult dropout(const Tensor& x, double p_drop, Mode mode, Rng& rng);
Tensor dropout_backward(const Tensor& d_y, const Tensor& mask, double p_drop);

// Zero-centered additive Gaussian noise; identity in eval mode and for the
// backward pass.
Tensor gaussian_noise(const Tensor& x, double stddev, Mode mode, Rng& rng);

}  // namespace seiznet
