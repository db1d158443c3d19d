#include "seiznet/regularize.hpp"

#include <cmath>

#include "seiznet/error.hpp"

namespace seiznet {

RegKind reg_kind_from_name(const std::string& name) {
  if (name == "none") return RegKind::none;
  if (name == "l1") return RegKind::l1;
  if (name == "l2") return RegKind::l2;
  if (name == "l1l2") return RegKind::l1l2;
  if (name == "dropout") return RegKind::dropout;
  if (name == "gaussian") return RegKind::gaussian_noise;
  throw ConfigError("unknown regularizer '" + name +
                    "' (expected l1|l2|l1l2|dropout|gaussian|none)");
}

std::string reg_kind_name(RegKind kind) {
  switch (kind) {
    case RegKind::none: return "none";
    case RegKind::l1: return "l1";
    case RegKind::l2: return "l2";
    case RegKind::l1l2: return "l1l2";
    case RegKind::dropout: return "dropout";
    case RegKind::gaussian_noise: return "gaussian";
  }
  return "?";
}

PenaltyResult penalty(const std::vector<const Tensor*>& params,
                      const RegSpec& spec) {
  if (!spec.is_penalty()) {
    throw ConfigError("penalty() called with non-penalty regularizer '" +
                      reg_kind_name(spec.kind) + "'");
  }
  const bool use_l1 = spec.kind == RegKind::l1 || spec.kind == RegKind::l1l2;
  const bool use_l2 = spec.kind == RegKind::l2 || spec.kind == RegKind::l1l2;

  PenaltyResult result;
  result.grads.reserve(params.size());
  for (const Tensor* p : params) {
    Tensor grad(p->shape());
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double w = (*p)[i];
      if (use_l1) {
        result.loss += spec.lambda1 * std::fabs(w);
        grad[i] += w > 0.0 ? spec.lambda1 : (w < 0.0 ? -spec.lambda1 : 0.0);
      }
      if (use_l2) {
        result.loss += spec.lambda2 * w * w;
        grad[i] += 2.0 * spec.lambda2 * w;
      }
    }
    result.grads.push_back(std::move(grad));
  }
  return result;
}

DropoutResult dropout(const Tensor& x, double p_drop, Mode mode, Rng& rng) {
  if (p_drop < 0.0 || p_drop >= 1.0) {
    throw ConfigError("dropout probability must be in [0,1), got " +
                      std::to_string(p_drop));
  }
  DropoutResult r{Tensor(x.shape()), Tensor(x.shape())};
  if (mode == Mode::eval || p_drop == 0.0) {
    r.y = x;
    r.mask.fill(1.0);
    return r;
  }
  const double scale = 1.0 / (1.0 - p_drop);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool keep = rng.uniform() >= p_drop;
    r.mask[i] = keep ? 1.0 : 0.0;
    r.y[i] = keep ? x[i] * scale : 0.0;
  }
  return r;
}

Tensor dropout_backward(const Tensor& d_y, const Tensor& mask, double p_drop) {
  Tensor dx(d_y.shape());
  const double scale = 1.0 / (1.0 - p_drop);
  for (std::size_t i = 0; i < d_y.size(); ++i) {
    dx[i] = d_y[i] * mask[i] * scale;
  }
  return dx;
}

Tensor gaussian_noise(const Tensor& x, double stddev, Mode mode, Rng& rng) {
  if (stddev < 0.0) {
    throw ConfigError("noise stddev must be >= 0, got " +
                      std::to_string(stddev));
  }
  if (mode == Mode::eval || stddev == 0.0) return x;
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + rng.normal(stddev);
  return y;
}

}  // namespace seiznet
