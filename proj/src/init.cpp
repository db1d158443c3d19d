#include "seiznet/init.hpp"

#include <cmath>
#include <utility>

#include "seiznet/error.hpp"

namespace seiznet {

namespace {

struct SchemeName {
  InitScheme scheme;
  const char* name;
};

constexpr SchemeName kSchemeNames[] = {
    {InitScheme::orthogonal, "orthogonal"},
    {InitScheme::lecun_uniform, "lecun_uniform"},
    {InitScheme::lecun_normal, "lecun_normal"},
    {InitScheme::glorot_uniform, "glorot_uniform"},
    {InitScheme::glorot_normal, "glorot_normal"},
    {InitScheme::he_uniform, "he_uniform"},
    {InitScheme::he_normal, "he_normal"},
    {InitScheme::variance_scaling, "variance_scaling"},
    {InitScheme::random_uniform, "random_uniform"},
    {InitScheme::truncated_normal, "truncated_normal"},
    {InitScheme::zeros, "zeros"},
    {InitScheme::ones, "ones"},
};

// Householder QR of a row-major rows x cols matrix, rows >= cols. Returns the
// thin Q (rows x cols) and the signs of R's diagonal.
void householder_thin_q(std::vector<double>& a, std::size_t rows,
                        std::size_t cols, std::vector<double>& q,
                        std::vector<double>& rdiag) {
  rdiag.assign(cols, 0.0);
  for (std::size_t k = 0; k < cols; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < rows; ++i) norm = std::hypot(norm, a[i * cols + k]);
    if (norm == 0.0) {
      rdiag[k] = 0.0;
      continue;
    }
    if (a[k * cols + k] < 0.0) norm = -norm;
    for (std::size_t i = k; i < rows; ++i) a[i * cols + k] /= norm;
    a[k * cols + k] += 1.0;
    for (std::size_t j = k + 1; j < cols; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < rows; ++i) s += a[i * cols + k] * a[i * cols + j];
      s = -s / a[k * cols + k];
      for (std::size_t i = k; i < rows; ++i) a[i * cols + j] += s * a[i * cols + k];
    }
    rdiag[k] = -norm;
  }
  q.assign(rows * cols, 0.0);
  for (std::size_t kk = cols; kk-- > 0;) {
    q[kk * cols + kk] = 1.0;
    for (std::size_t j = kk; j < cols; ++j) {
      if (a[kk * cols + kk] == 0.0) continue;
      double s = 0.0;
      for (std::size_t i = kk; i < rows; ++i) s += a[i * cols + kk] * q[i * cols + j];
      s = -s / a[kk * cols + kk];
      for (std::size_t i = kk; i < rows; ++i) q[i * cols + j] += s * a[i * cols + kk];
    }
  }
}

}  // namespace

InitScheme init_scheme_from_name(const std::string& name) {
  for (const auto& entry : kSchemeNames) {
    if (name == entry.name) return entry.scheme;
  }
  throw ConfigError("unknown init scheme '" + name + "'");
}

std::string init_scheme_name(InitScheme scheme) {
  for (const auto& entry : kSchemeNames) {
    if (entry.scheme == scheme) return entry.name;
  }
  return "?";
}

std::vector<std::string> init_scheme_names() {
  std::vector<std::string> names;
  for (const auto& entry : kSchemeNames) names.emplace_back(entry.name);
  return names;
}

Tensor orthogonal_matrix(const std::vector<std::size_t>& shape, Rng& rng) {
  if (shape.size() < 2) {
    throw DimError("orthogonal init needs rank >= 2, got " + shape_str(shape));
  }
  std::size_t total = 1;
  for (std::size_t e : shape) total *= e;
  const std::size_t cols = shape.back();
  const std::size_t rows = total / cols;

  const std::size_t big = std::max(rows, cols);
  const std::size_t small = std::min(rows, cols);
  std::vector<double> sample(big * small);
  for (double& v : sample) v = rng.normal();

  std::vector<double> q, rdiag;
  householder_thin_q(sample, big, small, q, rdiag);
  // Multiply column j by sign(R[j][j]) for a unique, seed-stable result.
  for (std::size_t j = 0; j < small; ++j) {
    if (rdiag[j] < 0.0) {
      for (std::size_t i = 0; i < big; ++i) q[i * small + j] = -q[i * small + j];
    }
  }

  Tensor out(shape);
  if (rows >= cols) {
    for (std::size_t i = 0; i < total; ++i) out[i] = q[i];
  } else {
    // Wide target: transpose so the rows come out orthonormal.
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = q[j * rows + i];
  }
  return out;
}

Tensor init_tensor(const std::vector<std::size_t>& shape, std::size_t fan_in,
                   std::size_t fan_out, const InitSpec& spec,
                   std::uint64_t stream_index) {
  if (fan_in < 1 || fan_out < 1) {
    throw ConfigError("init fans must be >= 1, got fan_in=" +
                      std::to_string(fan_in) +
                      " fan_out=" + std::to_string(fan_out));
  }
  Rng rng = Rng::stream(spec.seed, stream_index);
  Tensor out(shape);
  const double fi = static_cast<double>(fan_in);
  const double fo = static_cast<double>(fan_out);

  switch (spec.scheme) {
    case InitScheme::orthogonal:
      return orthogonal_matrix(shape, rng);
    case InitScheme::glorot_uniform: {
      const double limit = std::sqrt(6.0 / (fi + fo));
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.uniform_signed(limit);
      break;
    }
    case InitScheme::glorot_normal: {
      const double sd = std::sqrt(2.0 / (fi + fo));
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.normal(sd);
      break;
    }
    case InitScheme::he_uniform: {
      const double limit = std::sqrt(6.0 / fi);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.uniform_signed(limit);
      break;
    }
    case InitScheme::he_normal: {
      const double sd = std::sqrt(2.0 / fi);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.normal(sd);
      break;
    }
    case InitScheme::lecun_uniform: {
      const double limit = std::sqrt(3.0 / fi);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.uniform_signed(limit);
      break;
    }
    case InitScheme::lecun_normal: {
      const double sd = std::sqrt(1.0 / fi);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.normal(sd);
      break;
    }
    case InitScheme::variance_scaling: {
      const double sd = std::sqrt(spec.variance_scale / fi);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.normal(sd);
      break;
    }
    case InitScheme::random_uniform: {
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = rng.uniform_signed(spec.uniform_limit);
      break;
    }
    case InitScheme::truncated_normal: {
      const double sd = spec.normal_stddev;
      for (std::size_t i = 0; i < out.size(); ++i) {
        double v = rng.normal(sd);
        while (std::fabs(v) > 2.0 * sd) v = rng.normal(sd);
        out[i] = v;
      }
      break;
    }
    case InitScheme::zeros:
      break;
    case InitScheme::ones:
      out.fill(1.0);
      break;
  }
  return out;
}

}  // namespace seiznet
