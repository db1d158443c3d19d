#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seiznet/rng.hpp"
#include "seiznet/tensor.hpp"

namespace seiznet {

enum class InitScheme {
  orthogonal,
  lecun_uniform,
  lecun_normal,
  glorot_uniform,
  glorot_normal,
  he_uniform,
  he_normal,
  variance_scaling,
  random_uniform,
  truncated_normal,
  zeros,
  ones,
};

struct InitSpec {
  InitScheme scheme = InitScheme::orthogonal;
  std::uint64_t seed = 0;
  // Scale knobs. variance_scaling draws N(0, scale/fan_in); random_uniform
  // draws U(-uniform_limit, uniform_limit]; truncated_normal draws
  // N(0, normal_stddev^2) resampling anything beyond two stddevs.
  double variance_scale = 1.0;
  double uniform_limit = 0.05;
  double normal_stddev = 0.05;
};

// Lowercased, underscored spellings: "orthogonal", "lecun_uniform", ...
InitScheme init_scheme_from_name(const std::string& name);
std::string init_scheme_name(InitScheme scheme);
std::vector<std::string> init_scheme_names();

// Draws one parameter tensor. The stream index decorrelates layers sharing a
// seed; (spec, shape, seed, stream) fully determines the result.
Tensor init_tensor(const std::vector<std::size_t>& shape, std::size_t fan_in,
                   std::size_t fan_out, const InitSpec& spec,
                   std::uint64_t stream_index = 0);

// Sign-fixed thin QR orthonormalization of a Gaussian sample, reshaped to
// `shape` (rank >= 2). Tall-or-square results have orthonormal columns, wide
// ones orthonormal rows.
Tensor orthogonal_matrix(const std::vector<std::size_t>& shape, Rng& rng);

}  // namespace seiznet
