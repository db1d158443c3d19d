#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "seiznet/tensor.hpp"

namespace seiznet {

// Binary container used for checkpoints and feature files. Little-endian
// layout:
//   magic "SZNT" | u32 version |
//   u64 config_len | config bytes (sorted key=value lines) |
//   u32 n_tensors | per tensor:
//     u32 name_len | name | u32 rank | u64 extents[rank] | f64 values[...]
struct Container {
  std::map<std::string, std::string> config;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
  std::string config_value(const std::string& key) const;  // throws if absent
};

inline constexpr std::uint32_t kContainerVersion = 1;

std::string canonical_config_text(const std::map<std::string, std::string>& config);

// Atomic: writes to a temp file in the same directory, then renames.
void write_container(const std::string& path, const Container& container);
Container read_container(const std::string& path);

}  // namespace seiznet
