#pragma once

#include <stdexcept>
#include <string>

namespace seiznet {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape / dimension disagreements between tensors or layers.
struct DimError : Error {
  using Error::Error;
};

// Malformed files: signals, annotations, checkpoints, configs.
struct FormatError : Error {
  using Error::Error;
};

// Invalid run configuration (bad flag values, unknown keys, ...).
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace seiznet
