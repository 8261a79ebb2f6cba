// Error taxonomy shared by the library and the CLI exit-code mapping.
#pragma once

#include <stdexcept>
#include <string>

namespace fsr {

// Invalid configuration, flags, or shape constraints. CLI exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dataset layout, file parsing, or decoding failures. CLI exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss during training. CLI exit code 3.
struct DivergenceError : std::runtime_error {
  long step;
  explicit DivergenceError(long at_step)
      : std::runtime_error("numerical divergence at step " + std::to_string(at_step)),
        step(at_step) {}
};

}  // namespace fsr
