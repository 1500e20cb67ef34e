#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace capepde {

/// Inconsistent tensor shapes or channel counts.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite values produced from finite inputs, or divergent arithmetic.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value (even kernel, non-power-of-two grid, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed container file; carries the byte offset of the defect.
struct FormatError : std::runtime_error {
    FormatError(const std::string& msg, std::uint64_t byte_offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    std::uint64_t offset;
};

/// Operation outside the engine's supported feature set.
struct UnsupportedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Relative error against a zero-norm target is undefined.
struct DegenerateTargetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Autoregressive rollout produced a non-finite frame at `step`.
struct RolloutDivergedError : NumericError {
    explicit RolloutDivergedError(int rollout_step)
        : NumericError("rollout diverged at step " + std::to_string(rollout_step)),
          step(rollout_step) {}
    int step;
};

/// Dataset missing, wrong grid, unsupported parameter range.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace capepde
