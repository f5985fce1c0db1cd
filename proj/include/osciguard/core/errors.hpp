#pragma once

#include <stdexcept>
#include <string>

namespace osciguard {

/// Bad command line or invalid configuration (process exit code 1).
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unreadable or malformed data artifact (process exit code 2).
struct DataFormatError : std::runtime_error {
  explicit DataFormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Physical simulation left its validity envelope (process exit code 3).
struct SimulationFault : std::runtime_error {
  SimulationFault(const std::string& msg, double t_s)
      : std::runtime_error(msg + " at t=" + std::to_string(t_s) + "s"), t(t_s) {}
  double t;
};

/// Training diverged (process exit code 3).
struct TrainingFault : std::runtime_error {
  TrainingFault(const std::string& msg, int epoch_idx)
      : std::runtime_error(msg + " in epoch " + std::to_string(epoch_idx)),
        epoch(epoch_idx) {}
  int epoch;
};

}  // namespace osciguard
