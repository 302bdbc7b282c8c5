#pragma once

#include <stdexcept>
#include <string>

namespace plancfd {

/// Invalid grid, plan or run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The solution became non-physical (non-finite values or rho <= 0).
class DivergenceError : public std::runtime_error {
 public:
  /// iteration < 0 means the location is not known yet; the time loop
  /// rethrows with iteration and substep filled in.
  explicit DivergenceError(const std::string& reason, long iteration = -1,
                           int substep = -1)
      : std::runtime_error(iteration < 0
                               ? reason
                               : reason + " (iteration " + std::to_string(iteration) +
                                     ", substep " + std::to_string(substep) + ")"),
        reason_(reason),
        iteration_(iteration),
        substep_(substep) {}

  const std::string& reason() const noexcept { return reason_; }
  long iteration() const noexcept { return iteration_; }
  int substep() const noexcept { return substep_; }

 private:
  std::string reason_;
  long iteration_;
  int substep_;
};

/// File output or input failed; the message carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace plancfd
