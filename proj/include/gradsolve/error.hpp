#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gradsolve {

/// Invalid user-supplied configuration (bad domain, non-monotone f, lambda > Lambda, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// An iterative solver stopped without meeting its tolerance. Carries the
/// recorded history (residuals for inner solves, gaps for Picard stages).
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}

  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

/// The radial oracle left its validity regime (w < 0 with positive data).
class OracleInvalidError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gradsolve
