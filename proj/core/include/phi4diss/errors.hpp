#ifndef PHI4DISS_ERRORS_HPP
#define PHI4DISS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace phi4diss {

/// A kernel or resolvent denominator came too close to a real pole while the
/// damping rate that is supposed to shift it off the axis is effectively zero.
class PoleProximityError : public std::domain_error {
 public:
  explicit PoleProximityError(const std::string& what) : std::domain_error(what) {}
};

/// A dimensionally continued closed form was requested at a dimension where
/// the continuation has a pole.
class PoleInDimensionError : public std::domain_error {
 public:
  explicit PoleInDimensionError(const std::string& what) : std::domain_error(what) {}
};

/// Evaluation of a function above its multi-particle threshold.
class ThresholdViolationError : public std::domain_error {
 public:
  explicit ThresholdViolationError(const std::string& what) : std::domain_error(what) {}
};

/// Adaptive integration exhausted its budget without meeting the tolerance.
class NonConvergenceError : public std::runtime_error {
 public:
  explicit NonConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// A symbolic momentum label was evaluated numerically without a binding.
class UnboundLabelError : public std::runtime_error {
 public:
  explicit UnboundLabelError(const std::string& what) : std::runtime_error(what) {}
};

/// A least-squares or polynomial fit did not meet its residual tolerance.
class FitFailureError : public std::runtime_error {
 public:
  explicit FitFailureError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid run configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace phi4diss

#endif
