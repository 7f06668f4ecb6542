#ifndef PHI4DISS_THERMAL_PARAMS_HPP
#define PHI4DISS_THERMAL_PARAMS_HPP

#include <cmath>
#include <functional>

#include "phi4diss/errors.hpp"

namespace phi4diss {

/// Physical parameter bundle of the dissipative scalar theory.
///
/// The smoothing length ell = sqrt(2 gamma / beta) is always derived, never
/// stored. The regularization profile omega_tilde defaults to the bare
/// dispersion; a user-supplied monotone profile may replace it.
struct ThermalParams {
  double d = 2.0;        ///< spatial dimension
  double m = 1.0;        ///< mass
  double lambda = 0.0;   ///< quartic coupling, units energy^(3-d)
  double beta = 1.0;     ///< inverse temperature
  double gamma = 0.0;    ///< friction parameter in gamma_k = gamma |k|^4

  /// Optional regularization profile; empty means omega_tilde == omega.
  std::function<double(double)> omega_tilde_profile;

  void validate(bool require_d_below_3 = false) const {
    if (!(beta > 0.0)) throw ConfigError("params.beta must be > 0");
    if (gamma < 0.0) throw ConfigError("params.gamma must be >= 0");
    if (m < 0.0) throw ConfigError("params.mass must be >= 0");
    if (!(d > 0.0)) throw ConfigError("params.d must be > 0");
    if (require_d_below_3 && !(d < 3.0))
      throw ConfigError("params.d must be < 3 for this operation");
  }

  double omega(double k) const { return std::sqrt(k * k + m * m); }

  double omega_tilde(double k) const {
    return omega_tilde_profile ? omega_tilde_profile(k) : omega(k);
  }

  /// Mode damping rate gamma_k = gamma |k|^4.
  double gamma_k(double k) const { return gamma * k * k * k * k; }

  double smoothing_length() const { return std::sqrt(2.0 * gamma / beta); }

  /// Friction parameter reproducing a given smoothing length.
  static double gamma_for_length(double ell, double beta) {
    return 0.5 * ell * ell * beta;
  }
};

}  // namespace phi4diss

#endif
