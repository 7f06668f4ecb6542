#ifndef PHI4DISS_QUADRATURE_HPP
#define PHI4DISS_QUADRATURE_HPP

#include <cstdint>
#include <functional>
#include <limits>

#include "phi4diss/errors.hpp"

namespace phi4diss {

/// Numerical integration configuration.
struct QuadratureSpec {
  enum class Method { adaptive_1d, tensor_product, monte_carlo };

  Method method = Method::adaptive_1d;
  double rel_tol = 1e-9;        ///< 1D adaptive relative tolerance
  double abs_tol = 0.0;
  double rel_tol_nd = 1e-6;     ///< outer tolerance of nested tensor quadrature
  std::size_t max_evals = 80'000'000;
  double cutoff_radius = std::numeric_limits<double>::infinity();
  std::size_t mc_samples = 1'000'000;
  std::uint64_t seed = 20240901;

  void validate() const {
    if (!(rel_tol > 0.0)) throw ConfigError("quadrature.rel_tol must be > 0");
    if (!(rel_tol_nd > 0.0)) throw ConfigError("quadrature.rel_tol_nd must be > 0");
    if (abs_tol < 0.0) throw ConfigError("quadrature.abs_tol must be >= 0");
    if (mc_samples < 16) throw ConfigError("quadrature.mc_samples must be >= 16");
  }
};

/// Value with an error estimate. A false convergence flag means the value
/// must not be consumed without explicit override.
struct IntegralResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;

  double require(const char* what = "integral") const {
    if (!converged)
      throw NonConvergenceError(std::string(what) + ": integration did not converge");
    return value;
  }
};

using Fn1D = std::function<double(double)>;

/// Adaptive integration over a finite interval. Double-exponential rule;
/// integrable endpoint singularities are fine.
IntegralResult integrate_finite(const Fn1D& f, double a, double b,
                                const QuadratureSpec& spec);

/// Adaptive Gauss-Kronrod over a finite interval; prefers interior structure
/// (narrow peaks) over endpoint singularities.
IntegralResult integrate_finite_gk(const Fn1D& f, double a, double b,
                                   const QuadratureSpec& spec);

/// Integration over (0, infinity) after mapping k = scale*t/(1-t).
/// peaked = true routes to the Gauss-Kronrod backend.
IntegralResult integrate_semi_infinite(const Fn1D& f, double scale,
                                       const QuadratureSpec& spec,
                                       bool peaked = false);

/// Plain Monte Carlo over the unit hypercube, reproducible per (spec, seed).
IntegralResult integrate_mc(const std::function<double(const double*)>& f,
                            int dim, const QuadratureSpec& spec);

}  // namespace phi4diss

#endif
