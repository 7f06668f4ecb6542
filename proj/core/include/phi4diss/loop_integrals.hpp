#ifndef PHI4DISS_LOOP_INTEGRALS_HPP
#define PHI4DISS_LOOP_INTEGRALS_HPP

#include <functional>

#include "phi4diss/quadrature.hpp"
#include "phi4diss/thermal_params.hpp"

namespace phi4diss {

/// Surface factor 2 pi^{d/2} / Gamma(d/2) of the d-dimensional sphere.
double sphere_factor(double d);

/// Reduces a spherically symmetric integral to one dimension:
/// sphere_factor(d) * Int_0^inf f(k) k^{d-1} dk.
/// scale sets the substitution scale of the infinite-range mapping.
IntegralResult radial_reduce(const std::function<double(double)>& f, double d,
                             const QuadratureSpec& spec, double scale = 1.0,
                             bool peaked = false);

/// Dimensionally continued closed forms (epsilon = 3 - d).
double I1_closed(double d);    ///< poles at eps in {0, 2}
double I1p_closed(double d);   ///< pole at eps = 0
double I1pp_closed(double d);  ///< pole at eps = 0; removable point eps = 1

/// Dimensionless sunset integral I(chi), chi = (omega^2 - k^2)/m^2, through the
/// Schwinger-parameter representation (scale integrated analytically, compact
/// 2-simplex integrated adaptively). This is the dimensional continuation; it
/// has a pole at d = 2 where the raw momentum integral diverges.
IntegralResult sunset_value(double chi, double d, const QuadratureSpec& spec);

/// Difference I(chi1) - I(chi2) as a single quadrature; finite on all of
/// 1 < d < 3 including d = 2.
IntegralResult sunset_difference(double chi1, double chi2, double d,
                                 const QuadratureSpec& spec);

/// I_k(omega^2) with mass m (threshold omega^2 - k^2 < (3m)^2).
IntegralResult I_k_omega2(double omega2, double kmag, double m, double d,
                          const QuadratureSpec& spec);

/// I3 from the analytically differentiated Schwinger form (a genuinely
/// convergent integral for 1 < d < 3). Comes out negative: the sunset grows
/// with omega^2 below threshold.
IntegralResult I3_schwinger(double d, const QuadratureSpec& spec);

/// I3 from Richardson-extrapolated central differences of the sunset.
IntegralResult I3_finite_difference(double d, const QuadratureSpec& spec);

/// Friction-regularized I2: the momentum-space sunset at zero argument with
/// the triple damping rate gamma_{k1 k2 k3} in the denominator, evaluated at
/// smoothing length ell (in units of 1/m). Grows like log(1/ell) at d = 2.
IntegralResult I2_damped(double d, double ell_m, const QuadratureSpec& spec);

/// Frictionless momentum-space sunset at chi (converges only for d < 2).
IntegralResult sunset_momentum(double chi, double d, const QuadratureSpec& spec);

/// Monte Carlo of the momentum-space difference I(chi at external (omega2,k))
/// - I(0 at k=0) in d = 2, exercising the representation with a nonzero
/// external wave vector. Used for Lorentz-invariance spot checks.
IntegralResult sunset_momentum_mc_difference(double omega2, double kmag, double m,
                                             const QuadratureSpec& spec);

/// Reduction of Int d^dk1 d^dk2 d^dk3 delta^d(k1+k2+k3) F(|k1|,|k2|,|k3|)
/// to adaptive nested quadrature over (q1, q2, angle). No (2pi) factors.
IntegralResult triple_momentum_integral(
    const std::function<double(double, double, double)>& F, double d,
    const QuadratureSpec& spec, double scale, bool peaked = false);

/// Closed form of (2pi)^{-d} Int q d^dq / (1 + q^4); pole at d = 3.
double friction_integral_closed(double d);

/// The same integral by radial quadrature.
IntegralResult friction_integral_quadrature(double d, const QuadratureSpec& spec);

/// J = (2pi)^{-d} Int d^dq / (2 omega_tilde_q (e^{beta omega_q} - 1)).
IntegralResult J_integral(const ThermalParams& p, const QuadratureSpec& spec);

}  // namespace phi4diss

#endif
