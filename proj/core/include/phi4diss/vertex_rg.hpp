#ifndef PHI4DISS_VERTEX_RG_HPP
#define PHI4DISS_VERTEX_RG_HPP

#include <array>

#include "phi4diss/quadrature.hpp"
#include "phi4diss/thermal_params.hpp"

namespace phi4diss {

/// Four-point correlation at zero external momenta and frequency: the
/// bracketed perturbation series of Im Gamma divided by F/4, with its
/// contribution breakdown.
struct FourPointResult {
  double im_gamma_over_F = 0.0;
  double first_order = 0.0;          ///< exactly -lambda
  double diagram_a = 0.0;            ///< (lambda^2/4) single-loop integral
  double diagram_b = 0.0;            ///< (lambda^2/2), four equal contributions
  double friction_correction = 0.0;  ///< gamma-dependent part of a + b
  bool converged = true;
};

FourPointResult four_point_gamma(const ThermalParams& p, const QuadratureSpec& spec);

/// The lambda^2 coefficient of the friction-dependent part of the Im Gamma
/// series in units m = 1, evaluated from the exact rescaled integrands.
/// K(ell) -> -(3/8) ell^{3-d} * friction_integral(d) as ell -> 0.
double vertex_friction_coefficient(double d, double ell_m, const QuadratureSpec& spec);

struct RGResult {
  double d = 0.0;
  double epsilon = 0.0;             ///< 3 - d
  double alpha_fitted = 0.0;        ///< log-log slope of the friction correction
  double alpha_local = 0.0;         ///< Richardson-refined local exponent
  double lambda_star_closed = 0.0;  ///< (16/3) 2^d Gamma(d/2) pi^{(d-2)/2} sin((3-d)pi/4)
  double lambda_star_fitted = 0.0;  ///< from the fitted correction amplitude
  double fit_residual = 0.0;
  double beta_linear = 0.0;     ///< -epsilon (the flow uses alpha = epsilon)
  double beta_quadratic = 0.0;  ///< epsilon / lambda*
};

/// Extracts alpha and lambda* from the ell-scaling of the friction correction,
/// differencing Im Gamma at friction values (gamma, gamma/4), i.e. smoothing
/// lengths (ell, ell/2), over the window ell*m in [1e-3, 1e-2].
RGResult extract_fixed_point(const ThermalParams& p, const QuadratureSpec& spec);

/// Closed forms for the fixed point.
double lambda_star_closed_form(double d);      ///< displayed Gamma-function form
double lambda_star_from_friction(double d);    ///< (8/3) / friction_integral(d)

/// beta(lambda_tilde) = -alpha lambda_tilde (1 - lambda_tilde/lambda*).
double beta_function(double lambda_tilde, const RGResult& rg);

/// Closed-form flow lambda(ell) = lambda*/(ell^eps + c) with c fixed by
/// lambda(ell0) = lambda0. The exponent identity alpha = epsilon is used; the
/// fitted alpha exists to verify it.
double flow_lambda(double ell, double lambda0, double ell0, const RGResult& rg);

/// Conserved combination ell^{alpha-eps} lambda [1 - ell^eps lambda/lambda*]^{-1}.
double flow_invariant(double ell, double lambda, const RGResult& rg);

/// Refined perturbation series: P(lambda_hat) with
/// lambda_hat = lambda + B2 ell^eps lambda^2 + B3 ell^{2 eps} lambda^3.
double refine_expansion(const std::array<double, 4>& P, double B2, double B3,
                        double epsilon, double ell, double lambda);

}  // namespace phi4diss

#endif
