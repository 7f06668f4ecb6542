#ifndef PHI4DISS_PROPAGATOR_HPP
#define PHI4DISS_PROPAGATOR_HPP

#include <complex>

#include "phi4diss/kernels.hpp"
#include "phi4diss/loop_integrals.hpp"
#include "phi4diss/quadrature.hpp"
#include "phi4diss/thermal_params.hpp"

namespace phi4diss {

struct ComplexResult {
  std::complex<double> value{0.0, 0.0};
  double error = 0.0;
  bool converged = true;
  std::size_t evaluations = 0;
};

enum class TemperatureRegime { low_temperature, exact };
enum class FrictionMode { finite, zero };

/// X_k at low temperature: lambda z / omega_tilde_k.
double X_k_lowT(double k, double z, const ThermalParams& p);

/// Exact finite-temperature X_k (J-dependent lambda and lambda^2 blocks).
IntegralResult X_k_exact(double k, double z, const ThermalParams& p,
                         const QuadratureSpec& spec);

/// Low-temperature Y_k(omega) at external wave vector k = 0: the z^2 pole
/// block plus the triple-momentum kernel integral.
ComplexResult Y_k_lowT(double k, double omega, double z, const ThermalParams& p,
                       const QuadratureSpec& spec, KernelForm form,
                       bool include_z_pole = true);

/// Exact finite-temperature Y_k(omega) at k = 0: all six displayed blocks.
ComplexResult Y_k_exact(double k, double omega, double z, const ThermalParams& p,
                        const QuadratureSpec& spec);

/// Assembled correlation function C_k(omega^2).
std::complex<double> C_k(double omega2, double k, double X,
                         std::complex<double> Y_plus, std::complex<double> Y_minus,
                         const ThermalParams& p, FrictionMode friction);

/// Counterterm z from the explicit order-lambda quadrature of the moment
/// condition.
IntegralResult solve_z(const ThermalParams& p, const QuadratureSpec& spec);

/// z through I2 (friction-regularized) and I3: (lambda/12) m^{2d-4} (I2 - I3).
IntegralResult z_closed_route(const ThermalParams& p, const QuadratureSpec& spec);

/// Quadratic fit of Y_0(omega) = Y + Y' omega^2 through frictionless kernel
/// differences at omega^2 in {0, (m/8)^2, (m/4)^2}.
struct YExpansion {
  double Y0 = 0.0;      ///< Y = Y_0(0), friction-regularized
  double Yprime = 0.0;  ///< Y'
  double error = 0.0;
  bool converged = true;
};
YExpansion fit_Y_expansion(const ThermalParams& p, const QuadratureSpec& spec);

/// Field normalization Z by both routes.
struct ZResult {
  double Z_fit = 1.0;     ///< 1 + 2 m Y'
  double Z_closed = 1.0;  ///< 1 + (1/6) (lambda m^{d-3})^2 I3
  YExpansion expansion;
  double I3 = 0.0;
};
ZResult compute_Z(const ThermalParams& p, const QuadratureSpec& spec);

/// Residual of the moment condition X_0 + Y + m^2 Y' after substituting z,
/// normalized to the magnitude of its largest contribution.
struct MomentResidual {
  double residual = 0.0;
  double scale = 1.0;
  double z = 0.0;
};
MomentResidual moment_condition_residual(const ThermalParams& p,
                                         const QuadratureSpec& spec);

/// Amputated amplitude at second order through the subtracted sunset:
/// M = -i(omega^2 - omega_k^2) + 2 i c S2(chi), manifestly a function of
/// omega^2 - k^2 in the frictionless regime.
std::complex<double> amplitude_M_series(double omega2, double k2,
                                        const ThermalParams& p,
                                        const QuadratureSpec& spec);

/// Subtracted sunset S2(chi) = I(chi) - I(0) - chi I'(0) (finite for d < 3).
IntegralResult sunset_double_subtracted(double chi, double d,
                                        const QuadratureSpec& spec);

}  // namespace phi4diss

#endif
