#ifndef PHI4DISS_KERNELS_HPP
#define PHI4DISS_KERNELS_HPP

#include <complex>
#include <utility>

#include "phi4diss/thermal_params.hpp"

namespace phi4diss {

/// Variants of the rational kernel entering the triple-momentum integrals.
enum class KernelForm { exact, symmetric, resummed, frictionless };

/// w(omega) = (1 - exp(-beta*omega)) / (beta*omega), smooth across omega = 0.
double w_of(double omega, double beta);

/// W(omega, omega') = w(omega) w(omega') / w(omega + omega').
double W_of(double omega, double omega_p, double beta);

/// Rational kernel r(omega, omega_bar, gamma_bar).
///
/// exact:        1/(omega+omega_bar-i gamma_bar) - 1/(omega-omega_bar-i gamma_bar)
/// symmetric:    evaluated through the resummed closed form
/// resummed:     2 omega_bar/(omega_bar^2-omega^2) - 2 gamma_bar^2/(omega_bar (omega_bar^2+gamma_bar^2))
/// frictionless: 2 omega_bar/(omega_bar^2-omega^2)
///
/// pole_scale sets the floor of the pole-proximity test (typically the mass).
std::complex<double> r_kernel(double omega, double omega_bar, double gamma_bar,
                              KernelForm form, double pole_scale = 0.0);

/// Symmetric three-momentum damping rate gamma_{k1 k2 k3}.
double gamma_triplet(double k1, double k2, double k3, const ThermalParams& p);

/// (gamma'_q, gamma''_q) entering the four-point integrals.
std::pair<double, double> gamma_primes(double q, const ThermalParams& p);

}  // namespace phi4diss

#endif
