#include "phi4diss/kernels.hpp"

#include <cmath>
#include <cstdlib>

namespace phi4diss {

namespace {
// Switch to the Taylor branch below this |beta*omega| to avoid cancellation.
constexpr double kSeriesSwitch = 1e-4;
constexpr double kPoleTolFactor = 1e-8;
}  // namespace

double w_of(double omega, double beta) {
  const double x = beta * omega;
  if (std::abs(x) < kSeriesSwitch) {
    // (1 - e^{-x})/x = sum_{n>=0} (-x)^n/(n+1)!
    return 1.0 + x * (-1.0 / 2.0 + x * (1.0 / 6.0 + x * (-1.0 / 24.0 +
               x * (1.0 / 120.0 + x * (-1.0 / 720.0)))));
  }
  if (x > 700.0) return 1.0 / x;
  return -std::expm1(-x) / x;
}

double W_of(double omega, double omega_p, double beta) {
  return w_of(omega, beta) * w_of(omega_p, beta) / w_of(omega + omega_p, beta);
}

std::complex<double> r_kernel(double omega, double omega_bar, double gamma_bar,
                              KernelForm form, double pole_scale) {
  using cplx = std::complex<double>;
  const double tol =
      kPoleTolFactor * std::max({std::abs(omega), std::abs(omega_bar), pole_scale});

  switch (form) {
    case KernelForm::exact: {
      if (gamma_bar <= tol &&
          std::min(std::abs(omega + omega_bar), std::abs(omega - omega_bar)) <= tol) {
        throw PoleProximityError("r_kernel: exact form evaluated at a real pole");
      }
      const cplx ig(0.0, gamma_bar);
      return 1.0 / (omega + omega_bar - ig) - 1.0 / (omega - omega_bar - ig);
    }
    case KernelForm::symmetric:
    case KernelForm::resummed: {
      const double den = omega_bar * omega_bar - omega * omega;
      if (std::abs(den) <= tol * std::max(std::abs(omega_bar), 1.0) * std::abs(omega_bar))
        throw PoleProximityError("r_kernel: resummed form evaluated at omega^2 = omega_bar^2");
      const double g2 = gamma_bar * gamma_bar;
      return cplx(2.0 * omega_bar / den -
                      2.0 * g2 / (omega_bar * (omega_bar * omega_bar + g2)),
                  0.0);
    }
    case KernelForm::frictionless: {
      const double den = omega_bar * omega_bar - omega * omega;
      if (std::abs(den) <= tol * std::max(std::abs(omega_bar), 1.0) * std::abs(omega_bar))
        throw PoleProximityError("r_kernel: frictionless form evaluated at omega^2 = omega_bar^2");
      return cplx(2.0 * omega_bar / den, 0.0);
    }
  }
  std::abort();
}

double gamma_triplet(double k1, double k2, double k3, const ThermalParams& p) {
  const double w1 = p.omega(k1), w2 = p.omega(k2), w3 = p.omega(k3);
  const double sum = w1 + w2 + w3;
  const double bracket = p.gamma_k(k1) / (w1 * (w2 + w3)) +
                         p.gamma_k(k2) / (w2 * (w1 + w3)) +
                         p.gamma_k(k3) / (w3 * (w1 + w2));
  return sum / p.beta * bracket;
}

std::pair<double, double> gamma_primes(double q, const ThermalParams& p) {
  const double wq = p.omega(q);
  const double num = 2.0 * p.gamma * q * q * q * q / p.beta;
  return {num / (wq * wq), num / (wq * (wq + 2.0 * p.m))};
}

}  // namespace phi4diss
