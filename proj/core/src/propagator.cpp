#include "phi4diss/propagator.hpp"

#include <cmath>
#include <numbers>

namespace phi4diss {

namespace {

constexpr double kPi = std::numbers::pi;
using cplx = std::complex<double>;

double vol2d(const ThermalParams& p) { return std::pow(2.0 * kPi, -2.0 * p.d); }

/// gamma_A of adag_q a_q a_k (omega_A = -omega_k).
double gamma_adq_aq_ak(double q, double k, const ThermalParams& p) {
  const double wq = p.omega(q), wk = p.omega(k), b = p.beta;
  return p.gamma_k(q) * (W_of(wq, -wk - wq, b) + W_of(-wq, -wk + wq, b)) +
         p.gamma_k(k);
}

/// gamma_A of adag_{-k} adag_q a_q (omega_A = +omega_k).
double gamma_adk_adq_aq(double q, double k, const ThermalParams& p) {
  const double wq = p.omega(q), wk = p.omega(k), b = p.beta;
  return p.gamma_k(k) + p.gamma_k(q) * (W_of(wq, wk - wq, b) + W_of(-wq, wk + wq, b));
}

double gamma_aaa(double k1, double k2, double k3, const ThermalParams& p) {
  const double w1 = p.omega(k1), w2 = p.omega(k2), w3 = p.omega(k3);
  const double wbar = w1 + w2 + w3, b = p.beta;
  return p.gamma_k(k1) * W_of(-w1, -wbar + w1, b) +
         p.gamma_k(k2) * W_of(-w2, -wbar + w2, b) +
         p.gamma_k(k3) * W_of(-w3, -wbar + w3, b);
}

double gamma_ad1_a2_a3(double k1, double k2, double k3, const ThermalParams& p) {
  const double w1 = p.omega(k1), w2 = p.omega(k2), w3 = p.omega(k3), b = p.beta;
  const double wA = w1 - w2 - w3;
  return p.gamma_k(k1) * W_of(w1, wA - w1, b) +
         p.gamma_k(k2) * W_of(-w2, wA + w2, b) +
         p.gamma_k(k3) * W_of(-w3, wA + w3, b);
}

double gamma_ad1_ad2_a3(double k1, double k2, double k3, const ThermalParams& p) {
  const double w1 = p.omega(k1), w2 = p.omega(k2), w3 = p.omega(k3), b = p.beta;
  const double wA = w1 + w2 - w3;
  return p.gamma_k(k1) * W_of(w1, wA - w1, b) +
         p.gamma_k(k2) * W_of(w2, wA - w2, b) +
         p.gamma_k(k3) * W_of(-w3, wA + w3, b);
}

ComplexResult complex_triple(const std::function<cplx(double, double, double)>& F,
                             const ThermalParams& p, const QuadratureSpec& spec,
                             bool peaked = false) {
  IntegralResult re = triple_momentum_integral(
      [&](double a, double b, double c) { return F(a, b, c).real(); }, p.d, spec,
      p.m, peaked);
  IntegralResult im = triple_momentum_integral(
      [&](double a, double b, double c) { return F(a, b, c).imag(); }, p.d, spec,
      p.m, peaked);
  ComplexResult r;
  r.value = {re.value, im.value};
  r.error = re.error + im.error;
  r.converged = re.converged && im.converged;
  r.evaluations = re.evaluations + im.evaluations;
  return r;
}

}  // namespace

double X_k_lowT(double k, double z, const ThermalParams& p) {
  return p.lambda * z / p.omega_tilde(k);
}

IntegralResult X_k_exact(double k, double z, const ThermalParams& p,
                         const QuadratureSpec& spec) {
  const double otk = p.omega_tilde(k);
  IntegralResult J = J_integral(p, spec);
  // bracket with u = e^{-beta omega}: (1+u)/(beta w (1-u)) + 2u/(1-u)^2, the
  // first and third displayed terms being equal
  IntegralResult bracket = radial_reduce(
      [&](double q) {
        const double w = p.omega(q), ot = p.omega_tilde(q);
        const double u = std::exp(-p.beta * w);
        const double B =
            (1.0 + u) / (p.beta * w * (1.0 - u)) + 2.0 * u / ((1.0 - u) * (1.0 - u));
        return B / (ot * ot);
      },
      p.d, spec, p.m);
  const double vol = std::pow(2.0 * kPi, -p.d);
  IntegralResult res;
  res.value = p.lambda * (J.value + 2.0 * z) / (2.0 * otk) -
              p.lambda * p.lambda * p.beta * J.value / (16.0 * otk) * vol * bracket.value;
  res.error = p.lambda * J.error / (2.0 * otk) +
              p.lambda * p.lambda * p.beta / (16.0 * otk) * vol *
                  (J.error * std::abs(bracket.value) + std::abs(J.value) * bracket.error);
  res.converged = J.converged && bracket.converged;
  res.evaluations = J.evaluations + bracket.evaluations;
  return res;
}

ComplexResult Y_k_lowT(double k, double omega, double z, const ThermalParams& p,
                       const QuadratureSpec& spec, KernelForm form,
                       bool include_z_pole) {
  ComplexResult out;
  const double otk = p.omega_tilde(k);
  const double wk = p.omega(k);
  const double gk = p.gamma_k(k);
  const double l2 = p.lambda * p.lambda;

  if (include_z_pole && z != 0.0) {
    const cplx den = (cplx(omega, -gk) * cplx(omega, -gk)) - wk * wk;
    out.value += 2.0 * l2 * z * z / (otk * otk) * wk / den;
  }

  if (l2 != 0.0) {
    if (k != 0.0)
      throw ConfigError("Y_k_lowT: the triple-momentum integral is evaluated at k = 0");
    ComplexResult triple = complex_triple(
        [&](double k1, double k2, double k3) {
          const double wbar = p.omega(k1) + p.omega(k2) + p.omega(k3);
          const double gbar = gamma_triplet(k1, k2, k3, p);
          return r_kernel(omega, wbar, gbar, form, p.m) /
                 (p.omega_tilde(k1) * p.omega_tilde(k2) * p.omega_tilde(k3));
        },
        p, spec);
    out.value += -l2 / (96.0 * otk) * vol2d(p) * triple.value;
    out.error += l2 / (96.0 * otk) * vol2d(p) * triple.error;
    out.converged = triple.converged;
    out.evaluations = triple.evaluations;
  }
  return out;
}

ComplexResult Y_k_exact(double k, double omega, double z, const ThermalParams& p,
                        const QuadratureSpec& spec) {
  if (k != 0.0)
    throw ConfigError("Y_k_exact: evaluated at external wave vector k = 0");
  ComplexResult out;
  const double otk = p.omega_tilde(k);
  const double wk = p.omega(k);
  const double gk = p.gamma_k(k);
  const double l2 = p.lambda * p.lambda;
  const double vol = std::pow(2.0 * kPi, -p.d);
  const cplx iu(0.0, 1.0);

  IntegralResult J = J_integral(p, spec);
  const double Jz = J.value + 2.0 * z;

  // z (J + 2z) pole block
  out.value += -l2 * z * Jz / (2.0 * otk * otk) *
               (1.0 / (omega + wk - iu * gk) - 1.0 / (omega - wk - iu * gk));

  // single-momentum Bose blocks
  auto bose = [&](double q) { return 1.0 / std::expm1(p.beta * p.omega(q)); };
  ComplexResult block2;
  {
    IntegralResult re = radial_reduce(
        [&](double q) {
          const cplx v = 1.0 / (omega + wk - iu * gamma_adq_aq_ak(q, k, p)) -
                         1.0 / (omega - wk - iu * gamma_adk_adq_aq(q, k, p));
          return (v / p.omega_tilde(q) * bose(q)).real();
        },
        p.d, spec, p.m);
    IntegralResult im = radial_reduce(
        [&](double q) {
          const cplx v = 1.0 / (omega + wk - iu * gamma_adq_aq_ak(q, k, p)) -
                         1.0 / (omega - wk - iu * gamma_adk_adq_aq(q, k, p));
          return (v / p.omega_tilde(q) * bose(q)).imag();
        },
        p.d, spec, p.m);
    block2.value = {re.value, im.value};
    block2.error = re.error + im.error;
    block2.converged = re.converged && im.converged;
  }
  out.value += -l2 * Jz / (8.0 * otk * otk) * vol * block2.value;
  out.error += l2 * std::abs(Jz) / (8.0 * otk * otk) * vol * block2.error;

  ComplexResult block3;
  {
    auto f = [&](double q) {
      const double wq = p.omega(q);
      const double wfac =
          W_of(wq, -wq + wk, p.beta) + W_of(wq, -wq - wk, p.beta);
      const cplx v =
          1.0 / ((omega + wk - iu * gamma_adq_aq_ak(q, k, p)) * (omega + wk - iu * gk)) -
          1.0 / ((omega - wk - iu * gamma_adk_adq_aq(q, k, p)) * (omega - wk - iu * gk));
      return iu * p.gamma_k(q) * wfac / p.omega_tilde(q) * bose(q) * v;
    };
    IntegralResult re = radial_reduce([&](double q) { return f(q).real(); }, p.d,
                                      spec, p.m);
    IntegralResult im = radial_reduce([&](double q) { return f(q).imag(); }, p.d,
                                      spec, p.m);
    block3.value = {re.value, im.value};
    block3.error = re.error + im.error;
    block3.converged = re.converged && im.converged;
  }
  out.value += l2 * Jz / (8.0 * otk * otk) * vol * block3.value;
  out.error += l2 * std::abs(Jz) / (8.0 * otk * otk) * vol * block3.error;

  // triple-momentum block with the full finite-temperature weights
  ComplexResult triple = complex_triple(
      [&](double k1, double k2, double k3) {
        const double w1 = p.omega(k1), w2 = p.omega(k2), w3 = p.omega(k3);
        const double wbar = w1 + w2 + w3;
        const double u1 = std::exp(-p.beta * w1), u2 = std::exp(-p.beta * w2),
                     u3 = std::exp(-p.beta * w3);
        const double norm = (1.0 - u1) * (1.0 - u2) * (1.0 - u3);
        const double ubar = u1 * u2 * u3;
        cplx v = (1.0 - ubar) * (1.0 / (omega + wbar - iu * gamma_aaa(k1, k2, k3, p)) -
                                 1.0 / (omega - wbar - iu * gamma_aaa(k1, k2, k3, p)));
        v += 3.0 * (u1 - u2 * u3) /
             (omega - w1 + w2 + w3 - iu * gamma_ad1_a2_a3(k1, k2, k3, p));
        v -= 3.0 * (u3 - u1 * u2) /
             (omega - w1 - w2 + w3 - iu * gamma_ad1_ad2_a3(k1, k2, k3, p));
        return v / (p.omega_tilde(k1) * p.omega_tilde(k2) * p.omega_tilde(k3) * norm);
      },
      p, spec, /*peaked=*/true);
  out.value += -l2 / (96.0 * otk) * vol2d(p) * triple.value;
  out.error += l2 / (96.0 * otk) * vol2d(p) * triple.error;
  out.converged = block2.converged && block3.converged && triple.converged && J.converged;
  return out;
}

std::complex<double> C_k(double omega2, double k, double X, std::complex<double> Y_plus,
                         std::complex<double> Y_minus, const ThermalParams& p,
                         FrictionMode friction) {
  const double wk = p.omega(k);
  const cplx iu(0.0, 1.0);
  const double omega = std::sqrt(std::max(omega2, 0.0));

  if (friction == FrictionMode::zero) {
    const double den = omega2 - wk * wk;
    if (std::abs(den) < 1e-12 * wk * wk)
      throw PoleProximityError("C_k: on the free mass shell with zero friction");
    cplx num = iu * den + 2.0 * iu * wk * (X + Y_plus);
    if (Y_minus != cplx(0.0, 0.0)) {
      if (omega == 0.0) throw PoleProximityError("C_k: Y^-/omega at omega = 0");
      num -= iu * (omega2 + wk * wk) * Y_minus / omega;
    }
    return num / (den * den);
  }

  const cplx c = wk - iu * p.gamma_k(k);
  const cplx den = omega2 - c * c;
  cplx out = iu / den;
  out += 2.0 * iu * c * c / (wk * wk * den * den) * (wk * X + c * Y_plus);
  if (Y_minus != cplx(0.0, 0.0)) {
    if (omega == 0.0) throw PoleProximityError("C_k: Y^-/omega at omega = 0");
    out -= iu * c * c * (omega2 + c * c) / (wk * wk * den * den) * Y_minus / omega;
  }
  return out;
}

IntegralResult solve_z(const ThermalParams& p, const QuadratureSpec& spec) {
  p.validate(true);
  IntegralResult r = triple_momentum_integral(
      [&](double k1, double k2, double k3) {
        const double wbar = p.omega(k1) + p.omega(k2) + p.omega(k3);
        const double g = gamma_triplet(k1, k2, k3, p);
        return (wbar * wbar + p.m * p.m) /
               (p.omega_tilde(k1) * p.omega_tilde(k2) * p.omega_tilde(k3) * wbar *
                (wbar * wbar + g * g));
      },
      p.d, spec, p.m);
  const double pref = p.lambda / 48.0 * vol2d(p);
  r.value *= pref;
  r.error *= pref;
  return r;
}

IntegralResult z_closed_route(const ThermalParams& p, const QuadratureSpec& spec) {
  const double ell_m = p.smoothing_length() * p.m;
  IntegralResult I2 = I2_damped(p.d, ell_m, spec);
  IntegralResult I3 = I3_schwinger(p.d, spec);
  IntegralResult r;
  const double pref = p.lambda / 12.0 * std::pow(p.m, 2.0 * p.d - 4.0);
  r.value = pref * (I2.value - I3.value);
  r.error = std::abs(pref) * (I2.error + I3.error);
  r.converged = I2.converged && I3.converged;
  r.evaluations = I2.evaluations + I3.evaluations;
  return r;
}

YExpansion fit_Y_expansion(const ThermalParams& p, const QuadratureSpec& spec) {
  const double m = p.m;
  const double pref = -p.lambda * p.lambda / (96.0 * m) * vol2d(p);

  // frictionless kernel differences: r(omega,.) - r(0,.) = 2 x / (wbar (wbar^2 - x))
  auto diff_over_x = [&](double x) {
    IntegralResult r = triple_momentum_integral(
        [&](double k1, double k2, double k3) {
          const double wbar = p.omega(k1) + p.omega(k2) + p.omega(k3);
          return 2.0 / (p.omega_tilde(k1) * p.omega_tilde(k2) * p.omega_tilde(k3) *
                        wbar * (wbar * wbar - x));
        },
        p.d, spec, m);
    r.value *= pref;
    r.error *= std::abs(pref);
    return r;
  };

  const double x1 = (m / 8.0) * (m / 8.0);
  const double x2 = (m / 4.0) * (m / 4.0);
  IntegralResult s1 = diff_over_x(x1);
  IntegralResult s2 = diff_over_x(x2);

  // Y_0(0) with the friction-damped leading kernel term
  IntegralResult y0 = triple_momentum_integral(
      [&](double k1, double k2, double k3) {
        const double wbar = p.omega(k1) + p.omega(k2) + p.omega(k3);
        const double g = gamma_triplet(k1, k2, k3, p);
        return 2.0 * wbar /
               (p.omega_tilde(k1) * p.omega_tilde(k2) * p.omega_tilde(k3) *
                (wbar * wbar + g * g));
      },
      p.d, spec, m);

  YExpansion out;
  out.Y0 = pref * y0.value;
  out.Yprime = (x2 * s1.value - x1 * s2.value) / (x2 - x1);
  out.error = std::abs(pref) * y0.error + s1.error + s2.error;
  out.converged = s1.converged && s2.converged && y0.converged;
  return out;
}

ZResult compute_Z(const ThermalParams& p, const QuadratureSpec& spec) {
  ZResult out;
  out.expansion = fit_Y_expansion(p, spec);
  out.Z_fit = 1.0 + 2.0 * p.m * out.expansion.Yprime;
  IntegralResult I3 = I3_schwinger(p.d, spec);
  out.I3 = I3.value;
  const double lt = p.lambda * std::pow(p.m, p.d - 3.0);
  out.Z_closed = 1.0 + lt * lt / 6.0 * I3.value;
  return out;
}

MomentResidual moment_condition_residual(const ThermalParams& p,
                                         const QuadratureSpec& spec) {
  MomentResidual out;
  IntegralResult z = solve_z(p, spec);
  out.z = z.value;
  YExpansion y = fit_Y_expansion(p, spec);
  const double X0 = X_k_lowT(0.0, z.value, p);
  const double m2Yp = p.m * p.m * y.Yprime;
  out.residual = std::abs(X0 + y.Y0 + m2Yp);
  out.scale = std::max({std::abs(X0), std::abs(y.Y0), std::abs(m2Yp), 1e-300});
  return out;
}

IntegralResult sunset_double_subtracted(double chi, double d,
                                        const QuadratureSpec& spec) {
  if (chi >= 9.0)
    throw ThresholdViolationError("sunset_double_subtracted: above threshold");
  const double D = d + 1.0;
  const double s = D - 3.0;
  const double g4 = std::tgamma(4.0 - D);
  // Gamma(3-D)[A^s - 1 + s(1-A)] = -Gamma(4-D)[(A^s-1)/s - (A-1)]
  auto powdiff1 = [s](double A) {
    const double l = std::log(A);
    if (std::abs(s) < 1e-7) return l * (1.0 + 0.5 * s * l);
    return std::expm1(s * l) / s;
  };
  IntegralResult r = integrate_finite(
      [&](double u1) {
        QuadratureSpec inner = spec;
        inner.rel_tol = spec.rel_tol_nd * 0.05;
        IntegralResult rr = integrate_finite(
            [&](double v) {
              const double u2 = (1.0 - u1) * v;
              const double u3 = 1.0 - u1 - u2;
              if (u3 <= 0.0) return 0.0;
              const double s2 = u1 * u2 + u2 * u3 + u3 * u1;
              const double w = u1 * u2 * u3 / s2;
              const double A = 1.0 - chi * w;
              return std::pow(s2, -0.5 * D) * (powdiff1(A) - (A - 1.0)) * (1.0 - u1);
            },
            0.0, 1.0, inner);
        return rr.value;
      },
      0.0, 1.0, spec);
  const double pref = -std::pow(4.0 * kPi, -D) * g4;
  r.value *= pref;
  r.error = std::max(std::abs(r.error * pref), spec.rel_tol_nd * std::abs(r.value));
  return r;
}

std::complex<double> amplitude_M_series(double omega2, double k2,
                                        const ThermalParams& p,
                                        const QuadratureSpec& spec) {
  const double wk2 = k2 + p.m * p.m;
  const cplx iu(0.0, 1.0);
  if (p.lambda == 0.0) return -iu * (omega2 - wk2);
  const double chi = (omega2 - k2) / (p.m * p.m);
  const double lt = p.lambda * std::pow(p.m, p.d - 3.0);
  const double c = lt * lt * p.m * p.m / 12.0;
  IntegralResult S2 = sunset_double_subtracted(chi, p.d, spec);
  return -iu * (omega2 - wk2) + 2.0 * iu * c * S2.value;
}

}  // namespace phi4diss
