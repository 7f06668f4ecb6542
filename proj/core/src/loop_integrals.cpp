#include "phi4diss/loop_integrals.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/polygamma.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "phi4diss/kernels.hpp"

namespace phi4diss {

namespace {

constexpr double kPi = std::numbers::pi;

double tgamma_checked(double x, const char* what) {
  if (x <= 0.0 && std::abs(x - std::round(x)) < 1e-12)
    throw PoleInDimensionError(std::string(what) + ": Gamma pole");
  return std::tgamma(x);
}

/// (a^s - b^s)/s with the s -> 0 limit ln(a/b); a, b > 0.
double powdiff(double a, double b, double s) {
  const double lr = std::log(a / b);
  if (std::abs(s) < 1e-7) return std::pow(b, s) * lr * (1.0 + 0.5 * s * lr);
  return std::pow(b, s) * std::expm1(s * lr) / s;
}

/// Adaptive integral over the 2-simplex u1,u2 >= 0, u1+u2 <= 1 of g(u1,u2,u3).
IntegralResult simplex_integral(const std::function<double(double, double, double)>& g,
                                const QuadratureSpec& spec) {
  QuadratureSpec inner = spec;
  inner.rel_tol = spec.rel_tol_nd * 0.05;
  QuadratureSpec outer = spec;
  outer.rel_tol = spec.rel_tol_nd;

  std::size_t evals = 0;
  Fn1D outer_fn = [&](double u1) {
    Fn1D inner_fn = [&](double v) {
      const double u2 = (1.0 - u1) * v;
      const double u3 = 1.0 - u1 - u2;
      if (u3 <= 0.0) return 0.0;
      return g(u1, u2, u3) * (1.0 - u1);
    };
    // inner convergence is judged through the outer error estimate: per-slice
    // relative tolerances are meaningless where the slice value vanishes
    IntegralResult r = integrate_finite(inner_fn, 0.0, 1.0, inner);
    evals += r.evaluations;
    return r.value;
  };
  IntegralResult res = integrate_finite(outer_fn, 0.0, 1.0, outer);
  res.evaluations = evals;
  res.error = std::max(res.error, spec.rel_tol_nd * std::abs(res.value));
  res.converged = res.error <= std::max(spec.abs_tol,
                                        20.0 * spec.rel_tol_nd * std::abs(res.value));
  return res;
}

double sigma2(double u1, double u2, double u3) {
  return u1 * u2 + u2 * u3 + u3 * u1;
}

}  // namespace

double sphere_factor(double d) {
  return 2.0 * std::pow(kPi, 0.5 * d) / tgamma_checked(0.5 * d, "sphere_factor");
}

namespace {
struct Rule1D {
  std::vector<double> x, w;
};
Rule1D expsinh_rule(int level, double scale, double d);
}  // namespace

IntegralResult radial_reduce(const std::function<double(double)>& f, double d,
                             const QuadratureSpec& spec, double scale, bool peaked) {
  // log-spaced double-exponential rule with level doubling: handles power
  // tails, Bose factors, and damping crossovers spread over many decades
  IntegralResult res;
  auto pass = [&](int level) {
    const Rule1D r = expsinh_rule(level, scale, d);
    double sum = 0.0;
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      if (r.x[i] > spec.cutoff_radius) continue;
      double v = f(r.x[i]);
      if (!std::isfinite(v)) v = 0.0;
      sum += r.w[i] * v;
      ++res.evaluations;
    }
    return sum;
  };
  int level = peaked ? 3 : 2;
  double prev = pass(level);
  for (++level; level <= 7; ++level) {
    const double cur = pass(level);
    res.value = cur;
    res.error = std::abs(cur - prev);
    const double tol = std::max(spec.abs_tol, spec.rel_tol * std::abs(cur));
    if (res.error <= tol) {
      res.converged = true;
      break;
    }
    prev = cur;
  }
  const double s = sphere_factor(d);
  res.value *= s;
  res.error *= s;
  return res;
}

double I1_closed(double d) {
  const double eps = 3.0 - d;
  if (std::abs(eps) < 1e-10 || std::abs(eps - 2.0) < 1e-10)
    throw PoleInDimensionError("I1_closed: pole at eps in {0, 2}");
  return -std::pow(2.0 * std::sqrt(kPi), eps) / (eps * (2.0 - eps)) *
         std::tgamma(1.0 + 0.5 * eps) / (4.0 * kPi * kPi);
}

double I1p_closed(double d) {
  const double eps = 3.0 - d;
  if (std::abs(eps) < 1e-10)
    throw PoleInDimensionError("I1p_closed: pole at eps = 0");
  return std::pow(2.0 * std::sqrt(kPi), eps) / eps * std::tgamma(1.0 + 0.5 * eps) /
         (4.0 * kPi * kPi);
}

double I1pp_closed(double d) {
  const double eps = 3.0 - d;
  if (std::abs(eps) < 1e-10)
    throw PoleInDimensionError("I1pp_closed: pole at eps = 0");
  const double pref = std::pow(2.0 * std::sqrt(kPi), eps) / (4.0 * kPi * kPi);
  const double num = std::tgamma(1.0 + 0.5 * eps) -
                     0.5 * eps * std::sqrt(kPi) * std::tgamma(0.5 + 0.5 * eps);
  if (std::abs(eps - 1.0) > 1e-3) return pref * num / (eps * (1.0 - eps));
  // eps = 1 is a removable point: num vanishes there. Expand num around it.
  const double sq = std::sqrt(kPi);
  const double g32 = std::tgamma(1.5), psi32 = boost::math::digamma(1.5);
  const double tri32 = boost::math::polygamma(1, 1.5);
  const double gE = 0.5772156649015328606;
  // num'(1) and num''(1) from digamma/trigamma values
  const double num1 = 0.5 * g32 * psi32 - 0.5 * sq - 0.25 * sq * (-gE);
  const double num2 = 0.25 * g32 * (psi32 * psi32 + tri32) - 0.5 * sq * (-gE) -
                      0.125 * sq * (gE * gE + kPi * kPi / 6.0);
  const double t = eps - 1.0;
  return pref * (-(num1 + 0.5 * num2 * t)) / eps;
}

IntegralResult sunset_value(double chi, double d, const QuadratureSpec& spec) {
  const double D = d + 1.0;
  if (chi >= 9.0)
    throw ThresholdViolationError("sunset_value: argument at or above the 3-particle threshold");
  if (std::abs(D - 3.0) < 5e-3)
    throw PoleInDimensionError("sunset_value: continuation pole at d = 2; use sunset_difference");
  const double pref = std::pow(4.0 * kPi, -D) * tgamma_checked(3.0 - D, "sunset_value");
  IntegralResult r = simplex_integral(
      [&](double u1, double u2, double u3) {
        const double s2 = sigma2(u1, u2, u3);
        const double A = 1.0 - chi * u1 * u2 * u3 / s2;
        return std::pow(s2, -0.5 * D) * std::pow(A, D - 3.0);
      },
      spec);
  r.value *= pref;
  r.error *= std::abs(pref);
  return r;
}

IntegralResult sunset_difference(double chi1, double chi2, double d,
                                 const QuadratureSpec& spec) {
  const double D = d + 1.0;
  if (chi1 >= 9.0 || chi2 >= 9.0)
    throw ThresholdViolationError("sunset_difference: argument at or above threshold");
  const double pref = -std::pow(4.0 * kPi, -D) * tgamma_checked(4.0 - D, "sunset_difference");
  IntegralResult r = simplex_integral(
      [&](double u1, double u2, double u3) {
        const double s2 = sigma2(u1, u2, u3);
        const double w = u1 * u2 * u3 / s2;
        const double A1 = 1.0 - chi1 * w, A2 = 1.0 - chi2 * w;
        return std::pow(s2, -0.5 * D) * powdiff(A1, A2, D - 3.0);
      },
      spec);
  r.value *= pref;
  r.error *= std::abs(pref);
  return r;
}

IntegralResult I_k_omega2(double omega2, double kmag, double m, double d,
                          const QuadratureSpec& spec) {
  if (!(d > 1.0 && d < 3.0))
    throw PoleInDimensionError("I_k_omega2: requires 1 < d < 3");
  const double chi = (omega2 - kmag * kmag) / (m * m);
  if (chi >= 9.0)
    throw ThresholdViolationError("I_k_omega2: omega^2 - k^2 >= (3m)^2");
  return sunset_value(chi, d, spec);
}

IntegralResult I3_schwinger(double d, const QuadratureSpec& spec) {
  const double D = d + 1.0;
  const double pref = -std::pow(4.0 * kPi, -D) * tgamma_checked(4.0 - D, "I3_schwinger");
  IntegralResult r = simplex_integral(
      [&](double u1, double u2, double u3) {
        const double s2 = sigma2(u1, u2, u3);
        return std::pow(s2, -0.5 * D - 1.0) * u1 * u2 * u3;
      },
      spec);
  r.value *= pref;
  r.error *= std::abs(pref);
  return r;
}

IntegralResult I3_finite_difference(double d, const QuadratureSpec& spec) {
  // I(chi) = I2 - I3 chi + O(chi^2); two central differences, Richardson step.
  const double h = 0.25;
  IntegralResult d1 = sunset_difference(h, -h, d, spec);
  IntegralResult d2 = sunset_difference(2.0 * h, -2.0 * h, d, spec);
  const double s1 = d1.value / (2.0 * h), s2 = d2.value / (4.0 * h);
  IntegralResult res;
  res.value = -(4.0 * s1 - s2) / 3.0;
  res.error = (d1.error / (2.0 * h) * 4.0 + d2.error / (4.0 * h)) / 3.0 +
              std::abs(s1 - s2) * 1e-2;
  res.evaluations = d1.evaluations + d2.evaluations;
  res.converged = d1.converged && d2.converged;
  return res;
}

IntegralResult I2_damped(double d, double ell_m, const QuadratureSpec& spec) {
  ThermalParams p;
  p.d = d;
  p.m = 1.0;
  p.beta = 1.0;
  p.gamma = ThermalParams::gamma_for_length(ell_m, p.beta);
  IntegralResult r = triple_momentum_integral(
      [&](double q1, double q2, double q3) {
        const double s = p.omega(q1) + p.omega(q2) + p.omega(q3);
        const double g = gamma_triplet(q1, q2, q3, p);
        return s / (4.0 * p.omega(q1) * p.omega(q2) * p.omega(q3) * (s * s + g * g));
      },
      d, spec, 1.0);
  const double vol = std::pow(2.0 * kPi, -2.0 * d);
  r.value *= vol;
  r.error *= vol;
  return r;
}

IntegralResult sunset_momentum(double chi, double d, const QuadratureSpec& spec) {
  if (chi >= 9.0) throw ThresholdViolationError("sunset_momentum: above threshold");
  auto omega = [](double q) { return std::sqrt(q * q + 1.0); };
  IntegralResult r = triple_momentum_integral(
      [&](double q1, double q2, double q3) {
        const double s = omega(q1) + omega(q2) + omega(q3);
        return s / (4.0 * omega(q1) * omega(q2) * omega(q3) * (s * s - chi));
      },
      d, spec, 1.0);
  const double vol = std::pow(2.0 * kPi, -2.0 * d);
  r.value *= vol;
  r.error *= vol;
  return r;
}

IntegralResult sunset_momentum_mc_difference(double omega2, double kmag, double m,
                                             const QuadratureSpec& spec) {
  // d = 2 only: variables (q1, th1, q2, th2) with angles measured from the
  // external wave vector; the baseline (omega2=0, k=0) integrand is subtracted
  // inside the sample to tame the ultraviolet logarithm.
  const double mm = m * m;
  auto omega = [mm](double q) { return std::sqrt(q * q + mm); };
  auto term = [&](double q1, double q2, double q3, double x) {
    const double s = omega(q1) + omega(q2) + omega(q3);
    return s / (4.0 * omega(q1) * omega(q2) * omega(q3) * (s * s - x));
  };
  const double c = 2.0 * m;  // tan-map scale
  auto f = [&](const double* u) {
    const double q1 = c * std::tan(0.5 * kPi * u[0]);
    const double q2 = c * std::tan(0.5 * kPi * u[1]);
    const double t1 = 2.0 * kPi * u[2], t2 = 2.0 * kPi * u[3];
    const double j1 = 0.5 * kPi * c * (1.0 + q1 * q1 / (c * c));
    const double j2 = 0.5 * kPi * c * (1.0 + q2 * q2 / (c * c));
    const double cross = 2.0 * q1 * q2 * std::cos(t1 - t2);
    const double q3sq_base = q1 * q1 + q2 * q2 + cross;
    const double q3sq = q3sq_base + kmag * kmag + 2.0 * kmag * (q1 * std::cos(t1) + q2 * std::cos(t2));
    const double g = term(q1, q2, std::sqrt(std::max(q3sq, 0.0)), omega2) -
                     term(q1, q2, std::sqrt(std::max(q3sq_base, 0.0)), 0.0);
    return g * q1 * q2 * j1 * j2 * 2.0 * kPi * 2.0 * kPi;
  };
  IntegralResult r = integrate_mc(f, 4, spec);
  const double vol = std::pow(2.0 * kPi, -4.0);  // m^{4-2d} = 1 at d = 2
  r.value *= vol;
  r.error *= vol;
  return r;
}

namespace {

struct Rule1D {
  std::vector<double> x, w;
};

/// Double-exponential rule on (0, inf): q = scale * exp((pi/2) sinh t.)
/// Nodes are close to uniform in log q, which suits integrands spread over
/// several decades. The weight carries the radial measure q^{d-1}.
Rule1D expsinh_rule(int level, double scale, double d) {
  // reach grows with level so tail truncation shows up in level differences;
  // nodes whose weights overflow or underflow drop out harmlessly
  const double tmax = 3.7 + 0.25 * level;
  const int n = 16 * (1 << level) + 1;
  const double h = 2.0 * tmax / (n - 1);
  Rule1D r;
  r.x.reserve(static_cast<std::size_t>(n));
  r.w.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t = -tmax + i * h;
    const double e = 0.5 * kPi * std::sinh(t);
    const double q = scale * std::exp(e);
    const double dq = q * 0.5 * kPi * std::cosh(t);
    const double w = h * dq * std::pow(q, d - 1.0);
    if (!std::isfinite(q) || !std::isfinite(w) || w == 0.0) continue;
    r.x.push_back(q);
    r.w.push_back(w);
  }
  return r;
}

/// Base tanh-sinh grid on (-1, 1). Endpoint distances 1 -+ u are carried in
/// stable form so integrable endpoint singularities with powers close to -1
/// keep their accuracy; plain tanh saturates at |u| = 1 far too early.
struct TanhSinhGrid {
  std::vector<double> u, du, dplus, dminus;  // u, h u'(t), 1+u, 1-u
};

TanhSinhGrid tanhsinh_grid(int level) {
  const double tmax = 6.0;
  const int n = 16 * (1 << level) + 1;
  const double h = 2.0 * tmax / (n - 1);
  TanhSinhGrid g;
  for (int i = 0; i < n; ++i) {
    const double t = -tmax + i * h;
    const double s = 0.5 * kPi * std::sinh(t);
    // 1 -+ tanh(s) = 2 e^{-+2s} / (1 + e^{-+2s})
    const double em = std::exp(-2.0 * std::abs(s));
    const double dfar = 2.0 * em / (1.0 + em);
    const double dnear = 2.0 / (1.0 + em);
    const double dm = s >= 0.0 ? dfar : dnear;   // 1 - u
    const double dp = s >= 0.0 ? dnear : dfar;   // 1 + u
    const double du = h * 0.5 * kPi * std::cosh(t) * dm * dp;  // sech^2 = (1-u)(1+u)
    if (!std::isfinite(du) || du == 0.0 || dm == 0.0 || dp == 0.0) continue;
    g.u.push_back(std::tanh(s));
    g.du.push_back(du);
    g.dplus.push_back(dp);
    g.dminus.push_back(dm);
  }
  return g;
}

/// One tensor pass. The integrand is symmetric under q1 <-> q2, so the
/// integration runs over q2 = v q1, v in (0,1), twice; the two-body edge at
/// q1 = q2 then sits on a tanh-sinh endpoint instead of crossing the grid.
double triple_tensor_pass(const std::function<double(double, double, double)>& F,
                          double d, double scale, int level, std::size_t& evals) {
  const TanhSinhGrid g = tanhsinh_grid(level);
  if (std::abs(d - 1.0) < 1e-9) {
    const Rule1D rq = expsinh_rule(level, scale, 2.0);  // folds one power of q
    double sum = 0.0;
    for (std::size_t i = 0; i < rq.x.size(); ++i) {
      const double a = rq.x[i];
      double inner = 0.0;
      for (std::size_t l = 0; l < g.u.size(); ++l) {
        const double v = 0.5 * g.dplus[l];
        const double vm = 0.5 * g.dminus[l];  // 1 - v, stable at the diagonal
        double f = F(a, a * v, a * (1.0 + v)) + F(a, a * v, a * vm);
        if (!std::isfinite(f)) f = 0.0;
        inner += 0.5 * g.du[l] * f;
        ++evals;
      }
      sum += rq.w[i] * inner;
    }
    return 2.0 * 2.0 * sum;  // quadrant fold times the q1<->q2 symmetry
  }
  // Triangle reduction of the angular integral:
  //   Int_0^pi sin^{d-2} theta F dtheta
  //     = Int_{|q1-q2|}^{q1+q2} (sin theta)^{d-3} (q3/(q1 q2)) F(q3) dq3,
  // with sin^2 theta = [(q1+q2)^2 - q3^2][q3^2 - (q1-q2)^2]/(2 q1 q2)^2;
  // the (d-3)/2 endpoint powers land on tanh-sinh nodes.
  const Rule1D rq = expsinh_rule(level, scale, 2.0 * d);  // q1^{2d-1} folded
  const double ang = sphere_factor(d) * sphere_factor(d - 1.0);
  const double p = 0.5 * (d - 3.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < rq.x.size(); ++i) {
    const double q1 = rq.x[i];
    double mid = 0.0;
    for (std::size_t j = 0; j < g.u.size(); ++j) {
      const double v = 0.5 * g.dplus[j];
      const double q2 = q1 * v;
      if (q2 <= 0.0) continue;
      const double lo = q1 * 0.5 * g.dminus[j];  // q1 - q2, no cancellation
      const double hi = q1 + q2;
      const double c1 = q2;  // (hi - lo)/2
      const double s2q = 2.0 * q1 * q2;
      double inner = 0.0;
      for (std::size_t l = 0; l < g.u.size(); ++l) {
        const double q3 = lo + c1 * g.dplus[l];
        const double d_up = c1 * g.dminus[l];  // hi - q3
        const double d_dn = c1 * g.dplus[l];   // q3 - lo
        const double up = d_up * (hi + q3);
        const double dn = d_dn * (q3 + lo);
        if (up <= 0.0 || dn <= 0.0) continue;
        const double wfac = std::pow(up * dn / (s2q * s2q), p);
        double f = F(q1, q2, q3);
        if (!std::isfinite(f) || !std::isfinite(wfac)) continue;
        inner += c1 * g.du[l] * wfac * q3 / (q1 * q2) * f;
        ++evals;
      }
      mid += 0.5 * g.du[j] * std::pow(v, d - 1.0) * inner;
    }
    sum += rq.w[i] * mid;
  }
  return 2.0 * ang * sum;
}

}  // namespace

IntegralResult triple_momentum_integral(
    const std::function<double(double, double, double)>& F, double d,
    const QuadratureSpec& spec, double scale, bool peaked) {
  // Tensor-product double-exponential rules with level doubling. Fixed nodes
  // keep the discretization error a smooth function of the parameters, so
  // differences of these integrals stay clean.
  IntegralResult res;
  int level = peaked ? 3 : 2;
  double prev = triple_tensor_pass(F, d, scale, level, res.evaluations);
  for (++level; level <= 6; ++level) {
    const double cur = triple_tensor_pass(F, d, scale, level, res.evaluations);
    res.value = cur;
    res.error = std::abs(cur - prev);
    const double tol = std::max(spec.abs_tol, spec.rel_tol_nd * std::abs(cur));
    if (res.error <= tol || res.evaluations > spec.max_evals) {
      res.converged = res.error <= tol;
      return res;
    }
    prev = cur;
  }
  res.converged = false;
  return res;
}

double friction_integral_closed(double d) {
  if (std::abs(d - 3.0) < 1e-10)
    throw PoleInDimensionError("friction_integral_closed: pole at d = 3");
  return std::pow(2.0 * kPi, -d) * sphere_factor(d) * (kPi / 4.0) /
         std::sin((d + 1.0) * kPi / 4.0);
}

IntegralResult friction_integral_quadrature(double d, const QuadratureSpec& spec) {
  IntegralResult r = radial_reduce(
      [](double q) { return q / (1.0 + q * q * q * q); }, d, spec, 1.0);
  const double vol = std::pow(2.0 * kPi, -d);
  r.value *= vol;
  r.error *= vol;
  return r;
}

IntegralResult J_integral(const ThermalParams& p, const QuadratureSpec& spec) {
  const double scale = (p.m > 0.0 ? p.m : 1.0) / (1.0 + std::sqrt(p.beta * p.m)) +
                       1.0 / (p.beta * (1.0 + p.beta));
  IntegralResult r = radial_reduce(
      [&p](double q) {
        const double x = p.beta * p.omega(q);
        if (x > 700.0) return 0.0;
        return 1.0 / (2.0 * p.omega_tilde(q) * std::expm1(x));
      },
      p.d, spec, scale);
  const double vol = std::pow(2.0 * kPi, -p.d);
  r.value *= vol;
  r.error *= vol;
  return r;
}

}  // namespace phi4diss
