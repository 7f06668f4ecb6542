#include "phi4diss/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <random>

namespace phi4diss {

namespace {

struct CountedFn {
  const Fn1D* f;
  mutable std::size_t count = 0;
  double operator()(double x) const {
    ++count;
    const double v = (*f)(x);
    return std::isfinite(v) ? v : 0.0;
  }
};

bool tol_met(double error, double value, const QuadratureSpec& spec) {
  return error <= std::max(spec.abs_tol, 50.0 * spec.rel_tol * std::abs(value)) ||
         error <= 1e-15 * std::abs(value) + 1e-300;
}

}  // namespace

IntegralResult integrate_finite(const Fn1D& f, double a, double b,
                                const QuadratureSpec& spec) {
  // node tables are expensive to build; keep one integrator per thread
  thread_local boost::math::quadrature::tanh_sinh<double> integrator(15);
  CountedFn cf{&f};
  double error = 0.0, l1 = 0.0;
  std::size_t levels = 0;
  IntegralResult res;
  res.value = integrator.integrate(std::cref(cf), a, b, spec.rel_tol, &error, &l1, &levels);
  res.error = error * std::max(l1, std::abs(res.value));
  res.evaluations = cf.count;
  res.converged = tol_met(res.error, res.value, spec);
  return res;
}

IntegralResult integrate_finite_gk(const Fn1D& f, double a, double b,
                                   const QuadratureSpec& spec) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  CountedFn cf{&f};
  double error = 0.0, l1 = 0.0;
  IntegralResult res;
  res.value = GK::integrate(std::cref(cf), a, b, 18, spec.rel_tol, &error, &l1);
  res.error = error;
  res.evaluations = cf.count;
  res.converged = tol_met(res.error, res.value, spec);
  return res;
}

IntegralResult integrate_semi_infinite(const Fn1D& f, double scale,
                                       const QuadratureSpec& spec, bool peaked) {
  const double s = scale > 0.0 ? scale : 1.0;
  const double cut = spec.cutoff_radius;
  Fn1D mapped = [&f, s, cut](double t) {
    if (t >= 1.0 - 1e-15) return 0.0;
    const double k = s * t / (1.0 - t);
    if (k > cut) return 0.0;
    const double jac = s / ((1.0 - t) * (1.0 - t));
    return f(k) * jac;
  };
  return peaked ? integrate_finite_gk(mapped, 0.0, 1.0, spec)
                : integrate_finite(mapped, 0.0, 1.0, spec);
}

IntegralResult integrate_mc(const std::function<double(const double*)>& f,
                            int dim, const QuadratureSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> u(static_cast<std::size_t>(dim));
  long double sum = 0.0L, sum2 = 0.0L;
  const std::size_t n = spec.mc_samples;
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) u[static_cast<std::size_t>(j)] = uni(rng);
    double v = f(u.data());
    if (!std::isfinite(v)) v = 0.0;
    sum += v;
    sum2 += static_cast<long double>(v) * v;
  }
  IntegralResult res;
  const long double mean = sum / static_cast<long double>(n);
  const long double var =
      std::max(0.0L, sum2 / static_cast<long double>(n) - mean * mean);
  res.value = static_cast<double>(mean);
  res.error = static_cast<double>(std::sqrt(var / static_cast<long double>(n)));
  res.evaluations = n;
  res.converged = true;  // MC always reports its standard error
  return res;
}

}  // namespace phi4diss
