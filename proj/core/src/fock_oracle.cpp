#include "phi4diss/fock_oracle.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "phi4diss/kernels.hpp"

namespace phi4diss::fock {

namespace {

using cplx = std::complex<double>;

/// Stable logarithmic mean of e^a and e^b: (e^a - e^b)/(a - b).
double log_mean(double a, double b) {
  const double h = 0.5 * (a - b);
  double ratio;  // sinh(h)/h
  if (std::abs(h) < 1e-5)
    ratio = 1.0 + h * h / 6.0;
  else
    ratio = std::sinh(h) / h;
  return std::exp(0.5 * (a + b)) * ratio;
}

double logsumexp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

Matrix commute(const Matrix& A, const Matrix& B) { return A * B - B * A; }

}  // namespace

int ModeGrid::dim() const {
  int d = 1;
  for (std::size_t i = 0; i < modes.size(); ++i) d *= cutoff + 1;
  return d;
}

void ModeGrid::validate() const {
  params.validate();
  if (modes.empty() || modes.size() > 3)
    throw ConfigError("grid.modes: need between 1 and 3 modes");
  if (cutoff < 1 || dim() > 1405)
    throw ConfigError("grid.cutoff: Hilbert dimension out of range");
  for (const auto& m : modes) {
    if (m.k < 0.0) throw ConfigError("grid.modes: magnitudes must be >= 0");
    for (const auto& n : modes)
      if (n.tag == -m.tag && std::abs(n.k - m.k) > 1e-14)
        throw ConfigError("grid.modes: conjugate tags must share a magnitude");
  }
}

int ModeGrid::mode_index(int tag) const {
  for (std::size_t i = 0; i < modes.size(); ++i)
    if (modes[i].tag == tag) return static_cast<int>(i);
  return -1;
}

double ModeGrid::magnitude_of_tag(int tag) const {
  int i = mode_index(tag);
  if (i < 0) i = mode_index(-tag);
  if (i < 0) throw UnboundLabelError("no grid mode with tag " + std::to_string(tag));
  return modes[static_cast<std::size_t>(i)].k;
}

FockOps build_ops(const ModeGrid& grid, double z_value) {
  grid.validate();
  const int M = static_cast<int>(grid.modes.size());
  const int n1 = grid.cutoff + 1;
  const int D = grid.dim();

  Matrix a1 = Matrix::Zero(n1, n1);
  for (int n = 1; n < n1; ++n) a1(n - 1, n) = std::sqrt(static_cast<double>(n));

  auto kron = [](const Matrix& A, const Matrix& B) {
    Matrix R(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      for (Eigen::Index j = 0; j < A.cols(); ++j)
        R.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return R;
  };

  FockOps ops;
  ops.dim = D;
  for (int i = 0; i < M; ++i) {
    Matrix m = Matrix::Identity(1, 1);
    for (int j = 0; j < M; ++j)
      m = kron(m, j == i ? a1 : Matrix::Identity(n1, n1));
    ops.a.push_back(m);
    ops.ad.push_back(m.adjoint());
  }
  ops.H0 = Matrix::Zero(D, D);
  for (int i = 0; i < M; ++i)
    ops.H0 += grid.params.omega(grid.modes[static_cast<std::size_t>(i)].k) *
              ops.ad[static_cast<std::size_t>(i)] * ops.a[static_cast<std::size_t>(i)];
  ops.free_energies = ops.H0.diagonal().real();
  ops.H1 = realize(ops::build_H1(), grid, ops, z_value, {});
  ops.H = ops.H0 + ops.H1;
  return ops;
}

Matrix KEnv::rho() const {
  Eigen::VectorXd p = logp.array().exp();
  if (diagonal()) return p.cast<cplx>().asDiagonal();
  return U * p.cast<cplx>().asDiagonal() * U.adjoint();
}

Matrix KEnv::log_rho() const {
  if (diagonal()) return logp.cast<cplx>().asDiagonal();
  return U * logp.cast<cplx>().asDiagonal() * U.adjoint();
}

Matrix KEnv::apply(const Matrix& A) const {
  const Eigen::Index D = logp.size();
  Matrix X = diagonal() ? A : Matrix(U.adjoint() * A * U);
  for (Eigen::Index i = 0; i < D; ++i)
    for (Eigen::Index j = 0; j < D; ++j) X(i, j) *= log_mean(logp[i], logp[j]);
  return diagonal() ? X : Matrix(U * X * U.adjoint());
}

Matrix KEnv::apply_inv(const Matrix& A) const {
  const Eigen::Index D = logp.size();
  Matrix X = diagonal() ? A : Matrix(U.adjoint() * A * U);
  for (Eigen::Index i = 0; i < D; ++i)
    for (Eigen::Index j = 0; j < D; ++j) X(i, j) /= log_mean(logp[i], logp[j]);
  return diagonal() ? X : Matrix(U * X * U.adjoint());
}

KEnv make_free_kenv(const ModeGrid& grid, const FockOps& ops) {
  KEnv env;
  env.logp = -grid.params.beta * ops.free_energies;
  env.logp.array() -= logsumexp(env.logp);
  return env;
}

KEnv make_kenv(const Matrix& H, double beta, double log_floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (H + Matrix(H.adjoint())));
  KEnv env;
  env.U = es.eigenvectors();
  env.logp = -beta * es.eigenvalues();
  env.logp.array() -= logsumexp(env.logp);
  for (Eigen::Index i = 0; i < env.logp.size(); ++i)
    env.logp[i] = std::max(env.logp[i], log_floor);
  return env;
}

std::complex<double> trace_avg(const Matrix& A, const KEnv& env) {
  return (A * env.rho()).trace();
}

std::complex<double> canonical_corr(const Matrix& A, const Matrix& B, const KEnv& env) {
  return (A * env.apply(B)).trace();
}

Matrix L_apply(const Matrix& X, const ModeGrid& grid, const FockOps& ops,
               const KEnv& env, WhichL which, LPart part) {
  const int D = ops.dim;
  Matrix out = Matrix::Zero(D, D);
  if (part != LPart::irreversible) {
    const cplx i1(0.0, 1.0);
    const Matrix c = X * ops.H - ops.H * X;
    out += (which == WhichL::forward ? i1 : -i1) * c;
  }
  if (part != LPart::reversible) {
    for (std::size_t i = 0; i < grid.modes.size(); ++i) {
      const double k = grid.modes[i].k;
      const double rate = grid.params.gamma_k(k) /
                          (grid.params.beta * grid.params.omega(k));
      if (rate == 0.0) continue;
      Matrix inner = commute(ops.ad[i], env.apply(commute(ops.a[i], X))) +
                     commute(ops.a[i], env.apply(commute(ops.ad[i], X)));
      out -= rate * env.apply_inv(inner);
    }
  }
  return out;
}

Matrix superop_matrix(const std::function<Matrix(const Matrix&)>& fn, int dim) {
  Matrix S(dim * dim, dim * dim);
  Matrix E = Matrix::Zero(dim, dim);
  for (int b = 0; b < dim; ++b) {
    for (int a = 0; a < dim; ++a) {
      E(a, b) = 1.0;
      Matrix col = fn(E);
      E(a, b) = 0.0;
      S.col(a + b * dim) = Eigen::Map<Eigen::VectorXcd>(col.data(), dim * dim);
    }
  }
  return S;
}

namespace {

/// vec(A X) = (I kron A) vec X
SparseM left_mult_super(const Matrix& A) {
  const int D = static_cast<int>(A.rows());
  std::vector<Eigen::Triplet<cplx>> trip;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j)
      if (A(i, j) != cplx(0.0, 0.0))
        for (int b = 0; b < D; ++b)
          trip.emplace_back(i + b * D, j + b * D, A(i, j));
  SparseM S(D * D, D * D);
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

/// vec(X A) = (A^T kron I) vec X
SparseM right_mult_super(const Matrix& A) {
  const int D = static_cast<int>(A.rows());
  std::vector<Eigen::Triplet<cplx>> trip;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j)
      if (A(i, j) != cplx(0.0, 0.0))
        for (int a = 0; a < D; ++a)
          trip.emplace_back(a + j * D, a + i * D, A(i, j));
  SparseM S(D * D, D * D);
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

SparseM diag_super(const Eigen::VectorXd& logp, bool inverse) {
  const int D = static_cast<int>(logp.size());
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(static_cast<std::size_t>(D) * D);
  for (int b = 0; b < D; ++b)
    for (int a = 0; a < D; ++a) {
      const double lm = log_mean(logp[a], logp[b]);
      trip.emplace_back(a + b * D, a + b * D, inverse ? 1.0 / lm : lm);
    }
  SparseM S(D * D, D * D);
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

}  // namespace

SparseM L_superop_sparse(const ModeGrid& grid, const FockOps& ops, const KEnv& env,
                         WhichL which, LPart part) {
  if (!env.diagonal())
    throw ConfigError("L_superop_sparse: needs a number-basis-diagonal equilibrium");
  const int D = ops.dim;
  SparseM S(D * D, D * D);
  if (part != LPart::irreversible) {
    const cplx i1 = which == WhichL::forward ? cplx(0.0, 1.0) : cplx(0.0, -1.0);
    S += SparseM(i1 * (right_mult_super(ops.H) - left_mult_super(ops.H)));
  }
  if (part != LPart::reversible) {
    const SparseM K = diag_super(env.logp, false);
    const SparseM Kinv = diag_super(env.logp, true);
    for (std::size_t i = 0; i < grid.modes.size(); ++i) {
      const double k = grid.modes[i].k;
      const double rate =
          grid.params.gamma_k(k) / (grid.params.beta * grid.params.omega(k));
      if (rate == 0.0) continue;
      SparseM Ca = left_mult_super(ops.a[i]) - right_mult_super(ops.a[i]);
      SparseM Cad = left_mult_super(ops.ad[i]) - right_mult_super(ops.ad[i]);
      SparseM inner = Cad * SparseM(K * Ca) + Ca * SparseM(K * Cad);
      S -= SparseM(rate * (Kinv * inner));
    }
  }
  return S;
}

namespace {

/// Enumerates bound-variable assignments over the signed tag closure and calls
/// f(tags) whenever every delta constraint is satisfied exactly.
template <class F>
void for_each_assignment(const ops::Term& t, const ModeGrid& grid,
                         const std::map<std::string, int>& ext, F&& f) {
  std::set<int> closure_set;
  for (const auto& m : grid.modes) {
    closure_set.insert(m.tag);
    closure_set.insert(-m.tag);
  }
  const std::vector<int> closure(closure_set.begin(), closure_set.end());
  const auto& bound = t.coeff.bound;
  std::vector<std::size_t> idx(bound.size(), 0);

  std::map<std::string, int> tags = ext;
  while (true) {
    for (std::size_t i = 0; i < bound.size(); ++i) tags[bound[i]] = closure[idx[i]];
    bool ok = true;
    for (const auto& d : t.deltas) {
      long sum = 0;
      for (const auto& [name, c] : d.terms) {
        auto it = tags.find(name);
        if (it == tags.end())
          throw UnboundLabelError("grid evaluation: unbound label '" + name + "'");
        sum += static_cast<long>(c) * it->second;
      }
      if (sum != 0) {
        ok = false;
        break;
      }
    }
    if (ok) f(tags);
    // odometer
    std::size_t j = 0;
    for (; j < idx.size(); ++j) {
      if (++idx[j] < closure.size()) break;
      idx[j] = 0;
    }
    if (j == idx.size()) break;
    if (bound.empty()) break;
  }
}

ops::EvalContext make_ctx(const ModeGrid& grid, double z_value, double omega_ext,
                          const std::map<std::string, int>& tags) {
  ops::EvalContext ctx;
  ctx.params = &grid.params;
  ctx.omega_ext = omega_ext;
  ctx.z_value = z_value;
  ctx.grid_mode = true;
  for (const auto& [name, tag] : tags) ctx.magnitudes[name] = grid.magnitude_of_tag(tag);
  return ctx;
}

}  // namespace

Matrix realize(const ops::OperatorSum& sum, const ModeGrid& grid, const FockOps& ops,
               double z_value, const std::map<std::string, int>& external_tags,
               double omega_ext) {
  const int D = ops.dim;
  Matrix out = Matrix::Zero(D, D);
  for (const auto& t : sum.terms()) {
    for_each_assignment(t, grid, external_tags, [&](const std::map<std::string, int>& tags) {
      // resolve every operator to a physical mode; absent modes kill the term
      std::vector<int> cr_modes, an_modes;
      auto resolve = [&](const ops::Label& l, std::vector<int>& dst) {
        const int tag = (l.negated ? -1 : 1) * tags.at(l.name);
        const int idx = grid.mode_index(tag);
        if (idx < 0) return false;
        dst.push_back(idx);
        return true;
      };
      for (const auto& l : t.creators)
        if (!resolve(l, cr_modes)) return;
      for (const auto& l : t.annihilators)
        if (!resolve(l, an_modes)) return;
      const cplx c = ops::eval_coeff(t.coeff, make_ctx(grid, z_value, omega_ext, tags));
      if (c == cplx(0.0, 0.0)) return;
      Matrix m = Matrix::Identity(D, D);
      for (int i : cr_modes) m = m * ops.ad[static_cast<std::size_t>(i)];
      for (int i : an_modes) m = m * ops.a[static_cast<std::size_t>(i)];
      out += c * m;
    });
  }
  return out;
}

std::complex<double> eval_scalar_on_grid(const ops::OperatorSum& sum,
                                         const ModeGrid& grid, double z_value,
                                         const std::map<std::string, int>& external_tags,
                                         double omega_ext) {
  cplx out(0.0, 0.0);
  for (const auto& t : sum.terms()) {
    if (!t.is_identity_op())
      throw UnboundLabelError("eval_scalar_on_grid: sum still contains operators");
    for_each_assignment(t, grid, external_tags, [&](const std::map<std::string, int>& tags) {
      out += ops::eval_coeff(t.coeff, make_ctx(grid, z_value, omega_ext, tags));
    });
  }
  return out;
}

double weighted_norm(const Matrix& X, const KEnv& env) {
  const Eigen::Index D = env.logp.size();
  Matrix Y = env.diagonal() ? X : Matrix(env.U.adjoint() * X * env.U);
  double s = 0.0;
  for (Eigen::Index i = 0; i < D; ++i)
    for (Eigen::Index j = 0; j < D; ++j)
      s += std::norm(Y(i, j)) * std::exp(env.logp[i] + env.logp[j]);
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Verification suite
// ---------------------------------------------------------------------------

bool VerifyReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

void VerifyReport::add(std::string name, double deviation, double tolerance) {
  checks.push_back({std::move(name), tolerance, deviation, deviation <= tolerance});
}

std::string VerifyReport::to_json() const {
  std::ostringstream os;
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  os << "{\"schema_version\":1,\"all_pass\":" << (all_pass() ? "true" : "false")
     << ",\"checks\":[";
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto& c = checks[i];
    os << (i ? "," : "") << "{\"name\":\"" << c.name << "\",\"tolerance\":"
       << num(c.tolerance) << ",\"max_deviation\":" << num(c.deviation)
       << ",\"pass\":" << (c.pass ? "true" : "false") << "}";
  }
  os << "],\"warnings\":[";
  for (std::size_t i = 0; i < warnings.size(); ++i)
    os << (i ? "," : "") << "\"" << warnings[i] << "\"";
  os << "]}";
  return os.str();
}

namespace {

Matrix random_matrix(int D, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix m(D, D);
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) m(i, j) = cplx(g(rng), g(rng));
  return m;
}

Matrix random_hermitian(int D, std::mt19937_64& rng) {
  Matrix m = random_matrix(D, rng);
  return 0.5 * (m + Matrix(m.adjoint()));
}

double rel_dev(const cplx a, const cplx b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace

VerifyReport verify_identities(const ModeGrid& grid, const VerifyOptions& opt) {
  VerifyReport rep;
  grid.validate();
  std::mt19937_64 rng(opt.seed);
  const int D = grid.dim();
  const double beta = grid.params.beta;

  double min_bw = 1e300;
  for (const auto& m : grid.modes)
    min_bw = std::min(min_bw, beta * grid.params.omega(m.k));
  if (min_bw < 2.0)
    rep.warnings.push_back("beta*omega below 2: truncation error may dominate tolerances");

  // --- free theory -----------------------------------------------------
  ModeGrid free_grid = grid;
  free_grid.params.lambda = 0.0;
  FockOps fo = build_ops(free_grid, 0.0);
  KEnv fenv = make_free_kenv(free_grid, fo);
  const Matrix rho0 = fenv.rho();
  const Matrix lnrho0 = fenv.log_rho();

  // ln lemma [A,rho] = [K A, ln rho] = K [A, ln rho]
  {
    double dev = 0.0;
    for (int r = 0; r < 3; ++r) {
      Matrix A = random_matrix(D, rng);
      const double scale = std::max(1e-30, commute(A, rho0).norm());
      Matrix lhs = commute(A, rho0);
      dev = std::max(dev, (lhs - commute(fenv.apply(A), lnrho0)).norm() / scale);
      dev = std::max(dev, (lhs - fenv.apply(commute(A, lnrho0))).norm() / scale);
    }
    rep.add("ln_lemma", dev, 1e-10);
  }

  // trace lemma tr([A,B] rho) = tr{(K A)[B, ln rho]}
  {
    double dev = 0.0;
    for (int r = 0; r < 3; ++r) {
      Matrix A = random_matrix(D, rng), B = random_matrix(D, rng);
      const cplx lhs = (commute(A, B) * rho0).trace();
      const cplx rhs = (fenv.apply(A) * commute(B, lnrho0)).trace();
      dev = std::max(dev, rel_dev(lhs, rhs));
    }
    rep.add("trace_lemma", dev, 1e-10);
  }

  // <[A,B]> = i beta (A; L_rev B) = i beta (Lbar_rev A; B)
  {
    double dev = 0.0;
    const cplx ib(0.0, beta);
    for (int r = 0; r < 3; ++r) {
      Matrix A = random_matrix(D, rng), B = random_matrix(D, rng);
      const cplx lhs = (commute(A, B) * rho0).trace();
      Matrix LrevB = L_apply(B, free_grid, fo, fenv, WhichL::forward, LPart::reversible);
      Matrix LbarA = L_apply(A, free_grid, fo, fenv, WhichL::adjoint, LPart::reversible);
      dev = std::max(dev, rel_dev(lhs, ib * canonical_corr(A, LrevB, fenv)));
      dev = std::max(dev, rel_dev(lhs, ib * canonical_corr(LbarA, B, fenv)));
    }
    rep.add("commutator_canonical_correlation", dev, 1e-10);
  }

  // e^{-u H0} A e^{u H0} = e^{-u omega_A} A for monomials, complex u
  {
    const cplx u(0.31, 0.17);
    Matrix A = fo.ad[0] * fo.ad[0] * fo.a[grid.modes.size() > 1 ? 1 : 0];
    const double wA = 2.0 * grid.params.omega(grid.modes[0].k) -
                      grid.params.omega(grid.modes[grid.modes.size() > 1 ? 1 : 0].k);
    Eigen::VectorXcd em = (-u * fo.free_energies.cast<cplx>().array()).exp();
    Eigen::VectorXcd ep = (u * fo.free_energies.cast<cplx>().array()).exp();
    Matrix lhs = em.asDiagonal() * A * ep.asDiagonal();
    Matrix rhs = std::exp(-u * wA) * A;
    rep.add("exponential_conjugation", (lhs - rhs).norm() / std::max(1e-30, rhs.norm()),
            1e-10);
  }

  // K0 A = w(omega_A) A rho0 for monomials (exact on the truncated space)
  {
    Matrix A = fo.ad[0] * fo.a[grid.modes.size() > 1 ? 1 : 0];
    const double wA = grid.params.omega(grid.modes[0].k) -
                      grid.params.omega(grid.modes[grid.modes.size() > 1 ? 1 : 0].k);
    Matrix lhs = fenv.apply(A);
    Matrix rhs = w_of(wA, beta) * A * rho0;
    rep.add("K0_action", (lhs - rhs).norm() / std::max(1e-30, rhs.norm()), 1e-10);
  }

  // two-line conjugation identity K^{-1}[A, K B]
  {
    const std::size_t j = grid.modes.size() > 1 ? 1 : 0;
    Matrix A = fo.ad[0];
    Matrix B = fo.a[j];
    const double wA = grid.params.omega(grid.modes[0].k);
    const double wB = -grid.params.omega(grid.modes[j].k);
    Matrix lhs = fenv.apply_inv(commute(A, fenv.apply(B)));
    const double Wf = W_of(wA, wB, beta);
    Matrix rhs1 = beta * wA * Wf * B * A +
                  (w_of(wB, beta) / w_of(wA + wB, beta)) * commute(A, B);
    Matrix rhs2 = beta * wA * Wf * A * B +
                  (w_of(wB, beta) * std::exp(-beta * wA) / w_of(wA + wB, beta)) *
                      commute(A, B);
    const double s = std::max(1e-30, weighted_norm(lhs, fenv));
    double dev = weighted_norm(lhs - rhs1, fenv) / s;
    dev = std::max(dev, weighted_norm(lhs - rhs2, fenv) / s);
    rep.add("K_conjugation_identity", dev, 1e-6);
  }

  // compact free evolution L0 A = -(i omega_A + gamma_A) A + Gamma_A against
  // the dense generator, for a set of symbolic monomials
  {
    std::vector<ops::Term> probes;
    {
      ops::Term t;
      t.creators = {{"m0", false, false}};
      probes.push_back(t);
    }
    {
      ops::Term t;
      t.annihilators = {{"m0", false, false}};
      probes.push_back(t);
    }
    {
      ops::Term t;
      t.creators = {{"m0", false, false}};
      t.annihilators = {{"m1", false, false}};
      probes.push_back(t);
    }
    {
      ops::Term t;
      t.creators = {{"m0", false, false}};
      t.annihilators = {{"m0", false, false}, {"m1", false, false}};
      probes.push_back(t);
    }
    std::map<std::string, int> ext{{"m0", grid.modes[0].tag},
                                   {"m1", grid.modes.back().tag}};
    double dev = 0.0;
    for (const auto& p : probes) {
      Matrix A = realize(ops::OperatorSum(p), free_grid, fo, 0.0, ext);
      Matrix lhs = L_apply(A, free_grid, fo, fenv, WhichL::forward);
      Matrix rhs = realize(ops::L0_apply(p), free_grid, fo, 0.0, ext);
      dev = std::max(dev, weighted_norm(lhs - rhs, fenv) /
                              std::max(1e-30, weighted_norm(lhs, fenv) +
                                                  weighted_norm(A, fenv)));
    }
    rep.add("compact_free_evolution", dev, 1e-6);
  }

  // Gamma_{adag_k a_k} = w(omega_k) 2 gamma_k/(beta omega_k)
  {
    const double k = grid.modes[0].k;
    const double wk = grid.params.omega(k);
    Matrix A = fo.ad[0] * fo.a[0];
    Matrix gamma_dense = L_apply(A, free_grid, fo, fenv, WhichL::forward);
    // omega_A = 0 and gamma_A = 2 gamma_k W(omega_k, -omega_k)
    const double gA = 2.0 * grid.params.gamma_k(k) * W_of(wk, -wk, beta);
    gamma_dense += gA * A;
    Matrix expected = w_of(wk, beta) * 2.0 * grid.params.gamma_k(k) / (beta * wk) *
                      Matrix::Identity(D, D);
    rep.add("Gamma_adag_a_value",
            weighted_norm(gamma_dense - expected, fenv) /
                std::max(1e-30, weighted_norm(expected, fenv)),
            1e-6);
  }

  // steady state L(1) = 0
  {
    Matrix l1 = L_apply(Matrix::Identity(D, D), free_grid, fo, fenv, WhichL::forward);
    rep.add("steady_state", l1.norm() / D, 1e-10);
  }

  // Lbar a_k = -i (1 - i gamma_k/omega_k) [a_k, H] on the free grid
  {
    const double k = grid.modes[0].k;
    const double wk = grid.params.omega(k);
    Matrix lhs = L_apply(fo.a[0], free_grid, fo, fenv, WhichL::adjoint);
    const cplx pref = cplx(0.0, -1.0) * (1.0 - cplx(0.0, 1.0) * grid.params.gamma_k(k) / wk);
    Matrix rhs = pref * commute(fo.a[0], fo.H);
    rep.add("Lbar_single_annihilator",
            weighted_norm(lhs - rhs, fenv) / std::max(1e-30, weighted_norm(rhs, fenv)),
            1e-6);
  }

  // resolvent reduction against a sparse linear solve of (i omega - L0) X = A
  {
    const double omega_ext = 0.37;
    std::map<std::string, int> ext{{"m0", grid.modes[0].tag},
                                   {"m1", grid.modes.back().tag}};
    ops::Term p;
    p.creators = {{"m0", false, false}};
    p.annihilators = {{"m0", false, false}, {"m1", false, false}};
    Matrix A = realize(ops::OperatorSum(p), free_grid, fo, 0.0, ext);
    SparseM Ls = L_superop_sparse(free_grid, fo, fenv, WhichL::forward);
    SparseM M = -Ls;
    for (int i = 0; i < D * D; ++i) M.coeffRef(i, i) += cplx(0.0, omega_ext);
    Eigen::SparseLU<SparseM> lu(M);
    Eigen::VectorXcd x = lu.solve(Eigen::Map<Eigen::VectorXcd>(A.data(), D * D));
    Matrix X = Eigen::Map<Matrix>(x.data(), D, D);
    Matrix sym = realize(ops::R0_apply(p, ops::ResolventDirection::forward), free_grid,
                         fo, 0.0, ext, omega_ext);
    rep.add("resolvent_reduction",
            weighted_norm(X - sym, fenv) / std::max(1e-30, weighted_norm(X, fenv)),
            1e-6);
  }

  // two-particle sector: adag adag is an exact eigenvector of L0 since its
  // Gamma term vanishes; fit the eigenvalue in the weighted inner product
  {
    const std::size_t j = grid.modes.size() > 1 ? 1 : 0;
    Matrix A = fo.ad[0] * fo.ad[j];
    Matrix LA = L_apply(A, free_grid, fo, fenv, WhichL::forward);
    const double w0 = grid.params.omega(grid.modes[0].k);
    const double wj = grid.params.omega(grid.modes[j].k);
    const double wA = w0 + wj;
    const double gA =
        grid.params.gamma_k(grid.modes[0].k) * W_of(w0, wA - w0, beta) +
        grid.params.gamma_k(grid.modes[j].k) * W_of(wj, wA - wj, beta);
    Matrix expected = cplx(-gA, -wA) * A;
    rep.add("two_particle_decay_rate",
            weighted_norm(LA - expected, fenv) /
                std::max(1e-30, weighted_norm(expected, fenv)),
            1e-6);
  }

  // decay-rate fit of e^{Lbar t} adag through the matrix exponential
  // (matrix exponentials of the superoperator: small grids only)
  if (D <= 20) {
    Matrix Ls = Matrix(L_superop_sparse(free_grid, fo, fenv, WhichL::adjoint));
    const double k = grid.modes[0].k;
    const double wk = grid.params.omega(k);
    const double t1 = 0.3 / wk, t2 = 0.6 / wk;
    Matrix P1 = (Ls * t1).exp();
    Matrix P2 = (Ls * t2).exp();
    Matrix ad0 = fo.ad[0];
    Eigen::VectorXcd v = Eigen::Map<Eigen::VectorXcd>(ad0.data(), D * D);
    Eigen::VectorXcd v1 = P1 * v, v2 = P2 * v;
    Matrix X1 = Eigen::Map<Matrix>(v1.data(), D, D);
    Matrix X2 = Eigen::Map<Matrix>(v2.data(), D, D);
    const cplx f1 = trace_avg(fo.a[0] * X1, fenv) / trace_avg(fo.a[0] * ad0, fenv);
    const cplx f2 = trace_avg(fo.a[0] * X2, fenv) / trace_avg(fo.a[0] * ad0, fenv);
    const cplx zfit = std::log(f2 / f1) / (t2 - t1);
    const cplx expected(-grid.params.gamma_k(k), wk);
    rep.add("free_decay_fit", std::abs(zfit - expected) / std::abs(expected), 1e-8);
  }

  // occupation number against the Bose function
  {
    const double wk = grid.params.omega(grid.modes[0].k);
    const cplx occ = trace_avg(fo.ad[0] * fo.a[0], fenv);
    const double nb = 1.0 / std::expm1(beta * wk);
    rep.add("occupation_number", std::abs(occ - nb) / std::max(nb, 1e-30), 1e-8);
  }

  // --- interacting checks ----------------------------------------------
  // These identities hold at any temperature. They are checked at a moderated
  // beta: the eigenbasis rotation of K^{-1} at beta*omega = 8 amplifies
  // double-precision roundoff by exp(beta*E_max), which would swamp an exact
  // identity long before any physics enters.
  ModeGrid igrid = grid;
  igrid.params.lambda = opt.lambda;
  igrid.params.beta = 2.0 / grid.params.omega(grid.modes[0].k);
  const double ibeta = igrid.params.beta;
  FockOps io = build_ops(igrid, opt.z_value);
  rep.add("H1_hermitian", (io.H1 - Matrix(io.H1.adjoint())).norm() /
                              std::max(1e-30, io.H1.norm()),
          1e-12);
  KEnv ienv = make_kenv(io.H, ibeta);

  {
    double dev = 0.0;
    for (int r = 0; r < 3; ++r) {
      Matrix A = random_matrix(D, rng), B = random_matrix(D, rng);
      Matrix LB = L_apply(B, igrid, io, ienv, WhichL::forward);
      Matrix LbarA = L_apply(A, igrid, io, ienv, WhichL::adjoint);
      dev = std::max(dev, rel_dev(canonical_corr(A, LB, ienv),
                                  canonical_corr(LbarA, B, ienv)));
    }
    rep.add("adjointness", dev, 1e-10);
  }

  {
    double dev = 0.0;
    const cplx ib(0.0, ibeta);
    const Matrix irho = ienv.rho();
    for (int r = 0; r < 2; ++r) {
      Matrix A = random_matrix(D, rng), B = random_matrix(D, rng);
      Matrix LbarA = L_apply(A, igrid, io, ienv, WhichL::adjoint);
      Matrix LB = L_apply(B, igrid, io, ienv, WhichL::forward);
      const cplx lhs =
          (commute(LbarA, B) * irho).trace() - (commute(A, LB) * irho).trace();
      Matrix LLrevB = L_apply(L_apply(B, igrid, io, ienv, WhichL::forward,
                                      LPart::reversible),
                              igrid, io, ienv, WhichL::forward);
      Matrix LrevLB = L_apply(LB, igrid, io, ienv, WhichL::forward, LPart::reversible);
      const cplx rhs = ib * canonical_corr(A, LLrevB - LrevLB, ienv);
      dev = std::max(dev, rel_dev(lhs, rhs));
    }
    rep.add("detailed_balance_defect", dev, 1e-10);
  }

  // trace preservation and hermiticity of the full generator
  {
    double dev_tr = 0.0, dev_h = 0.0;
    for (int r = 0; r < 3; ++r) {
      Matrix X = random_hermitian(D, rng);
      Matrix LX = L_apply(X, igrid, io, ienv, WhichL::forward);
      dev_tr = std::max(dev_tr, std::abs(ienv.apply(LX).trace()) /
                                    std::max(1.0, LX.norm()));
      dev_h = std::max(dev_h, (LX - Matrix(LX.adjoint())).norm() /
                                  std::max(1.0, LX.norm()));
    }
    rep.add("trace_preservation", dev_tr, 1e-10);
    rep.add("hermiticity_preservation", dev_h, 1e-10);
  }

  // fluctuation-dissipation at gamma = 0: <[e^{Lbar t}A, B]> = i beta (Lbar e^{Lbar t}A; B)
  if (D <= 20) {
    ModeGrid rgrid = igrid;
    rgrid.params.gamma = 0.0;
    FockOps ro = build_ops(rgrid, opt.z_value);
    KEnv renv = make_kenv(ro.H, ibeta);
    Matrix Ls = superop_matrix(
        [&](const Matrix& X) { return L_apply(X, rgrid, ro, renv, WhichL::adjoint); },
        D);  // interacting equilibrium is not number-diagonal: column assembly
    Matrix A = random_matrix(D, rng), B = random_matrix(D, rng);
    const Matrix rrho = renv.rho();
    double dev = 0.0;
    for (double t : {0.2, 0.7}) {
      Matrix P = (Ls * t).exp();
      Eigen::VectorXcd v = P * Eigen::Map<Eigen::VectorXcd>(A.data(), D * D);
      Matrix At = Eigen::Map<Matrix>(v.data(), D, D);
      const cplx lhs = (commute(At, B) * rrho).trace();
      Matrix LAt = L_apply(At, rgrid, ro, renv, WhichL::adjoint);
      const cplx rhs = cplx(0.0, ibeta) * canonical_corr(LAt, B, renv);
      dev = std::max(dev, rel_dev(lhs, rhs));
    }
    rep.add("fluctuation_dissipation_reversible", dev, 1e-8);
  }

  // dissipative spectrum
  if (opt.spectrum) {
    SparseM Ls = L_superop_sparse(free_grid, fo, fenv, WhichL::forward);
    if (D * D <= opt.spectrum_max_dim) {
      Eigen::ComplexEigenSolver<Matrix> es(Matrix(Ls), false);
      double max_re = -1e300;
      for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        max_re = std::max(max_re, es.eigenvalues()[i].real());
      rep.add("dissipative_spectrum",
              std::max(0.0, max_re) / std::max(1.0, Matrix(Ls).norm()), 1e-10);
    } else {
      // Orthonormalize in the Kubo-Mori metric, where the irreversible part is
      // self-adjoint and the reversible part anti-self-adjoint; max Re of the
      // spectrum is bounded by the top eigenvalue of the symmetric part,
      // estimated by Lanczos iteration.
      Eigen::VectorXd halfw(D * D);
      for (int b = 0; b < D; ++b)
        for (int a = 0; a < D; ++a)
          halfw[a + b * D] = 0.5 * std::log(log_mean(fenv.logp[a], fenv.logp[b]));
      SparseM Lt = Ls;
      for (int c = 0; c < Lt.outerSize(); ++c)
        for (SparseM::InnerIterator it(Lt, c); it; ++it)
          it.valueRef() *= std::exp(halfw[it.row()] - halfw[it.col()]);
      SparseM Hs = 0.5 * (SparseM(Lt) + SparseM(Lt.adjoint()));
      double scale = 0.0;
      for (int c = 0; c < Hs.outerSize(); ++c)
        for (SparseM::InnerIterator it(Hs, c); it; ++it)
          scale = std::max(scale, std::abs(it.value()));
      // Lanczos with full reorthogonalization for the top Ritz value
      std::mt19937_64 lrng(opt.seed + 99);
      std::normal_distribution<double> g;
      const int n = D * D, iters = std::min(140, n);
      Eigen::VectorXcd v(n);
      for (int i = 0; i < n; ++i) v[i] = cplx(g(lrng), g(lrng));
      v.normalize();
      std::vector<Eigen::VectorXcd> basis{v};
      Eigen::VectorXd alpha(iters), betas(iters);
      Eigen::VectorXcd w;
      int m = 0;
      for (; m < iters; ++m) {
        w = Hs * basis.back();
        alpha[m] = w.dot(basis.back()).real();
        for (const auto& q : basis) w -= q.dot(w) * q;
        for (const auto& q : basis) w -= q.dot(w) * q;
        betas[m] = w.norm();
        if (betas[m] < 1e-13 * std::max(1.0, scale)) break;
        basis.push_back(w / betas[m]);
      }
      Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, m + 1);
      for (int i = 0; i <= m; ++i) {
        T(i, i) = alpha[std::min(i, iters - 1)];
        if (i < m) T(i, i + 1) = T(i + 1, i) = betas[i];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tes(T);
      const double bound = tes.eigenvalues().maxCoeff();
      rep.add("dissipative_spectrum_bound", std::max(0.0, bound) / std::max(1.0, scale),
              1e-10);
    }
  }

  return rep;
}

ModeGrid standard_grid_1mode() {
  ModeGrid g;
  g.modes = {{0.75, 1}};
  g.cutoff = 8;
  g.params.d = 1.0;
  g.params.m = 1.0;
  g.params.beta = 6.4;  // beta*omega = 8 at omega = 1.25
  g.params.gamma = 0.3;
  return g;
}

ModeGrid standard_grid_2mode() {
  ModeGrid g;
  const double k = 0.8;
  g.modes = {{k, 1}, {k, -1}};
  g.cutoff = 6;
  g.params.d = 1.0;
  g.params.m = 1.0;
  g.params.beta = 8.0 / std::sqrt(k * k + 1.0);
  g.params.gamma = 0.25;
  return g;
}

VerifyReport standard_verification(std::uint64_t seed) {
  VerifyOptions opt;
  opt.seed = seed;

  VerifyReport rep;
  {
    VerifyReport r1 = verify_identities(standard_grid_1mode(), opt);
    for (auto& c : r1.checks) rep.checks.push_back({"grid1." + c.name, c.tolerance,
                                                    c.deviation, c.pass});
    for (auto& w : r1.warnings) rep.warnings.push_back(w);
  }
  {
    VerifyReport r2 = verify_identities(standard_grid_2mode(), opt);
    for (auto& c : r2.checks) rep.checks.push_back({"grid2." + c.name, c.tolerance,
                                                    c.deviation, c.pass});
    for (auto& w : r2.warnings) rep.warnings.push_back(w);
  }

  // symbolic commutator identities (exact canonical equality)
  for (const auto& c : ops::appendixC_identities())
    rep.add("symbolic." + c.name, c.pass ? 0.0 : 1.0, 0.5);

  // Wick averages against dense traces on the 2-mode grid
  {
    ModeGrid grid = standard_grid_2mode();
    grid.params.lambda = 0.0;
    FockOps fo = build_ops(grid, 0.0);
    KEnv env = make_free_kenv(grid, fo);
    std::map<std::string, int> ext{{"m0", 1}, {"m1", -1}};
    std::mt19937_64 rng(seed + 1);
    std::uniform_int_distribution<int> pick(0, 3);
    std::uniform_int_distribution<int> len(1, 3);
    double dev = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
      const int pairs = len(rng);
      ops::OpString s;
      Matrix dense = Matrix::Identity(fo.dim, fo.dim);
      for (int i = 0; i < 2 * pairs; ++i) {
        const int w = pick(rng);
        const bool dag = w < 2;
        const std::string name = (w % 2) ? "m1" : "m0";
        s.push_back(dag ? ops::cr(name) : ops::an(name));
        const std::size_t mi = (w % 2) ? 1 : 0;
        dense = dense * (dag ? fo.ad[mi] : fo.a[mi]);
      }
      const cplx lhs = eval_scalar_on_grid(ops::wick_average(s, ops::Coeff{}, {}),
                                           grid, 0.0, ext);
      const cplx rhs = trace_avg(dense, env);
      dev = std::max(dev, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
    rep.add("wick_vs_dense_trace", dev, 1e-8);
  }

  return rep;
}

}  // namespace phi4diss::fock
