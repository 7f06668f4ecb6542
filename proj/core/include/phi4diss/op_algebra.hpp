#ifndef PHI4DISS_OP_ALGEBRA_HPP
#define PHI4DISS_OP_ALGEBRA_HPP

#include <boost/rational.hpp>

#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phi4diss/kernels.hpp"
#include "phi4diss/thermal_params.hpp"

namespace phi4diss::ops {

using Rational = boost::rational<long long>;

/// Exact Gaussian-rational prefactor.
struct QRat {
  Rational re{0}, im{0};

  static QRat one() { return {Rational(1), Rational(0)}; }
  static QRat real(long long n, long long d = 1) { return {Rational(n, d), Rational(0)}; }
  static QRat imag(long long n, long long d = 1) { return {Rational(0), Rational(n, d)}; }

  bool is_zero() const { return re.numerator() == 0 && im.numerator() == 0; }
  QRat operator+(const QRat& o) const { return {re + o.re, im + o.im}; }
  QRat operator-(const QRat& o) const { return {re - o.re, im - o.im}; }
  QRat operator*(const QRat& o) const {
    return {re * o.re - im * o.im, re * o.im + im * o.re};
  }
  QRat operator-() const { return {-re, -im}; }
  bool operator==(const QRat& o) const = default;
  std::complex<double> to_complex() const {
    return {boost::rational_cast<double>(re), boost::rational_cast<double>(im)};
  }
};

/// Symbolic momentum label. Frequencies depend only on the name (omega is even
/// in k), the negation flag matters for operators and delta constraints.
struct Label {
  std::string name;
  bool negated = false;
  bool bound = false;

  auto sort_key() const { return std::tie(name, negated); }
  bool operator==(const Label& o) const {
    return name == o.name && negated == o.negated;
  }
};

/// One creation/annihilation operator.
struct Op {
  bool creator = false;
  Label label;
};
inline Op cr(std::string name, bool neg = false) { return {true, {std::move(name), neg, false}}; }
inline Op an(std::string name, bool neg = false) { return {false, {std::move(name), neg, false}}; }

using OpString = std::vector<Op>;

/// Signed sum of label frequencies: sum_i coeff_i * omega_{name_i}.
/// Kept sorted by name with nonzero coefficients.
struct FreqSum {
  std::vector<std::pair<std::string, int>> terms;

  void add(const std::string& name, int c);
  bool empty() const { return terms.empty(); }
  auto operator<=>(const FreqSum&) const = default;
};

/// Momentum conservation constraint: sum_i coeff_i * k_{name_i} = 0.
struct Delta {
  std::vector<std::pair<std::string, int>> terms;

  void add(const std::string& name, int c);
  void canonicalize_sign();
  bool empty() const { return terms.empty(); }
  auto operator<=>(const Delta&) const = default;
};

/// Multiset of creator/annihilator label names, the payload of decay-rate and
/// resolvent factors.
struct Signature {
  std::vector<std::string> creators, annihilators;
  auto operator<=>(const Signature&) const = default;
};

/// Opaque multiplicative scalar factor with exact structural identity.
struct Factor {
  enum class Kind {
    omega_tilde,     ///< tilde-omega_{|k|}; half-integer powers
    omega,           ///< (sum of frequencies)^pow
    w_fn,            ///< w(freq)
    exp_mb,          ///< exp(-beta * freq)
    bose,            ///< 1/(e^{beta freq} - 1)
    gamma_rate,      ///< gamma |k|^4
    beta_pow,        ///< beta
    gamma_A,         ///< decay rate of a signature
    resolvent,       ///< i omega_ext + sign * i omega_sig + gamma_sig
    gamma_wt_exact,  ///< finite-T contraction weight of Gamma_A
    gamma_wt_lowt,   ///< low-T contraction weight of Gamma_A
    delta_zero,      ///< delta(0) from a fully cancelled constraint
  };

  Kind kind{};
  int pow2 = 2;  ///< power times two (omega_tilde uses odd values)
  std::string label;
  FreqSum freq;
  Signature sig;
  int sign = 0;  ///< resolvent only

  auto key() const { return std::tie(kind, label, freq, sig, sign); }
  bool same_base(const Factor& o) const { return key() == o.key(); }
  bool operator<(const Factor& o) const { return key() < o.key(); }
};

Factor f_omega_tilde(const std::string& name, int pow2);
Factor f_omega(FreqSum freq, int pow = 1);
Factor f_w(FreqSum freq, int pow = 1);
Factor f_exp_mb(FreqSum freq);
Factor f_bose(FreqSum freq);
Factor f_gamma_rate(const std::string& name);
Factor f_beta(int pow);
Factor f_gamma_A(Signature sig);
Factor f_resolvent(Signature sig, int sign, int pow = -1);
Factor f_delta_zero();

/// Exact scalar coefficient: Gaussian-rational prefactor, powers of lambda and
/// z, powers of the volume factor (2pi)^{-d}, a bag of formal factors, and the
/// list of bound integration variables.
struct Coeff {
  QRat pref = QRat::one();
  int lambda_pow = 0;
  int z_pow = 0;
  int vol_pow = 0;
  std::vector<Factor> factors;
  std::vector<std::string> bound;

  void push(Factor f);
  Coeff operator*(const Coeff& o) const;
};

/// Normal-ordered product of creation/annihilation operators with momentum
/// constraints and an exact coefficient.
struct Term {
  Coeff coeff;
  std::vector<Label> creators;
  std::vector<Label> annihilators;
  std::vector<Delta> deltas;

  bool is_identity_op() const { return creators.empty() && annihilators.empty(); }
  std::size_t op_count() const { return creators.size() + annihilators.size(); }
};

/// Sum of normal-ordered terms; canonical form merges structurally identical
/// terms and drops zero coefficients.
class OperatorSum {
 public:
  OperatorSum() = default;
  explicit OperatorSum(Term t) { add(std::move(t)); }

  void add(Term t);
  void add(const OperatorSum& o);
  const std::vector<Term>& terms() const;
  bool is_zero() const { return by_key_.empty(); }
  std::size_t size() const { return by_key_.size(); }

  OperatorSum operator+(const OperatorSum& o) const;
  OperatorSum operator-(const OperatorSum& o) const;
  OperatorSum operator*(const OperatorSum& o) const;
  OperatorSum scaled(const QRat& q) const;

  /// Line-oriented text form, one canonical term per line.
  std::string to_text() const;

 private:
  std::map<std::string, Term> by_key_;
  mutable std::vector<Term> cache_;
  mutable bool dirty_ = false;
};

/// Canonical form of a single term; nullopt when the term is structurally zero.
std::optional<Term> canonicalize(Term t);

/// Normal-orders a general operator string against the bosonic commutation
/// relation, emitting one delta constraint per contraction.
OperatorSum normal_order(const OpString& ops, const Coeff& coeff,
                         const std::vector<Delta>& deltas);

OperatorSum commutator(const OperatorSum& a, const OperatorSum& b);

/// Free Hamiltonian: Int omega_k adag_k a_k.
OperatorSum build_H0();
/// Normal-ordered quartic interaction plus the z counterterm block.
OperatorSum build_H1();
/// Only the z block of H1 (weights lambda z).
OperatorSum build_H1_zblock();
/// Single creation/annihilation operators as sums.
OperatorSum single_op(const Op& op);

/// Numeric label bindings for coefficient evaluation.
struct EvalContext {
  const ThermalParams* params = nullptr;
  double omega_ext = 0.0;    ///< external frequency of resolvent factors
  double z_value = 0.0;      ///< numeric value of the z counterterm
  bool grid_mode = false;    ///< volume factors and delta(0) evaluate to 1
  std::map<std::string, double> magnitudes;

  double magnitude(const std::string& name) const;
};

FreqSum omega_A_sum(const Term& t);
Signature signature_of(const Term& t);

/// Frequency omega_A of a term under a numeric binding.
double omega_A(const Term& t, const EvalContext& ctx);
/// Decay rate gamma_A of a signature under a numeric binding.
double gamma_A(const Signature& sig, const EvalContext& ctx);
double gamma_A(const Term& t, const EvalContext& ctx);

std::complex<double> eval_factor(const Factor& f, const EvalContext& ctx);
/// Evaluates a coefficient numerically; bound variables must already be bound
/// by the caller (grid sums do this by enumeration).
std::complex<double> eval_coeff(const Coeff& c, const EvalContext& ctx);

enum class GammaRegime { exact, low_temperature };

/// All contributions obtained by deleting one creator and one annihilator,
/// with the finite-temperature (or simplified low-T) weights.
OperatorSum Gamma_A_apply(const Term& t, GammaRegime regime = GammaRegime::exact);

/// Free evolution in compact form: L0 A = -(i omega_A + gamma_A) A + Gamma_A.
OperatorSum L0_apply(const Term& t);
OperatorSum L0_apply(const OperatorSum& s);

enum class ResolventDirection { forward, adjoint };

/// Resolvent reduction R0(omega) A = [A + R0 Gamma_A]/(i omega +- i omega_A + gamma_A),
/// fully expanded (the recursion strictly reduces the operator count).
OperatorSum R0_apply(const Term& t, ResolventDirection dir);
OperatorSum R0_apply(const OperatorSum& s, ResolventDirection dir);

/// (i omega - L0) in the composite form Denom(sig) * T - Gamma_T; cancels the
/// resolvent factors of R0_apply exactly.
OperatorSum apply_iw_minus_L0(const OperatorSum& s, ResolventDirection dir);

/// Finite-temperature Wick average of a general operator string: a sum over
/// complete pairings, one delta and one Bose-type factor per contraction.
OperatorSum wick_average(const OpString& ops, const Coeff& coeff,
                         const std::vector<Delta>& deltas);
OperatorSum wick_average(const Term& t);
OperatorSum wick_average(const OperatorSum& s);

/// Crossed part <AB> - <A><B>: the pairings with at least one contraction
/// between A and B.
OperatorSum wick_cross(const Term& a, const Term& b);

/// (A;B)^(0) = w(omega_B) <AB>^(0) and <[A,B]>^(0) = beta omega_B (A;B)^(0).
struct FreeCorrelations {
  OperatorSum canonical;   ///< (A;B)^(0)
  OperatorSum commutator;  ///< <[A,B]>^(0)
};
FreeCorrelations free_correlations(const Term& a, const Term& b);

/// First-order interacting average <A> = <A>^(0) - beta <<A; H1>>^(0), the
/// double-bracket keeping only cross contractions.
OperatorSum first_order_average(const Term& a, const OperatorSum& h1);

/// Machine verification of the displayed commutator identities.
struct IdentityCheck {
  std::string name;
  bool pass = false;
  std::string detail;  ///< first mismatching canonical term on failure
};
std::vector<IdentityCheck> appendixC_identities();

}  // namespace phi4diss::ops

#endif
