#include "phi4diss/op_algebra.hpp"

#include <algorithm>
#include <cassert>
#include <numbers>
#include <sstream>

namespace phi4diss::ops {

namespace {

thread_local unsigned long long fresh_counter = 0;
std::string fresh_name() { return "#" + std::to_string(fresh_counter++); }

void add_signed(std::vector<std::pair<std::string, int>>& v, const std::string& name,
                int c) {
  if (c == 0) return;
  for (auto it = v.begin(); it != v.end(); ++it) {
    if (it->first == name) {
      it->second += c;
      if (it->second == 0) v.erase(it);
      return;
    }
  }
  v.emplace_back(name, c);
  std::sort(v.begin(), v.end());
}

}  // namespace

void FreqSum::add(const std::string& name, int c) { add_signed(terms, name, c); }
void Delta::add(const std::string& name, int c) { add_signed(terms, name, c); }

void Delta::canonicalize_sign() {
  if (terms.empty()) return;
  std::vector<std::pair<std::string, int>> flipped = terms;
  for (auto& e : flipped) e.second = -e.second;
  if (flipped < terms) terms = std::move(flipped);
}

Factor f_omega_tilde(const std::string& name, int pow2) {
  Factor f;
  f.kind = Factor::Kind::omega_tilde;
  f.label = name;
  f.pow2 = pow2;
  return f;
}
Factor f_omega(FreqSum freq, int pow) {
  Factor f;
  f.kind = Factor::Kind::omega;
  f.freq = std::move(freq);
  f.pow2 = 2 * pow;
  return f;
}
Factor f_w(FreqSum freq, int pow) {
  Factor f;
  f.kind = Factor::Kind::w_fn;
  f.freq = std::move(freq);
  f.pow2 = 2 * pow;
  return f;
}
Factor f_exp_mb(FreqSum freq) {
  Factor f;
  f.kind = Factor::Kind::exp_mb;
  f.freq = std::move(freq);
  f.pow2 = 2;
  return f;
}
Factor f_bose(FreqSum freq) {
  Factor f;
  f.kind = Factor::Kind::bose;
  f.freq = std::move(freq);
  f.pow2 = 2;
  return f;
}
Factor f_gamma_rate(const std::string& name) {
  Factor f;
  f.kind = Factor::Kind::gamma_rate;
  f.label = name;
  f.pow2 = 2;
  return f;
}
Factor f_beta(int pow) {
  Factor f;
  f.kind = Factor::Kind::beta_pow;
  f.pow2 = 2 * pow;
  return f;
}
Factor f_gamma_A(Signature sig) {
  Factor f;
  f.kind = Factor::Kind::gamma_A;
  f.sig = std::move(sig);
  f.pow2 = 2;
  return f;
}
Factor f_resolvent(Signature sig, int sign, int pow) {
  Factor f;
  f.kind = Factor::Kind::resolvent;
  f.sig = std::move(sig);
  f.sign = sign;
  f.pow2 = 2 * pow;
  return f;
}
Factor f_delta_zero() {
  Factor f;
  f.kind = Factor::Kind::delta_zero;
  f.pow2 = 2;
  return f;
}

void Coeff::push(Factor f) {
  if (f.pow2 == 0) return;
  for (auto& g : factors) {
    if (g.same_base(f)) {
      g.pow2 += f.pow2;
      if (g.pow2 == 0) std::erase_if(factors, [&](const Factor& h) { return h.pow2 == 0; });
      return;
    }
  }
  factors.push_back(std::move(f));
}

Coeff Coeff::operator*(const Coeff& o) const {
  Coeff r = *this;
  r.pref = r.pref * o.pref;
  r.lambda_pow += o.lambda_pow;
  r.z_pow += o.z_pow;
  r.vol_pow += o.vol_pow;
  for (const auto& f : o.factors) r.push(f);
  r.bound.insert(r.bound.end(), o.bound.begin(), o.bound.end());
  return r;
}

// ---------------------------------------------------------------------------
// Substitution and canonical form
// ---------------------------------------------------------------------------

namespace {

void subst_freq(FreqSum& f, const std::string& from, const std::string& to) {
  std::vector<std::pair<std::string, int>> out;
  for (auto& [n, c] : f.terms) add_signed(out, n == from ? to : n, c);
  f.terms = std::move(out);
}

void subst_sig(Signature& s, const std::string& from, const std::string& to) {
  for (auto& n : s.creators)
    if (n == from) n = to;
  for (auto& n : s.annihilators)
    if (n == from) n = to;
  std::sort(s.creators.begin(), s.creators.end());
  std::sort(s.annihilators.begin(), s.annihilators.end());
}

/// Replace label `from` by sign * label `to` everywhere in the term.
void apply_subst(Term& t, const std::string& from, const std::string& to, int sign) {
  auto fix_label = [&](Label& l) {
    if (l.name != from) return;
    const int momentum = (l.negated ? -1 : 1) * sign;
    l.name = to;
    l.negated = momentum < 0;
  };
  for (auto& l : t.creators) fix_label(l);
  for (auto& l : t.annihilators) fix_label(l);
  for (auto& d : t.deltas) {
    std::vector<std::pair<std::string, int>> out;
    for (auto& [n, c] : d.terms)
      add_signed(out, n == from ? to : n, n == from ? c * sign : c);
    d.terms = std::move(out);
  }
  for (auto& f : t.coeff.factors) {
    if (f.label == from) f.label = to;
    subst_freq(f.freq, from, to);
    subst_sig(f.sig, from, to);
  }
}

/// Flip the sign convention of a bound label: k -> -k change of variables.
void flip_bound_sign(Term& t, const std::string& name) {
  for (auto& l : t.creators)
    if (l.name == name) l.negated = !l.negated;
  for (auto& l : t.annihilators)
    if (l.name == name) l.negated = !l.negated;
  for (auto& d : t.deltas)
    for (auto& [n, c] : d.terms)
      if (n == name) c = -c;
}

void sort_term_inplace(Term& t) {
  auto lab_less = [](const Label& a, const Label& b) { return a.sort_key() < b.sort_key(); };
  std::sort(t.creators.begin(), t.creators.end(), lab_less);
  std::sort(t.annihilators.begin(), t.annihilators.end(), lab_less);
  for (auto& d : t.deltas) d.canonicalize_sign();
  std::sort(t.deltas.begin(), t.deltas.end());
  std::sort(t.coeff.factors.begin(), t.coeff.factors.end(),
            [](const Factor& a, const Factor& b) { return a.key() < b.key(); });
  std::sort(t.coeff.bound.begin(), t.coeff.bound.end());
}

std::string render_rational(const Rational& r) {
  std::ostringstream os;
  os << r.numerator();
  if (r.denominator() != 1) os << "/" << r.denominator();
  return os.str();
}

std::string render_freq(const FreqSum& f) {
  std::ostringstream os;
  bool first = true;
  for (auto& [n, c] : f.terms) {
    if (c >= 0 && !first) os << "+";
    if (c == -1)
      os << "-";
    else if (c != 1)
      os << c << "*";
    os << n;
    first = false;
  }
  if (first) os << "0";
  return os.str();
}

std::string render_sig(const Signature& s) {
  std::ostringstream os;
  os << "cr:";
  for (auto& n : s.creators) os << n << ",";
  os << "an:";
  for (auto& n : s.annihilators) os << n << ",";
  return os.str();
}

std::string render_pow2(int pow2) {
  std::ostringstream os;
  if (pow2 == 2) return "";
  os << "^";
  if (pow2 % 2 == 0)
    os << pow2 / 2;
  else
    os << pow2 << "/2";
  return os.str();
}

std::string render_factor(const Factor& f) {
  std::ostringstream os;
  switch (f.kind) {
    case Factor::Kind::omega_tilde: os << "ot[" << f.label << "]"; break;
    case Factor::Kind::omega: os << "om(" << render_freq(f.freq) << ")"; break;
    case Factor::Kind::w_fn: os << "w(" << render_freq(f.freq) << ")"; break;
    case Factor::Kind::exp_mb: os << "emb(" << render_freq(f.freq) << ")"; break;
    case Factor::Kind::bose: os << "n(" << render_freq(f.freq) << ")"; break;
    case Factor::Kind::gamma_rate: os << "gam[" << f.label << "]"; break;
    case Factor::Kind::beta_pow: os << "beta"; break;
    case Factor::Kind::gamma_A: os << "gA(" << render_sig(f.sig) << ")"; break;
    case Factor::Kind::resolvent:
      os << "res" << (f.sign > 0 ? "+" : "-") << "(" << render_sig(f.sig) << ")";
      break;
    case Factor::Kind::gamma_wt_exact:
      os << "Gwt[" << f.label << "](" << render_freq(f.freq) << ")";
      break;
    case Factor::Kind::gamma_wt_lowt:
      os << "GwtL[" << f.label << "](" << render_freq(f.freq) << ")";
      break;
    case Factor::Kind::delta_zero: os << "d0"; break;
  }
  os << render_pow2(f.pow2);
  return os.str();
}

std::string render_term(const Term& t, bool with_pref) {
  std::ostringstream os;
  if (with_pref) {
    if (t.coeff.pref.im.numerator() == 0)
      os << render_rational(t.coeff.pref.re);
    else
      os << "(" << render_rational(t.coeff.pref.re) << ","
         << render_rational(t.coeff.pref.im) << ")";
    os << " ";
  }
  if (t.coeff.lambda_pow != 0) os << "L^" << t.coeff.lambda_pow << " ";
  if (t.coeff.z_pow != 0) os << "z^" << t.coeff.z_pow << " ";
  if (t.coeff.vol_pow != 0) os << "V^" << t.coeff.vol_pow << " ";
  if (!t.coeff.bound.empty()) {
    os << "int{";
    for (auto& b : t.coeff.bound) os << b << ",";
    os << "} ";
  }
  for (auto& f : t.coeff.factors) os << render_factor(f) << " ";
  os << "|";
  for (auto& l : t.creators) os << " " << (l.negated ? "-" : "") << l.name;
  os << " |";
  for (auto& l : t.annihilators) os << " " << (l.negated ? "-" : "") << l.name;
  os << " |";
  for (auto& d : t.deltas) os << " d(" << render_freq(FreqSum{d.terms}) << ")";
  return os.str();
}

bool appears(const Term& t, const std::string& name) {
  for (auto& l : t.creators)
    if (l.name == name) return true;
  for (auto& l : t.annihilators)
    if (l.name == name) return true;
  for (auto& d : t.deltas)
    for (auto& [n, c] : d.terms)
      if (n == name) return true;
  for (auto& f : t.coeff.factors) {
    if (f.label == name) return true;
    for (auto& [n, c] : f.freq.terms)
      if (n == name) return true;
    for (auto& n : f.sig.creators)
      if (n == name) return true;
    for (auto& n : f.sig.annihilators)
      if (n == name) return true;
  }
  return false;
}

/// Resolve delta constraints: eliminate bound variables against two-entry
/// deltas, unify externally constrained labels onto a representative.
void resolve_deltas(Term& t) {
  // normalize entries first
  for (auto& d : t.deltas) {
    std::vector<std::pair<std::string, int>> out;
    for (auto& [n, c] : d.terms) add_signed(out, n, c);
    d.terms = std::move(out);
  }
  auto is_bound = [&](const std::string& n) {
    return std::find(t.coeff.bound.begin(), t.coeff.bound.end(), n) !=
           t.coeff.bound.end();
  };

  std::vector<Delta> kept;
  bool changed = true;
  while (changed) {
    changed = false;
    // drop empty deltas as delta(0) factors
    for (auto it = t.deltas.begin(); it != t.deltas.end();) {
      if (it->empty()) {
        t.coeff.push(f_delta_zero());
        it = t.deltas.erase(it);
      } else {
        ++it;
      }
    }
    for (std::size_t i = 0; i < t.deltas.size(); ++i) {
      const Delta& d = t.deltas[i];
      if (d.terms.size() != 2) continue;
      const auto [n1, c1] = d.terms[0];
      const auto [n2, c2] = d.terms[1];
      if (std::abs(c1) != 1 || std::abs(c2) != 1) continue;
      const int sign = -c1 * c2;  // c1 k1 + c2 k2 = 0  =>  k2 = sign * k1
      if (is_bound(n2) || is_bound(n1)) {
        // eliminate a bound label (prefer the larger name when both bound)
        std::string from = n2, to = n1;
        if (!is_bound(n2) || (is_bound(n1) && n1 > n2)) std::swap(from, to);
        t.deltas.erase(t.deltas.begin() + static_cast<long>(i));
        std::erase(t.coeff.bound, from);
        apply_subst(t, from, to, sign);
        for (auto& kd : kept) {
          std::vector<std::pair<std::string, int>> out;
          for (auto& [n, c] : kd.terms)
            add_signed(out, n == from ? to : n, n == from ? c * sign : c);
          kd.terms = std::move(out);
        }
        changed = true;
        break;
      }
      // both external: keep the constraint, canonicalize references
      const std::string to = std::min(n1, n2);
      const std::string from = (to == n1) ? n2 : n1;
      Delta keep = d;
      t.deltas.erase(t.deltas.begin() + static_cast<long>(i));
      apply_subst(t, from, to, sign);
      for (auto& kd : kept) {
        std::vector<std::pair<std::string, int>> out;
        for (auto& [n, c] : kd.terms)
          add_signed(out, n == from ? to : n, n == from ? c * sign : c);
        kd.terms = std::move(out);
      }
      kept.push_back(std::move(keep));
      changed = true;
      break;
    }
  }
  for (auto& kd : kept) t.deltas.push_back(std::move(kd));
}

/// Structural zero / trivial-factor cleanup; returns false when the term is zero.
bool simplify_factors(Term& t) {
  std::vector<Factor> out;
  for (auto& f : t.coeff.factors) {
    switch (f.kind) {
      case Factor::Kind::w_fn:
      case Factor::Kind::exp_mb:
        if (f.freq.empty()) continue;  // w(0) = 1, e^0 = 1
        break;
      case Factor::Kind::omega:
        if (f.freq.empty()) return false;  // omega_A = 0 annihilates the term
        break;
      case Factor::Kind::gamma_A:
        if (f.sig.creators.empty() && f.sig.annihilators.empty()) return false;
        break;
      default:
        break;
    }
    if (f.pow2 != 0) out.push_back(f);
  }
  t.coeff.factors = std::move(out);
  return !t.coeff.pref.is_zero();
}

}  // namespace

std::optional<Term> canonicalize(Term t) {
  if (t.coeff.pref.is_zero()) return std::nullopt;
  resolve_deltas(t);
  if (!simplify_factors(t)) return std::nullopt;

  // keep only bound names that still occur
  std::erase_if(t.coeff.bound, [&](const std::string& b) { return !appears(t, b); });

  const std::size_t n = t.coeff.bound.size();
  if (n == 0) {
    sort_term_inplace(t);
    return t;
  }

  // canonical renaming of integration variables: try all assignments, pick the
  // lexicographically smallest rendering
  std::vector<std::string> vars = t.coeff.bound;
  std::sort(vars.begin(), vars.end());
  std::vector<int> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = static_cast<int>(i);

  std::optional<Term> best;
  std::string best_key;
  do {
    Term cand = t;
    // two-step rename through temporaries to avoid collisions
    for (std::size_t i = 0; i < n; ++i)
      apply_subst(cand, vars[i], "@tmp" + std::to_string(i), 1);
    cand.coeff.bound.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const std::string canon = "%" + std::to_string(perm[i] + 1);
      apply_subst(cand, "@tmp" + std::to_string(i), canon, 1);
      cand.coeff.bound.push_back(canon);
    }
    // sign convention per variable: majority of operator occurrences
    // un-negated; on a tie both signs are tried
    std::vector<std::string> tied;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string v = "%" + std::to_string(i + 1);
      int neg = 0, plain = 0;
      for (auto& l : cand.creators)
        if (l.name == v) (l.negated ? neg : plain)++;
      for (auto& l : cand.annihilators)
        if (l.name == v) (l.negated ? neg : plain)++;
      if (neg > plain)
        flip_bound_sign(cand, v);
      else if (neg == plain && neg > 0)
        tied.push_back(v);
      else if (neg == 0 && plain == 0)
        tied.push_back(v);  // only deltas reference it
    }
    const std::size_t combos = 1u << std::min<std::size_t>(tied.size(), 10);
    for (std::size_t mask = 0; mask < combos; ++mask) {
      Term c2 = cand;
      for (std::size_t b = 0; b < tied.size() && b < 10; ++b)
        if (mask & (1u << b)) flip_bound_sign(c2, tied[b]);
      sort_term_inplace(c2);
      std::string key = render_term(c2, false);
      if (!best || key < best_key) {
        best = c2;
        best_key = std::move(key);
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  return best;
}

// ---------------------------------------------------------------------------
// OperatorSum
// ---------------------------------------------------------------------------

void OperatorSum::add(Term t) {
  auto canon = canonicalize(std::move(t));
  if (!canon) return;
  const std::string key = render_term(*canon, false);
  auto it = by_key_.find(key);
  if (it == by_key_.end()) {
    by_key_.emplace(key, std::move(*canon));
  } else {
    it->second.coeff.pref = it->second.coeff.pref + canon->coeff.pref;
    if (it->second.coeff.pref.is_zero()) by_key_.erase(it);
  }
  dirty_ = true;
}

void OperatorSum::add(const OperatorSum& o) {
  for (const auto& [k, t] : o.by_key_) {
    auto it = by_key_.find(k);
    if (it == by_key_.end()) {
      by_key_.emplace(k, t);
    } else {
      it->second.coeff.pref = it->second.coeff.pref + t.coeff.pref;
      if (it->second.coeff.pref.is_zero()) by_key_.erase(it);
    }
  }
  dirty_ = true;
}

const std::vector<Term>& OperatorSum::terms() const {
  if (dirty_) {
    cache_.clear();
    cache_.reserve(by_key_.size());
    for (const auto& [k, t] : by_key_) cache_.push_back(t);
    dirty_ = false;
  }
  return cache_;
}

OperatorSum OperatorSum::operator+(const OperatorSum& o) const {
  OperatorSum r = *this;
  r.add(o);
  return r;
}

OperatorSum OperatorSum::operator-(const OperatorSum& o) const {
  OperatorSum r = *this;
  r.add(o.scaled(QRat::real(-1)));
  return r;
}

OperatorSum OperatorSum::scaled(const QRat& q) const {
  OperatorSum r;
  if (q.is_zero()) return r;
  for (const auto& [k, t] : by_key_) {
    Term s = t;
    s.coeff.pref = s.coeff.pref * q;
    r.by_key_.emplace(k, std::move(s));
  }
  r.dirty_ = true;
  return r;
}

std::string OperatorSum::to_text() const {
  std::ostringstream os;
  for (const auto& [k, t] : by_key_) os << render_term(t, true) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Normal ordering and products
// ---------------------------------------------------------------------------

OperatorSum normal_order(const OpString& ops, const Coeff& coeff,
                         const std::vector<Delta>& deltas) {
  OperatorSum out;
  struct Item {
    OpString ops;
    std::vector<Delta> extra;
  };
  std::vector<Item> work{{ops, {}}};
  while (!work.empty()) {
    Item it = std::move(work.back());
    work.pop_back();
    std::size_t i = 0;
    bool found = false;
    for (; i + 1 < it.ops.size(); ++i) {
      if (!it.ops[i].creator && it.ops[i + 1].creator) {
        found = true;
        break;
      }
    }
    if (!found) {
      Term t;
      t.coeff = coeff;
      for (auto& o : it.ops) (o.creator ? t.creators : t.annihilators).push_back(o.label);
      t.deltas = deltas;
      for (auto& d : it.extra) t.deltas.push_back(d);
      out.add(std::move(t));
      continue;
    }
    // swap branch
    Item swapped = it;
    std::swap(swapped.ops[i], swapped.ops[i + 1]);
    work.push_back(std::move(swapped));
    // contraction branch: [a_p, adag_q] = delta(p - q)
    Item contracted;
    contracted.extra = it.extra;
    const Label& la = it.ops[i].label;
    const Label& lc = it.ops[i + 1].label;
    Delta d;
    d.add(la.name, la.negated ? -1 : 1);
    d.add(lc.name, lc.negated ? 1 : -1);
    contracted.extra.push_back(std::move(d));
    contracted.ops.reserve(it.ops.size() - 2);
    for (std::size_t j = 0; j < it.ops.size(); ++j)
      if (j != i && j != i + 1) contracted.ops.push_back(it.ops[j]);
    work.push_back(std::move(contracted));
  }
  return out;
}

namespace {

/// Freshens the bound variables of a term so products cannot capture them.
Term freshen_bound(Term t) {
  for (auto& b : t.coeff.bound) {
    const std::string nb = fresh_name();
    apply_subst(t, b, nb, 1);
    b = nb;
  }
  return t;
}

OpString term_ops(const Term& t) {
  OpString s;
  for (auto& l : t.creators) s.push_back({true, l});
  for (auto& l : t.annihilators) s.push_back({false, l});
  return s;
}

OperatorSum multiply_terms(const Term& a, const Term& b_in) {
  Term b = freshen_bound(b_in);
  Coeff c = a.coeff * b.coeff;
  std::vector<Delta> deltas = a.deltas;
  for (auto& d : b.deltas) deltas.push_back(d);
  OpString s = term_ops(a);
  for (auto& o : term_ops(b)) s.push_back(o);
  return normal_order(s, c, deltas);
}

}  // namespace

OperatorSum OperatorSum::operator*(const OperatorSum& o) const {
  OperatorSum r;
  for (const auto& a : terms())
    for (const auto& b : o.terms()) r.add(multiply_terms(a, b));
  return r;
}

OperatorSum commutator(const OperatorSum& a, const OperatorSum& b) {
  return a * b - b * a;
}

// ---------------------------------------------------------------------------
// Hamiltonian builders
// ---------------------------------------------------------------------------

OperatorSum build_H0() {
  Term t;
  t.coeff.bound = {"k"};
  FreqSum f;
  f.add("k", 1);
  t.coeff.push(f_omega(f, 1));
  t.creators = {{"k", false, true}};
  t.annihilators = {{"k", false, true}};
  return OperatorSum(std::move(t));
}

OperatorSum build_H1_zblock() {
  OperatorSum s;
  auto base = [] {
    Term t;
    t.coeff.pref = QRat::real(1, 2);
    t.coeff.lambda_pow = 1;
    t.coeff.z_pow = 1;
    t.coeff.bound = {"k"};
    t.coeff.push(f_omega_tilde("k", -2));
    return t;
  };
  Term t1 = base();  // a_k a_{-k}
  t1.annihilators = {{"k", false, true}, {"k", true, true}};
  s.add(std::move(t1));
  Term t2 = base();  // 2 adag_k a_k
  t2.coeff.pref = QRat::real(1);
  t2.creators = {{"k", false, true}};
  t2.annihilators = {{"k", false, true}};
  s.add(std::move(t2));
  Term t3 = base();  // adag_k adag_{-k}
  t3.creators = {{"k", false, true}, {"k", true, true}};
  s.add(std::move(t3));
  return s;
}

OperatorSum build_H1() {
  OperatorSum s = build_H1_zblock();
  static const long long weights[5] = {1, 4, 6, 4, 1};
  const std::string names[4] = {"k1", "k2", "k3", "k4"};
  for (int ncr = 0; ncr <= 4; ++ncr) {
    Term t;
    t.coeff.pref = QRat{Rational(weights[ncr], 96), Rational(0)};
    t.coeff.lambda_pow = 1;
    t.coeff.vol_pow = 1;
    t.coeff.bound = {names[0], names[1], names[2], names[3]};
    Delta d;
    for (auto& n : t.coeff.bound) {
      t.coeff.push(f_omega_tilde(n, -1));
      d.add(n, 1);
    }
    t.deltas.push_back(std::move(d));
    for (int j = 0; j < ncr; ++j) t.creators.push_back({names[j], false, true});
    for (int j = ncr; j < 4; ++j) t.annihilators.push_back({names[j], true, true});
    s.add(std::move(t));
  }
  return s;
}

OperatorSum single_op(const Op& op) {
  Term t;
  (op.creator ? t.creators : t.annihilators).push_back(op.label);
  return OperatorSum(std::move(t));
}

// ---------------------------------------------------------------------------
// Numeric evaluation
// ---------------------------------------------------------------------------

double EvalContext::magnitude(const std::string& name) const {
  auto it = magnitudes.find(name);
  if (it == magnitudes.end())
    throw UnboundLabelError("no numeric binding for momentum label '" + name + "'");
  return it->second;
}

FreqSum omega_A_sum(const Term& t) {
  FreqSum f;
  for (auto& l : t.creators) f.add(l.name, 1);
  for (auto& l : t.annihilators) f.add(l.name, -1);
  return f;
}

Signature signature_of(const Term& t) {
  Signature s;
  for (auto& l : t.creators) s.creators.push_back(l.name);
  for (auto& l : t.annihilators) s.annihilators.push_back(l.name);
  std::sort(s.creators.begin(), s.creators.end());
  std::sort(s.annihilators.begin(), s.annihilators.end());
  return s;
}

namespace {

double eval_freq(const FreqSum& f, const EvalContext& ctx) {
  double v = 0.0;
  for (auto& [n, c] : f.terms) v += c * ctx.params->omega(ctx.magnitude(n));
  return v;
}

}  // namespace

double omega_A(const Term& t, const EvalContext& ctx) {
  return eval_freq(omega_A_sum(t), ctx);
}

double gamma_A(const Signature& sig, const EvalContext& ctx) {
  const ThermalParams& p = *ctx.params;
  double wA = 0.0;
  for (auto& n : sig.creators) wA += p.omega(ctx.magnitude(n));
  for (auto& n : sig.annihilators) wA -= p.omega(ctx.magnitude(n));
  double g = 0.0;
  for (auto& n : sig.creators) {
    const double k = ctx.magnitude(n), wk = p.omega(k);
    g += p.gamma_k(k) * W_of(wk, wA - wk, p.beta);
  }
  for (auto& n : sig.annihilators) {
    const double k = ctx.magnitude(n), wk = p.omega(k);
    g += p.gamma_k(k) * W_of(-wk, wA + wk, p.beta);
  }
  return g;
}

double gamma_A(const Term& t, const EvalContext& ctx) {
  return gamma_A(signature_of(t), ctx);
}

std::complex<double> eval_factor(const Factor& f, const EvalContext& ctx) {
  const ThermalParams& p = *ctx.params;
  const double half_pow = 0.5 * f.pow2;
  auto rpow = [&](double base) { return std::pow(base, half_pow); };
  switch (f.kind) {
    case Factor::Kind::omega_tilde:
      return rpow(p.omega_tilde(ctx.magnitude(f.label)));
    case Factor::Kind::omega:
      return rpow(eval_freq(f.freq, ctx));
    case Factor::Kind::w_fn:
      return rpow(w_of(eval_freq(f.freq, ctx), p.beta));
    case Factor::Kind::exp_mb:
      return rpow(std::exp(-p.beta * eval_freq(f.freq, ctx)));
    case Factor::Kind::bose: {
      const double x = p.beta * eval_freq(f.freq, ctx);
      if (std::abs(x) < 1e-14)
        throw PoleProximityError("Bose factor at zero frequency");
      return rpow(1.0 / std::expm1(x));
    }
    case Factor::Kind::gamma_rate:
      return rpow(p.gamma_k(ctx.magnitude(f.label)));
    case Factor::Kind::beta_pow:
      return rpow(p.beta);
    case Factor::Kind::gamma_A:
      return rpow(gamma_A(f.sig, ctx));
    case Factor::Kind::resolvent: {
      double wsig = 0.0;
      for (auto& n : f.sig.creators) wsig += p.omega(ctx.magnitude(n));
      for (auto& n : f.sig.annihilators) wsig -= p.omega(ctx.magnitude(n));
      const double g = gamma_A(f.sig, ctx);
      const std::complex<double> den(g, ctx.omega_ext + f.sign * wsig);
      if (std::abs(den) < 1e-12 * std::max(1.0, std::abs(ctx.omega_ext)))
        throw PoleProximityError("resolvent denominator at a real pole");
      std::complex<double> r(1.0, 0.0);
      const int steps = std::abs(f.pow2) / 2;
      for (int i = 0; i < steps; ++i) r *= den;
      return f.pow2 > 0 ? r : 1.0 / r;
    }
    case Factor::Kind::gamma_wt_exact: {
      const double k = ctx.magnitude(f.label);
      const double wk = p.omega(k), nu = eval_freq(f.freq, ctx);
      const double base = p.gamma_k(k) / (p.beta * wk) *
                          (w_of(nu + wk, p.beta) +
                           std::exp(-p.beta * wk) * w_of(nu - wk, p.beta)) /
                          w_of(nu, p.beta);
      return rpow(base);
    }
    case Factor::Kind::gamma_wt_lowt: {
      const double k = ctx.magnitude(f.label);
      const double wk = p.omega(k), nu = std::abs(eval_freq(f.freq, ctx));
      return rpow(p.gamma_k(k) * nu / (p.beta * wk * (wk + nu)));
    }
    case Factor::Kind::delta_zero:
      if (!ctx.grid_mode)
        throw UnboundLabelError("delta(0) factor outside grid evaluation");
      return 1.0;
  }
  return 0.0;
}

std::complex<double> eval_coeff(const Coeff& c, const EvalContext& ctx) {
  std::complex<double> v = c.pref.to_complex();
  const ThermalParams& p = *ctx.params;
  for (int i = 0; i < c.lambda_pow; ++i) v *= p.lambda;
  for (int i = 0; i < c.z_pow; ++i) v *= ctx.z_value;
  if (!ctx.grid_mode && c.vol_pow != 0)
    v *= std::pow(2.0 * std::numbers::pi, -p.d * c.vol_pow);
  for (const auto& f : c.factors) v *= eval_factor(f, ctx);
  return v;
}

// ---------------------------------------------------------------------------
// Free evolution: Gamma_A, L0, R0
// ---------------------------------------------------------------------------

namespace {

std::vector<Term> gamma_terms_raw(const Term& t, GammaRegime regime) {
  std::vector<Term> out;
  const FreqSum wA = omega_A_sum(t);
  for (std::size_t i = 0; i < t.creators.size(); ++i) {
    for (std::size_t j = 0; j < t.annihilators.size(); ++j) {
      Term nt = t;
      const Label cl = t.creators[i];
      const Label al = t.annihilators[j];
      nt.creators.erase(nt.creators.begin() + static_cast<long>(i));
      nt.annihilators.erase(nt.annihilators.begin() + static_cast<long>(j));
      Delta d;
      d.add(cl.name, cl.negated ? -1 : 1);
      d.add(al.name, al.negated ? 1 : -1);
      nt.deltas.push_back(std::move(d));
      Factor f;
      f.kind = regime == GammaRegime::exact ? Factor::Kind::gamma_wt_exact
                                            : Factor::Kind::gamma_wt_lowt;
      f.label = cl.name;
      f.freq = wA;
      f.pow2 = 2;
      nt.coeff.push(std::move(f));
      out.push_back(std::move(nt));
    }
  }
  return out;
}

}  // namespace

OperatorSum Gamma_A_apply(const Term& t, GammaRegime regime) {
  OperatorSum s;
  for (auto& g : gamma_terms_raw(t, regime)) s.add(std::move(g));
  return s;
}

OperatorSum L0_apply(const Term& t) {
  OperatorSum s;
  const FreqSum wA = omega_A_sum(t);
  Term rev = t;
  rev.coeff.pref = rev.coeff.pref * QRat::imag(-1);
  rev.coeff.push(f_omega(wA, 1));
  s.add(std::move(rev));
  Term damp = t;
  damp.coeff.pref = damp.coeff.pref * QRat::real(-1);
  damp.coeff.push(f_gamma_A(signature_of(t)));
  s.add(std::move(damp));
  s.add(Gamma_A_apply(t, GammaRegime::exact));
  return s;
}

OperatorSum L0_apply(const OperatorSum& s) {
  OperatorSum out;
  for (const auto& t : s.terms()) out.add(L0_apply(t));
  return out;
}

namespace {

void r0_apply_raw(const Term& t, int sign, std::vector<Term>& out) {
  const Factor res = f_resolvent(signature_of(t), sign, -1);
  Term base = t;
  base.coeff.push(res);
  out.push_back(std::move(base));
  for (auto& g : gamma_terms_raw(t, GammaRegime::exact)) {
    std::vector<Term> rec;
    r0_apply_raw(g, sign, rec);
    for (auto& r : rec) {
      r.coeff.push(res);
      out.push_back(std::move(r));
    }
  }
}

}  // namespace

OperatorSum R0_apply(const Term& t, ResolventDirection dir) {
  std::vector<Term> raw;
  r0_apply_raw(t, dir == ResolventDirection::forward ? 1 : -1, raw);
  OperatorSum s;
  for (auto& r : raw) s.add(std::move(r));
  return s;
}

OperatorSum R0_apply(const OperatorSum& s, ResolventDirection dir) {
  OperatorSum out;
  for (const auto& t : s.terms()) out.add(R0_apply(t, dir));
  return out;
}

OperatorSum apply_iw_minus_L0(const OperatorSum& s, ResolventDirection dir) {
  const int sign = dir == ResolventDirection::forward ? 1 : -1;
  OperatorSum out;
  for (const auto& t : s.terms()) {
    Term a = t;
    a.coeff.push(f_resolvent(signature_of(t), sign, +1));
    out.add(std::move(a));
    for (auto& g : gamma_terms_raw(t, GammaRegime::exact)) {
      g.coeff.pref = g.coeff.pref * QRat::real(-1);
      out.add(std::move(g));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Thermal Wick averages
// ---------------------------------------------------------------------------

namespace {

void wick_rec(const OpString& ops, Term acc, OperatorSum& out) {
  if (ops.empty()) {
    out.add(std::move(acc));
    return;
  }
  std::size_t ncr = 0, nan = 0;
  for (auto& o : ops) (o.creator ? ncr : nan)++;
  if (ncr != nan) return;  // unbalanced products average to zero

  const Op head = ops.front();
  OpString rest(ops.begin() + 1, ops.end());
  for (std::size_t j = 0; j < rest.size(); ++j) {
    if (rest[j].creator == head.creator) continue;
    Term next = acc;
    const Label& hl = head.label;
    const Label& pl = rest[j].label;
    Delta d;
    if (head.creator) {
      // <adag_M A> = n(omega_M) <[A, adag_M]> : contract against annihilators
      d.add(pl.name, pl.negated ? -1 : 1);
      d.add(hl.name, hl.negated ? 1 : -1);
      FreqSum f;
      f.add(hl.name, 1);
      next.coeff.push(f_bose(f));
    } else {
      // <a_L A> = (1 + n(omega_L)) <[a_L, A]> and 1 + n(w) = -n(-w)
      d.add(hl.name, hl.negated ? -1 : 1);
      d.add(pl.name, pl.negated ? 1 : -1);
      FreqSum f;
      f.add(hl.name, -1);
      next.coeff.push(f_bose(f));
      next.coeff.pref = next.coeff.pref * QRat::real(-1);
    }
    next.deltas.push_back(std::move(d));
    OpString sub;
    sub.reserve(rest.size() - 1);
    for (std::size_t m = 0; m < rest.size(); ++m)
      if (m != j) sub.push_back(rest[m]);
    wick_rec(sub, std::move(next), out);
  }
}

}  // namespace

OperatorSum wick_average(const OpString& ops, const Coeff& coeff,
                         const std::vector<Delta>& deltas) {
  OperatorSum out;
  Term acc;
  acc.coeff = coeff;
  acc.deltas = deltas;
  wick_rec(ops, std::move(acc), out);
  return out;
}

OperatorSum wick_average(const Term& t) {
  return wick_average(term_ops(t), t.coeff, t.deltas);
}

OperatorSum wick_average(const OperatorSum& s) {
  OperatorSum out;
  for (const auto& t : s.terms()) out.add(wick_average(t));
  return out;
}

OperatorSum wick_cross(const Term& a, const Term& b_in) {
  Term b = freshen_bound(b_in);
  Coeff c = a.coeff * b.coeff;
  std::vector<Delta> deltas = a.deltas;
  for (auto& d : b.deltas) deltas.push_back(d);
  OpString s = term_ops(a);
  for (auto& o : term_ops(b)) s.push_back(o);
  OperatorSum full = wick_average(s, c, deltas);
  OperatorSum disc = wick_average(a) * wick_average(b);
  return full - disc;
}

FreeCorrelations free_correlations(const Term& a, const Term& b_in) {
  Term b = freshen_bound(b_in);
  const FreqSum wB = omega_A_sum(b);
  Coeff c = a.coeff * b.coeff;
  std::vector<Delta> deltas = a.deltas;
  for (auto& d : b.deltas) deltas.push_back(d);
  OpString s = term_ops(a);
  for (auto& o : term_ops(b)) s.push_back(o);
  OperatorSum ab = wick_average(s, c, deltas);

  FreeCorrelations fc;
  for (const auto& t : ab.terms()) {
    Term u = t;
    u.coeff.push(f_w(wB, 1));
    fc.canonical.add(std::move(u));
    Term v = t;
    v.coeff.push(f_w(wB, 1));
    v.coeff.push(f_beta(1));
    v.coeff.push(f_omega(wB, 1));
    fc.commutator.add(std::move(v));
  }
  return fc;
}

OperatorSum first_order_average(const Term& a, const OperatorSum& h1) {
  OperatorSum out = wick_average(a);
  for (const auto& b : h1.terms()) {
    const FreqSum wB = omega_A_sum(b);
    OperatorSum cross = wick_cross(a, b);
    for (const auto& t : cross.terms()) {
      Term u = t;
      u.coeff.pref = u.coeff.pref * QRat::real(-1);
      u.coeff.push(f_beta(1));
      u.coeff.push(f_w(wB, 1));
      out.add(std::move(u));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Appendix identities
// ---------------------------------------------------------------------------

namespace {

/// lambda z / omega_tilde_k (a_k + adag_{-k})-style block of [a_k, H1].
OperatorSum commu_z_block(const std::string& k, bool dagger_form) {
  OperatorSum s;
  auto base = [&] {
    Term t;
    t.coeff.lambda_pow = 1;
    t.coeff.z_pow = 1;
    t.coeff.push(f_omega_tilde(k, -2));
    return t;
  };
  Term t1 = base();
  Term t2 = base();
  if (!dagger_form) {  // a_k + adag_{-k}
    t1.annihilators = {{k, false, false}};
    t2.creators = {{k, true, false}};
  } else {  // adag_k + a_{-k}
    t1.creators = {{k, false, false}};
    t2.annihilators = {{k, true, false}};
  }
  s.add(std::move(t1));
  s.add(std::move(t2));
  return s;
}

/// The cubic integral block of [a_k, H1] (delta_sign = +1) or [H1, adag_k]
/// (delta_sign = -1).
OperatorSum commu_cubic_block(const std::string& k, int delta_sign) {
  OperatorSum s;
  static const long long weights[4] = {1, 3, 3, 1};
  const std::string names[3] = {"p1", "p2", "p3"};
  for (int ncr = 0; ncr <= 3; ++ncr) {
    Term t;
    t.coeff.pref = QRat{Rational(weights[ncr], 24), Rational(0)};
    t.coeff.lambda_pow = 1;
    t.coeff.vol_pow = 1;
    t.coeff.push(f_omega_tilde(k, -1));
    t.coeff.bound = {names[0], names[1], names[2]};
    Delta d;
    for (auto& n : t.coeff.bound) {
      t.coeff.push(f_omega_tilde(n, -1));
      d.add(n, 1);
    }
    d.add(k, delta_sign);
    t.deltas.push_back(std::move(d));
    for (int j = 0; j < ncr; ++j) t.creators.push_back({names[j], false, true});
    for (int j = ncr; j < 3; ++j) t.annihilators.push_back({names[j], true, true});
    s.add(std::move(t));
  }
  return s;
}

/// Quadratic double-commutator block with delta(p1 + p2 + s1 k1 + s2 k2).
OperatorSum dcommu_block(const std::string& k1, const std::string& k2, int s1,
                         int s2) {
  OperatorSum s;
  static const long long weights[3] = {1, 2, 1};
  const std::string names[2] = {"p1", "p2"};
  for (int ncr = 0; ncr <= 2; ++ncr) {
    Term t;
    t.coeff.pref = QRat{Rational(weights[ncr], 8), Rational(0)};
    t.coeff.lambda_pow = 1;
    t.coeff.vol_pow = 1;
    t.coeff.push(f_omega_tilde(k1, -1));
    t.coeff.push(f_omega_tilde(k2, -1));
    t.coeff.bound = {names[0], names[1]};
    Delta d;
    for (auto& n : t.coeff.bound) {
      t.coeff.push(f_omega_tilde(n, -1));
      d.add(n, 1);
    }
    d.add(k1, s1);
    d.add(k2, s2);
    t.deltas.push_back(std::move(d));
    for (int j = 0; j < ncr; ++j) t.creators.push_back({names[j], false, true});
    for (int j = ncr; j < 2; ++j) t.annihilators.push_back({names[j], true, true});
    s.add(std::move(t));
  }
  // + lambda z / omega_tilde_{k1} delta(k1 -+ k2)
  Term tz;
  tz.coeff.lambda_pow = 1;
  tz.coeff.z_pow = 1;
  tz.coeff.push(f_omega_tilde(k1, -2));
  Delta d;
  d.add(k1, 1);
  d.add(k2, s1 == s2 ? 1 : -1);
  tz.deltas.push_back(std::move(d));
  s.add(std::move(tz));
  return s;
}

/// Scalar delta multiplier as an operator sum.
OperatorSum scalar_delta(const std::string& a, int ca, const std::string& b, int cb) {
  Term t;
  Delta d;
  d.add(a, ca);
  d.add(b, cb);
  t.deltas.push_back(std::move(d));
  return OperatorSum(std::move(t));
}

IdentityCheck check_equal(const std::string& name, const OperatorSum& lhs,
                          const OperatorSum& rhs) {
  IdentityCheck c;
  c.name = name;
  OperatorSum diff = lhs - rhs;
  c.pass = diff.is_zero();
  if (!c.pass && !diff.terms().empty()) c.detail = diff.to_text().substr(0, 400);
  return c;
}

}  // namespace

std::vector<IdentityCheck> appendixC_identities() {
  std::vector<IdentityCheck> out;
  const OperatorSum H1 = build_H1();
  const OperatorSum a_k = single_op(an("k"));
  const OperatorSum ad_k = single_op(cr("k"));

  // single commutators
  OperatorSum lhs_a = commutator(a_k, H1);
  OperatorSum rhs_a = commu_z_block("k", false) + commu_cubic_block("k", +1);
  out.push_back(check_equal("single_commutator_a", lhs_a, rhs_a));

  OperatorSum lhs_ad = commutator(H1, ad_k);
  OperatorSum rhs_ad = commu_z_block("k", true) + commu_cubic_block("k", -1);
  out.push_back(check_equal("single_commutator_adag", lhs_ad, rhs_ad));

  const OperatorSum a1 = single_op(an("k1")), a2 = single_op(an("k2"));
  const OperatorSum ad1 = single_op(cr("k1")), ad2 = single_op(cr("k2"));

  // product-rule splittings
  out.push_back(check_equal(
      "splitting_aa",
      commutator(a1 * a2, H1),
      commutator(a1, H1) * a2 + commutator(a2, H1) * a1 +
          commutator(a1, commutator(a2, H1))));
  out.push_back(check_equal(
      "splitting_adad",
      commutator(H1, ad1 * ad2),
      ad1 * commutator(H1, ad2) + ad2 * commutator(H1, ad1) +
          commutator(commutator(H1, ad1), ad2)));

  // double commutators
  out.push_back(check_equal("double_commutator_aa",
                            commutator(a1, commutator(a2, H1)),
                            dcommu_block("k1", "k2", 1, 1)));
  out.push_back(check_equal("double_commutator_adad",
                            commutator(commutator(H1, ad1), ad2),
                            dcommu_block("k1", "k2", -1, -1)));
  out.push_back(check_equal("double_commutator_a_adag",
                            commutator(a1, commutator(H1, ad2)),
                            dcommu_block("k1", "k2", 1, -1)));

  // quadruple-operator identities
  const OperatorSum adp1 = single_op(cr("q1")), adp2 = single_op(cr("q2"));
  auto dc = [&H1](const OperatorSum& x, const OperatorSum& y) {
    return commutator(x, commutator(H1, y));
  };
  const OperatorSum A = a1 * a2, B = adp1 * adp2;

  OperatorSum rhs13 = scalar_delta("k1", 1, "q1", -1) * a2 * commutator(H1, adp2) +
                      scalar_delta("k1", 1, "q2", -1) * a2 * commutator(H1, adp1) +
                      scalar_delta("k2", 1, "q1", -1) * a1 * commutator(H1, adp2) +
                      scalar_delta("k2", 1, "q2", -1) * a1 * commutator(H1, adp1) +
                      adp1 * dc(a2, adp2) * a1 + adp2 * dc(a2, adp1) * a1 +
                      adp1 * dc(a1, adp2) * a2 + adp2 * dc(a1, adp1) * a2 +
                      adp1 * commutator(a1, dc(a2, adp2)) +
                      adp2 * commutator(a1, dc(a2, adp1)) +
                      commutator(a1, commutator(commutator(H1, adp1), adp2)) * a2 +
                      commutator(a2, commutator(commutator(H1, adp1), adp2)) * a1 +
                      commutator(a1, commutator(a2, commutator(commutator(H1, adp1), adp2)));
  out.push_back(check_equal("quadruple_a_a_H1_adad",
                            commutator(A, commutator(H1, B)), rhs13));

  OperatorSum rhs13x = scalar_delta("k1", 1, "q1", -1) * commutator(a2, H1) * adp2 +
                       scalar_delta("k1", 1, "q2", -1) * commutator(a2, H1) * adp1 +
                       scalar_delta("k2", 1, "q1", -1) * commutator(a1, H1) * adp2 +
                       scalar_delta("k2", 1, "q2", -1) * commutator(a1, H1) * adp1 +
                       adp1 * dc(a2, adp2) * a1 + adp2 * dc(a2, adp1) * a1 +
                       adp1 * dc(a1, adp2) * a2 + adp2 * dc(a1, adp1) * a2 +
                       adp1 * commutator(a1, dc(a2, adp2)) +
                       adp2 * commutator(a1, dc(a2, adp1)) +
                       commutator(a1, commutator(commutator(H1, adp1), adp2)) * a2 +
                       commutator(a2, commutator(commutator(H1, adp1), adp2)) * a1 +
                       commutator(a1, commutator(a2, commutator(commutator(H1, adp1), adp2)));
  out.push_back(check_equal("quadruple_aa_H1_adad_x",
                            commutator(commutator(A, H1), B), rhs13x));

  return out;
}

}  // namespace phi4diss::ops
