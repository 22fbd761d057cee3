#include "vjp/expr.hpp"

#include <algorithm>
#include <utility>

#include "vjp/error.hpp"

namespace vjp {

namespace {

std::strong_ordering cmp_rational(const Rational& a, const Rational& b) {
  const int c = cmp(a, b);
  if (c < 0) return std::strong_ordering::less;
  if (c > 0) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

const std::shared_ptr<const Expr::Impl>& zero_impl() {
  static const auto impl = std::make_shared<const Expr::Impl>();
  return impl;
}

using TermMap = std::map<Monomial, Rational>;

void accumulate(TermMap& acc, const Expr& e) {
  for (const auto& t : e.terms()) {
    auto [it, inserted] = acc.try_emplace(t.mono, t.coef);
    if (!inserted) {
      it->second += t.coef;
      if (it->second == 0) acc.erase(it);
    }
  }
}

std::vector<Term> flatten(TermMap&& acc) {
  std::vector<Term> out;
  out.reserve(acc.size());
  for (auto& [mono, coef] : acc) out.push_back(Term{coef, mono});
  return out;
}

bool power_less_by_base(const Power& a, const Power& b) { return a.base < b.base; }

Factor func_factor(Fn fn, const Expr& arg) {
  Factor f;
  f.kind = Factor::Kind::Func;
  f.fn = fn;
  f.arg = arg;
  return f;
}

Factor sum_factor(const Expr& sum) {
  Factor f;
  f.kind = Factor::Kind::Sum;
  f.arg = sum;
  return f;
}

Factor symbol_factor(const Symbol& s) {
  Factor f;
  f.kind = Factor::Kind::Symbol;
  f.symbol = s;
  return f;
}

// Inverse of a polynomial sum (no negative exponents anywhere).
Expr invert_polynomial(const Expr& n) {
  const auto& ts = n.terms();
  // Common monomial content.
  std::map<Factor, int> content;
  for (const auto& p : ts.front().mono) content[p.base] = p.exp;
  for (std::size_t i = 1; i < ts.size() && !content.empty(); ++i) {
    std::map<Factor, int> next;
    for (const auto& p : ts[i].mono) {
      auto it = content.find(p.base);
      if (it != content.end()) next[p.base] = std::min(it->second, p.exp);
    }
    content = std::move(next);
  }
  Monomial g;
  Monomial g_inv;
  for (const auto& [f, k] : content) {
    g.push_back(Power{f, k});
    g_inv.push_back(Power{f, -k});
  }
  Expr reduced;
  if (g.empty()) {
    reduced = n;
  } else {
    TermMap acc;
    for (const auto& t : ts) {
      Monomial m = t.mono;
      m.insert(m.end(), g_inv.begin(), g_inv.end());
      accumulate(acc, make_term(t.coef, std::move(m)));
    }
    reduced = make_expr(flatten(std::move(acc)));
  }
  const Rational lc = reduced.terms().front().coef;
  const Expr monic = reduced * Expr(Rational(1) / lc);
  if (monic.terms().size() == 1) {
    return (Expr(lc) * monomial_expr(g) * monic).inverse();
  }
  Monomial m = g_inv;
  m.push_back(Power{sum_factor(monic), -1});
  return make_term(Rational(1) / lc, std::move(m));
}

}  // namespace

MultiIndex sorted_multi(MultiIndex j) {
  std::sort(j.begin(), j.end());
  return j;
}

MultiIndex with_index(const MultiIndex& j, int i) {
  MultiIndex out = j;
  out.insert(std::upper_bound(out.begin(), out.end(), i), i);
  return out;
}

Symbol Symbol::base(int i) { return Symbol{SymbolKind::Base, i, {}, {}}; }
Symbol Symbol::field(int a, MultiIndex jet) {
  return Symbol{SymbolKind::Field, a, sorted_multi(std::move(jet)), {}};
}
Symbol Symbol::param(int k) { return Symbol{SymbolKind::Param, k, {}, {}}; }
Symbol Symbol::constant(std::string name) {
  return Symbol{SymbolKind::Constant, 0, {}, std::move(name)};
}

// --- ordering ---

std::strong_ordering operator<=>(const Factor& a, const Factor& b) {
  if (a.kind != b.kind) return a.kind <=> b.kind;
  switch (a.kind) {
    case Factor::Kind::Symbol:
      return a.symbol <=> b.symbol;
    case Factor::Kind::Func:
      if (a.fn != b.fn) return a.fn <=> b.fn;
      return a.arg <=> b.arg;
    case Factor::Kind::Sum:
      return a.arg <=> b.arg;
  }
  return std::strong_ordering::equal;
}

bool operator==(const Factor& a, const Factor& b) { return (a <=> b) == 0; }

std::strong_ordering operator<=>(const Power& a, const Power& b) {
  if (auto c = a.base <=> b.base; c != 0) return c;
  return a.exp <=> b.exp;
}

bool operator==(const Power& a, const Power& b) { return (a <=> b) == 0; }

std::strong_ordering operator<=>(const Expr& a, const Expr& b) {
  if (a.impl_ == b.impl_) return std::strong_ordering::equal;
  const auto& ta = a.terms();
  const auto& tb = b.terms();
  if (ta.size() != tb.size()) return ta.size() <=> tb.size();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (auto c = ta[i].mono <=> tb[i].mono; c != 0) return c;
    if (auto c = cmp_rational(ta[i].coef, tb[i].coef); c != 0) return c;
  }
  return std::strong_ordering::equal;
}

bool operator==(const Expr& a, const Expr& b) { return (a <=> b) == 0; }

// --- construction ---

Expr make_expr(std::vector<Term> terms) {
  if (terms.empty()) return Expr();
  auto impl = std::make_shared<Expr::Impl>();
  impl->terms = std::move(terms);
  return Expr(std::shared_ptr<const Expr::Impl>(std::move(impl)));
}

Expr::Expr() : impl_(zero_impl()) {}

Expr::Expr(int value) : Expr(Rational(value)) {}

Expr::Expr(const Rational& value) : impl_(zero_impl()) {
  if (value != 0) *this = make_expr({Term{value, {}}});
}

Expr Expr::sym(const Symbol& s) { return make_expr({Term{Rational(1), {Power{symbol_factor(s), 1}}}}); }

Expr Expr::func(Fn fn, const Expr& arg) { return make_term(Rational(1), {Power{func_factor(fn, arg), 1}}); }

const std::vector<Term>& Expr::terms() const { return impl_->terms; }

bool Expr::is_zero() const { return impl_->terms.empty(); }

bool Expr::is_rational() const {
  return terms().empty() || (terms().size() == 1 && terms().front().mono.empty());
}

Rational Expr::rational() const {
  if (terms().empty()) return Rational(0);
  if (!is_rational()) throw Error(ErrorCode::PreconditionFailed, "expression is not a constant");
  return terms().front().coef;
}

Expr monomial_expr(const Monomial& mono) { return make_term(Rational(1), mono); }

Expr factor_expr(const Factor& f) { return make_term(Rational(1), {Power{f, 1}}); }

Expr make_term(const Rational& coef, Monomial raw) {
  if (coef == 0) return Expr();
  Rational c = coef;

  Monomial pows;
  pows.reserve(raw.size());
  for (auto& p : raw) {
    if (p.exp == 0) continue;
    if (p.base.kind == Factor::Kind::Func && p.base.fn != Fn::Exp) {
      if (p.base.arg.is_zero()) {
        if (p.base.fn == Fn::Sin) {
          if (p.exp > 0) return Expr();
          throw Error(ErrorCode::DivisionByZero, "division by sin(0)");
        }
        continue;  // cos(0) = 1
      }
      if (p.base.arg.terms().front().coef < 0) {
        p.base.arg = -p.base.arg;
        if (p.base.fn == Fn::Sin && (p.exp % 2 != 0)) c = -c;
      }
    }
    pows.push_back(std::move(p));
  }

  std::stable_sort(pows.begin(), pows.end(), power_less_by_base);
  Monomial merged;
  merged.reserve(pows.size());
  for (auto& p : pows) {
    if (!merged.empty() && merged.back().base == p.base) {
      merged.back().exp += p.exp;
      if (merged.back().exp == 0) merged.pop_back();
    } else {
      merged.push_back(std::move(p));
    }
  }

  // Merge exponentials into one.
  Expr exp_arg;
  bool had_exp = false;
  Monomial no_exp;
  no_exp.reserve(merged.size());
  for (auto& p : merged) {
    if (p.base.kind == Factor::Kind::Func && p.base.fn == Fn::Exp) {
      exp_arg += Expr(p.exp) * p.base.arg;
      had_exp = true;
    } else {
      no_exp.push_back(std::move(p));
    }
  }
  if (had_exp && !exp_arg.is_zero()) {
    Power ep{func_factor(Fn::Exp, exp_arg), 1};
    no_exp.insert(std::upper_bound(no_exp.begin(), no_exp.end(), ep, power_less_by_base), std::move(ep));
  }

  Monomial keep;
  std::vector<Expr> expansions;
  for (auto& p : no_exp) {
    if (p.base.kind == Factor::Kind::Sum && p.exp > 0) {
      expansions.push_back(p.base.arg.pow(p.exp));
    } else if (p.base.kind == Factor::Kind::Func && p.base.fn == Fn::Cos && p.exp >= 2) {
      const Expr s = Expr::func(Fn::Sin, p.base.arg);
      expansions.push_back((Expr(1) - s * s).pow(p.exp / 2));
      if (p.exp % 2 != 0) keep.push_back(Power{p.base, 1});
    } else {
      keep.push_back(std::move(p));
    }
  }
  if (expansions.empty()) return make_expr({Term{c, std::move(keep)}});
  Expr r = make_term(c, std::move(keep));
  for (const auto& x : expansions) r *= x;
  return r;
}

// --- arithmetic ---

Expr Expr::operator-() const {
  if (is_zero()) return *this;
  std::vector<Term> ts = terms();
  for (auto& t : ts) t.coef = -t.coef;
  return make_expr(std::move(ts));
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  const auto& ta = a.terms();
  const auto& tb = b.terms();
  std::vector<Term> out;
  out.reserve(ta.size() + tb.size());
  std::size_t i = 0, j = 0;
  while (i < ta.size() && j < tb.size()) {
    const auto c = ta[i].mono <=> tb[j].mono;
    if (c < 0) {
      out.push_back(ta[i++]);
    } else if (c > 0) {
      out.push_back(tb[j++]);
    } else {
      Rational s = ta[i].coef + tb[j].coef;
      if (s != 0) out.push_back(Term{s, ta[i].mono});
      ++i;
      ++j;
    }
  }
  for (; i < ta.size(); ++i) out.push_back(ta[i]);
  for (; j < tb.size(); ++j) out.push_back(tb[j]);
  return make_expr(std::move(out));
}

Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_zero() || b.is_zero()) return Expr();
  if (a.is_rational() && b.is_rational()) return Expr(a.rational() * b.rational());
  if (a.is_rational() && a.rational() == 1) return b;
  if (b.is_rational() && b.rational() == 1) return a;
  TermMap acc;
  for (const auto& ta : a.terms()) {
    for (const auto& tb : b.terms()) {
      Monomial m;
      m.reserve(ta.mono.size() + tb.mono.size());
      m.insert(m.end(), ta.mono.begin(), ta.mono.end());
      m.insert(m.end(), tb.mono.begin(), tb.mono.end());
      accumulate(acc, make_term(ta.coef * tb.coef, std::move(m)));
    }
  }
  return make_expr(flatten(std::move(acc)));
}

Expr operator/(const Expr& a, const Expr& b) { return a * b.inverse(); }

Expr& Expr::operator+=(const Expr& o) { return *this = *this + o; }
Expr& Expr::operator-=(const Expr& o) { return *this = *this - o; }
Expr& Expr::operator*=(const Expr& o) { return *this = *this * o; }

Expr Expr::pow(int k) const {
  if (k == 0) return Expr(1);
  if (k < 0) return inverse().pow(-k);
  if (k == 1) return *this;
  Expr result(1);
  Expr base = *this;
  while (k > 0) {
    if (k & 1) result *= base;
    k >>= 1;
    if (k > 0) base *= base;
  }
  return result;
}

Expr Expr::inverse() const {
  if (is_zero()) throw Error(ErrorCode::DivisionByZero, "division by zero expression");
  if (terms().size() == 1) {
    const auto& t = terms().front();
    Monomial m = t.mono;
    for (auto& p : m) p.exp = -p.exp;
    return make_term(Rational(1) / t.coef, std::move(m));
  }
  auto [numer, denom] = as_fraction(*this);
  return monomial_expr(denom) * invert_polynomial(numer);
}

// --- fractions ---

std::pair<Expr, Monomial> as_fraction(const Expr& e) {
  std::map<Factor, int> den;
  for (const auto& t : e.terms()) {
    for (const auto& p : t.mono) {
      if (p.exp < 0) {
        int& k = den[p.base];
        k = std::max(k, -p.exp);
      }
    }
  }
  if (den.empty()) return {e, {}};
  Monomial d;
  for (const auto& [f, k] : den) d.push_back(Power{f, k});
  TermMap acc;
  for (const auto& t : e.terms()) {
    Monomial m = t.mono;
    m.insert(m.end(), d.begin(), d.end());
    accumulate(acc, make_term(t.coef, std::move(m)));
  }
  return {make_expr(flatten(std::move(acc))), d};
}

bool is_zero_rational(const Expr& e) {
  if (e.is_zero()) return true;
  return as_fraction(e).first.is_zero();
}

// --- inspection ---

bool contains(const Expr& e, const Symbol& s) {
  for (const auto& t : e.terms()) {
    for (const auto& p : t.mono) {
      if (p.base.kind == Factor::Kind::Symbol) {
        if (p.base.symbol == s) return true;
      } else if (contains(p.base.arg, s)) {
        return true;
      }
    }
  }
  return false;
}

void collect_symbols(const Expr& e, std::set<Symbol>& out) {
  for (const auto& t : e.terms()) {
    for (const auto& p : t.mono) {
      if (p.base.kind == Factor::Kind::Symbol) {
        out.insert(p.base.symbol);
      } else {
        collect_symbols(p.base.arg, out);
      }
    }
  }
}

std::set<Symbol> symbols(const Expr& e) {
  std::set<Symbol> out;
  collect_symbols(e, out);
  return out;
}

int jet_order(const Expr& e) {
  int r = 0;
  for (const auto& s : symbols(e)) r = std::max(r, s.order());
  return r;
}

// --- calculus ---

namespace {

Expr base_derivative(const Factor& f, const SymbolDerivation& delta) {
  switch (f.kind) {
    case Factor::Kind::Symbol:
      return delta(f.symbol);
    case Factor::Kind::Func: {
      const Expr da = apply_derivation(f.arg, delta);
      if (da.is_zero()) return Expr();
      switch (f.fn) {
        case Fn::Sin:
          return Expr::func(Fn::Cos, f.arg) * da;
        case Fn::Cos:
          return -(Expr::func(Fn::Sin, f.arg) * da);
        case Fn::Exp:
          return Expr::func(Fn::Exp, f.arg) * da;
      }
      return Expr();
    }
    case Factor::Kind::Sum:
      return apply_derivation(f.arg, delta);
  }
  return Expr();
}

}  // namespace

Expr apply_derivation(const Expr& e, const SymbolDerivation& delta) {
  TermMap acc;
  for (const auto& t : e.terms()) {
    for (std::size_t i = 0; i < t.mono.size(); ++i) {
      const Power& p = t.mono[i];
      const Expr db = base_derivative(p.base, delta);
      if (db.is_zero()) continue;
      Monomial rest;
      rest.reserve(t.mono.size());
      for (std::size_t j = 0; j < t.mono.size(); ++j) {
        if (j == i) {
          if (p.exp - 1 != 0) rest.push_back(Power{p.base, p.exp - 1});
        } else {
          rest.push_back(t.mono[j]);
        }
      }
      accumulate(acc, make_term(t.coef * p.exp, std::move(rest)) * db);
    }
  }
  return make_expr(flatten(std::move(acc)));
}

Expr partial(const Expr& e, const Symbol& s) {
  if (!contains(e, s)) return Expr();
  return apply_derivation(e, [&](const Symbol& x) { return x == s ? Expr(1) : Expr(); });
}

Expr substitute(const Expr& e, const Bindings& bindings) {
  if (bindings.empty() || e.is_zero()) return e;
  TermMap acc;
  for (const auto& t : e.terms()) {
    Monomial kept;
    Expr factor(1);
    bool changed = false;
    for (const auto& p : t.mono) {
      switch (p.base.kind) {
        case Factor::Kind::Symbol: {
          auto it = bindings.find(p.base.symbol);
          if (it == bindings.end()) {
            kept.push_back(p);
          } else {
            factor *= it->second.pow(p.exp);
            changed = true;
          }
          break;
        }
        case Factor::Kind::Func: {
          Expr arg = substitute(p.base.arg, bindings);
          if (arg == p.base.arg) {
            kept.push_back(p);
          } else {
            factor *= Expr::func(p.base.fn, arg).pow(p.exp);
            changed = true;
          }
          break;
        }
        case Factor::Kind::Sum: {
          Expr s = substitute(p.base.arg, bindings);
          if (s == p.base.arg) {
            kept.push_back(p);
          } else {
            factor *= s.pow(p.exp);
            changed = true;
          }
          break;
        }
      }
    }
    if (!changed) {
      accumulate(acc, make_expr({Term{t.coef, t.mono}}));
    } else {
      accumulate(acc, make_term(t.coef, std::move(kept)) * factor);
    }
  }
  return make_expr(flatten(std::move(acc)));
}

// --- homotopy-parameter integration ---

Expr t_param() { return Expr::sym(Symbol::param(kHomotopyParam)); }

namespace {

using Poly = std::vector<Rational>;  // coefficients in increasing degree

Poly poly_mul(const Poly& a, const Poly& b) {
  Poly out(a.size() + b.size() - 1, Rational(0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

Poly poly_pow(const Poly& a, int k) {
  Poly r{Rational(1)};
  for (int i = 0; i < k; ++i) r = poly_mul(r, a);
  return r;
}

void poly_add_scaled(Poly& acc, const Poly& a, const Rational& s) {
  if (acc.size() < a.size()) acc.resize(a.size(), Rational(0));
  for (std::size_t i = 0; i < a.size(); ++i) acc[i] += s * a[i];
}

Rational binomial(int n, int k) {
  Rational r(1);
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

Rational rational_pow(const Rational& a, int k) {
  Rational r(1);
  if (k >= 0) {
    for (int i = 0; i < k; ++i) r *= a;
  } else {
    for (int i = 0; i < -k; ++i) r /= a;
  }
  return r;
}

// Q(B) with  int_0^1 s^j (alpha + B s)^-k ds = Q(B) / (alpha + B)^(k-1),  j <= k-2.
Poly ray_integral(int j, int k, const Rational& alpha) {
  const Poly shifted{alpha, Rational(1)};  // alpha + B
  Poly p;
  for (int i = 0; i <= j; ++i) {
    const Rational c = binomial(j, i) * rational_pow(-alpha, j - i) / Rational(i - k + 1);
    Poly bracket = poly_pow(shifted, i);
    poly_add_scaled(bracket, poly_pow(shifted, k - 1), -rational_pow(alpha, i - k + 1));
    poly_add_scaled(p, bracket, c);
  }
  // Divide by B^(j+1); the low coefficients vanish identically.
  for (int i = 0; i <= j && i < static_cast<int>(p.size()); ++i) {
    if (p[i] != 0) throw Error(ErrorCode::NonPolynomialInT, "ray integral is not divisible (internal)");
  }
  Poly q;
  for (std::size_t i = j + 1; i < p.size(); ++i) q.push_back(p[i]);
  if (q.empty()) q.push_back(Rational(0));
  return q;
}

[[noreturn]] void non_polynomial(const std::string& why) {
  throw Error(ErrorCode::NonPolynomialInT, "integrand is not polynomial in @t: " + why);
}

}  // namespace

Expr integrate_t(const Expr& e) {
  const Symbol t = Symbol::param(kHomotopyParam);
  TermMap acc;
  for (const auto& term : e.terms()) {
    int t_exp = 0;
    Monomial rest;
    const Power* ray = nullptr;
    for (const auto& p : term.mono) {
      if (p.base.kind == Factor::Kind::Symbol) {
        if (p.base.symbol == t) {
          t_exp = p.exp;
        } else {
          rest.push_back(p);
        }
        continue;
      }
      if (!contains(p.base.arg, t)) {
        rest.push_back(p);
        continue;
      }
      if (p.base.kind == Factor::Kind::Func) non_polynomial("@t inside a transcendental function");
      if (ray != nullptr) non_polynomial("several @t-dependent denominators");
      ray = &p;
    }
    if (t_exp < 0) non_polynomial("negative power of @t");
    if (ray == nullptr) {
      accumulate(acc, make_term(term.coef / (t_exp + 1), std::move(rest)));
      continue;
    }
    // Ray term: t^e (alpha + B t^d)^-k.
    const int k = -ray->exp;
    std::map<int, Expr> by_power;
    for (const auto& st : ray->base.arg.terms()) {
      int d = 0;
      Monomial m;
      for (const auto& p : st.mono) {
        if (p.base.kind == Factor::Kind::Symbol && p.base.symbol == t) {
          d = p.exp;
        } else {
          if (p.base.kind != Factor::Kind::Symbol && contains(p.base.arg, t))
            non_polynomial("nested @t dependence in denominator");
          m.push_back(p);
        }
      }
      by_power[d] += make_term(st.coef, std::move(m));
    }
    if (by_power.size() != 2 || !by_power.count(0) || !by_power.at(0).is_rational())
      non_polynomial("denominator is not of the form alpha + B*@t^d");
    const Rational alpha = by_power.at(0).rational();
    const int d = by_power.rbegin()->first;
    const Expr b = by_power.rbegin()->second;
    if (d <= 0 || (t_exp + 1) % d != 0) non_polynomial("power of @t does not match the ray substitution");
    const int j = (t_exp + 1) / d - 1;
    if (j > k - 2) non_polynomial("logarithmic antiderivative");
    const Poly q = ray_integral(j, k, alpha);
    Expr qb;
    Expr bpow(1);
    for (const auto& c : q) {
      qb += Expr(c) * bpow;
      bpow *= b;
    }
    const Expr value = qb * (Expr(alpha) + b).pow(-(k - 1)) * Expr(Rational(1, d));
    accumulate(acc, make_term(term.coef, std::move(rest)) * value);
  }
  return make_expr(flatten(std::move(acc)));
}

}  // namespace vjp
