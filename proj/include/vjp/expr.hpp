#pragma once

// Exact symbolic scalars over jet coordinates.
//
// An Expr is an immutable canonical sum of terms. Each term is an exact
// rational coefficient times a monomial: a sorted product of powers of
// factors, where a factor is a coordinate symbol, an application of
// sin/cos/exp, or (with negative exponent only) an irreducible-looking sum.
//
// Canonical rules enforced on construction:
//   - multi-indices of jet symbols are sorted;
//   - cos(a)^k with k >= 2 is rewritten through 1 - sin(a)^2;
//   - sin/cos arguments carry a positive leading coefficient;
//   - products of exponentials merge into a single exp;
//   - positive powers of sums are expanded;
//   - sums used as denominators are primitive and monic.

#include <gmpxx.h>

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace vjp {

using Rational = mpq_class;

/// Sorted list of base-coordinate indices (0-based); symmetric in its entries.
using MultiIndex = std::vector<int>;

MultiIndex sorted_multi(MultiIndex j);
MultiIndex with_index(const MultiIndex& j, int i);

enum class SymbolKind : std::uint8_t { Base = 0, Field = 1, Param = 2, Constant = 3 };

/// Reserved parameter slots.
inline constexpr int kHomotopyParam = 0;         // @t
inline constexpr int kCycleParamFirst = 1;       // @s1 .. @s9
inline constexpr int kCycleParamLast = 9;
inline constexpr int kSectionHomotopyParam = 10; // @h

struct Symbol {
  SymbolKind kind = SymbolKind::Constant;
  int index = 0;
  MultiIndex jet;
  std::string name;

  static Symbol base(int i);
  static Symbol field(int a, MultiIndex jet = {});
  static Symbol param(int k);
  static Symbol constant(std::string name);

  int order() const { return kind == SymbolKind::Field ? static_cast<int>(jet.size()) : 0; }
  bool is_coordinate() const { return kind == SymbolKind::Base || kind == SymbolKind::Field; }

  friend auto operator<=>(const Symbol&, const Symbol&) = default;
  friend bool operator==(const Symbol&, const Symbol&) = default;
};

enum class Fn : std::uint8_t { Sin = 0, Cos = 1, Exp = 2 };

struct Term;

class Expr {
 public:
  struct Impl;

  Expr();
  Expr(int value);  // NOLINT: integers convert implicitly
  explicit Expr(const Rational& value);

  static Expr sym(const Symbol& s);
  static Expr func(Fn fn, const Expr& arg);

  const std::vector<Term>& terms() const;
  bool is_zero() const;
  bool is_rational() const;
  /// Value of a constant expression; throws when not constant.
  Rational rational() const;

  Expr operator-() const;
  Expr& operator+=(const Expr& o);
  Expr& operator-=(const Expr& o);
  Expr& operator*=(const Expr& o);

  Expr pow(int k) const;
  Expr inverse() const;

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);

  /// Structural (canonical-form) identity.
  friend bool operator==(const Expr& a, const Expr& b);
  friend std::strong_ordering operator<=>(const Expr& a, const Expr& b);

  const Impl* impl() const { return impl_.get(); }

 private:
  explicit Expr(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;

  friend Expr make_expr(std::vector<Term> terms);
};

struct Factor {
  enum class Kind : std::uint8_t { Symbol = 0, Func = 1, Sum = 2 };
  Kind kind = Kind::Symbol;
  Symbol symbol;
  Fn fn = Fn::Sin;
  Expr arg;  // function argument, or the sum itself

  friend std::strong_ordering operator<=>(const Factor& a, const Factor& b);
  friend bool operator==(const Factor& a, const Factor& b);
};

struct Power {
  Factor base;
  int exp = 1;

  friend std::strong_ordering operator<=>(const Power& a, const Power& b);
  friend bool operator==(const Power& a, const Power& b);
};

using Monomial = std::vector<Power>;

struct Term {
  Rational coef;
  Monomial mono;
};

struct Expr::Impl {
  std::vector<Term> terms;  // sorted by monomial, nonzero coefficients
};

/// Wraps already-canonical sorted terms.
Expr make_expr(std::vector<Term> terms);

/// Builds the canonical expression for coef * product(raw powers).
Expr make_term(const Rational& coef, Monomial raw);
Expr monomial_expr(const Monomial& mono);
Expr factor_expr(const Factor& f);

// --- calculus and rewriting ---

bool contains(const Expr& e, const Symbol& s);
void collect_symbols(const Expr& e, std::set<Symbol>& out);
std::set<Symbol> symbols(const Expr& e);
/// Highest jet order among field symbols in e (0 if none).
int jet_order(const Expr& e);

/// Formal partial derivative; all other symbols are independent.
Expr partial(const Expr& e, const Symbol& s);

/// Derivation determined by its values on symbols (chain rule through
/// functions and sums).
using SymbolDerivation = std::function<Expr(const Symbol&)>;
Expr apply_derivation(const Expr& e, const SymbolDerivation& delta);

using Bindings = std::map<Symbol, Expr>;
/// Simultaneous substitution followed by canonicalization.
Expr substitute(const Expr& e, const Bindings& bindings);

/// Numerator over a common denominator; the denominator is returned as a
/// monomial with positive exponents.
std::pair<Expr, Monomial> as_fraction(const Expr& e);

/// True when the numerator over the common denominator is exactly zero.
bool is_zero_rational(const Expr& e);

/// Exact integral over @t from 0 to 1. Accepts terms polynomial in @t and
/// log-free ray terms @t^e (alpha + B @t^d)^-k.
Expr integrate_t(const Expr& e);

/// Expression in the homotopy parameter.
Expr t_param();

}  // namespace vjp
