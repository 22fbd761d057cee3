#pragma once

// Jet-space bookkeeping: total derivatives, horizontal forms, d_H, general
// coordinate forms with horizontalization, vector-field prolongation and
// pullback along sections.

#include <map>
#include <vector>

#include "vjp/expr.hpp"
#include "vjp/jetspace.hpp"

namespace vjp {

/// D_i e = de/dx^i + sum u^a_{J+i} de/du^a_J.
Expr total_derivative(const Expr& e, int i, const JetSpace& space);
/// D_J e, applied index by index.
Expr total_derivative(const Expr& e, const MultiIndex& j, const JetSpace& space);

/// Horizontal p-form: coefficients of dx^{i1}^...^dx^{ip} keyed by the bitmask
/// of {i1 < ... < ip}.
class HorizontalForm {
 public:
  HorizontalForm() = default;
  HorizontalForm(int n, int degree) : n_(n), degree_(degree) {}

  /// f dx^1^...^dx^n
  static HorizontalForm volume(int n, const Expr& f);
  /// sum_i f^i w_i with w_i = d/dx^i _| (dx^1^...^dx^n).
  static HorizontalForm current(const std::vector<Expr>& f);
  static HorizontalForm scalar(int n, const Expr& f) { return monomial(n, 0, f); }
  static HorizontalForm monomial(int n, unsigned mask, const Expr& f);

  int n() const { return n_; }
  int degree() const { return degree_; }
  const std::map<unsigned, Expr>& coefficients() const { return coef_; }
  Expr coefficient(unsigned mask) const;
  void add(unsigned mask, const Expr& f);

  /// Coefficient of the volume form (degree n).
  Expr top() const { return coefficient((1u << n_) - 1); }
  /// Components f^i of a degree n-1 form in the w_i basis.
  std::vector<Expr> current_components() const;

  bool is_zero() const { return coef_.empty(); }
  int jet_order() const;

  HorizontalForm operator+(const HorizontalForm& o) const;
  HorizontalForm operator-(const HorizontalForm& o) const;
  HorizontalForm operator-() const;
  HorizontalForm scaled(const Expr& f) const;
  HorizontalForm map(const std::function<Expr(const Expr&)>& fn) const;

 private:
  int n_ = 0;
  int degree_ = 0;
  std::map<unsigned, Expr> coef_;
};

/// Sign of dx^i ^ dx^I against the sorted monomial dx^{I+i}; 0 if i in I.
int insertion_sign(unsigned mask, int i);

HorizontalForm dH(const HorizontalForm& w, const JetSpace& space);

/// Equality of every coefficient under equals().
bool equals(const HorizontalForm& a, const HorizontalForm& b);

/// Source form: components E_a against w^a ^ dx^1 ^ ... ^ dx^n.
struct SourceForm {
  std::vector<Expr> components;

  int jet_order() const;
  bool is_zero() const;
  SourceForm operator+(const SourceForm& o) const;
  SourceForm operator-(const SourceForm& o) const;
  SourceForm scaled(const Expr& f) const;
};

bool equals(const SourceForm& a, const SourceForm& b);

/// Differential form in coordinate differentials ds (s a base, field, jet or
/// parameter symbol); terms keyed by the strictly increasing symbol list.
class Form {
 public:
  using Key = std::vector<Symbol>;

  Form() = default;
  static Form function(const Expr& f);
  static Form differential(const Symbol& s);
  /// Exterior derivative of a function.
  static Form d(const Expr& f);
  static Form from_horizontal(const HorizontalForm& w);

  const std::map<Key, Expr>& terms() const { return terms_; }
  void add(Key key, const Expr& f);
  bool is_zero() const { return terms_.empty(); }
  int degree() const;

  Form operator+(const Form& o) const;
  Form operator-(const Form& o) const;
  Form scaled(const Expr& f) const;
  Form wedge(const Form& o) const;
  Form exterior_derivative() const;
  Form map(const std::function<Expr(const Expr&)>& fn) const;

  /// Substitute s -> image(s) in coefficients and ds -> d(image(s)).
  Form pullback(const Bindings& image) const;

 private:
  std::map<Key, Expr> terms_;
};

Form wedge(const Form& a, const Form& b);

/// Contact-free part of the form after du^a_J -> w^a_J + u^a_{J+i} dx^i.
HorizontalForm horizontal_part(const Form& f, const JetSpace& space);

/// Source form projected from the 1-contact part of an (n+1)-form:
/// sum_J C_a^J w^a_J ^ vol  |->  E_a = sum_J (-D)_J C_a^J.
SourceForm source_projection(const Form& f, const JetSpace& space);

/// Projectable vector field: base components depend on x only, fiber
/// components on (x, u).
struct VectorField {
  std::vector<Expr> base;
  std::vector<Expr> fiber;

  bool is_zero() const;
};

/// Throws PreconditionFailed when the field is not projectable.
void validate(const VectorField& xi, const JetSpace& space);

/// Prolonged components Xi^a_J, |J| <= order.
using Prolongation = std::map<Symbol, Expr>;
Prolongation prolong(const VectorField& xi, int order, const JetSpace& space);

/// Xi_V^a = Xi^a - u^a_i Xi^i
std::vector<Expr> vertical_part(const VectorField& xi, const JetSpace& space);

/// pr Xi (f): the prolonged field applied to a function.
Expr apply_field(const VectorField& xi, const Expr& f, const JetSpace& space);

/// Divergence d_i Xi^i of the base part.
Expr base_divergence(const VectorField& xi, const JetSpace& space);

struct Section {
  int chart = 0;
  std::vector<Expr> values;  // u^a = sigma^a(x)
};

/// u^a_J -> d_J sigma^a for |J| <= order.
Bindings jet_bindings(const Section& s, int order, const JetSpace& space);

HorizontalForm pullback_section(const HorizontalForm& w, const Section& s, const JetSpace& space);
Form pullback_section(const Form& w, const Section& s, const JetSpace& space);

}  // namespace vjp
