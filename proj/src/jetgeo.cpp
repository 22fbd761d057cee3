#include "vjp/jetgeo.hpp"

#include <algorithm>
#include <bit>

#include "vjp/error.hpp"
#include "vjp/eval.hpp"

namespace vjp {

Expr total_derivative(const Expr& e, int i, const JetSpace& space) {
  (void)space;
  return apply_derivation(e, [i](const Symbol& s) -> Expr {
    if (s.kind == SymbolKind::Base) return s.index == i ? Expr(1) : Expr();
    if (s.kind == SymbolKind::Field) {
      MultiIndex j = with_index(s.jet, i);
      JetSpace::check_order(static_cast<int>(j.size()));
      return Expr::sym(Symbol::field(s.index, std::move(j)));
    }
    return Expr();
  });
}

Expr total_derivative(const Expr& e, const MultiIndex& j, const JetSpace& space) {
  Expr out = e;
  for (int i : j) {
    if (out.is_zero()) break;
    out = total_derivative(out, i, space);
  }
  return out;
}

// --- horizontal forms ---

int insertion_sign(unsigned mask, int i) {
  if (mask & (1u << i)) return 0;
  const int below = std::popcount(mask & ((1u << i) - 1u));
  return below % 2 == 0 ? 1 : -1;
}

namespace {

// Sign of dx^I ^ dx^i against dx^{I+i}.
int append_sign(unsigned mask, int i) {
  if (mask & (1u << i)) return 0;
  const int above = std::popcount(mask >> (i + 1));
  return above % 2 == 0 ? 1 : -1;
}

}  // namespace

HorizontalForm HorizontalForm::volume(int n, const Expr& f) { return monomial(n, (1u << n) - 1, f); }

HorizontalForm HorizontalForm::monomial(int n, unsigned mask, const Expr& f) {
  HorizontalForm w(n, std::popcount(mask));
  w.add(mask, f);
  return w;
}

HorizontalForm HorizontalForm::current(const std::vector<Expr>& f) {
  const int n = static_cast<int>(f.size());
  HorizontalForm w(n, n - 1);
  const unsigned full = (1u << n) - 1;
  for (int i = 0; i < n; ++i) w.add(full ^ (1u << i), i % 2 == 0 ? f[i] : -f[i]);
  return w;
}

Expr HorizontalForm::coefficient(unsigned mask) const {
  auto it = coef_.find(mask);
  return it == coef_.end() ? Expr() : it->second;
}

void HorizontalForm::add(unsigned mask, const Expr& f) {
  if (f.is_zero()) return;
  auto [it, inserted] = coef_.try_emplace(mask, f);
  if (!inserted) {
    it->second += f;
    if (it->second.is_zero()) coef_.erase(it);
  }
}

std::vector<Expr> HorizontalForm::current_components() const {
  if (degree_ != n_ - 1) throw Error(ErrorCode::PreconditionFailed, "not a degree n-1 form");
  std::vector<Expr> f(n_);
  const unsigned full = (1u << n_) - 1;
  for (int i = 0; i < n_; ++i) {
    const Expr c = coefficient(full ^ (1u << i));
    f[i] = i % 2 == 0 ? c : -c;
  }
  return f;
}

int HorizontalForm::jet_order() const {
  int r = 0;
  for (const auto& [m, c] : coef_) r = std::max(r, vjp::jet_order(c));
  return r;
}

HorizontalForm HorizontalForm::operator+(const HorizontalForm& o) const {
  HorizontalForm out = *this;
  if (out.n_ == 0) {
    out.n_ = o.n_;
    out.degree_ = o.degree_;
  }
  for (const auto& [m, c] : o.coef_) out.add(m, c);
  return out;
}

HorizontalForm HorizontalForm::operator-() const { return scaled(Expr(-1)); }

HorizontalForm HorizontalForm::operator-(const HorizontalForm& o) const { return *this + (-o); }

HorizontalForm HorizontalForm::scaled(const Expr& f) const {
  return map([&](const Expr& c) { return c * f; });
}

HorizontalForm HorizontalForm::map(const std::function<Expr(const Expr&)>& fn) const {
  HorizontalForm out(n_, degree_);
  for (const auto& [m, c] : coef_) out.add(m, fn(c));
  return out;
}

HorizontalForm dH(const HorizontalForm& w, const JetSpace& space) {
  HorizontalForm out(w.n(), w.degree() + 1);
  if (w.degree() >= w.n()) return out;
  for (const auto& [mask, c] : w.coefficients()) {
    for (int i = 0; i < w.n(); ++i) {
      const int s = insertion_sign(mask, i);
      if (s == 0) continue;
      const Expr di = total_derivative(c, i, space);
      out.add(mask | (1u << i), s > 0 ? di : -di);
    }
  }
  return out;
}

bool equals(const HorizontalForm& a, const HorizontalForm& b) {
  std::set<unsigned> masks;
  for (const auto& [m, c] : a.coefficients()) masks.insert(m);
  for (const auto& [m, c] : b.coefficients()) masks.insert(m);
  for (unsigned m : masks)
    if (!equals(a.coefficient(m), b.coefficient(m))) return false;
  return true;
}

// --- source forms ---

int SourceForm::jet_order() const {
  int r = 0;
  for (const auto& c : components) r = std::max(r, vjp::jet_order(c));
  return r;
}

bool SourceForm::is_zero() const {
  return std::all_of(components.begin(), components.end(), [](const Expr& e) { return e.is_zero(); });
}

SourceForm SourceForm::operator+(const SourceForm& o) const {
  SourceForm out = *this;
  out.components.resize(std::max(components.size(), o.components.size()));
  for (std::size_t a = 0; a < o.components.size(); ++a) out.components[a] += o.components[a];
  return out;
}

SourceForm SourceForm::operator-(const SourceForm& o) const { return *this + o.scaled(Expr(-1)); }

SourceForm SourceForm::scaled(const Expr& f) const {
  SourceForm out = *this;
  for (auto& c : out.components) c *= f;
  return out;
}

bool equals(const SourceForm& a, const SourceForm& b) {
  const std::size_t m = std::max(a.components.size(), b.components.size());
  for (std::size_t i = 0; i < m; ++i) {
    const Expr x = i < a.components.size() ? a.components[i] : Expr();
    const Expr y = i < b.components.size() ? b.components[i] : Expr();
    if (!equals(x, y)) return false;
  }
  return true;
}

// --- general forms ---

Form Form::function(const Expr& f) {
  Form out;
  out.add({}, f);
  return out;
}

Form Form::differential(const Symbol& s) {
  Form out;
  out.add({s}, Expr(1));
  return out;
}

Form Form::d(const Expr& f) {
  Form out;
  for (const auto& s : symbols(f)) {
    if (s.kind == SymbolKind::Constant) continue;
    out.add({s}, partial(f, s));
  }
  return out;
}

Form Form::from_horizontal(const HorizontalForm& w) {
  Form out;
  for (const auto& [mask, c] : w.coefficients()) {
    Key k;
    for (int i = 0; i < w.n(); ++i)
      if (mask & (1u << i)) k.push_back(Symbol::base(i));
    out.add(std::move(k), c);
  }
  return out;
}

void Form::add(Key key, const Expr& f) {
  if (f.is_zero()) return;
  auto [it, inserted] = terms_.try_emplace(std::move(key), f);
  if (!inserted) {
    it->second += f;
    if (it->second.is_zero()) terms_.erase(it);
  }
}

int Form::degree() const { return terms_.empty() ? 0 : static_cast<int>(terms_.begin()->first.size()); }

Form Form::operator+(const Form& o) const {
  Form out = *this;
  for (const auto& [k, c] : o.terms_) out.add(k, c);
  return out;
}

Form Form::operator-(const Form& o) const { return *this + o.scaled(Expr(-1)); }

Form Form::scaled(const Expr& f) const {
  return map([&](const Expr& c) { return c * f; });
}

Form Form::map(const std::function<Expr(const Expr&)>& fn) const {
  Form out;
  for (const auto& [k, c] : terms_) out.add(k, fn(c));
  return out;
}

Form Form::wedge(const Form& o) const {
  Form out;
  for (const auto& [k1, c1] : terms_) {
    for (const auto& [k2, c2] : o.terms_) {
      int inversions = 0;
      bool repeated = false;
      for (const auto& s : k2) {
        for (const auto& r : k1) {
          if (r == s) repeated = true;
          if (s < r) ++inversions;
        }
      }
      if (repeated) continue;
      Key k = k1;
      k.insert(k.end(), k2.begin(), k2.end());
      std::sort(k.begin(), k.end());
      const Expr c = c1 * c2;
      out.add(std::move(k), inversions % 2 == 0 ? c : -c);
    }
  }
  return out;
}

Form wedge(const Form& a, const Form& b) { return a.wedge(b); }

Form Form::exterior_derivative() const {
  Form out;
  for (const auto& [k, c] : terms_) {
    Form rest;
    rest.add(k, Expr(1));
    out = out + Form::d(c).wedge(rest);
  }
  return out;
}

Form Form::pullback(const Bindings& image) const {
  Form out;
  for (const auto& [k, c] : terms_) {
    Form acc = Form::function(substitute(c, image));
    for (const auto& s : k) {
      auto it = image.find(s);
      acc = acc.wedge(it == image.end() ? Form::differential(s) : Form::d(it->second));
      if (acc.is_zero()) break;
    }
    out = out + acc;
  }
  return out;
}

namespace {

using MaskMap = std::map<unsigned, Expr>;

// Horizontal image of one differential: dx^i, or du^a_J -> u^a_{J+i} dx^i.
std::vector<std::pair<int, Expr>> horizontal_image(const Symbol& s, const JetSpace& space) {
  std::vector<std::pair<int, Expr>> out;
  if (s.kind == SymbolKind::Base) {
    out.emplace_back(s.index, Expr(1));
  } else if (s.kind == SymbolKind::Field) {
    for (int i = 0; i < space.n(); ++i) {
      MultiIndex j = with_index(s.jet, i);
      JetSpace::check_order(static_cast<int>(j.size()));
      out.emplace_back(i, Expr::sym(Symbol::field(s.index, std::move(j))));
    }
  } else {
    throw Error(ErrorCode::PreconditionFailed, "form contains a differential of a non-coordinate symbol");
  }
  return out;
}

MaskMap horizontal_product(const Expr& coef, const std::vector<Symbol>& factors, const JetSpace& space) {
  MaskMap cur{{0u, coef}};
  for (const auto& s : factors) {
    MaskMap next;
    for (const auto& [mask, c] : cur) {
      for (const auto& [i, a] : horizontal_image(s, space)) {
        const int sg = append_sign(mask, i);
        if (sg == 0) continue;
        Expr v = c * a;
        if (sg < 0) v = -v;
        auto [it, ins] = next.try_emplace(mask | (1u << i), v);
        if (!ins) it->second += v;
      }
    }
    cur.clear();
    for (auto& [m, c] : next)
      if (!c.is_zero()) cur.emplace(m, std::move(c));
    if (cur.empty()) break;
  }
  return cur;
}

}  // namespace

HorizontalForm horizontal_part(const Form& f, const JetSpace& space) {
  HorizontalForm out(space.n(), f.degree());
  if (f.degree() > space.n()) return out;
  for (const auto& [k, c] : f.terms())
    for (const auto& [mask, v] : horizontal_product(c, k, space)) out.add(mask, v);
  return out;
}

SourceForm source_projection(const Form& f, const JetSpace& space) {
  const int n = space.n();
  const unsigned full = (1u << n) - 1;
  std::map<Symbol, Expr> contact;  // C_a^J keyed by u^a_J
  for (const auto& [k, c] : f.terms()) {
    if (static_cast<int>(k.size()) != n + 1) throw Error(ErrorCode::PreconditionFailed, "source projection needs an (n+1)-form");
    for (std::size_t p = 0; p < k.size(); ++p) {
      if (k[p].kind != SymbolKind::Field) continue;
      std::vector<Symbol> rest;
      for (std::size_t q = 0; q < k.size(); ++q)
        if (q != p) rest.push_back(k[q]);
      const auto prod = horizontal_product(c, rest, space);
      auto it = prod.find(full);
      if (it == prod.end()) continue;
      contact[k[p]] += p % 2 == 0 ? it->second : -it->second;
    }
  }
  SourceForm out;
  out.components.assign(space.m(), Expr());
  for (const auto& [s, cj] : contact) {
    const Expr term = total_derivative(cj, s.jet, space);
    out.components[s.index] += s.jet.size() % 2 == 0 ? term : -term;
  }
  return out;
}

// --- vector fields ---

bool VectorField::is_zero() const {
  for (const auto& e : base)
    if (!e.is_zero()) return false;
  for (const auto& e : fiber)
    if (!e.is_zero()) return false;
  return true;
}

void validate(const VectorField& xi, const JetSpace& space) {
  if (static_cast<int>(xi.base.size()) != space.n() || static_cast<int>(xi.fiber.size()) != space.m())
    throw Error(ErrorCode::Schema, "vector field has the wrong number of components");
  for (const auto& e : xi.base)
    for (const auto& s : symbols(e))
      if (s.kind != SymbolKind::Base && s.kind != SymbolKind::Constant)
        throw Error(ErrorCode::PreconditionFailed, "vector field is not projectable: base component depends on fibers");
  for (const auto& e : xi.fiber)
    for (const auto& s : symbols(e))
      if (s.kind == SymbolKind::Param || s.order() > 0)
        throw Error(ErrorCode::PreconditionFailed, "fiber component depends on derivatives");
}

Prolongation prolong(const VectorField& xi, int order, const JetSpace& space) {
  JetSpace::check_order(order);
  Prolongation out;
  std::vector<Expr> dxi;  // reused per i
  for (const auto& j : space.multi_indices(order)) {
    for (int a = 0; a < space.m(); ++a) {
      if (j.empty()) {
        out[Symbol::field(a)] = xi.fiber[a];
        continue;
      }
      const int i = j.back();
      MultiIndex prev(j.begin(), j.end() - 1);
      Expr v = total_derivative(out.at(Symbol::field(a, prev)), i, space);
      for (int k = 0; k < space.n(); ++k) {
        const Expr dk = total_derivative(xi.base[k], i, space);
        if (dk.is_zero()) continue;
        v -= Expr::sym(Symbol::field(a, with_index(prev, k))) * dk;
      }
      out[Symbol::field(a, j)] = v;
    }
  }
  return out;
}

std::vector<Expr> vertical_part(const VectorField& xi, const JetSpace& space) {
  std::vector<Expr> out(space.m());
  for (int a = 0; a < space.m(); ++a) {
    Expr v = xi.fiber[a];
    for (int i = 0; i < space.n(); ++i) v -= space.u(a, {i}) * xi.base[i];
    out[a] = v;
  }
  return out;
}

Expr apply_field(const VectorField& xi, const Expr& f, const JetSpace& space) {
  const Prolongation pr = prolong(xi, jet_order(f), space);
  return apply_derivation(f, [&](const Symbol& s) -> Expr {
    if (s.kind == SymbolKind::Base) return xi.base[s.index];
    if (s.kind == SymbolKind::Field) return pr.at(s);
    return Expr();
  });
}

Expr base_divergence(const VectorField& xi, const JetSpace& space) {
  (void)space;
  Expr out;
  for (std::size_t i = 0; i < xi.base.size(); ++i) out += partial(xi.base[i], Symbol::base(static_cast<int>(i)));
  return out;
}

// --- sections ---

Bindings jet_bindings(const Section& s, int order, const JetSpace& space) {
  Bindings b;
  for (const auto& j : space.multi_indices(order)) {
    for (int a = 0; a < space.m(); ++a) {
      Expr v = s.values[a];
      for (int i : j) v = partial(v, Symbol::base(i));
      b[Symbol::field(a, j)] = v;
    }
  }
  return b;
}

HorizontalForm pullback_section(const HorizontalForm& w, const Section& s, const JetSpace& space) {
  const Bindings b = jet_bindings(s, w.jet_order(), space);
  return w.map([&](const Expr& c) { return substitute(c, b); });
}

Form pullback_section(const Form& w, const Section& s, const JetSpace& space) {
  int order = 0;
  for (const auto& [k, c] : w.terms()) {
    order = std::max(order, jet_order(c));
    for (const auto& sym : k) order = std::max(order, sym.order());
  }
  return w.pullback(jet_bindings(s, order, space));
}

}  // namespace vjp
