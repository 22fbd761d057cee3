#include "vjp/varcalc.hpp"

#include <algorithm>

#include "vjp/error.hpp"
#include "vjp/eval.hpp"

namespace vjp {

namespace {

int count_of(const MultiIndex& j, int i) { return static_cast<int>(std::count(j.begin(), j.end(), i)); }

bool contains_multi(const MultiIndex& j, const MultiIndex& k) {
  for (int i : k)
    if (count_of(k, i) > count_of(j, i)) return false;
  return true;
}

MultiIndex minus_multi(const MultiIndex& j, const MultiIndex& k) {
  MultiIndex out = j;
  for (int i : k) out.erase(std::find(out.begin(), out.end(), i));
  return out;
}

Rational binomial_multi(const MultiIndex& j, const MultiIndex& k) {
  Rational r(1);
  for (int i = 0; i < 32; ++i) {
    const int a = count_of(j, i), b = count_of(k, i);
    for (int s = 1; s <= b; ++s) r = r * (a - b + s) / s;
  }
  return r;
}

Expr sign_multi(const MultiIndex& j, const Expr& e) { return j.size() % 2 == 0 ? e : -e; }

Expr fiber_center(const Center& c, int a) {
  return a < static_cast<int>(c.fiber.size()) ? c.fiber[a] : Expr();
}

Expr base_center(const Center& c, int i) { return i < static_cast<int>(c.base.size()) ? c.base[i] : Expr(); }

// u^a -> c^a + t(u^a - c^a), u^a_J -> t u^a_J.
Bindings fiber_scaling(const JetSpace& space, int order, const Center& center) {
  const Expr t = t_param();
  Bindings b;
  for (const auto& j : space.multi_indices(order)) {
    for (int a = 0; a < space.m(); ++a) {
      const Expr u = space.u(a, j);
      if (j.empty()) {
        const Expr c = fiber_center(center, a);
        b[Symbol::field(a)] = c + t * (u - c);
      } else {
        b[Symbol::field(a, j)] = t * u;
      }
    }
  }
  return b;
}

void require_helmholtz(const SourceForm& eta, const JetSpace& space) {
  if (!helmholtz_check(eta, space).passes)
    throw Error(ErrorCode::HelmholtzFailed, "source form fails the Helmholtz conditions");
}

void require_order_two(const Expr& lagrangian) {
  if (jet_order(lagrangian) > 2)
    throw Error(ErrorCode::UnsupportedOrder, "momentum formulas are implemented through order 2 only");
}

}  // namespace

SourceForm euler_lagrange(const Expr& lagrangian, const JetSpace& space) {
  SourceForm out;
  out.components.assign(space.m(), Expr());
  const int r = jet_order(lagrangian);
  JetSpace::check_order(2 * r);
  for (const auto& j : space.multi_indices(r)) {
    for (int a = 0; a < space.m(); ++a) {
      const Expr p = partial(lagrangian, Symbol::field(a, j));
      if (p.is_zero()) continue;
      out.components[a] += sign_multi(j, total_derivative(p, j, space));
    }
  }
  return out;
}

SourceForm euler_lagrange(const HorizontalForm& lambda, const JetSpace& space) {
  return euler_lagrange(lambda.top(), space);
}

HelmholtzResult helmholtz_check(const SourceForm& eta, const JetSpace& space) {
  HelmholtzResult res;
  const int k = eta.jet_order();
  const auto indices = space.multi_indices(k);
  const int m = space.m();
  // c[a][b][J] = dE_a / du^b_J
  std::vector<std::vector<std::map<MultiIndex, Expr>>> c(m, std::vector<std::map<MultiIndex, Expr>>(m));
  for (int a = 0; a < m; ++a) {
    const Expr ea = a < static_cast<int>(eta.components.size()) ? eta.components[a] : Expr();
    for (int b = 0; b < m; ++b)
      for (const auto& j : indices) {
        Expr d = partial(ea, Symbol::field(b, j));
        if (!d.is_zero()) c[a][b][j] = std::move(d);
      }
  }
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      for (const auto& kk : indices) {
        auto it = c[a][b].find(kk);
        Expr r = it == c[a][b].end() ? Expr() : it->second;
        for (const auto& [j, cba] : c[b][a]) {
          if (!contains_multi(j, kk)) continue;
          const Expr term = total_derivative(cba, minus_multi(j, kk), space) * Expr(binomial_multi(j, kk));
          r -= sign_multi(j, term);
        }
        if (!equals(r, Expr())) {
          res.passes = false;
          res.residuals.push_back({a, b, kk, r});
        }
      }
    }
  }
  return res;
}

Expr tonti_lagrangian(const SourceForm& eta, const JetSpace& space, const Center& center) {
  require_helmholtz(eta, space);
  const Bindings scale = fiber_scaling(space, eta.jet_order(), center);
  Expr integrand;
  for (int a = 0; a < space.m() && a < static_cast<int>(eta.components.size()); ++a) {
    if (eta.components[a].is_zero()) continue;
    integrand += (space.u(a) - fiber_center(center, a)) * substitute(eta.components[a], scale);
  }
  return integrate_t(integrand);
}

HorizontalForm dH_homotopy(const Expr& g, const JetSpace& space, const Center& center) {
  const int n = space.n();
  if (!euler_lagrange(g, space).is_zero()) {
    const auto e = euler_lagrange(g, space);
    for (const auto& c : e.components)
      if (!equals(c, Expr()))
        throw Error(ErrorCode::NotVariationallyTrivial, "form is not variationally trivial (E_n does not vanish)");
  }
  const int r = jet_order(g);
  const Bindings scale = fiber_scaling(space, r, center);
  std::vector<Expr> h(n);
  for (const auto& j : space.multi_indices(r)) {
    if (j.empty()) continue;
    for (int a = 0; a < space.m(); ++a) {
      const Expr dg = partial(g, Symbol::field(a, j));
      if (dg.is_zero()) continue;
      Expr p = substitute(dg, scale);
      const Expr q = space.u(a) - fiber_center(center, a);
      for (std::size_t s = 0; s < j.size(); ++s) {
        const MultiIndex tail(j.begin() + static_cast<long>(s) + 1, j.end());
        h[j[s]] += p * total_derivative(q, tail, space);
        p = -total_derivative(p, j[s], space);
      }
    }
  }
  std::vector<Expr> nu(n);
  for (int i = 0; i < n; ++i) nu[i] = integrate_t(h[i]);

  // Base part: radial homotopy of g(x, c, 0) about the base center.
  Bindings at_center;
  for (const auto& j : space.multi_indices(r))
    for (int a = 0; a < space.m(); ++a) at_center[Symbol::field(a, j)] = j.empty() ? fiber_center(center, a) : Expr();
  const Expr g0 = substitute(g, at_center);
  if (!g0.is_zero()) {
    const Expr t = t_param();
    Bindings radial;
    for (int i = 0; i < n; ++i) {
      const Expr x0 = base_center(center, i);
      radial[Symbol::base(i)] = x0 + t * (space.x(i) - x0);
    }
    const Expr phi = integrate_t(t.pow(n - 1) * substitute(g0, radial));
    for (int i = 0; i < n; ++i) nu[i] += (space.x(i) - base_center(center, i)) * phi;
  }
  HorizontalForm out = HorizontalForm::current(nu);
  if (!equals(dH(out, space).top(), g))
    throw Error(ErrorCode::PropositionViolated, "homotopy potential failed its d_H certificate");
  return out;
}

HorizontalForm dH_homotopy(const HorizontalForm& w, const JetSpace& space, const Center& center) {
  if (w.degree() != space.n()) throw Error(ErrorCode::PreconditionFailed, "d_H homotopy expects a degree-n form");
  return dH_homotopy(w.top(), space, center);
}

Expr lie_derivative_volume(const VectorField& xi, const Expr& lagrangian, const JetSpace& space) {
  return apply_field(xi, lagrangian, space) + lagrangian * base_divergence(xi, space);
}

HorizontalForm lie_derivative_current(const VectorField& xi, const HorizontalForm& f, const JetSpace& space) {
  const auto comps = f.degree() == space.n() - 1 && !f.is_zero() ? f.current_components()
                                                                 : std::vector<Expr>(space.n());
  const Expr div = base_divergence(xi, space);
  std::vector<Expr> out(space.n());
  for (int j = 0; j < space.n(); ++j) {
    Expr v = apply_field(xi, comps[j], space) + comps[j] * div;
    for (int i = 0; i < space.n(); ++i) v -= comps[i] * partial(xi.base[j], Symbol::base(i));
    out[j] = v;
  }
  return HorizontalForm::current(out);
}

LieLagrangian variational_lie_derivative_lagrangian(const VectorField& xi, const Expr& lagrangian,
                                                    const JetSpace& space) {
  require_order_two(lagrangian);
  validate(xi, space);
  const int n = space.n();
  const auto v = vertical_part(xi, space);
  std::vector<Expr> eps(n);
  for (int i = 0; i < n; ++i) eps[i] = xi.base[i] * lagrangian;
  for (int a = 0; a < space.m(); ++a) {
    if (v[a].is_zero()) continue;
    for (int i = 0; i < n; ++i) {
      Expr coef = partial(lagrangian, Symbol::field(a, {i}));
      for (int j = 0; j < n; ++j) {
        Expr pij = partial(lagrangian, Symbol::field(a, sorted_multi({i, j})));
        if (pij.is_zero()) continue;
        if (i != j) pij *= Expr(Rational(1, 2));
        coef -= total_derivative(pij, j, space);
        eps[i] += pij * total_derivative(v[a], j, space);
      }
      eps[i] += coef * v[a];
    }
  }
  return {lie_derivative_volume(xi, lagrangian, space), HorizontalForm::current(eps)};
}

Expr contraction(const VectorField& xi, const SourceForm& eta, const JetSpace& space) {
  const auto v = vertical_part(xi, space);
  Expr out;
  for (int a = 0; a < space.m() && a < static_cast<int>(eta.components.size()); ++a) out += v[a] * eta.components[a];
  return out;
}

SourceForm variational_lie_derivative_source(const VectorField& xi, const SourceForm& eta, const JetSpace& space) {
  require_helmholtz(eta, space);
  return euler_lagrange(contraction(xi, eta, space), space);
}

const char* symmetry_kind_name(SymmetryKind k) {
  switch (k) {
    case SymmetryKind::Lagrangian: return "lagrangian";
    case SymmetryKind::EquationOnly: return "equation-only";
    case SymmetryKind::None: return "none";
  }
  return "?";
}

SymmetryKind classify_symmetry(const VectorField& xi, const Expr& lagrangian, const SourceForm& eta,
                               const JetSpace& space) {
  if (equals(lie_derivative_volume(xi, lagrangian, space), Expr())) return SymmetryKind::Lagrangian;
  const auto lie_eta = euler_lagrange(contraction(xi, eta, space), space);
  for (const auto& c : lie_eta.components)
    if (!equals(c, Expr())) return SymmetryKind::None;
  return SymmetryKind::EquationOnly;
}

namespace {

HorizontalForm zero_current(const JetSpace& space) { return HorizontalForm(space.n(), space.n() - 1); }

void require_symmetry(const VectorField& xi, const Expr& lagrangian, const SourceForm& eta, const JetSpace& space) {
  if (classify_symmetry(xi, lagrangian, eta, space) == SymmetryKind::None)
    throw Error(ErrorCode::NotASymmetry, "vector field is not a symmetry of the equations");
}

}  // namespace

BesselHagen noether_bessel_hagen_current(const VectorField& xi, const Expr& lagrangian, const SourceForm& eta,
                                         const JetSpace& space, const Center& center) {
  require_symmetry(xi, lagrangian, eta, space);
  const auto ll = variational_lie_derivative_lagrangian(xi, lagrangian, space);
  BesselHagen out;
  out.beta = ll.lie.is_zero() ? zero_current(space) : dH_homotopy(ll.lie, space, center);
  out.current = ll.epsilon - out.beta;
  out.certified = equals(contraction(xi, eta, space) + dH(out.current, space).top(), Expr());
  return out;
}

StrongCurrent strong_noether_current(const VectorField& xi, const Expr& lagrangian, const SourceForm& eta,
                                     const JetSpace& space, const Center& center) {
  require_symmetry(xi, lagrangian, eta, space);
  const auto ll = variational_lie_derivative_lagrangian(xi, lagrangian, space);
  const Expr w = contraction(xi, eta, space);
  StrongCurrent out;
  out.nu = w.is_zero() ? zero_current(space) : dH_homotopy(w, space, center);
  out.current = out.nu + ll.epsilon;
  const HorizontalForm beta = ll.lie.is_zero() ? zero_current(space) : dH_homotopy(ll.lie, space, center);
  out.certified = equals(dH(out.current, space).top(), dH(beta, space).top());
  return out;
}

NoetherData noether_data(const VectorField& xi, const Expr& lagrangian, const SourceForm& eta,
                         const JetSpace& space, const Center& center) {
  NoetherData d;
  validate(xi, space);
  d.kind = classify_symmetry(xi, lagrangian, eta, space);
  if (d.kind == SymmetryKind::None) return d;
  const auto ll = variational_lie_derivative_lagrangian(xi, lagrangian, space);
  d.lie_lagrangian = ll.lie;
  d.epsilon = ll.epsilon;
  d.beta = ll.lie.is_zero() ? zero_current(space) : dH_homotopy(ll.lie, space, center);
  const Expr w = contraction(xi, eta, space);
  d.nu = w.is_zero() ? zero_current(space) : dH_homotopy(w, space, center);
  d.bessel_hagen = d.epsilon - d.beta;
  d.strong = d.nu + d.epsilon;
  d.bessel_hagen_certified = equals(w + dH(d.bessel_hagen, space).top(), Expr());
  d.strong_certified = equals(dH(d.strong, space).top(), dH(d.beta, space).top());
  const Expr lie_lie = lie_derivative_volume(xi, ll.lie, space);
  d.lie_lie_zero = equals(lie_lie, Expr());
  d.conservation_certified = equals(dH(lie_derivative_current(xi, d.strong, space), space).top(), lie_lie);
  return d;
}

}  // namespace vjp
