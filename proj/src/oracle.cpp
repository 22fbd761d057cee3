#include "vjp/oracle.hpp"

#include <cmath>
#include <span>

#include "vjp/error.hpp"

namespace vjp {

namespace {

struct Grid {
  int n = 0;
  int points = 0;
  std::vector<std::array<double, 2>> box;
  std::vector<double> spacing;

  std::size_t size() const {
    std::size_t s = 1;
    for (int i = 0; i < n; ++i) s *= static_cast<std::size_t>(points);
    return s;
  }
  std::vector<int> index(std::size_t flat) const {
    std::vector<int> out(n);
    for (int i = n - 1; i >= 0; --i) {
      out[i] = static_cast<int>(flat % points);
      flat /= points;
    }
    return out;
  }
  std::size_t flat(const std::vector<int>& idx) const {
    std::size_t f = 0;
    for (int i = 0; i < n; ++i) f = f * points + idx[i];
    return f;
  }
  double coord(int axis, int i) const { return box[axis][0] + spacing[axis] * i; }
  // Trapezoid weight.
  double weight(const std::vector<int>& idx) const {
    double w = 1.0;
    for (int i = 0; i < n; ++i) w *= spacing[i] * ((idx[i] == 0 || idx[i] == points - 1) ? 0.5 : 1.0);
    return w;
  }
};

Grid make_grid(int n, const std::vector<std::array<double, 2>>& box, int points) {
  if (static_cast<int>(box.size()) != n) throw Error(ErrorCode::Schema, "box dimension does not match the base");
  if (points < 5) throw Error(ErrorCode::PreconditionFailed, "grid needs at least 5 points per axis");
  Grid g{n, points, box, {}};
  for (int i = 0; i < n; ++i) g.spacing.push_back((box[i][1] - box[i][0]) / (points - 1));
  return g;
}

std::vector<Symbol> base_slots(const JetSpace& space) {
  std::vector<Symbol> out;
  for (int i = 0; i < space.n(); ++i) out.push_back(Symbol::base(i));
  return out;
}

// Jet values of exprs on the grid; points where mask(x) is false get 0.
std::map<Symbol, std::vector<double>> sample_jets(const JetSpace& space, const std::vector<Expr>& f, const Grid& g,
                                                  int order, const std::function<bool(std::span<const double>)>& mask) {
  const auto slots = base_slots(space);
  std::map<Symbol, std::vector<double>> out;
  std::vector<std::pair<Symbol, Evaluator>> evs;
  for (const auto& j : space.multi_indices(order))
    for (int a = 0; a < space.m(); ++a) {
      Expr v = f[a];
      for (int i : j) v = partial(v, Symbol::base(i));
      evs.emplace_back(Symbol::field(a, j), Evaluator(v, slots));
    }
  for (auto& [s, e] : evs) out[s].resize(g.size());
  std::vector<double> x(space.n());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto idx = g.index(p);
    for (int i = 0; i < space.n(); ++i) x[i] = g.coord(i, idx[i]);
    const bool on = !mask || mask(x);
    for (auto& [s, e] : evs) out[s][p] = on ? e(x) : 0.0;
  }
  return out;
}

std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) < 1e-300) throw Error(ErrorCode::IntegratorFailure, "singular Jacobian in the top-derivative solve");
    std::swap(a[piv], a[c]);
    std::swap(b[piv], b[c]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return x;
}

}  // namespace

std::size_t SampledSection::size() const {
  std::size_t s = 1;
  for (std::size_t i = 0; i < box.size(); ++i) s *= static_cast<std::size_t>(points);
  return s;
}

SampledSection sample_section(const JetSpace& space, const std::vector<Expr>& sigma,
                              const std::vector<std::array<double, 2>>& box, int points, int order) {
  const Grid g = make_grid(space.n(), box, points);
  SampledSection out{box, points, g.spacing, sample_jets(space, sigma, g, order, {})};
  for (int i = 0; i < space.n(); ++i) {
    auto& v = out.values[Symbol::base(i)];
    v.resize(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) v[p] = g.coord(i, g.index(p)[i]);
  }
  return out;
}

Expr bump(const JetSpace& space, const std::vector<double>& center, double radius) {
  Expr rho2;
  const Expr inv_r(Rational(1.0 / radius));
  for (int i = 0; i < space.n(); ++i) rho2 += ((space.x(i) - Expr(Rational(center[i]))) * inv_r).pow(2);
  return Expr::func(Fn::Exp, Expr(1) - (Expr(1) - rho2).inverse());
}

namespace {

double gateaux_residual(const Expr& lagrangian, const SourceForm& eta, const JetSpace& space,
                        const std::vector<Expr>& sigma, const Grid& g, const GateauxOptions& opt,
                        GateauxResult* detail) {
  const int n = space.n();
  const int r = jet_order(lagrangian);
  const int k = std::max(r, eta.jet_order());
  std::vector<double> center(n);
  double radius = 1e300;
  for (int i = 0; i < n; ++i) {
    center[i] = 0.5 * (g.box[i][0] + g.box[i][1]);
    radius = std::min(radius, 0.4 * (g.box[i][1] - g.box[i][0]));
  }
  std::vector<Expr> variation;
  const Expr b = bump(space, center, radius);
  for (int a = 0; a < space.m(); ++a) {
    const double dir = a < static_cast<int>(opt.direction.size()) ? opt.direction[a] : (a % 2 == 0 ? 1.0 : -0.7);
    variation.push_back(b * Expr(Rational(dir)));
  }
  const auto inside = [&](std::span<const double> x) {
    double rho2 = 0.0;
    for (int i = 0; i < n; ++i) rho2 += (x[i] - center[i]) * (x[i] - center[i]) / (radius * radius);
    return rho2 < 1.0 - 1e-3;
  };
  const auto s_jets = sample_jets(space, sigma, g, k, {});
  const auto d_jets = sample_jets(space, variation, g, r, inside);

  const auto l_slots = space.coordinates(r);
  const Evaluator lag(lagrangian, l_slots);
  const auto e_slots = space.coordinates(eta.jet_order());
  std::vector<Evaluator> euler;
  for (const auto& e : eta.components) euler.emplace_back(e, e_slots);

  // Column pointers per slot; null for base coordinates.
  const auto columns = [](const std::vector<Symbol>& slots, const std::map<Symbol, std::vector<double>>& jets) {
    std::vector<const double*> out;
    for (const auto& sym : slots) out.push_back(sym.kind == SymbolKind::Base ? nullptr : jets.at(sym).data());
    return out;
  };
  const auto l_sigma = columns(l_slots, s_jets);
  const auto l_delta = columns(l_slots, d_jets);
  const auto e_sigma = columns(e_slots, s_jets);
  std::vector<const double*> d_values;
  for (int a = 0; a < space.m(); ++a) d_values.push_back(d_jets.at(Symbol::field(a)).data());
  std::vector<const double*> d_all;
  for (const auto& [sym, v] : d_jets) d_all.push_back(v.data());

  std::vector<double> lv(l_slots.size()), ev(e_slots.size());
  double d1 = 0.0, d2 = 0.0, pairing = 0.0;
  const double s1 = opt.step, s2 = opt.step / 2;
  for (std::size_t p = 0; p < g.size(); ++p) {
    bool active = false;
    for (const double* col : d_all) active = active || col[p] != 0.0;
    if (!active) continue;
    const auto idx = g.index(p);
    const double w = g.weight(idx);
    const auto at = [&](double s) {
      for (std::size_t q = 0; q < l_slots.size(); ++q)
        lv[q] = l_sigma[q] ? l_sigma[q][p] + s * l_delta[q][p] : g.coord(l_slots[q].index, idx[l_slots[q].index]);
      return lag(lv);
    };
    d1 += w * (at(s1) - at(-s1)) / (2 * s1);
    d2 += w * (at(s2) - at(-s2)) / (2 * s2);
    for (std::size_t q = 0; q < e_slots.size(); ++q)
      ev[q] = e_sigma[q] ? e_sigma[q][p] : g.coord(e_slots[q].index, idx[e_slots[q].index]);
    for (int a = 0; a < space.m(); ++a) pairing += w * euler[a](ev) * d_values[a][p];
  }
  const double derivative = (4 * d2 - d1) / 3;
  if (detail) {
    detail->action_derivative = derivative;
    detail->euler_pairing = pairing;
  }
  return std::abs(derivative - pairing) / std::max({1.0, std::abs(derivative), std::abs(pairing)});
}

}  // namespace

GateauxResult gateaux_check(const Expr& lagrangian, const SourceForm& eta, const JetSpace& space,
                            const std::vector<Expr>& sigma, const std::vector<std::array<double, 2>>& box,
                            const GateauxOptions& opt) {
  const int n = space.n();
  if (n < 1 || n > 2) throw Error(ErrorCode::PreconditionFailed, "gateaux check supports one or two base dimensions");
  if (static_cast<int>(sigma.size()) != space.m() || static_cast<int>(eta.components.size()) != space.m())
    throw Error(ErrorCode::Schema, "section and source form need one component per field");
  const int points = opt.points > 0 ? opt.points : (n == 1 ? 2048 : 256);
  GateauxResult out;
  out.residual = gateaux_residual(lagrangian, eta, space, sigma, make_grid(n, box, points), opt, &out);
  const double coarse = gateaux_residual(lagrangian, eta, space, sigma, make_grid(n, box, points / 2), opt, nullptr);
  out.richardson = std::abs(out.residual - coarse);
  out.grid_warning = out.richardson > opt.tolerance;
  return out;
}

ConservationResult conservation_check(const HorizontalForm& current, const SourceForm& eta, const JetSpace& space,
                                      const OdeProblem& ode) {
  if (space.n() != 1) throw Error(ErrorCode::PreconditionFailed, "the integrator path needs one base dimension; supply a sampled section");
  const int m = space.m();
  const int k = eta.jet_order();
  if (k < 1) throw Error(ErrorCode::PreconditionFailed, "source form is not a differential equation");
  if (static_cast<int>(ode.initial.size()) != m) throw Error(ErrorCode::Schema, "initial data needs one entry per field");
  for (const auto& v : ode.initial)
    if (static_cast<int>(v.size()) != k) throw Error(ErrorCode::Schema, "initial data needs u and derivatives below the equation order");
  if (current.degree() != 0) throw Error(ErrorCode::PreconditionFailed, "current must be a function for n = 1");

  const auto slots = space.coordinates(k);
  std::map<Symbol, int> slot_of;
  for (std::size_t i = 0; i < slots.size(); ++i) slot_of[slots[i]] = static_cast<int>(i);
  const auto jet = [](int a, int order) { return Symbol::field(a, MultiIndex(order, 0)); };

  std::vector<Evaluator> e_ev;
  std::vector<std::vector<Evaluator>> jac(m);
  for (int a = 0; a < m; ++a) {
    e_ev.emplace_back(eta.components[a], slots);
    for (int b = 0; b < m; ++b) jac[a].emplace_back(partial(eta.components[a], jet(b, k)), slots);
  }
  if (jet_order(current.coefficient(0)) > k) throw Error(ErrorCode::PreconditionFailed, "current order exceeds the equation order");
  const Evaluator c_ev(current.coefficient(0), slots);

  std::vector<double> vals(slots.size(), 0.0);
  std::vector<double> top(m, 0.0);
  const auto load = [&](double t, const std::vector<double>& y) {
    vals[slot_of.at(Symbol::base(0))] = t;
    for (int a = 0; a < m; ++a)
      for (int j = 0; j < k; ++j) vals[slot_of.at(jet(a, j))] = y[a * k + j];
  };
  const auto solve_top = [&](double t, const std::vector<double>& y) {
    load(t, y);
    for (int it = 0; it < 60; ++it) {
      for (int a = 0; a < m; ++a) vals[slot_of.at(jet(a, k))] = top[a];
      std::vector<double> res(m);
      std::vector<std::vector<double>> jm(m, std::vector<double>(m));
      double norm = 0.0;
      for (int a = 0; a < m; ++a) {
        res[a] = -e_ev[a](vals);
        norm = std::max(norm, std::abs(res[a]));
        for (int b = 0; b < m; ++b) jm[a][b] = jac[a][b](vals);
      }
      const auto dx = solve(jm, res);
      double step = 0.0;
      for (int a = 0; a < m; ++a) {
        top[a] += dx[a];
        step = std::max(step, std::abs(dx[a]));
      }
      if (!std::isfinite(step)) break;
      if (step <= 1e-14 * (1.0 + std::abs(top[0])) || norm == 0.0) {
        for (int a = 0; a < m; ++a) vals[slot_of.at(jet(a, k))] = top[a];
        return top;
      }
    }
    throw Error(ErrorCode::IntegratorFailure, "Newton solve for the top derivative did not converge");
  };
  const auto rhs = [&](double t, const std::vector<double>& y) {
    const auto w = solve_top(t, y);
    std::vector<double> dy(y.size());
    for (int a = 0; a < m; ++a) {
      for (int j = 0; j + 1 < k; ++j) dy[a * k + j] = y[a * k + j + 1];
      dy[a * k + k - 1] = w[a];
    }
    return dy;
  };
  const auto current_at = [&](double t, const std::vector<double>& y) {
    solve_top(t, y);
    return c_ev(vals);
  };

  std::vector<double> y;
  for (const auto& v : ode.initial) y.insert(y.end(), v.begin(), v.end());
  const int steps = static_cast<int>(std::llround((ode.t1 - ode.t0) / ode.step));
  const double h = (ode.t1 - ode.t0) / steps;
  ConservationResult out;
  out.initial = current_at(ode.t0, y);
  out.steps = steps;
  const auto axpy = [](const std::vector<double>& a, double s, const std::vector<double>& b) {
    std::vector<double> r(a);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += s * b[i];
    return r;
  };
  for (int step = 0; step < steps; ++step) {
    const double t = ode.t0 + step * h;
    const auto k1 = rhs(t, y);
    const auto k2 = rhs(t + h / 2, axpy(y, h / 2, k1));
    const auto k3 = rhs(t + h / 2, axpy(y, h / 2, k2));
    const auto k4 = rhs(t + h, axpy(y, h, k3));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    for (double v : y)
      if (!std::isfinite(v)) throw Error(ErrorCode::IntegratorFailure, "trajectory left the finite range");
    out.drift = std::max(out.drift, std::abs(current_at(t + h, y) - out.initial));
  }
  return out;
}

double conservation_check_sampled(const HorizontalForm& current, const JetSpace& space, const std::vector<Expr>& sigma,
                                  const std::vector<std::array<double, 2>>& box, int points) {
  const int n = space.n();
  const Grid g = make_grid(n, box, points);
  const auto comps = current.current_components();
  int order = 0;
  for (const auto& c : comps) order = std::max(order, jet_order(c));
  const auto jets = sample_jets(space, sigma, g, order, {});
  const auto slots = space.coordinates(order);
  std::vector<std::vector<double>> f(n, std::vector<double>(g.size()));
  std::vector<double> v(slots.size());
  for (int i = 0; i < n; ++i) {
    const Evaluator ev(comps[i], slots);
    for (std::size_t p = 0; p < g.size(); ++p) {
      const auto idx = g.index(p);
      for (std::size_t q = 0; q < slots.size(); ++q)
        v[q] = slots[q].kind == SymbolKind::Base ? g.coord(slots[q].index, idx[slots[q].index]) : jets.at(slots[q])[p];
      f[i][p] = ev(v);
    }
  }
  double worst = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto idx = g.index(p);
    bool interior = true;
    for (int i = 0; i < n; ++i) interior = interior && idx[i] >= 2 && idx[i] <= points - 3;
    if (!interior) continue;
    double div = 0.0;
    for (int i = 0; i < n; ++i) {
      auto at = [&](int off) {
        auto j = idx;
        j[i] += off;
        return f[i][g.flat(j)];
      };
      div += (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * g.spacing[i]);
    }
    worst = std::max(worst, std::abs(div));
  }
  return worst;
}

CrosscheckResult symbolic_numeric_crosscheck(const Expr& a, const Expr& b, int trials, const EqualityConfig& cfg) {
  const EqualityResult r = sampled_compare(a, b, trials, cfg);
  return {r.equal, r.max_deviation};
}

}  // namespace vjp
