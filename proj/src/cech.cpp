#include "vjp/cech.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>

#include "vjp/error.hpp"
#include "vjp/eval.hpp"

namespace vjp {

namespace {

using Matrix = std::vector<std::vector<Expr>>;

Matrix minor_of(const Matrix& m, std::size_t r, std::size_t c) {
  Matrix out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i == r) continue;
    std::vector<Expr> row;
    for (std::size_t j = 0; j < m.size(); ++j)
      if (j != c) row.push_back(m[i][j]);
    out.push_back(std::move(row));
  }
  return out;
}

Expr determinant(const Matrix& m) {
  if (m.empty()) return Expr(1);
  if (m.size() == 1) return m[0][0];
  Expr out;
  for (std::size_t c = 0; c < m.size(); ++c) {
    if (m[0][c].is_zero()) continue;
    const Expr t = m[0][c] * determinant(minor_of(m, 0, c));
    out += c % 2 == 0 ? t : -t;
  }
  return out;
}

double determinant(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (a[piv][c] == 0.0) return 0.0;
    if (piv != c) {
      std::swap(a[piv], a[c]);
      det = -det;
    }
    det *= a[c][c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  return det;
}

std::vector<Symbol> y_coordinates(const JetSpace& space) {
  std::vector<Symbol> out;
  for (int i = 0; i < space.n(); ++i) out.push_back(Symbol::base(i));
  for (int a = 0; a < space.m(); ++a) out.push_back(Symbol::field(a));
  return out;
}

std::vector<Symbol> base_coordinates(const JetSpace& space) {
  std::vector<Symbol> out;
  for (int i = 0; i < space.n(); ++i) out.push_back(Symbol::base(i));
  return out;
}

std::vector<Symbol> cycle_params(int k) {
  std::vector<Symbol> out;
  for (int b = 0; b < k; ++b) out.push_back(Symbol::param(kCycleParamFirst + b));
  return out;
}

bool zero(const Expr& e) { return e.is_zero() || equals(e, Expr()); }

bool form_zero(const Form& f) {
  for (const auto& [k, c] : f.terms())
    if (!zero(c)) return false;
  return true;
}

bool source_zero(const SourceForm& s) {
  for (const auto& c : s.components)
    if (!zero(c)) return false;
  return true;
}

int form_order(const Form& f) {
  int order = 0;
  for (const auto& [k, c] : f.terms()) {
    order = std::max(order, jet_order(c));
    for (const auto& s : k) order = std::max(order, s.order());
  }
  return order;
}

bool on_total_space(const Form& f) {
  for (const auto& [k, c] : f.terms()) {
    if (jet_order(c) > 0) return false;
    for (const auto& s : k)
      if (!s.is_coordinate() || s.order() > 0) return false;
  }
  return true;
}

class NumericMap {
 public:
  NumericMap(const std::vector<Expr>& exprs, const std::vector<Symbol>& slots) {
    for (const auto& e : exprs) evals_.emplace_back(e, slots);
  }
  std::vector<double> operator()(std::span<const double> in) const {
    std::vector<double> out(evals_.size());
    for (std::size_t i = 0; i < evals_.size(); ++i) out[i] = evals_[i](in);
    return out;
  }
  std::size_t size() const { return evals_.size(); }

 private:
  std::vector<Evaluator> evals_;
};

std::array<double, 2> box(const std::vector<std::array<double, 2>>& b, std::size_t i) {
  return i < b.size() ? b[i] : std::array<double, 2>{0.0, 1.0};
}

// Values for every symbol of e at an interior point of the chart boxes.
double sample_value(const Expr& e, const Atlas& atlas, int chart, double frac = 0.37) {
  const Chart& c = atlas.charts()[chart];
  std::map<Symbol, double> v;
  for (const auto& s : symbols(e)) {
    if (s.kind == SymbolKind::Base) {
      const auto b = box(c.base_box, s.index);
      v[s] = b[0] + frac * (b[1] - b[0]);
    } else if (s.kind == SymbolKind::Field && s.jet.empty()) {
      const auto b = box(c.fiber_box, s.index);
      v[s] = b[0] + (1.0 - frac) * (b[1] - b[0]);
    } else if (s.kind == SymbolKind::Field) {
      v[s] = 0.3 + 0.1 * static_cast<double>(s.index + s.jet.size());
    } else if (s.kind == SymbolKind::Param) {
      v[s] = frac;
    }
  }
  return evaluate(e, v);
}

Form volume_minus(const JetSpace& space, int j) {
  Form::Key k;
  for (int i = 0; i < space.n(); ++i)
    if (i != j) k.push_back(Symbol::base(i));
  Form out;
  out.add(std::move(k), Expr(j % 2 == 0 ? 1 : -1));
  return out;
}

// First-order Lepage equivalent mu vol + dmu/du^a_j w^a ^ w_j.
Form lepage(const Expr& mu, const JetSpace& space) {
  if (jet_order(mu) > 1)
    throw Error(ErrorCode::NoRepresentative, "collation needs first-order overlap differences");
  Form out = Form::from_horizontal(HorizontalForm::volume(space.n(), mu));
  for (int a = 0; a < space.m(); ++a) {
    for (int j = 0; j < space.n(); ++j) {
      const Expr p = partial(mu, Symbol::field(a, {j}));
      if (p.is_zero()) continue;
      Form contact = Form::differential(Symbol::field(a));
      for (int l = 0; l < space.n(); ++l)
        contact = contact - Form::differential(Symbol::base(l)).scaled(space.u(a, {l}));
      out = out + contact.wedge(volume_minus(space, j)).scaled(p);
    }
  }
  return out;
}

std::string chart_pair(const Atlas& atlas, const Overlap& ov) {
  return atlas.charts()[ov.from].id + "->" + atlas.charts()[ov.to].id;
}

}  // namespace

// --- atlas ---

Atlas::Atlas(JetSpace space, std::vector<Chart> charts, std::vector<Overlap> overlaps)
    : space_(std::move(space)), charts_(std::move(charts)), overlaps_(std::move(overlaps)) {
  if (charts_.empty()) throw Error(ErrorCode::Schema, "atlas needs at least one chart");
  const int nc = static_cast<int>(charts_.size());
  for (const auto& ov : overlaps_) {
    if (ov.from < 0 || ov.from >= nc || ov.to < 0 || ov.to >= nc)
      throw Error(ErrorCode::Schema, "overlap refers to an unknown chart");
    if (static_cast<int>(ov.base_map.size()) != space_.n() || static_cast<int>(ov.fiber_map.size()) != space_.m())
      throw Error(ErrorCode::Schema, "transition map has the wrong number of components");
    for (const auto& e : ov.base_map)
      for (const auto& s : symbols(e))
        if (s.kind == SymbolKind::Field)
          throw Error(ErrorCode::PreconditionFailed, "transition " + chart_pair(*this, ov) + " is not fibered");
    for (const auto& e : ov.fiber_map)
      if (jet_order(e) > 0)
        throw Error(ErrorCode::PreconditionFailed, "transition " + chart_pair(*this, ov) + " depends on jets");
  }
  cache_.resize(overlaps_.size());
}

int Atlas::chart_index(const std::string& id) const {
  for (std::size_t i = 0; i < charts_.size(); ++i)
    if (charts_[i].id == id) return static_cast<int>(i);
  throw Error(ErrorCode::Schema, "unknown chart '" + id + "'");
}

bool Atlas::has_deck() const {
  return std::any_of(overlaps_.begin(), overlaps_.end(), [](const Overlap& o) { return o.from == o.to; });
}

std::vector<int> Atlas::between(int i, int j) const {
  std::vector<int> out;
  for (std::size_t k = 0; k < overlaps_.size(); ++k)
    if (overlaps_[k].from == i && overlaps_[k].to == j) out.push_back(static_cast<int>(k));
  return out;
}

Expr Atlas::jacobian_determinant(int overlap) const {
  const Overlap& ov = overlaps_.at(overlap);
  Matrix jac(space_.n(), std::vector<Expr>(space_.n()));
  for (int k = 0; k < space_.n(); ++k)
    for (int l = 0; l < space_.n(); ++l) jac[k][l] = partial(ov.base_map[k], Symbol::base(l));
  return determinant(jac);
}

const Bindings& Atlas::transition(int overlap, int order) const {
  auto& slot = cache_.at(overlap);
  if (auto it = slot.find(order); it != slot.end()) return it->second;
  const Overlap& ov = overlaps_[overlap];
  Bindings b;
  if (order == 0) {
    for (int i = 0; i < space_.n(); ++i) b[Symbol::base(i)] = ov.base_map[i];
    for (int a = 0; a < space_.m(); ++a) b[Symbol::field(a)] = ov.fiber_map[a];
  } else {
    JetSpace::check_order(order);
    b = transition(overlap, order - 1);
    const int n = space_.n();
    Matrix jac(n, std::vector<Expr>(n));
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) jac[k][l] = partial(ov.base_map[k], Symbol::base(l));
    const Expr inv_det = determinant(jac).inverse();
    // (dx/dx')[l][k] = cofactor(k,l) / det
    Matrix inv(n, std::vector<Expr>(n));
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) {
        const Expr cof = n == 1 ? Expr(1) : determinant(minor_of(jac, k, l));
        inv[l][k] = ((k + l) % 2 == 0 ? cof : -cof) * inv_det;
      }
    for (const auto& j : space_.multi_indices(order)) {
      if (static_cast<int>(j.size()) != order) continue;
      const int k = j.back();
      const MultiIndex head(j.begin(), j.end() - 1);
      for (int a = 0; a < space_.m(); ++a) {
        const Expr& lower = b.at(Symbol::field(a, head));
        Expr v;
        for (int l = 0; l < n; ++l)
          if (!inv[l][k].is_zero()) v += inv[l][k] * total_derivative(lower, l, space_);
        b[Symbol::field(a, j)] = v;
      }
    }
  }
  return slot.emplace(order, std::move(b)).first->second;
}

Expr Atlas::pull(const Expr& f_to, int overlap, int order) const {
  if (order < 0) order = jet_order(f_to);
  return substitute(f_to, transition(overlap, order));
}

HorizontalForm Atlas::pull(const HorizontalForm& w_to, int overlap) const {
  const Form f = Form::from_horizontal(w_to).pullback(transition(overlap, w_to.jet_order()));
  const HorizontalForm h = horizontal_part(f, space_);
  HorizontalForm out(space_.n(), w_to.degree());
  for (const auto& [mask, c] : h.coefficients()) out.add(mask, c);
  return out;
}

SourceForm Atlas::pull(const SourceForm& eta_to, int overlap) const {
  const Overlap& ov = overlaps_.at(overlap);
  const Expr det = jacobian_determinant(overlap);
  std::vector<Expr> pulled;
  for (const auto& e : eta_to.components) pulled.push_back(pull(e, overlap, eta_to.jet_order()));
  SourceForm out;
  for (int a = 0; a < space_.m(); ++a) {
    Expr v;
    for (int b = 0; b < space_.m(); ++b) {
      const Expr dpsi = partial(ov.fiber_map[b], Symbol::field(a));
      if (!dpsi.is_zero()) v += pulled[b] * dpsi;
    }
    out.components.push_back(v * det);
  }
  return out;
}

Form Atlas::pull(const Form& w_to, int overlap) const {
  return w_to.pullback(transition(overlap, form_order(w_to)));
}

std::vector<std::string> Atlas::cocycle_failures() const {
  std::vector<std::string> out;
  const int nc = static_cast<int>(charts_.size());
  for (int i = 0; i < nc; ++i)
    for (int j = 0; j < nc; ++j)
      for (int k = 0; k < nc; ++k) {
        if (i == j || j == k || i == k) continue;
        const auto ik = between(i, k);
        if (ik.empty()) continue;
        for (int e1 : between(i, j))
          for (int e2 : between(j, k)) {
            const Bindings& b = transition(e1, 0);
            std::vector<Expr> composite;
            for (const auto& e : overlaps_[e2].base_map) composite.push_back(substitute(e, b));
            for (const auto& e : overlaps_[e2].fiber_map) composite.push_back(substitute(e, b));
            const bool ok = std::any_of(ik.begin(), ik.end(), [&](int e3) {
              const Overlap& d = overlaps_[e3];
              for (int c = 0; c < space_.n(); ++c)
                if (!equals(composite[c], d.base_map[c])) return false;
              for (int a = 0; a < space_.m(); ++a)
                if (!equals(composite[space_.n() + a], d.fiber_map[a])) return false;
              return true;
            });
            if (!ok) out.push_back(charts_[i].id + "," + charts_[j].id + "," + charts_[k].id);
          }
      }
  return out;
}

void Atlas::set_constant_values(const std::map<std::string, Rational>& values) {
  constants_.clear();
  for (const auto& [name, v] : values) constants_[Symbol::constant(name)] = Expr(v);
}

Expr Atlas::numeric(const Expr& e) const { return constants_.empty() ? e : substitute(e, constants_); }

// --- presentations ---

void check_source_consistency(const Atlas& atlas, const std::vector<SourceForm>& eta) {
  if (eta.size() != atlas.charts().size()) throw Error(ErrorCode::Schema, "one source form per chart is required");
  for (std::size_t k = 0; k < atlas.overlaps().size(); ++k) {
    const Overlap& ov = atlas.overlaps()[k];
    if (!equals(eta[ov.from], atlas.pull(eta[ov.to], static_cast<int>(k))))
      throw Error(ErrorCode::InconsistentSourceForm, "source form does not transform on " + chart_pair(atlas, ov));
  }
}

namespace {

void fill_mu(const Atlas& atlas, Presentation& p) {
  for (std::size_t k = 0; k < atlas.overlaps().size(); ++k) {
    const Overlap& ov = atlas.overlaps()[k];
    Expr mu = p.lagrangians[ov.from] - atlas.pull(p.lagrangians[ov.to], static_cast<int>(k));
    if (!source_zero(euler_lagrange(mu, atlas.space())))
      throw Error(ErrorCode::NotVariationallyTrivial, "overlap difference on " + chart_pair(atlas, ov) + " has nonzero Euler-Lagrange form");
    p.mu.push_back(std::move(mu));
  }
}

}  // namespace

Presentation build_presentation(const Atlas& atlas, const std::vector<SourceForm>& eta) {
  check_source_consistency(atlas, eta);
  Presentation p;
  p.sources = eta;
  p.from_tonti = true;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    const auto h = helmholtz_check(eta[i], atlas.space());
    if (!h.passes) throw Error(ErrorCode::HelmholtzFailed, "chart " + atlas.charts()[i].id + " fails the Helmholtz conditions");
    p.lagrangians.push_back(tonti_lagrangian(eta[i], atlas.space(), atlas.charts()[i].center));
  }
  fill_mu(atlas, p);
  return p;
}

Presentation presentation_from_lagrangians(const Atlas& atlas, const std::vector<Expr>& lagrangians) {
  if (lagrangians.size() != atlas.charts().size()) throw Error(ErrorCode::Schema, "one Lagrangian per chart is required");
  Presentation p;
  p.lagrangians = lagrangians;
  for (const auto& l : lagrangians) p.sources.push_back(euler_lagrange(l, atlas.space()));
  check_source_consistency(atlas, p.sources);
  fill_mu(atlas, p);
  return p;
}

Cochain cech_coboundary(const Cochain& c, const Atlas& atlas) {
  Cochain out;
  out.degree = c.degree + 1;
  const int len = c.degree + 2;
  if (len > 3) return out;
  const int nc = static_cast<int>(atlas.charts().size());
  std::vector<int> idx(len, 0);
  const auto distinct = [&] {
    for (int a = 0; a < len; ++a)
      for (int b = a + 1; b < len; ++b)
        if (idx[a] == idx[b]) return false;
    return true;
  };
  while (true) {
    if (distinct()) {
      std::vector<std::vector<int>> faces;
      bool complete = true;
      for (int s = 0; s < len; ++s) {
        std::vector<int> f;
        for (int q = 0; q < len; ++q)
          if (q != s) f.push_back(idx[q]);
        if (!c.values.count(f)) complete = false;
        faces.push_back(std::move(f));
      }
      if (complete) {
        const auto first = atlas.between(idx[0], idx[1]);
        if (first.empty())
          throw Error(ErrorCode::MissingOverlap, "no overlap " + atlas.charts()[idx[0]].id + "->" + atlas.charts()[idx[1]].id);
        HorizontalForm acc(atlas.space().n(), c.values.at(faces[0]).degree());
        for (int s = 0; s < len; ++s) {
          HorizontalForm v = c.values.at(faces[s]);
          if (s == 0) v = atlas.pull(v, first.front());
          acc = s % 2 == 0 ? acc - v : acc + v;
        }
        out.values[idx] = acc;
      }
    }
    int p = len - 1;
    while (p >= 0 && ++idx[p] == nc) idx[p--] = 0;
    if (p < 0) break;
  }
  return out;
}

// --- cycles ---

namespace {

struct FaceData {
  int piece = 0;
  int coord = 0;
  int side = 0;
  int sign = 1;
  bool degenerate = false;
};

std::vector<std::vector<double>> face_samples(int d) {
  static const double pts[] = {0.137, 0.519, 0.853};
  std::vector<std::vector<double>> out;
  std::vector<int> i(d, 0);
  while (true) {
    std::vector<double> t;
    for (int r = 0; r < d; ++r) t.push_back(pts[i[r]]);
    out.push_back(std::move(t));
    int p = d - 1;
    while (p >= 0 && ++i[p] == 3) i[p--] = 0;
    if (p < 0) break;
  }
  return out;
}

std::vector<double> full_params(const std::vector<double>& t, int coord, int side) {
  std::vector<double> s(t);
  s.insert(s.begin() + coord, static_cast<double>(side));
  return s;
}

struct Hyperoctahedral {
  std::vector<int> perm;
  unsigned flips = 0;
  int sign = 1;
  std::vector<double> apply(const std::vector<double>& t) const {
    std::vector<double> out(t.size());
    for (std::size_t r = 0; r < t.size(); ++r) out[r] = (flips >> r & 1u) ? 1.0 - t[perm[r]] : t[perm[r]];
    return out;
  }
};

std::vector<Hyperoctahedral> hyperoctahedral(int d) {
  std::vector<Hyperoctahedral> out;
  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    int inv = 0;
    for (int a = 0; a < d; ++a)
      for (int b = a + 1; b < d; ++b)
        if (perm[a] > perm[b]) ++inv;
    for (unsigned f = 0; f < (1u << d); ++f) {
      const int flips = std::popcount(f);
      out.push_back({perm, f, ((inv + flips) % 2 == 0) ? 1 : -1});
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

bool close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol * std::max(1.0, std::max(std::abs(a[i]), std::abs(b[i])))) return false;
  return true;
}

}  // namespace

ClosureCertificate certify_closed(const Cycle& cycle, const Atlas& atlas, double tol) {
  const JetSpace& space = atlas.space();
  const int k = cycle.dim;
  const std::size_t width = cycle.in_base ? space.n() : space.n() + space.m();
  ClosureCertificate cert;
  if (k < 1 || k > kCycleParamLast - kCycleParamFirst + 1) {
    cert.failure = "cycle dimension out of range";
    return cert;
  }
  const auto params = cycle_params(k);
  std::vector<NumericMap> maps;
  for (const auto& piece : cycle.pieces) {
    if (piece.map.size() != width) throw Error(ErrorCode::Schema, "cycle '" + cycle.name + "' piece has the wrong number of coordinates");
    std::vector<Expr> m;
    for (const auto& e : piece.map) m.push_back(atlas.numeric(e));
    maps.emplace_back(m, params);
  }
  const auto coords = cycle.in_base ? base_coordinates(space) : y_coordinates(space);
  std::vector<NumericMap> transitions;
  for (const auto& ov : atlas.overlaps()) {
    std::vector<Expr> m;
    for (const auto& e : ov.base_map) m.push_back(atlas.numeric(e));
    if (!cycle.in_base)
      for (const auto& e : ov.fiber_map) m.push_back(atlas.numeric(e));
    transitions.emplace_back(m, coords);
  }

  const int d = k - 1;
  const auto samples = face_samples(d);
  std::vector<FaceData> faces;
  for (std::size_t p = 0; p < cycle.pieces.size(); ++p)
    for (int c = 0; c < k; ++c)
      for (int side = 0; side < 2; ++side) {
        FaceData f{static_cast<int>(p), c, side, (c % 2 == 0 ? 1 : -1) * (side == 1 ? 1 : -1), false};
        if (d > 0) {
          bool all_singular = true;
          for (const auto& t : samples) {
            const double h = 1e-5;
            std::vector<std::vector<double>> jac(width, std::vector<double>(d));
            for (int r = 0; r < d; ++r) {
              auto tp = t, tm = t;
              tp[r] += h;
              tm[r] -= h;
              const auto a = maps[p](full_params(tp, c, side));
              const auto b = maps[p](full_params(tm, c, side));
              for (std::size_t q = 0; q < width; ++q) jac[q][r] = (a[q] - b[q]) / (2 * h);
            }
            std::vector<std::vector<double>> gram(d, std::vector<double>(d, 0.0));
            double scale = 1.0;
            for (int r = 0; r < d; ++r)
              for (int s = 0; s < d; ++s) {
                for (std::size_t q = 0; q < width; ++q) gram[r][s] += jac[q][r] * jac[q][s];
                if (r == s) scale *= std::max(gram[r][r], 1e-300);
              }
            if (determinant(gram) > 1e-10 * std::max(scale, 1.0) && determinant(gram) > 1e-16) {
              all_singular = false;
              break;
            }
          }
          f.degenerate = all_singular;
        }
        faces.push_back(f);
      }

  cert.faces = static_cast<int>(faces.size());
  const auto group = hyperoctahedral(d);
  const auto image = [&](const FaceData& f, const std::vector<double>& t) { return maps[f.piece](full_params(t, f.coord, f.side)); };
  // Sign of g with T(A(t)) = B(g(t)) at every sample, or 0.
  const auto match = [&](const FaceData& a, const FaceData& b, const NumericMap* t_map) {
    for (const auto& g : group) {
      bool ok = true;
      for (const auto& t : samples) {
        auto pa = image(a, t);
        if (t_map) pa = (*t_map)(pa);
        if (!close(pa, image(b, g.apply(t)), tol)) {
          ok = false;
          break;
        }
      }
      if (ok) return g.sign;
    }
    return 0;
  };

  std::vector<bool> paired(faces.size(), false);
  for (std::size_t a = 0; a < faces.size(); ++a) {
    if (faces[a].degenerate) {
      ++cert.degenerate;
      continue;
    }
    if (paired[a]) continue;
    const FaceData& fa = faces[a];
    const int ca = cycle.pieces[fa.piece].chart;
    bool found = false;
    bool orientation = false;
    for (std::size_t b = 0; b < faces.size() && !found; ++b) {
      if (b == a || paired[b] || faces[b].degenerate) continue;
      const FaceData& fb = faces[b];
      const int cb = cycle.pieces[fb.piece].chart;
      const int want = -fb.sign * cycle.pieces[fb.piece].sign;
      std::vector<std::pair<const NumericMap*, bool>> candidates;
      if (ca == cb) candidates.emplace_back(nullptr, false);
      for (int e : atlas.between(ca, cb)) candidates.emplace_back(&transitions[e], false);
      for (int e : atlas.between(cb, ca)) candidates.emplace_back(&transitions[e], true);
      for (const auto& [tm, reverse] : candidates) {
        const int s = reverse ? match(fb, fa, tm) : match(fa, fb, tm);
        if (s == 0) continue;
        if (fa.sign * s * cycle.pieces[fa.piece].sign == want) {
          found = true;
          paired[a] = paired[b] = true;
          cert.paired += 2;
          break;
        }
        orientation = true;
      }
    }
    if (!found) {
      cert.failure = "face s" + std::to_string(fa.coord + 1) + "=" + std::to_string(fa.side) + " of piece " +
                     std::to_string(fa.piece) + (orientation ? " matches only with the wrong orientation" : " is unmatched");
      return cert;
    }
  }
  cert.closed = true;
  return cert;
}

Period period(const std::vector<Form>& alpha, const Cycle& cycle, const Atlas& atlas, const QuadOptions& quad) {
  const JetSpace& space = atlas.space();
  const int k = cycle.dim;
  const auto params = cycle_params(k);
  const auto coords = y_coordinates(space);
  Period out;
  for (const auto& piece : cycle.pieces) {
    if (piece.chart < 0 || piece.chart >= static_cast<int>(alpha.size()))
      throw Error(ErrorCode::NoRepresentative, "no representative on chart of cycle '" + cycle.name + "'");
    const Form& form = alpha[piece.chart];
    if (form.is_zero()) continue;
    if (!on_total_space(form)) throw Error(ErrorCode::NoRepresentative, "representative is not a form on the total space");
    if (form.degree() != k) throw Error(ErrorCode::PreconditionFailed, "form degree does not match the cycle dimension");

    std::vector<Expr> m;
    for (const auto& e : piece.map) m.push_back(atlas.numeric(e));
    if (cycle.in_base)
      for (int a = 0; a < space.m(); ++a) m.push_back(Expr());
    std::vector<Expr> dm;
    for (const auto& e : m)
      for (const auto& s : params) dm.push_back(partial(e, s));
    const NumericMap map(m, params);
    const NumericMap dmap(dm, params);

    std::vector<std::pair<std::vector<int>, Evaluator>> terms;
    for (const auto& [key, c] : form.terms()) {
      std::vector<int> rows;
      for (const auto& s : key) rows.push_back(s.kind == SymbolKind::Base ? s.index : space.n() + s.index);
      terms.emplace_back(rows, Evaluator(atlas.numeric(c), coords));
    }
    const auto integrand = [&](std::span<const double> s) {
      const auto y = map(s);
      const auto dy = dmap(s);
      double acc = 0.0;
      for (const auto& [rows, coef] : terms) {
        std::vector<std::vector<double>> j(k, std::vector<double>(k));
        for (int r = 0; r < k; ++r)
          for (int b = 0; b < k; ++b) j[r][b] = dy[rows[r] * k + b];
        const double det = determinant(j);
        if (det != 0.0) acc += coef(y) * det;
      }
      return acc;
    };
    const QuadResult q = nquad(integrand, k, quad);
    out.value += piece.sign * q.value;
    out.error += q.error;
  }
  return out;
}

// --- classes ---

namespace {

bool forms_equal(const Form& a, const Form& b) { return form_zero(a - b); }

void check_closed_and_global(const std::vector<Form>& alpha, const Atlas& atlas, const char* what) {
  if (alpha.size() != atlas.charts().size())
    throw Error(ErrorCode::Schema, std::string(what) + " needs one form per chart");
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (!form_zero(alpha[i].exterior_derivative()))
      throw Error(ErrorCode::NoRepresentative, std::string(what) + " is not closed on chart " + atlas.charts()[i].id);
  for (std::size_t k = 0; k < atlas.overlaps().size(); ++k) {
    const Overlap& ov = atlas.overlaps()[k];
    if (!forms_equal(alpha[ov.from], atlas.pull(alpha[ov.to], static_cast<int>(k))))
      throw Error(ErrorCode::NoRepresentative, std::string(what) + " does not glue on " + chart_pair(atlas, ov));
  }
}

void evaluate_periods(ClassReport& r, const std::vector<Cycle>& cycles, const Atlas& atlas, const ClassOptions& opt,
                      int dim, bool in_base) {
  for (const auto& cy : cycles) {
    if (cy.dim != dim || cy.in_base != in_base)
      throw Error(ErrorCode::PreconditionFailed, "cycle '" + cy.name + "' has the wrong dimension or target");
    const auto cert = certify_closed(cy, atlas, opt.quad.tolerance);
    if (!cert.closed) throw Error(ErrorCode::CycleNotClosed, "cycle '" + cy.name + "': " + cert.failure);
    const Period p = r.representative.empty() ? Period{} : period(r.representative, cy, atlas, opt.quad);
    r.cycles.push_back(cy.name);
    r.periods.push_back(p.value);
    r.errors.push_back(p.error);
  }
  r.zero = std::all_of(r.periods.begin(), r.periods.end(), [&](double v) { return std::abs(v) < opt.tau_class; });
}

std::vector<Form> zero_forms(const Atlas& atlas) { return std::vector<Form>(atlas.charts().size()); }

// Pullbacks of rho_k to chart i, for every k with an overlap i->k.
std::vector<std::pair<int, Expr>> local_partition(const Atlas& atlas, const PartitionOfUnity& pou, int i) {
  std::vector<std::pair<int, Expr>> out;
  for (std::size_t k = 0; k < atlas.charts().size(); ++k) {
    if (static_cast<int>(k) == i) continue;
    const auto e = atlas.between(i, static_cast<int>(k));
    if (e.empty()) continue;
    out.emplace_back(e.front(), atlas.pull(pou.rho[k], e.front(), 0));
  }
  return out;
}

void check_collation_allowed(const Atlas& atlas, const PartitionOfUnity& pou) {
  if (atlas.has_deck())
    throw Error(ErrorCode::NoRepresentative, "partition-of-unity collation needs a cover without deck identifications");
  if (pou.rho.size() != atlas.charts().size()) throw Error(ErrorCode::Schema, "partition of unity needs one function per chart");
  for (std::size_t i = 0; i < atlas.charts().size(); ++i) {
    Expr sum = pou.rho[i];
    for (const auto& [e, r] : local_partition(atlas, pou, static_cast<int>(i))) sum += r;
    if (!equals(sum, Expr(1)))
      throw Error(ErrorCode::NoRepresentative, "partition of unity does not sum to 1 on chart " + atlas.charts()[i].id);
  }
}

}  // namespace

ClassReport delta_class(const Atlas& atlas, const Presentation& p, const std::vector<Cycle>& cycles,
                        const std::optional<Representative>& supplied, const std::optional<PartitionOfUnity>& pou,
                        const ClassOptions& opt) {
  const JetSpace& space = atlas.space();
  ClassReport r;
  r.symbol = "delta(eta)";
  if (supplied) {
    check_closed_and_global(supplied->forms, atlas, "representative");
    const auto& corr = supplied->global_lagrangian;
    if (!corr.empty()) {
      if (corr.size() != atlas.charts().size()) throw Error(ErrorCode::Schema, "correction needs one Lagrangian per chart");
      for (std::size_t k = 0; k < atlas.overlaps().size(); ++k) {
        const Overlap& ov = atlas.overlaps()[k];
        if (!zero(corr[ov.from] - atlas.pull(corr[ov.to], static_cast<int>(k))))
          throw Error(ErrorCode::NoRepresentative, "correction Lagrangian is not global on " + chart_pair(atlas, ov));
      }
    }
    for (std::size_t i = 0; i < supplied->forms.size(); ++i) {
      SourceForm proj = source_projection(supplied->forms[i], space);
      if (!corr.empty()) proj = proj + euler_lagrange(corr[i], space);
      if (!equals(proj, p.sources[i]))
        throw Error(ErrorCode::NoRepresentative, "representative does not project onto the source form on chart " + atlas.charts()[i].id);
    }
    r.projection = corr.empty() ? "exact" : "modulo-global-lagrangian";
    r.provenance = "direct";
    r.representative = supplied->forms;
  } else if (std::all_of(p.mu.begin(), p.mu.end(), zero)) {
    r.provenance = "global-lagrangian";
    r.projection = "exact";
  } else if (pou) {
    check_collation_allowed(atlas, *pou);
    std::vector<Form> omega;
    for (std::size_t i = 0; i < atlas.charts().size(); ++i) {
      Form acc;
      Expr correction;
      for (const auto& [e, rho] : local_partition(atlas, *pou, static_cast<int>(i))) {
        acc = acc + Form::d(rho).wedge(lepage(p.mu[e], space));
        correction += rho * p.mu[e];
      }
      if (!on_total_space(acc))
        throw Error(ErrorCode::NoRepresentative, "collated representative is not projectable on chart " + atlas.charts()[i].id);
      if (!equals(source_projection(acc, space), euler_lagrange(correction, space)))
        throw Error(ErrorCode::NoRepresentative, "collated representative fails its projection certificate");
      omega.push_back(std::move(acc));
    }
    check_closed_and_global(omega, atlas, "collated representative");
    r.provenance = "collation";
    r.projection = "modulo-global-lagrangian";
    r.representative = std::move(omega);
  } else {
    throw Error(ErrorCode::NoRepresentative, "no closed representative: supply one or a partition of unity");
  }
  if (r.representative.empty()) r.representative = zero_forms(atlas);
  evaluate_periods(r, cycles, atlas, opt, space.n() + 1, false);
  return r;
}

namespace {

// Differences nu_from - psi* nu_to on every overlap entry.
std::vector<HorizontalForm> potential_differences(const Atlas& atlas, const std::vector<HorizontalForm>& nu) {
  std::vector<HorizontalForm> out;
  for (std::size_t k = 0; k < atlas.overlaps().size(); ++k) {
    const Overlap& ov = atlas.overlaps()[k];
    out.push_back(nu[ov.from] - atlas.pull(nu[ov.to], static_cast<int>(k)));
  }
  return out;
}

bool zero_form(const HorizontalForm& w) {
  for (const auto& [m, c] : w.coefficients())
    if (!zero(c)) return false;
  return true;
}

// For n = 1 the differences are constants; true when they form a Cech
// coboundary c_from - c_to (which forbids nonzero deck differences).
bool constant_coboundary(const Atlas& atlas, const std::vector<HorizontalForm>& diff, double tol,
                         std::vector<Expr>* constants = nullptr) {
  const std::size_t nc = atlas.charts().size();
  std::vector<double> d;
  for (std::size_t k = 0; k < diff.size(); ++k) {
    const Expr v = diff[k].coefficient(0);
    for (const auto& s : symbols(v))
      if (s.is_coordinate() && !zero(partial(v, s))) return false;
    d.push_back(sample_value(atlas.numeric(v), atlas, atlas.overlaps()[k].from));
    if (constants) {
      bool coordinate_free = true;
      for (const auto& s : symbols(v))
        if (s.is_coordinate()) coordinate_free = false;
      constants->push_back(coordinate_free ? v : Expr(Rational(d.back())));
    }
  }
  std::vector<double> c(nc, 0.0);
  std::vector<bool> seen(nc, false);
  for (std::size_t root = 0; root < nc; ++root) {
    if (seen[root]) continue;
    seen[root] = true;
    std::vector<int> stack{static_cast<int>(root)};
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (std::size_t k = 0; k < diff.size(); ++k) {
        const Overlap& ov = atlas.overlaps()[k];
        if (ov.from == i && !seen[ov.to]) {
          c[ov.to] = c[i] - d[k];
          seen[ov.to] = true;
          stack.push_back(ov.to);
        } else if (ov.to == i && !seen[ov.from]) {
          c[ov.from] = c[i] + d[k];
          seen[ov.from] = true;
          stack.push_back(ov.from);
        }
      }
    }
  }
  for (std::size_t k = 0; k < diff.size(); ++k) {
    const Overlap& ov = atlas.overlaps()[k];
    if (std::abs(c[ov.from] - c[ov.to] - d[k]) > tol * std::max(1.0, std::abs(d[k]))) return false;
  }
  return true;
}

bool potentials_global(const Atlas& atlas, const std::vector<HorizontalForm>& diff, double tol) {
  if (atlas.space().n() == 1) return constant_coboundary(atlas, diff, tol);
  return std::all_of(diff.begin(), diff.end(), zero_form);
}

}  // namespace

ClassReport delta_prime_class(const Atlas& atlas, const std::vector<Expr>& w, const std::vector<Cycle>& cycles,
                              const std::optional<std::vector<Form>>& supplied,
                              const std::optional<PartitionOfUnity>& pou, const ClassOptions& opt) {
  const JetSpace& space = atlas.space();
  const int n = space.n();
  if (w.size() != atlas.charts().size()) throw Error(ErrorCode::Schema, "one n-form per chart is required");
  for (std::size_t i = 0; i < w.size(); ++i)
    if (!source_zero(euler_lagrange(w[i], space)))
      throw Error(ErrorCode::NotVariationallyTrivial, "form has nonzero Euler-Lagrange expression on chart " + atlas.charts()[i].id);
  for (std::size_t k = 0; k < atlas.overlaps().size(); ++k) {
    const Overlap& ov = atlas.overlaps()[k];
    const HorizontalForm pulled = atlas.pull(HorizontalForm::volume(n, w[ov.to]), static_cast<int>(k));
    if (!equals(w[ov.from], pulled.top()))
      throw Error(ErrorCode::PreconditionFailed, "form is not globally defined on " + chart_pair(atlas, ov));
  }

  ClassReport r;
  r.symbol = "delta'(w)";
  if (supplied) {
    check_closed_and_global(*supplied, atlas, "representative");
    r.projection = "exact";
    std::vector<HorizontalForm> gamma;
    bool exact = true;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const Expr residual = horizontal_part((*supplied)[i], space).top() - w[i];
      if (!zero(residual)) exact = false;
      if (!source_zero(euler_lagrange(residual, space)))
        throw Error(ErrorCode::NoRepresentative, "representative does not project onto the form on chart " + atlas.charts()[i].id);
      gamma.push_back(dH_homotopy(residual, space, atlas.charts()[i].center));
    }
    if (!exact) {
      if (potentials_global(atlas, potential_differences(atlas, gamma), opt.tau_class))
        r.projection = "modulo-global-current";
      else if (n == 1)
        throw Error(ErrorCode::NoRepresentative, "representative differs from the form by a non-global current");
      else
        r.projection = "modulo-local-current";
    }
    r.provenance = "direct";
    r.representative = *supplied;
  } else {
    std::vector<HorizontalForm> nu;
    for (std::size_t i = 0; i < w.size(); ++i) nu.push_back(dH_homotopy(w[i], space, atlas.charts()[i].center));
    const auto diff = potential_differences(atlas, nu);
    if (potentials_global(atlas, diff, opt.tau_class)) {
      r.provenance = "global-potential";
      r.projection = "exact";
    } else if (pou && n == 1) {
      check_collation_allowed(atlas, *pou);
      std::vector<Expr> c;
      if (!constant_coboundary(atlas, diff, std::numeric_limits<double>::infinity(), &c))
        throw Error(ErrorCode::NoRepresentative, "overlap potentials are not locally constant");
      std::vector<Form> alpha;
      for (std::size_t i = 0; i < w.size(); ++i) {
        Form acc;
        Expr shift;
        for (const auto& [e, rho] : local_partition(atlas, *pou, static_cast<int>(i))) {
          acc = acc + Form::d(rho).scaled(c[e]);
          shift += rho * c[e];
        }
        const HorizontalForm global = nu[i] - HorizontalForm::scalar(1, shift);
        if (!equals(horizontal_part(acc, space).top(), w[i] - dH(global, space).top()))
          throw Error(ErrorCode::NoRepresentative, "collated representative fails its projection certificate");
        alpha.push_back(std::move(acc));
      }
      check_closed_and_global(alpha, atlas, "collated representative");
      r.provenance = "collation";
      r.projection = "modulo-global-current";
      r.representative = std::move(alpha);
    } else {
      throw Error(ErrorCode::NoRepresentative, "no closed representative: supply one or a partition of unity");
    }
  }
  if (r.representative.empty()) r.representative = zero_forms(atlas);
  evaluate_periods(r, cycles, atlas, opt, n, false);
  return r;
}

// --- sections ---

SectionCheck check_section(const Atlas& atlas, const GlobalSection& s) {
  const JetSpace& space = atlas.space();
  SectionCheck out;
  out.windings.assign(atlas.overlaps().size(), 0);
  if (s.values.size() != atlas.charts().size()) {
    out.failure = "section must list every chart";
    return out;
  }
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    if (!s.values[i]) {
      out.failure = "section undefined on chart " + atlas.charts()[i].id;
      return out;
    }
    if (static_cast<int>(s.values[i]->size()) != space.m()) throw Error(ErrorCode::Schema, "section has the wrong number of components");
  }
  for (std::size_t k = 0; k < atlas.overlaps().size(); ++k) {
    const Overlap& ov = atlas.overlaps()[k];
    // Vertical deck maps identify fiber points only; every section respects them.
    bool vertical = ov.from == ov.to;
    for (int i = 0; i < space.n() && vertical; ++i) vertical = ov.base_map[i] == space.x(i);
    if (vertical) continue;
    const auto& from = *s.values[ov.from];
    const auto& to = *s.values[ov.to];
    Bindings fiber, base;
    for (int a = 0; a < space.m(); ++a) fiber[Symbol::field(a)] = from[a];
    for (int i = 0; i < space.n(); ++i) base[Symbol::base(i)] = ov.base_map[i];
    for (int a = 0; a < space.m(); ++a) {
      const Expr diff = substitute(ov.fiber_map[a], fiber) - substitute(to[a], base);
      if (zero(diff)) continue;
      const auto& periods = atlas.charts()[ov.to].fiber_periods;
      const bool periodic = a < static_cast<int>(periods.size()) && periods[a].has_value();
      bool ok = false;
      if (periodic) {
        const Expr ratio = atlas.numeric(-diff / *periods[a]);
        double first = 0.0;
        ok = true;
        for (int q = 0; q < 5 && ok; ++q) {
          const double v = sample_value(ratio, atlas, ov.from, 0.11 + 0.19 * q);
          if (q == 0) first = v;
          ok = std::abs(v - std::round(v)) < 1e-8 && std::abs(v - first) < 1e-8;
        }
        if (ok && out.windings[k] == 0) out.windings[k] = std::lround(first);
      }
      if (!ok) {
        out.failure = "section disagrees on " + chart_pair(atlas, ov) + " in component " + space.field_names()[a];
        return out;
      }
    }
  }
  out.global = true;
  return out;
}

double criticality_residual(const Atlas& atlas, const std::vector<SourceForm>& eta, const GlobalSection& s,
                            int points_per_axis) {
  const JetSpace& space = atlas.space();
  const auto slots = base_coordinates(space);
  double worst = 0.0;
  for (std::size_t i = 0; i < atlas.charts().size(); ++i) {
    if (i >= s.values.size() || !s.values[i]) continue;
    const Bindings b = jet_bindings(Section{static_cast<int>(i), *s.values[i]}, eta[i].jet_order(), space);
    std::vector<Evaluator> evs;
    for (const auto& e : eta[i].components) evs.emplace_back(atlas.numeric(substitute(e, b)), slots);
    const auto& bx = atlas.charts()[i].base_box;
    std::vector<int> idx(space.n(), 0);
    std::vector<double> x(space.n());
    while (true) {
      for (int d = 0; d < space.n(); ++d) {
        const auto r = box(bx, d);
        x[d] = r[0] + (r[1] - r[0]) * idx[d] / std::max(1, points_per_axis - 1);
      }
      for (const auto& ev : evs) worst = std::max(worst, std::abs(ev(x)));
      int p = space.n() - 1;
      while (p >= 0 && ++idx[p] == points_per_axis) idx[p--] = 0;
      if (p < 0) break;
    }
  }
  return worst;
}

ClassReport pullback_class_check(const Atlas& atlas, const std::vector<Form>& alpha, const GlobalSection& s,
                                 const std::vector<Cycle>& cycles, const ClassOptions& opt) {
  const JetSpace& space = atlas.space();
  const SectionCheck sc = check_section(atlas, s);
  if (!sc.global) throw Error(ErrorCode::SectionNotGlobal, "section '" + s.name + "': " + sc.failure);
  ClassReport r;
  r.symbol = "jsigma*[alpha]";
  r.provenance = "pullback";
  r.representative = alpha;
  for (const auto& cy : cycles) {
    if (cy.dim != space.n() || !cy.in_base)
      throw Error(ErrorCode::PreconditionFailed, "cycle '" + cy.name + "' is not an n-cycle in the base");
    const auto cert = certify_closed(cy, atlas, opt.quad.tolerance);
    if (!cert.closed) throw Error(ErrorCode::CycleNotClosed, "cycle '" + cy.name + "': " + cert.failure);
    Cycle lifted{cy.name, cy.dim, false, {}};
    for (const auto& piece : cy.pieces) {
      Bindings b;
      for (int i = 0; i < space.n(); ++i) b[Symbol::base(i)] = piece.map[i];
      CyclePiece lp{piece.chart, piece.map, piece.sign};
      for (const auto& v : *s.values[piece.chart]) lp.map.push_back(substitute(v, b));
      lifted.pieces.push_back(std::move(lp));
    }
    const Period p = period(alpha, lifted, atlas, opt.quad);
    r.cycles.push_back(cy.name);
    r.periods.push_back(p.value);
    r.errors.push_back(p.error);
  }
  r.zero = std::all_of(r.periods.begin(), r.periods.end(), [&](double v) { return std::abs(v) < opt.tau_class; });
  return r;
}

IsomorphismVerdict isomorphism_hypothesis_check(const Atlas& atlas, const BundleInfo& bundle) {
  const int n = atlas.space().n();
  const std::string& k = bundle.kind;
  if (k == "affine" || k == "vector" || k == "contractible" || k == "trivial")
    return {true, "fiber is contractible, so Y is homotopy equivalent to X"};
  if (k == "product") {
    const auto b = [](const std::vector<int>& v, int i) { return i < static_cast<int>(v.size()) ? v[i] : 0; };
    if (b(bundle.fiber_betti, 0) != 1) return {false, "fiber is not connected"};
    int extra = 0;
    for (int q = 1; q <= n; ++q) extra += b(bundle.base_betti, n - q) * b(bundle.fiber_betti, q);
    if (extra == 0) return {true, "Kunneth: the fiber adds nothing in degree n"};
    return {false, "Kunneth: the fiber adds " + std::to_string(extra) + " to the degree-n Betti number"};
  }
  return {false, "bundle kind unknown"};
}

// --- composite report ---

GlobalExistenceReport global_existence_report(const Atlas& atlas, const Presentation& p,
                                              const GlobalExistenceInput& in) {
  const JetSpace& space = atlas.space();
  GlobalExistenceReport out;
  out.delta = delta_class(atlas, p, in.total_cycles, in.delta_representative, in.pou, in.options);
  out.isomorphism = isomorphism_hypothesis_check(atlas, in.bundle);

  std::vector<std::optional<ClassReport>> prime;
  for (const auto& sym : in.symmetries) {
    if (sym.fields.size() != atlas.charts().size()) throw Error(ErrorCode::Schema, "symmetry '" + sym.name + "' must list every chart");
    SymmetryVerdict v;
    v.name = sym.name;
    v.kind = classify_symmetry(sym.fields[0], p.lagrangians[0], p.sources[0], space);
    v.admissible_charts = true;
    for (std::size_t i = 0; i < atlas.charts().size(); ++i) {
      const Expr once = lie_derivative_volume(sym.fields[i], p.lagrangians[i], space);
      if (!zero(lie_derivative_volume(sym.fields[i], once, space))) v.admissible_charts = false;
    }
    v.admissible_overlaps = true;
    for (std::size_t k = 0; k < atlas.overlaps().size(); ++k)
      if (!zero(lie_derivative_volume(sym.fields[atlas.overlaps()[k].from], p.mu[k], space))) v.admissible_overlaps = false;
    if (v.kind != SymmetryKind::None) {
      std::vector<Expr> w;
      for (std::size_t i = 0; i < atlas.charts().size(); ++i) w.push_back(contraction(sym.fields[i], p.sources[i], space));
      ClassReport r = delta_prime_class(atlas, w, in.current_cycles, sym.representative, in.pou, in.options);
      r.symbol = "delta'(Xi_V.eta)[" + sym.name + "]";
      v.global_current = r.zero;
      v.report = std::move(r);
    }
    prime.push_back(v.report);
    out.symmetries.push_back(std::move(v));
  }

  std::map<std::string, std::vector<double>> period_of;  // section/symmetry -> periods
  for (const auto& s : in.sections) {
    SectionVerdict v;
    v.name = s.name;
    v.check = check_section(atlas, s);
    v.homotopic_to = s.homotopic_to;
    if (v.check.global) {
      v.criticality = criticality_residual(atlas, p.sources, s);
      v.critical = v.criticality < in.tau_crit;
      for (std::size_t q = 0; q < in.symmetries.size(); ++q) {
        if (!prime[q]) continue;
        SectionPullback pb;
        pb.symmetry = in.symmetries[q].name;
        pb.report = pullback_class_check(atlas, prime[q]->representative, s, in.base_cycles, in.options);
        pb.report.symbol = "jsigma*[alpha][" + s.name + "," + pb.symmetry + "]";
        pb.obstructed = !pb.report.zero;
        period_of[s.name + "\n" + pb.symmetry] = pb.report.periods;
        v.pullbacks.push_back(std::move(pb));
      }
    }
    out.sections.push_back(std::move(v));
  }

  // Declared homotopies: endpoints symbolically, periods numerically.
  for (std::size_t idx = 0; idx < in.sections.size(); ++idx) {
    const auto& s = in.sections[idx];
    if (s.homotopic_to.empty()) continue;
    auto target = std::find_if(in.sections.begin(), in.sections.end(), [&](const GlobalSection& t) { return t.name == s.homotopic_to; });
    if (target == in.sections.end()) throw Error(ErrorCode::Schema, "homotopy target '" + s.homotopic_to + "' is not a section");
    bool ok = s.homotopy.size() == atlas.charts().size();
    for (std::size_t i = 0; ok && i < s.homotopy.size(); ++i) {
      if (!s.homotopy[i] || !s.values[i] || !target->values[i]) continue;
      for (int a = 0; a < space.m() && ok; ++a) {
        const Expr& h = (*s.homotopy[i])[a];
        const Expr h0 = substitute(h, {{Symbol::param(kSectionHomotopyParam), Expr(0)}});
        const Expr h1 = substitute(h, {{Symbol::param(kSectionHomotopyParam), Expr(1)}});
        ok = equals(h0, (*s.values[i])[a]) && equals(h1, (*target->values[i])[a]);
      }
    }
    for (const auto& sym : in.symmetries) {
      auto a = period_of.find(s.name + "\n" + sym.name);
      auto b = period_of.find(target->name + "\n" + sym.name);
      if (a == period_of.end() || b == period_of.end()) continue;
      for (std::size_t c = 0; c < a->second.size(); ++c)
        if (std::abs(a->second[c] - b->second[c]) > 2 * in.options.quad.tolerance) ok = false;
    }
    out.sections[idx].homotopy_verified = ok;
  }

  const bool critical = std::any_of(out.sections.begin(), out.sections.end(), [](const SectionVerdict& v) { return v.check.global && v.critical; });
  out.proposition_applies = out.isomorphism.holds && critical;
  if (out.proposition_applies) {
    for (const auto& v : out.symmetries)
      if (v.report && !v.report->zero) ++out.proposition_violations;
    if (out.proposition_violations > 0)
      throw Error(ErrorCode::PropositionViolated, "global critical section under the isomorphism hypothesis, yet a current class is nonzero");
    out.conclusion = "proposition: every equation symmetry admits a global Noether-Bessel-Hagen current";
  } else if (!out.isomorphism.holds) {
    out.conclusion = "weaker statement only: a nonzero class [Xi.eta] is not a pullback from the base";
  } else {
    out.conclusion = "no certified critical global section; per-symmetry classes decide global currents";
  }
  return out;
}

}  // namespace vjp
