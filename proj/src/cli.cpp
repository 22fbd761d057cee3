#include "vjp/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "vjp/error.hpp"
#include "vjp/parse.hpp"

namespace vjp {

namespace {

constexpr const char* kSchema = "vjp-schema-1";
constexpr double kDriftTolerance = 1e-8;
constexpr double kDivergenceTolerance = 1e-6;

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::Schema, where + ": " + what);
}

const Json& need(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) schema_error(where, std::string("missing '") + key + "'");
  return j.at(key);
}

std::string text_of(const Json& j, const std::string& where) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  schema_error(where, "expected an expression string");
}

double number_of(const Json& j, const std::string& where) {
  if (!j.is_number()) schema_error(where, "expected a number");
  return j.get<double>();
}

Rational rational_of(const Json& j, const JetSpace& plain, const std::string& where) {
  if (j.is_number_integer()) return Rational(j.get<long>());
  if (j.is_number_float()) return Rational(j.get<double>());
  const Expr e = parse(text_of(j, where), plain, 0);
  if (!e.is_rational()) schema_error(where, "constant value must be a rational number");
  return e.rational();
}

struct Loader {
  JetSpace space;
  std::vector<std::string> chart_ids;

  Expr expr(const Json& j, const std::string& where, int max_order) const {
    return parse(text_of(j, where), space, max_order);
  }
  std::vector<Expr> exprs(const Json& j, const std::string& where, int max_order, std::size_t size) const {
    if (!j.is_array() || j.size() != size)
      schema_error(where, "expected " + std::to_string(size) + " expressions");
    std::vector<Expr> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(expr(j[i], where + "[" + std::to_string(i) + "]", max_order));
    return out;
  }
  int chart(const Json& j, const std::string& where) const {
    if (!j.is_string()) schema_error(where, "expected a chart id");
    for (std::size_t i = 0; i < chart_ids.size(); ++i)
      if (chart_ids[i] == j.get<std::string>()) return static_cast<int>(i);
    schema_error(where, "unknown chart '" + j.get<std::string>() + "'");
  }
  Symbol coordinate(const Json& j, const std::string& where) const {
    const Expr e = expr(j, where, 0);
    if (e.terms().size() == 1 && e.terms()[0].coef == 1 && e.terms()[0].mono.size() == 1 &&
        e.terms()[0].mono[0].exp == 1 && e.terms()[0].mono[0].base.kind == Factor::Kind::Symbol &&
        e.terms()[0].mono[0].base.symbol.is_coordinate())
      return e.terms()[0].mono[0].base.symbol;
    schema_error(where, "expected a coordinate of Y");
  }
  Form form(const Json& j, const std::string& where) const {
    Form out;
    const Json& terms = need(j, "terms", where);
    if (!terms.is_array()) schema_error(where, "'terms' must be an array");
    for (std::size_t t = 0; t < terms.size(); ++t) {
      const std::string w = where + ".terms[" + std::to_string(t) + "]";
      const Json& d = need(terms[t], "d", w);
      if (!d.is_array()) schema_error(w, "'d' must be an array of coordinates");
      Form term = Form::function(expr(need(terms[t], "coef", w), w + ".coef", space.order()));
      for (const auto& s : d) term = term.wedge(Form::differential(coordinate(s, w + ".d")));
      out = out + term;
    }
    if (j.contains("degree") && !out.is_zero() && out.degree() != j.at("degree").get<int>())
      schema_error(where, "declared degree does not match the terms");
    return out;
  }
  /// Object keyed by chart id; returns one entry per chart.
  template <class T, class F>
  std::vector<std::optional<T>> per_chart(const Json& j, const std::string& where, F&& fn) const {
    if (!j.is_object()) schema_error(where, "expected an object keyed by chart id");
    std::vector<std::optional<T>> out(chart_ids.size());
    for (const auto& [key, value] : j.items()) out[chart(Json(key), where)] = fn(value, where + "." + key);
    return out;
  }
  std::vector<std::array<double, 2>> box(const Json& j, const std::string& where, std::size_t dim) const {
    std::vector<std::array<double, 2>> out;
    if (!j.is_array() || j.size() != dim) schema_error(where, "expected " + std::to_string(dim) + " intervals");
    for (const auto& iv : j) {
      if (!iv.is_array() || iv.size() != 2) schema_error(where, "interval must be [lo, hi]");
      out.push_back({number_of(iv[0], where), number_of(iv[1], where)});
      if (!(out.back()[0] < out.back()[1])) schema_error(where, "empty interval");
    }
    return out;
  }
  Cycle cycle(const Json& j, const std::string& where, int dim, bool in_base) const {
    Cycle c{need(j, "name", where).get<std::string>(), dim, in_base, {}};
    if (j.contains("dim") && j.at("dim").get<int>() != dim)
      schema_error(where, "cycle dimension must be " + std::to_string(dim));
    const std::size_t coords = in_base ? space.n() : space.n() + space.m();
    const Json& pieces = need(j, "pieces", where);
    if (!pieces.is_array() || pieces.empty()) schema_error(where, "'pieces' must be a non-empty array");
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      const std::string w = where + ".pieces[" + std::to_string(i) + "]";
      CyclePiece piece{chart(need(pieces[i], "chart", w), w + ".chart"), exprs(need(pieces[i], "map", w), w + ".map", 0, coords),
                       pieces[i].value("sign", 1)};
      if (piece.sign != 1 && piece.sign != -1) schema_error(w, "sign must be 1 or -1");
      c.pieces.push_back(std::move(piece));
    }
    return c;
  }
};

JetSpace load_space(const Json& js, std::map<std::string, Rational>& values) {
  const std::string where = "jet_space";
  const auto names = [&](const char* key) {
    const Json& a = need(js, key, where);
    if (!a.is_array()) schema_error(where, std::string("'") + key + "' must be an array of names");
    return a.get<std::vector<std::string>>();
  };
  const int order = need(js, "order", where).get<int>();
  if (order > JetSpace::kMaxOrder)
    throw Error(ErrorCode::UnsupportedOrder, "jet order " + std::to_string(order) + " is beyond the supported cap " +
                                                 std::to_string(JetSpace::kMaxOrder));
  std::vector<std::string> constants;
  if (js.contains("constants")) {
    const Json& c = js.at("constants");
    if (!c.is_object()) schema_error(where, "'constants' must map names to values");
    for (const auto& [k, v] : c.items()) constants.push_back(k);
  }
  JetSpace space(names("base"), names("fields"), order, constants);
  const JetSpace plain({"x"}, {"u"}, 0);
  if (js.contains("constants"))
    for (const auto& [k, v] : js.at("constants").items())
      if (!v.is_null()) values[k] = rational_of(v, plain, where + ".constants." + k);
  return space;
}

}  // namespace

Problem load_problem(const Json& doc) {
  if (!doc.is_object()) schema_error("problem", "expected a JSON object");
  if (doc.value("schema", std::string()) != kSchema) schema_error("schema", std::string("expected \"") + kSchema + "\"");
  Problem p;
  p.name = doc.value("name", std::string("problem"));
  p.space = load_space(need(doc, "jet_space", "problem"), p.constant_values);
  Loader ld{p.space, {}};
  const int r = p.space.order();
  const int n = p.space.n(), m = p.space.m();

  const Json& charts_json = need(doc, "charts", "problem");
  if (!charts_json.is_array() || charts_json.empty()) schema_error("charts", "expected a non-empty array");
  for (const auto& c : charts_json) {
    const std::string id = need(c, "id", "charts").get<std::string>();
    for (const auto& other : ld.chart_ids)
      if (other == id) schema_error("charts", "duplicate chart id '" + id + "'");
    ld.chart_ids.push_back(id);
  }
  std::vector<Chart> charts;
  for (std::size_t i = 0; i < charts_json.size(); ++i) {
    const Json& c = charts_json[i];
    const std::string w = "charts." + ld.chart_ids[i];
    Chart chart{ld.chart_ids[i], {}, {}, {}, {}};
    if (c.contains("base_box")) chart.base_box = ld.box(c.at("base_box"), w + ".base_box", n);
    if (c.contains("fiber_box")) chart.fiber_box = ld.box(c.at("fiber_box"), w + ".fiber_box", m);
    if (c.contains("center")) {
      const Json& ctr = c.at("center");
      if (ctr.contains("fiber")) chart.center.fiber = ld.exprs(ctr.at("fiber"), w + ".center.fiber", 0, m);
      if (ctr.contains("base")) chart.center.base = ld.exprs(ctr.at("base"), w + ".center.base", 0, n);
    }
    if (c.contains("fiber_periods")) {
      const Json& per = c.at("fiber_periods");
      if (!per.is_array() || static_cast<int>(per.size()) != m) schema_error(w, "fiber_periods needs one entry per field");
      for (const auto& v : per)
        chart.fiber_periods.push_back(v.is_null() ? std::optional<Expr>() : ld.expr(v, w + ".fiber_periods", 0));
    }
    charts.push_back(std::move(chart));
  }

  std::vector<Overlap> overlaps;
  if (doc.contains("overlaps")) {
    const Json& ov = doc.at("overlaps");
    if (!ov.is_array()) schema_error("overlaps", "expected an array");
    for (std::size_t i = 0; i < ov.size(); ++i) {
      const std::string w = "overlaps[" + std::to_string(i) + "]";
      overlaps.push_back(Overlap{ld.chart(need(ov[i], "from", w), w + ".from"), ld.chart(need(ov[i], "to", w), w + ".to"),
                                 ld.exprs(need(ov[i], "base_map", w), w + ".base_map", 0, n),
                                 ld.exprs(need(ov[i], "fiber_map", w), w + ".fiber_map", 0, m)});
    }
  }
  p.atlas = Atlas(p.space, charts, overlaps);
  p.atlas.set_constant_values(p.constant_values);

  // Field equations: per chart, or one global expression for every chart.
  p.lagrangians.resize(charts.size());
  p.sources.resize(charts.size());
  const auto source_of = [&](const Json& j, const std::string& w) {
    return SourceForm{ld.exprs(j, w, 2 * r, m)};
  };
  for (std::size_t i = 0; i < charts_json.size(); ++i) {
    const Json& c = charts_json[i];
    const std::string w = "charts." + ld.chart_ids[i];
    const Json* lag = c.contains("lagrangian") ? &c.at("lagrangian") : doc.contains("lagrangian") ? &doc.at("lagrangian") : nullptr;
    const Json* src = c.contains("source_form") ? &c.at("source_form")
                      : doc.contains("source_form") ? &doc.at("source_form")
                                                    : nullptr;
    if (lag) p.lagrangians[i] = ld.expr(*lag, w + ".lagrangian", r);
    if (src) p.sources[i] = source_of(*src, w + ".source_form");
    if (!lag && !src) schema_error(w, "needs a lagrangian or a source_form");
    if (lag && src && !equals(euler_lagrange(*p.lagrangians[i], p.space), *p.sources[i]))
      throw Error(ErrorCode::InconsistentSourceForm,
                  w + ": source_form is not the Euler-Lagrange form of the lagrangian");
  }

  if (doc.contains("partition_of_unity")) {
    auto rho = ld.per_chart<Expr>(doc.at("partition_of_unity"), "partition_of_unity",
                                  [&](const Json& j, const std::string& w) { return ld.expr(j, w, 0); });
    PartitionOfUnity pou;
    for (std::size_t i = 0; i < rho.size(); ++i) {
      if (!rho[i]) schema_error("partition_of_unity", "missing chart '" + ld.chart_ids[i] + "'");
      pou.rho.push_back(*rho[i]);
    }
    p.pou = pou;
  }

  const auto field_of = [&](const Json& j, const std::string& w) {
    VectorField xi;
    xi.base = j.contains("base") ? ld.exprs(j.at("base"), w + ".base", 0, n) : std::vector<Expr>(n);
    xi.fiber = j.contains("fiber") ? ld.exprs(j.at("fiber"), w + ".fiber", 0, m) : std::vector<Expr>(m);
    validate(xi, p.space);
    return xi;
  };
  const auto forms_of = [&](const Json& j, const std::string& w) {
    auto f = ld.per_chart<Form>(j, w, [&](const Json& v, const std::string& vw) { return ld.form(v, vw); });
    std::vector<Form> out;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (!f[i]) schema_error(w, "missing chart '" + ld.chart_ids[i] + "'");
      out.push_back(*f[i]);
    }
    return out;
  };

  if (doc.contains("symmetries")) {
    const Json& syms = doc.at("symmetries");
    if (!syms.is_array()) schema_error("symmetries", "expected an array");
    for (std::size_t i = 0; i < syms.size(); ++i) {
      const std::string w = "symmetries[" + std::to_string(i) + "]";
      SymmetryInput s;
      s.name = need(syms[i], "name", w).get<std::string>();
      if (syms[i].contains("field")) {
        s.fields.assign(charts.size(), field_of(syms[i].at("field"), w + ".field"));
      } else {
        auto f = ld.per_chart<VectorField>(need(syms[i], "fields", w), w + ".fields", field_of);
        for (std::size_t c = 0; c < f.size(); ++c) {
          if (!f[c]) schema_error(w, "missing field on chart '" + ld.chart_ids[c] + "'");
          s.fields.push_back(*f[c]);
        }
      }
      if (syms[i].contains("representative")) s.representative = forms_of(syms[i].at("representative"), w + ".representative");
      p.symmetries.push_back(std::move(s));
    }
  }

  if (doc.contains("sections")) {
    const Json& secs = doc.at("sections");
    if (!secs.is_array()) schema_error("sections", "expected an array");
    for (std::size_t i = 0; i < secs.size(); ++i) {
      const std::string w = "sections[" + std::to_string(i) + "]";
      GlobalSection s;
      s.name = need(secs[i], "name", w).get<std::string>();
      const auto values = [&](const Json& j, const std::string& vw) { return ld.exprs(j, vw, 0, m); };
      s.values = ld.per_chart<std::vector<Expr>>(need(secs[i], "values", w), w + ".values", values);
      s.homotopic_to = secs[i].value("homotopic_to", std::string());
      if (secs[i].contains("homotopy"))
        s.homotopy = ld.per_chart<std::vector<Expr>>(secs[i].at("homotopy"), w + ".homotopy", values);
      p.sections.push_back(std::move(s));
    }
    for (const auto& s : p.sections) {
      if (s.homotopic_to.empty()) continue;
      bool found = false;
      for (const auto& t : p.sections) found = found || t.name == s.homotopic_to;
      if (!found) schema_error("sections." + s.name, "unknown section '" + s.homotopic_to + "'");
    }
  }

  if (doc.contains("cycles")) {
    const Json& cyc = doc.at("cycles");
    const auto list = [&](const char* key, int dim, bool in_base, std::vector<Cycle>& out) {
      if (!cyc.contains(key)) return;
      const Json& a = cyc.at(key);
      if (!a.is_array()) schema_error(std::string("cycles.") + key, "expected an array");
      for (std::size_t i = 0; i < a.size(); ++i)
        out.push_back(ld.cycle(a[i], std::string("cycles.") + key + "[" + std::to_string(i) + "]", dim, in_base));
    };
    list("total", n + 1, false, p.total_cycles);
    list("current", n, false, p.current_cycles);
    list("base", n, true, p.base_cycles);
  }

  if (doc.contains("representative")) {
    const Json& rep = doc.at("representative");
    Representative r0;
    r0.forms = forms_of(need(rep, "forms", "representative"), "representative.forms");
    if (rep.contains("global_lagrangian")) {
      auto g = ld.per_chart<Expr>(rep.at("global_lagrangian"), "representative.global_lagrangian",
                                  [&](const Json& j, const std::string& w) { return ld.expr(j, w, r); });
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!g[i]) schema_error("representative.global_lagrangian", "missing chart '" + ld.chart_ids[i] + "'");
        r0.global_lagrangian.push_back(*g[i]);
      }
    }
    p.representative = r0;
  }

  if (doc.contains("bundle")) {
    const Json& b = doc.at("bundle");
    p.bundle.kind = need(b, "kind", "bundle").get<std::string>();
    static const std::set<std::string> kinds{"affine", "vector", "contractible", "trivial", "product", "unknown"};
    if (!kinds.count(p.bundle.kind)) schema_error("bundle.kind", "unknown kind '" + p.bundle.kind + "'");
    p.bundle.base_betti = b.value("base_betti", std::vector<int>{});
    p.bundle.fiber_betti = b.value("fiber_betti", std::vector<int>{});
  }

  if (doc.contains("ode")) {
    const Json& o = doc.at("ode");
    OdeInput in;
    if (o.contains("chart")) in.chart = ld.chart(o.at("chart"), "ode.chart");
    in.problem.t0 = o.value("t0", 0.0);
    in.problem.t1 = o.value("t1", 10.0);
    in.problem.step = o.value("step", 1e-3);
    if (!(in.problem.step > 0.0) || !(in.problem.t1 > in.problem.t0)) schema_error("ode", "need t1 > t0 and step > 0");
    const Json& init = need(o, "initial", "ode");
    if (!init.is_array() || static_cast<int>(init.size()) != m) schema_error("ode.initial", "one array per field");
    for (const auto& v : init) in.problem.initial.push_back(v.get<std::vector<double>>());
    p.ode = in;
  }

  if (doc.contains("tolerances")) {
    const Json& t = doc.at("tolerances");
    for (const auto& [k, v] : t.items()) {
      const double x = number_of(v, "tolerances." + k);
      if (!(x > 0.0)) schema_error("tolerances." + k, "must be positive");
      if (k == "tau_eq") p.tolerances.tau_eq = x;
      else if (k == "tau_quad") p.tolerances.tau_quad = x;
      else if (k == "tau_class") p.tolerances.tau_class = x;
      else if (k == "tau_crit") p.tolerances.tau_crit = x;
      else schema_error("tolerances", "unknown tolerance '" + k + "'");
    }
  }
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) schema_error("seed", "expected a non-negative integer");
    p.seed = doc.at("seed").get<std::uint64_t>();
  }
  return p;
}

Problem load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Schema, "cannot open problem file '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("invalid JSON: ") + e.what());
  }
  return load_problem(doc);
}

void set_constants(Problem& p, const std::map<std::string, Rational>& values) {
  for (const auto& [k, v] : values) p.constant_values[k] = v;
  p.atlas.set_constant_values(p.constant_values);
}

Presentation presentation_of(const Problem& p) {
  bool all_lagrangians = true;
  for (const auto& l : p.lagrangians) all_lagrangians = all_lagrangians && l.has_value();
  if (all_lagrangians) {
    std::vector<Expr> l;
    for (const auto& x : p.lagrangians) l.push_back(*x);
    return presentation_from_lagrangians(p.atlas, l);
  }
  std::vector<SourceForm> eta;
  for (std::size_t i = 0; i < p.sources.size(); ++i)
    eta.push_back(p.sources[i] ? *p.sources[i] : euler_lagrange(*p.lagrangians[i], p.space));
  return build_presentation(p.atlas, eta);
}

ClassOptions class_options(const Problem& p) {
  ClassOptions opt;
  opt.tau_class = p.tolerances.tau_class;
  opt.quad.tolerance = p.tolerances.tau_quad;
  return opt;
}

GlobalExistenceInput existence_input(const Problem& p) {
  GlobalExistenceInput in;
  in.symmetries = p.symmetries;
  in.sections = p.sections;
  in.total_cycles = p.total_cycles;
  in.current_cycles = p.current_cycles;
  in.base_cycles = p.base_cycles;
  in.delta_representative = p.representative;
  in.pou = p.pou;
  in.bundle = p.bundle;
  in.options = class_options(p);
  in.tau_crit = p.tolerances.tau_crit;
  return in;
}

void apply_equality_settings(const Problem& p) {
  EqualityConfig& cfg = equality_config();
  cfg.seed = p.seed;
  cfg.tolerance = p.tolerances.tau_eq;
}

namespace {

struct Writer {
  const JetSpace& space;

  Json expr(const Expr& e) const { return to_string(e, space); }
  Json exprs(const std::vector<Expr>& v) const {
    Json a = Json::array();
    for (const auto& e : v) a.push_back(expr(e));
    return a;
  }
  Json hform(const HorizontalForm& h) const {
    Json terms = Json::array();
    for (const auto& [mask, coef] : h.coefficients()) {
      Json dx = Json::array();
      for (int i = 0; i < h.n(); ++i)
        if (mask & (1u << i)) dx.push_back(space.base_names()[i]);
      terms.push_back(Json{{"dx", dx}, {"coef", expr(coef)}});
    }
    return Json{{"degree", h.degree()}, {"terms", terms}};
  }
  Json form(const Form& f) const {
    Json terms = Json::array();
    for (const auto& [key, coef] : f.terms()) {
      Json d = Json::array();
      for (const auto& s : key) d.push_back(space.name(s));
      terms.push_back(Json{{"d", d}, {"coef", expr(coef)}});
    }
    return Json{{"degree", f.is_zero() ? 0 : f.degree()}, {"terms", terms}};
  }
  Json report(const ClassReport& r, const Atlas& atlas) const {
    Json reps = Json::object();
    for (std::size_t i = 0; i < r.representative.size() && i < atlas.charts().size(); ++i)
      reps[atlas.charts()[i].id] = form(r.representative[i]);
    return Json{{"symbol", r.symbol},          {"cycles", r.cycles},         {"periods", r.periods},
                {"errors", r.errors},          {"zero", r.zero},             {"provenance", r.provenance},
                {"projection", r.projection},  {"representative", reps}};
  }
};

Json header(const Problem& p, const std::string& command) {
  return Json{{"schema", kSchema},
              {"command", command},
              {"problem", p.name},
              {"seed", p.seed},
              {"tolerances",
               Json{{"tau_eq", p.tolerances.tau_eq},
                    {"tau_quad", p.tolerances.tau_quad},
                    {"tau_class", p.tolerances.tau_class},
                    {"tau_crit", p.tolerances.tau_crit}}}};
}

Json mu_table(const Problem& p, const Presentation& pr, const Writer& w) {
  Json out = Json::array();
  for (std::size_t k = 0; k < p.atlas.overlaps().size(); ++k) {
    const Overlap& o = p.atlas.overlaps()[k];
    out.push_back(Json{{"overlap", static_cast<int>(k)},
                       {"from", p.atlas.charts()[o.from].id},
                       {"to", p.atlas.charts()[o.to].id},
                       {"mu", w.expr(pr.mu[k])},
                       {"zero", equals(pr.mu[k], Expr())}});
  }
  return out;
}

CommandResult check_variational(const Problem& p) {
  const Writer w{p.space};
  CommandResult res{header(p, "check-variational"), 0};
  Json charts = Json::array();
  bool local = true;
  for (std::size_t i = 0; i < p.atlas.charts().size(); ++i) {
    const SourceForm eta = p.sources[i] ? *p.sources[i] : euler_lagrange(*p.lagrangians[i], p.space);
    const HelmholtzResult h = helmholtz_check(eta, p.space);
    Json residuals = Json::array();
    for (const auto& r : h.residuals) {
      Json k = Json::array();
      for (int idx : r.k) k.push_back(p.space.base_names()[idx]);
      residuals.push_back(Json{{"a", p.space.field_names()[r.a]}, {"b", p.space.field_names()[r.b]}, {"k", k},
                               {"value", w.expr(r.value)}});
    }
    charts.push_back(Json{{"chart", p.atlas.charts()[i].id}, {"helmholtz", h.passes ? "passes" : "fails"},
                          {"residuals", residuals}});
    local = local && h.passes;
  }
  res.report["charts"] = charts;
  if (!local) {
    res.report["verdict"] = "not locally variational";
    res.exit_code = 1;
    return res;
  }
  const Presentation pr = presentation_of(p);
  const ClassReport delta = delta_class(p.atlas, pr, p.total_cycles, p.representative, p.pou, class_options(p));
  res.report["mu"] = mu_table(p, pr, w);
  res.report["delta"] = w.report(delta, p.atlas);
  res.report["verdict"] = delta.zero ? "variational, global" : "locally variational, obstruction";
  res.exit_code = delta.zero ? 0 : 1;
  return res;
}

CommandResult derive(const Problem& p) {
  const Writer w{p.space};
  CommandResult res{header(p, "derive"), 0};
  Json charts = Json::array();
  for (std::size_t i = 0; i < p.atlas.charts().size(); ++i) {
    const Chart& c = p.atlas.charts()[i];
    Json entry{{"chart", c.id}};
    if (p.lagrangians[i]) {
      entry["lagrangian"] = w.expr(*p.lagrangians[i]);
      entry["euler_lagrange"] = w.exprs(euler_lagrange(*p.lagrangians[i], p.space).components);
    } else {
      entry["source_form"] = w.exprs(p.sources[i]->components);
      entry["tonti_lagrangian"] = w.expr(tonti_lagrangian(*p.sources[i], p.space, c.center));
    }
    charts.push_back(entry);
  }
  res.report["charts"] = charts;
  if (!p.atlas.overlaps().empty()) res.report["mu"] = mu_table(p, presentation_of(p), w);
  return res;
}

CommandResult noether(const Problem& p) {
  const Writer w{p.space};
  CommandResult res{header(p, "noether"), 0};
  const Presentation pr = presentation_of(p);
  const auto numeric = [&](const HorizontalForm& h) { return h.map([&](const Expr& e) { return p.atlas.numeric(e); }); };
  const auto numeric_source = [&](const SourceForm& s) {
    SourceForm out;
    for (const auto& e : s.components) out.components.push_back(p.atlas.numeric(e));
    return out;
  };
  Json syms = Json::array();
  for (const auto& sym : p.symmetries) {
    Json charts = Json::array();
    SymmetryKind overall = SymmetryKind::Lagrangian;
    for (std::size_t i = 0; i < p.atlas.charts().size(); ++i) {
      const Chart& c = p.atlas.charts()[i];
      const SymmetryKind kind = classify_symmetry(sym.fields[i], pr.lagrangians[i], pr.sources[i], p.space);
      if (kind == SymmetryKind::None) overall = SymmetryKind::None;
      else if (kind == SymmetryKind::EquationOnly && overall == SymmetryKind::Lagrangian) overall = kind;
      Json entry{{"chart", c.id}, {"kind", kind == SymmetryKind::None ? "not a symmetry" : symmetry_kind_name(kind)}};
      if (kind == SymmetryKind::None) {
        charts.push_back(entry);
        continue;
      }
      const NoetherData d = noether_data(sym.fields[i], pr.lagrangians[i], pr.sources[i], p.space, c.center);
      entry["lie_lagrangian"] = w.expr(d.lie_lagrangian);
      entry["epsilon"] = w.hform(d.epsilon);
      entry["beta"] = w.hform(d.beta);
      entry["nu"] = w.hform(d.nu);
      entry["bessel_hagen_current"] = w.hform(d.bessel_hagen);
      entry["strong_current"] = w.hform(d.strong);
      entry["certificates"] = Json{{"bessel_hagen", d.bessel_hagen_certified},
                                   {"strong", d.strong_certified},
                                   {"lie_lie_zero", d.lie_lie_zero},
                                   {"conservation", d.conservation_certified}};
      if (p.space.n() == 1 && p.ode && p.ode->chart == static_cast<int>(i)) {
        const ConservationResult cr =
            conservation_check(numeric(d.bessel_hagen), numeric_source(pr.sources[i]), p.space, p.ode->problem);
        entry["oracle"] = Json{{"method", "rk4"}, {"drift", cr.drift}, {"initial", cr.initial}, {"steps", cr.steps},
                               {"conserved", cr.drift < kDriftTolerance}};
      } else if (p.space.n() >= 2) {
        Json checks = Json::array();
        auto box = c.base_box;
        if (box.empty()) box.assign(p.space.n(), {0.0, 1.0});
        for (const auto& s : p.sections) {
          if (!s.values[i]) continue;
          const double crit = criticality_residual(p.atlas, pr.sources, s);
          if (crit > p.tolerances.tau_crit) continue;
          std::vector<Expr> sigma;
          for (const auto& e : *s.values[i]) sigma.push_back(p.atlas.numeric(e));
          const double div = conservation_check_sampled(numeric(d.bessel_hagen), p.space, sigma, box, 64);
          checks.push_back(Json{{"section", s.name}, {"divergence", div}, {"conserved", div < kDivergenceTolerance}});
        }
        entry["oracle"] = Json{{"method", "sampled-divergence"}, {"sections", checks}};
      }
      charts.push_back(entry);
    }
    syms.push_back(Json{{"name", sym.name},
                        {"kind", overall == SymmetryKind::None ? "not a symmetry" : symmetry_kind_name(overall)},
                        {"charts", charts}});
  }
  res.report["symmetries"] = syms;
  return res;
}

CommandResult glue(const Problem& p) {
  const Writer w{p.space};
  CommandResult res{header(p, "glue"), 0};
  const Presentation pr = presentation_of(p);
  Json lags = Json::object();
  for (std::size_t i = 0; i < pr.lagrangians.size(); ++i) lags[p.atlas.charts()[i].id] = w.expr(pr.lagrangians[i]);
  res.report["presentation"] = Json{{"from_tonti", pr.from_tonti}, {"lagrangians", lags}};
  res.report["mu"] = mu_table(p, pr, w);
  res.report["cocycle_failures"] = p.atlas.cocycle_failures();
  const ClassOptions opt = class_options(p);
  res.report["delta"] = w.report(delta_class(p.atlas, pr, p.total_cycles, p.representative, p.pou, opt), p.atlas);
  Json syms = Json::array();
  for (const auto& sym : p.symmetries) {
    bool symmetric = true;
    std::vector<Expr> contraction_forms;
    for (std::size_t i = 0; i < p.atlas.charts().size(); ++i) {
      symmetric = symmetric &&
                  classify_symmetry(sym.fields[i], pr.lagrangians[i], pr.sources[i], p.space) != SymmetryKind::None;
      contraction_forms.push_back(contraction(sym.fields[i], pr.sources[i], p.space));
    }
    Json entry{{"name", sym.name}};
    if (!symmetric) {
      entry["kind"] = "not a symmetry";
    } else {
      const ClassReport r = delta_prime_class(p.atlas, contraction_forms, p.current_cycles, sym.representative, p.pou, opt);
      entry["contraction"] = w.exprs(contraction_forms);
      entry["delta_prime"] = w.report(r, p.atlas);
      entry["global_current"] = r.zero;
    }
    syms.push_back(entry);
  }
  res.report["symmetries"] = syms;
  return res;
}

CommandResult obstruction(const Problem& p) {
  const Writer w{p.space};
  CommandResult res{header(p, "obstruction"), 0};
  const Presentation pr = presentation_of(p);
  const GlobalExistenceReport g = global_existence_report(p.atlas, pr, existence_input(p));
  res.report["delta"] = w.report(g.delta, p.atlas);
  res.report["isomorphism"] = Json{{"holds", g.isomorphism.holds}, {"reason", g.isomorphism.reason}};
  Json syms = Json::array();
  for (const auto& s : g.symmetries) {
    Json e{{"name", s.name},
           {"kind", s.kind == SymmetryKind::None ? "not a symmetry" : symmetry_kind_name(s.kind)},
           {"admissible_charts", s.admissible_charts},
           {"admissible_overlaps", s.admissible_overlaps},
           {"global_current", s.global_current}};
    e["delta_prime"] = s.report ? w.report(*s.report, p.atlas) : Json();
    syms.push_back(e);
  }
  res.report["symmetries"] = syms;
  Json branches = Json::array();
  if (g.proposition_applies)
    branches.push_back("proposition: critical global section under the isomorphism hypothesis; every equation symmetry has a global current");
  Json secs = Json::array();
  for (const auto& s : g.sections) {
    Json pulls = Json::array();
    for (const auto& pb : s.pullbacks) {
      pulls.push_back(Json{{"symmetry", pb.symmetry}, {"report", w.report(pb.report, p.atlas)}, {"obstructed", pb.obstructed}});
      if (pb.obstructed)
        branches.push_back("corollary: the homotopy class of section '" + s.name +
                           "' contains no critical section (symmetry '" + pb.symmetry + "')");
    }
    secs.push_back(Json{{"name", s.name},
                        {"global", s.check.global},
                        {"windings", s.check.windings},
                        {"failure", s.check.failure},
                        {"criticality", s.criticality},
                        {"critical", s.critical},
                        {"homotopic_to", s.homotopic_to},
                        {"homotopy_verified", s.homotopy_verified ? Json(*s.homotopy_verified) : Json()},
                        {"pullbacks", pulls}});
  }
  res.report["sections"] = secs;
  if (branches.empty()) branches.push_back("inconclusive");
  res.report["proposition_applies"] = g.proposition_applies;
  res.report["proposition_violations"] = g.proposition_violations;
  res.report["conclusion"] = g.conclusion;
  res.report["branches"] = branches;
  return res;
}

void render(const Json& j, const std::string& indent, std::ostream& out) {
  const auto scalar = [](const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return std::string("-");
    return v.dump();
  };
  const auto flat = [](const Json& v) {
    if (!v.is_array()) return false;
    for (const auto& x : v)
      if (x.is_structured()) return false;
    return true;
  };
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      if (v.is_structured() && !flat(v) && !v.empty()) {
        out << indent << k << ":\n";
        render(v, indent + "  ", out);
      } else if (v.is_array()) {
        out << indent << k << ": [";
        for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << scalar(v[i]);
        out << "]\n";
      } else if (v.is_object()) {
        out << indent << k << ": {}\n";
      } else {
        out << indent << k << ": " << scalar(v) << "\n";
      }
    }
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (v.is_structured()) {
        out << indent << "-\n";
        render(v, indent + "  ", out);
      } else {
        out << indent << "- " << scalar(v) << "\n";
      }
    }
  } else {
    out << indent << scalar(j) << "\n";
  }
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"check-variational", "derive", "noether", "glue", "obstruction"};
  return names;
}

CommandResult run_command(const std::string& command, const Problem& p) {
  apply_equality_settings(p);
  if (command == "check-variational") return check_variational(p);
  if (command == "derive") return derive(p);
  if (command == "noether") return noether(p);
  if (command == "glue") return glue(p);
  if (command == "obstruction") return obstruction(p);
  throw Error(ErrorCode::Schema, "unknown command '" + command + "'");
}

std::string render_text(const Json& report) {
  std::ostringstream out;
  render(report, "", out);
  return out.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variational sequences on jet bundles: Euler-Lagrange, Noether currents and gluing obstructions", "vjp"};
  std::string command, problem_path, report_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> tolerances;
  bool text = false, json = false;
  app.add_option("command", command, "check-variational | derive | noether | glue | obstruction")
      ->required()
      ->check(CLI::IsMember(command_names()));
  app.add_option("--problem", problem_path, "problem file (vjp-schema-1 JSON)")->required();
  app.add_option("--report", report_path, "write the report here instead of stdout");
  app.add_option("--seed", seed, "seed for sampled equality checks");
  app.add_option("--tolerance", tolerances, "override a tolerance: tau_eq|tau_quad|tau_class|tau_crit=<value>");
  auto* text_flag = app.add_flag("--text", text, "human-readable report");
  app.add_flag("--json", json, "JSON report (default)")->excludes(text_flag);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "vjp: " << e.what() << "\n";
    return 2;
  }

  const auto emit = [&](const Json& report) -> bool {
    const std::string body = text ? render_text(report) : report.dump(2) + "\n";
    if (report_path.empty()) {
      out << body;
      return true;
    }
    std::ofstream f(report_path, std::ios::binary);
    f << body;
    return static_cast<bool>(f);
  };

  try {
    Problem p = load_problem_file(problem_path);
    if (seed) p.seed = *seed;
    for (const auto& t : tolerances) {
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::Schema, "--tolerance expects name=value");
      double value = 0.0;
      try {
        value = std::stod(t.substr(eq + 1));
      } catch (const std::exception&) {
        throw Error(ErrorCode::Schema, "--tolerance: invalid value in '" + t + "'");
      }
      const std::string name = t.substr(0, eq);
      if (!(value > 0.0)) throw Error(ErrorCode::Schema, "--tolerance: value must be positive");
      if (name == "tau_eq") p.tolerances.tau_eq = value;
      else if (name == "tau_quad") p.tolerances.tau_quad = value;
      else if (name == "tau_class") p.tolerances.tau_class = value;
      else if (name == "tau_crit") p.tolerances.tau_crit = value;
      else throw Error(ErrorCode::Schema, "--tolerance: unknown tolerance '" + name + "'");
    }
    const CommandResult r = run_command(command, p);
    if (!emit(r.report)) {
      err << "vjp: cannot write report '" << report_path << "'\n";
      return 2;
    }
    return r.exit_code;
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    err << "vjp: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    emit(Json{{"schema", kSchema}, {"command", command}, {"error", error_code_name(e.code())}, {"message", e.what()},
              {"exit_code", code}});
    return code;
  } catch (const Json::exception& e) {
    err << "vjp: schema: " << e.what() << "\n";
    emit(Json{{"schema", kSchema}, {"command", command}, {"error", "schema"}, {"message", e.what()}, {"exit_code", 2}});
    return 2;
  }
}

}  // namespace vjp
