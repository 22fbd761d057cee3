// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

#include "support.hpp"
#include "vjp/cli.hpp"
#include "vjp/error.hpp"
#include "vjp/oracle.hpp"
#include "vjp/parse.hpp"
#include "vjp/varcalc.hpp"

using namespace vjp;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kSeed = 20240601;

// Pinned tolerances and limits.
constexpr int kHelmholtzCorpus = 200;
constexpr double kGateauxTolerance = 1e-6;
constexpr double kHelmholtzSeconds = 120.0;
constexpr int kTontiCorpus = 100;
constexpr double kTontiSeconds = 60.0;
constexpr int kNoetherCorpus = 50;
constexpr double kDriftTolerance = 1e-8;
constexpr double kMonopoleRelative = 1e-4;
constexpr double kRefinementAbsolute = 2e-4;
constexpr double kMonopoleSeconds = 30.0;
constexpr double kSectionPeriodTolerance = 1e-4;
constexpr double kCriticalTolerance = 1e-8;

struct Corpus {
  JetSpace space;
  std::vector<Expr> sigma;
  std::vector<std::array<double, 2>> box;
};

std::vector<Corpus> corpora() {
  std::vector<Corpus> out;
  const auto make = [&](JetSpace s, std::initializer_list<const char*> sigma) {
    std::vector<Expr> v;
    for (const char* t : sigma) v.push_back(parse(t, s, 4));
    std::vector<std::array<double, 2>> box(s.n(), {0.0, 1.0});
    out.push_back({std::move(s), v, box});
  };
  make(JetSpace({"t"}, {"u"}, 2), {"t^2 - t/3 + sin(2*t)/4"});
  make(JetSpace({"x"}, {"u", "v"}, 2), {"x^2 - x/3", "cos(x)"});
  make(JetSpace({"x", "y"}, {"u"}, 2), {"x*y + y^2/2 - x/4"});
  make(JetSpace({"x", "y"}, {"u", "v"}, 2), {"x*y - y/2", "sin(x + y)/2"});
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome helmholtz_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(kSeed);
  const auto cs = corpora();
  int symbolic = 0, trivial = 0, oracle = 0;
  double worst = 0.0;
  for (int k = 0; k < kHelmholtzCorpus; ++k) {
    const Corpus& c = cs[k % cs.size()];
    const Expr l = testing::random_polynomial(rng, c.space, 2, 3, 3);
    const SourceForm eta = euler_lagrange(l, c.space);
    if (helmholtz_check(eta, c.space).passes) ++symbolic;
    std::vector<Expr> f;
    for (int i = 0; i < c.space.n(); ++i) f.push_back(testing::random_polynomial(rng, c.space, 1, 3, 3));
    const Expr w = dH(HorizontalForm::current(f), c.space).top();
    const SourceForm zero = euler_lagrange(w, c.space);
    if (zero.is_zero()) ++trivial;
    const double r1 = gateaux_check(l, eta, c.space, c.sigma, c.box).residual;
    const double r2 = gateaux_check(w, zero, c.space, c.sigma, c.box).residual;
    worst = std::max({worst, r1, r2});
    if (r1 < kGateauxTolerance && r2 < kGateauxTolerance) ++oracle;
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "helmholtz " << symbolic << "/" << kHelmholtzCorpus << ", trivial E=0 " << trivial << "/" << kHelmholtzCorpus
    << ", gateaux " << oracle << "/" << kHelmholtzCorpus << " (max residual " << worst << "), " << secs << " s";
  return {symbolic == kHelmholtzCorpus && trivial == kHelmholtzCorpus && oracle == kHelmholtzCorpus &&
              secs < kHelmholtzSeconds,
          d.str()};
}

Outcome tonti_round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(kSeed + 1);
  const auto cs = corpora();
  int ok = 0, tested = 0;
  while (tested < kTontiCorpus) {
    const Corpus& c = cs[tested % cs.size()];
    const SourceForm eta = euler_lagrange(testing::random_polynomial(rng, c.space, 2, 3, 3), c.space);
    if (!helmholtz_check(eta, c.space).passes) continue;
    ++tested;
    if (equals(euler_lagrange(tonti_lagrangian(eta, c.space), c.space), eta)) ++ok;
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << ok << "/" << tested << " equal, " << secs << " s";
  return {ok == tested && secs < kTontiSeconds, d.str()};
}

Outcome noether_identity() {
  std::mt19937_64 rng(kSeed + 2);
  const auto cs = corpora();
  int ok = 0, total = 0;
  for (const Corpus& c : cs) {
    const JetSpace& s = c.space;
    std::vector<VectorField> fields;
    const auto p = [&](const char* t) { return parse(t, s, 0); };
    std::vector<Expr> zero_base(s.n()), zero_fiber(s.m());
    for (int i = 0; i < s.n(); ++i) {
      VectorField translate{zero_base, zero_fiber};
      translate.base[i] = Expr(1);
      fields.push_back(translate);
    }
    VectorField scale{zero_base, zero_fiber};
    for (int i = 0; i < s.n(); ++i) scale.base[i] = s.x(i);
    for (int a = 0; a < s.m(); ++a) scale.fiber[a] = s.u(a) * Expr(2);
    fields.push_back(scale);
    VectorField mix{zero_base, zero_fiber};
    mix.base[0] = s.x(0) * s.x(0);
    mix.fiber[0] = s.u(0) + s.x(0);
    if (s.m() > 1) mix.fiber[1] = s.u(0) * p("1");
    fields.push_back(mix);
    for (int k = 0; k < kNoetherCorpus / static_cast<int>(cs.size()) + 1; ++k) {
      const Expr l = testing::random_polynomial(rng, s, 2, 3, 3);
      for (const auto& xi : fields) {
        ++total;
        const auto r = variational_lie_derivative_lagrangian(xi, l, s);
        if (equals(r.lie - contraction(xi, euler_lagrange(l, s), s) - dH(r.epsilon, s).top(), Expr())) ++ok;
      }
    }
  }
  std::ostringstream d;
  d << ok << "/" << total << " identities hold";
  return {ok == total && total > 0, d.str()};
}

Problem corpus_problem(const std::string& name) {
  return load_problem_file(testing::source_path("problems/" + name + ".json"));
}

Outcome conservation() {
  const Problem p = corpus_problem("free_particle");
  apply_equality_settings(p);
  OdeProblem ode = p.ode->problem;
  ode.t0 = 0.0;
  ode.t1 = 10.0;
  ode.step = 1e-3;
  const SourceForm eta = euler_lagrange(*p.lagrangians[0], p.space);
  const auto momentum = conservation_check(HorizontalForm::scalar(1, parse("u_t", p.space)), eta, p.space, ode);
  const auto energy = conservation_check(HorizontalForm::scalar(1, parse("-u_t^2/2", p.space)), eta, p.space, ode);
  // The CLI path derives the same currents and reports its own drift.
  const Json rep = run_command("noether", p).report;
  const double cli_shift = rep["symmetries"][0]["charts"][0]["oracle"]["drift"].get<double>();
  const double cli_time = rep["symmetries"][1]["charts"][0]["oracle"]["drift"].get<double>();
  std::ostringstream d;
  d << "drift u_t " << momentum.drift << ", -u_t^2/2 " << energy.drift << " (cli " << cli_shift << ", " << cli_time
    << "), " << momentum.steps << " steps";
  return {momentum.drift < kDriftTolerance && energy.drift < kDriftTolerance && cli_shift < kDriftTolerance &&
              cli_time < kDriftTolerance,
          d.str()};
}

Outcome monopole() {
  const auto t0 = std::chrono::steady_clock::now();
  Problem p2 = corpus_problem("monopole");
  apply_equality_settings(p2);
  bool ok = true;
  std::ostringstream d;
  double period_g1 = 0.0;
  for (auto [num, den] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{1, 2}}) {
    set_constants(p2, {{"g", Rational(num, den)}});
    const ClassReport r =
        delta_class(p2.atlas, presentation_of(p2), p2.total_cycles, p2.representative, p2.pou, class_options(p2));
    const double expect = 4 * kPi * num / den;
    const double rel = std::abs(r.periods[0] - expect) / expect;
    ok = ok && rel < kMonopoleRelative && !r.zero;
    if (num == 1 && den == 1) period_g1 = r.periods[0];
    d << "g=" << num << "/" << den << " rel.err " << rel << "; ";
  }
  Problem p3 = corpus_problem("monopole3");
  set_constants(p3, {{"g", Rational(1)}});
  const ClassReport r3 =
      delta_class(p3.atlas, presentation_of(p3), p3.total_cycles, p3.representative, p3.pou, class_options(p3));
  const double shift = std::abs(r3.periods[0] - period_g1);
  const double secs = seconds_since(t0);
  d << "3-chart shift " << shift << ", " << secs << " s";
  return {ok && shift < kRefinementAbsolute && secs < kMonopoleSeconds, d.str()};
}

std::vector<std::string> corpus_names() {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(testing::source_path("problems")))
    if (e.path().extension() == ".json") out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

Outcome proposition() {
  int applied = 0, violations = 0, skipped = 0;
  std::ostringstream notes;
  for (const auto& name : corpus_names()) {
    Problem p;
    Presentation pr;
    try {
      p = corpus_problem(name);
      apply_equality_settings(p);
      pr = presentation_of(p);
    } catch (const Error&) {
      ++skipped;  // not locally variational or outside the supported class
      continue;
    }
    GlobalExistenceInput in = existence_input(p);
    in.tau_crit = kCriticalTolerance;
    try {
      const auto rep = global_existence_report(p.atlas, pr, in);
      if (!rep.proposition_applies) continue;
      ++applied;
      for (const auto& s : rep.symmetries)
        if (s.kind == SymmetryKind::EquationOnly && (!s.report || !s.report->zero)) ++violations;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::PropositionViolated) {
        ++applied;
        ++violations;
      } else {
        notes << " " << name << ": " << e.what() << ";";
        ++violations;
      }
    }
  }
  std::ostringstream d;
  d << applied << " problems meet the isomorphism hypothesis, " << violations << " violations, " << skipped << " skipped"
    << notes.str();
  return {violations == 0 && applied > 0, d.str()};
}

Outcome section_dependence() {
  const Problem p = corpus_problem("torus");
  const Json rep = run_command("obstruction", p).report;
  const Json* w0 = nullptr;
  const Json* w1 = nullptr;
  for (const auto& s : rep["sections"]) {
    if (s["name"] == "w0") w0 = &s;
    if (s["name"] == "w1") w1 = &s;
  }
  if (!w0 || !w1) return {false, "torus problem lacks sections w0 and w1"};
  const auto& p0 = (*w0)["pullbacks"][0]["report"]["periods"];
  const auto& p1 = (*w1)["pullbacks"][0]["report"]["periods"];
  double diff = 0.0;
  for (std::size_t c = 0; c < p0.size(); ++c)
    diff = std::max(diff, std::abs(p1[c].get<double>() - p0[c].get<double>() - 2 * kPi));
  const bool obstructed = (*w1)["pullbacks"][0]["obstructed"].get<bool>() && !(*w0)["pullbacks"][0]["obstructed"].get<bool>();
  bool certificate = false;
  for (const auto& b : rep["branches"])
    certificate = certificate || (b.get<std::string>().rfind("corollary", 0) == 0 &&
                                  b.get<std::string>().find("'w1'") != std::string::npos);
  std::ostringstream d;
  d << "period difference - 2 pi = " << diff << ", winding-1 obstructed " << (obstructed ? "yes" : "no")
    << ", certificate " << (certificate ? "issued" : "missing");
  return {diff < kSectionPeriodTolerance && obstructed && certificate, d.str()};
}

Outcome strong_currents() {
  int ok = 0, total = 0;
  for (const auto& name : corpus_names()) {
    Problem p;
    Presentation pr;
    try {
      p = corpus_problem(name);
      apply_equality_settings(p);
      pr = presentation_of(p);
    } catch (const Error&) {
      continue;
    }
    for (const auto& sym : p.symmetries)
      for (std::size_t i = 0; i < p.atlas.charts().size(); ++i) {
        if (classify_symmetry(sym.fields[i], pr.lagrangians[i], pr.sources[i], p.space) != SymmetryKind::EquationOnly)
          continue;
        ++total;
        const NoetherData d = noether_data(sym.fields[i], pr.lagrangians[i], pr.sources[i], p.space,
                                           p.atlas.charts()[i].center);
        if (equals(dH(d.nu + d.epsilon, p.space), dH(d.beta, p.space))) ++ok;
      }
  }
  std::ostringstream d;
  d << ok << "/" << total << " charts with equation-only symmetries";
  return {ok == total && total > 0, d.str()};
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "vjp_acceptance";
  std::filesystem::create_directories(dir);
  int same = 0, total = 0;
  std::ostringstream bad;
  for (const auto& name : corpus_names())
    for (const auto& cmd : command_names()) {
      std::string bodies[2];
      for (int run = 0; run < 2; ++run) {
        const auto out = dir / (name + "_" + cmd + "_" + std::to_string(run) + ".json");
        const std::string line = std::string("\"") + VJP_BINARY + "\" " + cmd + " --problem \"" +
                                 testing::source_path("problems/" + name + ".json") + "\" --seed " +
                                 std::to_string(kSeed) + " --report \"" + out.string() + "\" 2>/dev/null";
        const int status = std::system(line.c_str());
        (void)status;
        bodies[run] = slurp(out);
      }
      ++total;
      if (!bodies[0].empty() && bodies[0] == bodies[1]) ++same;
      else bad << " " << name << "/" << cmd;
    }
  std::ostringstream d;
  d << same << "/" << total << " report pairs byte-identical" << bad.str();
  return {same == total, d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 Helmholtz/E-L exactness with Gateaux cross-check", helmholtz_suite},
      {"2 Tonti round trip", tonti_round_trip},
      {"3 Noether identity", noether_identity},
      {"4 conservation at desk scale", conservation},
      {"5 monopole obstruction 4 pi g", monopole},
      {"6 isomorphism-branch consistency", proposition},
      {"7 section dependence on the torus", section_dependence},
      {"8 strong currents", strong_currents},
      {"9 determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
