#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "vjp/error.hpp"
#include "vjp/oracle.hpp"
#include "vjp/parse.hpp"
#include "vjp/varcalc.hpp"

using namespace vjp;

namespace {

const JetSpace kT({"t"}, {"u"}, 2);
const JetSpace kX({"x"}, {"u", "v"}, 2);
const JetSpace kXY({"x", "y"}, {"u"}, 2);

Expr T(const char* s) { return parse(s, kT, 4); }
Expr X(const char* s) { return parse(s, kX, 4); }
Expr XY(const char* s) { return parse(s, kXY, 4); }

const std::vector<std::array<double, 2>> kUnit{{0.0, 1.0}};

}  // namespace

TEST_CASE("sample_section: jets from the closed form") {
  const auto s = sample_section(kT, {T("t^3")}, kUnit, 11, 2);
  CHECK(s.size() == 11);
  CHECK(s.values.at(Symbol::field(0))[5] == doctest::Approx(0.125));
  CHECK(s.values.at(Symbol::field(0, {0}))[5] == doctest::Approx(0.75));
  CHECK(s.values.at(Symbol::field(0, {0, 0}))[10] == doctest::Approx(6.0));
  CHECK(s.values.at(Symbol::base(0))[3] == doctest::Approx(0.3));
}

TEST_CASE("bump vanishes with its derivatives at the rim") {
  const Expr b = bump(kT, {0.5}, 0.4);
  const Evaluator e(b, {Symbol::base(0)});
  const std::vector<double> centre{0.5}, near{0.5 + 0.4 * 0.999};
  CHECK(e(centre) == doctest::Approx(1.0));
  CHECK(e(near) < 1e-200);
}

TEST_CASE("gateaux_check: examples") {
  const Expr l = T("u_t^2/2");
  const auto r = gateaux_check(l, euler_lagrange(l, kT), kT, {T("t^2")}, kUnit);
  CHECK(r.residual < 1e-6);
  CHECK_FALSE(r.grid_warning);
  CHECK(r.action_derivative == doctest::Approx(r.euler_pairing).epsilon(1e-8));
  CHECK(r.action_derivative < 0.0);

  const auto zero = gateaux_check(Expr(), SourceForm{{Expr()}}, kT, {T("t^2")}, kUnit);
  CHECK(zero.residual == 0.0);
  CHECK(zero.action_derivative == 0.0);

  const Expr trivial = X("u*u_x");
  const auto t = gateaux_check(trivial, euler_lagrange(trivial, kX), kX, {X("sin(x)"), X("x^3")}, kUnit);
  CHECK(std::abs(t.action_derivative) < 1e-9);
  CHECK(t.residual < 1e-9);
}

TEST_CASE("gateaux_check rejects a wrong Euler-Lagrange form") {
  const Expr l = T("u_t^2/2");
  const auto r = gateaux_check(l, SourceForm{{T("u_tt")}}, kT, {T("t^2")}, kUnit);
  CHECK(r.residual > 0.5);
  const auto s = gateaux_check(l, SourceForm{{T("-u_tt + u")}}, kT, {T("t^2")}, kUnit);
  CHECK(s.residual > 1e-3);
}

TEST_CASE("gateaux_check on random Lagrangians") {
  std::mt19937_64 rng(71);
  for (int k = 0; k < 6; ++k) {
    const Expr l = testing::random_polynomial(rng, kX, 2, 3, 3);
    const auto r = gateaux_check(l, euler_lagrange(l, kX), kX, {X("x^2 - x/3"), X("cos(x)")}, kUnit);
    REQUIRE(r.residual < 1e-6);
  }
  const Expr l2 = XY("(u_x^2 + u_y^2)/2 + u^3*x");
  const auto r2 = gateaux_check(l2, euler_lagrange(l2, kXY), kXY, {XY("x*y + y^2")}, {{0.0, 1.0}, {0.0, 1.0}});
  CHECK(r2.residual < 1e-6);
}

TEST_CASE("gateaux_check: grid refinement") {
  const Expr l = T("u_t^2/2 + u^4*t");
  const auto eta = euler_lagrange(l, kT);
  GateauxOptions coarse;
  coarse.points = 64;
  coarse.step = 1e-2;
  GateauxOptions fine = coarse;
  fine.points = 128;
  fine.step = 5e-3;
  const double a = gateaux_check(l, eta, kT, {T("sin(t)")}, kUnit, coarse).residual;
  const double b = gateaux_check(l, eta, kT, {T("sin(t)")}, kUnit, fine).residual;
  CHECK(b <= a);
  CHECK(b < 1e-6);
}

TEST_CASE("gateaux_check: input errors") {
  const Expr l = T("u_t^2/2");
  CHECK_THROWS_AS(gateaux_check(l, SourceForm{{Expr()}, }, kT, {}, kUnit), Error);
  GateauxOptions o;
  o.points = 3;
  CHECK_THROWS_AS(gateaux_check(l, euler_lagrange(l, kT), kT, {T("t")}, kUnit, o), Error);
}

TEST_CASE("conservation_check: free particle") {
  const Expr l = T("u_t^2/2");
  const auto eta = euler_lagrange(l, kT);
  OdeProblem ode;
  ode.initial = {{0.3, 1.7}};
  const auto momentum = conservation_check(HorizontalForm::scalar(1, T("u_t")), eta, kT, ode);
  CHECK(momentum.drift < 1e-8);
  CHECK(momentum.initial == doctest::Approx(1.7));
  CHECK(momentum.steps == 10000);
  const auto energy = conservation_check(HorizontalForm::scalar(1, T("-u_t^2/2")), eta, kT, ode);
  CHECK(energy.drift < 1e-8);
  const auto position = conservation_check(HorizontalForm::scalar(1, T("u")), eta, kT, ode);
  CHECK(position.drift == doctest::Approx(17.0).epsilon(1e-9));
}

TEST_CASE("conservation_check: oscillator energy and step order") {
  const Expr l = T("u_t^2/2 - u^2/2");
  const auto eta = euler_lagrange(l, kT);
  const auto energy = HorizontalForm::scalar(1, T("u_t^2/2 + u^2/2"));
  OdeProblem ode;
  ode.initial = {{1.0, 0.0}};
  ode.step = 1e-2;
  const double a = conservation_check(energy, eta, kT, ode).drift;
  ode.step = 5e-3;
  const double b = conservation_check(energy, eta, kT, ode).drift;
  CHECK(a < 1e-8);
  CHECK(a / b > 10.0);
}

TEST_CASE("conservation_check: implicit top derivative") {
  const Expr l = T("u_t^2/2 + u_t^4/12");
  const auto eta = euler_lagrange(l, kT);
  OdeProblem ode;
  ode.initial = {{0.0, 0.8}};
  ode.t1 = 2.0;
  const auto p = conservation_check(HorizontalForm::scalar(1, T("u_t + u_t^3/3")), eta, kT, ode);
  CHECK(p.drift < 1e-10);
}

TEST_CASE("conservation_check: preconditions") {
  const auto eta = euler_lagrange(XY("(u_x^2+u_y^2)/2"), kXY);
  OdeProblem ode;
  ode.initial = {{0.0, 1.0}};
  try {
    conservation_check(HorizontalForm::current({XY("u_x"), XY("u_y")}), eta, kXY, ode);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PreconditionFailed);
  }
  try {
    conservation_check(HorizontalForm::scalar(1, T("u")), SourceForm{{T("u")}}, kT, ode);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PreconditionFailed);
  }
  ode.initial = {{0.0, 1.0}};
  ode.t1 = 5.0;
  try {
    conservation_check(HorizontalForm::scalar(1, T("u")), SourceForm{{T("-u_tt + u^3")}}, kT, ode);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IntegratorFailure);
  }
}

TEST_CASE("conservation_check_sampled: Laplace currents") {
  const Expr l = XY("(u_x^2 + u_y^2)/2");
  const std::vector<std::array<double, 2>> box{{0.0, 1.0}, {0.0, 1.0}};
  const std::vector<Expr> harmonic{XY("x^2 - y^2 + x*y")};
  CHECK(conservation_check_sampled(HorizontalForm::current({XY("u_x"), XY("u_y")}), kXY, harmonic, box) < 1e-8);
  CHECK(conservation_check_sampled(HorizontalForm::current({XY("u"), Expr()}), kXY, harmonic, box) > 0.1);
  const std::vector<Expr> wavy{XY("exp(x)*sin(y)")};
  CHECK(conservation_check_sampled(HorizontalForm::current({XY("u_x"), XY("u_y")}), kXY, wavy, box) < 1e-6);
}

TEST_CASE("symbolic_numeric_crosscheck: examples") {
  const Expr l = T("u_t^2/2");
  const auto eta = euler_lagrange(l, kT);
  const VectorField shift{{Expr()}, {Expr(1)}};
  const auto r = variational_lie_derivative_lagrangian(shift, l, kT);
  const Expr lhs = r.lie;
  const Expr rhs = contraction(shift, eta, kT) + dH(r.epsilon, kT).top();
  CHECK(symbolic_numeric_crosscheck(lhs, rhs, 32).pass);
  const Expr flipped = contraction(shift, eta, kT) - dH(r.epsilon, kT).top();
  CHECK_FALSE(symbolic_numeric_crosscheck(lhs, flipped, 32).pass);
  CHECK(symbolic_numeric_crosscheck(Expr(), Expr(), 8).pass);
}

TEST_CASE("symbolic_numeric_crosscheck agrees with equals on random identities") {
  std::mt19937_64 rng(73);
  for (int k = 0; k < 20; ++k) {
    const Expr l = testing::random_polynomial(rng, kX, 2, 3, 3);
    const VectorField xi{{X("x")}, {X("u"), X("v + x")}};
    const auto r = variational_lie_derivative_lagrangian(xi, l, kX);
    const Expr rhs = contraction(xi, euler_lagrange(l, kX), kX) + dH(r.epsilon, kX).top();
    REQUIRE(symbolic_numeric_crosscheck(r.lie, rhs, 16).pass);
    REQUIRE(equals(r.lie, rhs));
  }
}
