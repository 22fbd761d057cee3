#include <cmath>
#include <numbers>

#include "doctest.h"
#include "support.hpp"
#include "vjp/error.hpp"
#include "vjp/eval.hpp"
#include "vjp/parse.hpp"
#include "vjp/quadrature.hpp"

using namespace vjp;

namespace {

const JetSpace kT({"t"}, {"u"}, 2);
const JetSpace kXY({"x", "y"}, {"u", "v"}, 2);

Expr P(const char* s, const JetSpace& sp = kXY) { return parse(s, sp); }

Expr rebuild(const Expr& e) {
  Expr out;
  for (const auto& t : e.terms()) out += make_term(t.coef, t.mono);
  return out;
}

}  // namespace

TEST_CASE("parse: jet symbols of the time-only space") {
  const Expr e = parse("u_{tt} + u*u_t", kT);
  const auto s = symbols(e);
  CHECK(s.size() == 3);
  CHECK(s.count(Symbol::field(0, {})) == 1);
  CHECK(s.count(Symbol::field(0, {0})) == 1);
  CHECK(s.count(Symbol::field(0, {0, 0})) == 1);
  CHECK(parse("u_{t t}", kT) == parse("u_tt", kT));
}

TEST_CASE("parse: mixed partials are symmetric") { CHECK(P("u_{xy} - u_{yx}").is_zero()); }

TEST_CASE("parse: pythagorean identity") {
  CHECK(P("sin(u)^2 + cos(u)^2 - 1").is_zero());
  CHECK(P("cos(u_x)^4 - (1 - sin(u_x)^2)^2").is_zero());
  CHECK(P("sin(-u) + sin(u)").is_zero());
  CHECK(P("cos(-u) - cos(u)").is_zero());
}

TEST_CASE("parse: errors") {
  try {
    P("u + * v");
    FAIL("expected syntax error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Syntax);
    CHECK(e.position() == 4);
  }
  try {
    P("u + w");
    FAIL("expected unknown coordinate");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownCoordinate);
  }
  try {
    P("u_{xxx}");
    FAIL("expected jet order error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::JetOrderExceeded);
  }
  CHECK_NOTHROW(parse("u_{xxx}", kXY, 4));
  CHECK_THROWS_AS(P("u_z"), Error);
  CHECK_THROWS_AS(P("(u"), Error);
}

TEST_CASE("parse: numbers and reserved parameters") {
  CHECK(P("0.25*u") == Expr(Rational(1, 4)) * P("u"));
  CHECK(P("1.5e2") == Expr(150));
  CHECK(P("2^-2") == Expr(Rational(1, 4)));
  CHECK(contains(P("@t*u"), Symbol::param(kHomotopyParam)));
  CHECK(contains(P("@s2"), Symbol::param(2)));
}

TEST_CASE("partial: examples") {
  CHECK(partial(parse("u*u_t", kT), Symbol::field(0, {0})) == parse("u", kT));
  CHECK(partial(P("x^2"), Symbol::field(0)).is_zero());
  CHECK(partial(P("sin(u_x)"), Symbol::field(0, {0})) == P("cos(u_x)"));
  const auto q = equals_detail(partial(P("1/(1+u^2)"), Symbol::field(0)), P("-2*u/(1+u^2)^2"));
  CHECK(q.equal);
  CHECK(q.path == EqualityPath::Rational);
}

TEST_CASE("substitute: examples") {
  const Expr t = t_param();
  const Bindings b{{Symbol::field(0), t * parse("u", kT)}, {Symbol::field(0, {0, 0}), t * parse("u_tt", kT)}};
  CHECK(substitute(parse("u*u_tt", kT), b) == t * t * parse("u*u_tt", kT));
  CHECK(substitute(P("u_x"), {}) == P("u_x"));
  CHECK(substitute(P("sin(u)"), {{Symbol::field(0), Expr()}}).is_zero());
}

TEST_CASE("equals: examples") {
  CHECK(equals(P("u_{xy}"), P("u_{yx}")));
  const Expr half_d = Expr(Rational(1, 2)) * P("2*u*u_x");
  CHECK(equals(half_d, P("u*u_x")));
  CHECK_FALSE(equals(P("u_y"), P("u_x")));
  const auto r = equals_detail(P("sin(2*u)"), P("2*sin(u)*cos(u)"));
  CHECK(r.equal);
  CHECK(r.path == EqualityPath::Sampled);
  const auto q = equals_detail(P("1/(1+u) + 1/(1-u)"), P("2/(1-u^2)"));
  CHECK(q.equal);
  CHECK(q.path != EqualityPath::Sampled);
  CHECK_FALSE(equals(P("sin(2*u)"), P("2*sin(u)")));
}

TEST_CASE("equals: non-finite everywhere is undecidable") {
  try {
    sampled_compare(P("exp(1000 + 1000*u^2)"), Expr(0), 4, EqualityConfig{});
    FAIL("expected undecidable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Undecidable);
  }
}

TEST_CASE("integrate_t: examples") {
  const Expr t = t_param();
  CHECK(integrate_t(t * t * parse("u*u_tt", kT)) == Expr(Rational(1, 3)) * parse("u*u_tt", kT));
  CHECK(integrate_t(P("x*v + 3")) == P("x*v + 3"));
  try {
    integrate_t(Expr::func(Fn::Sin, t * P("u")));
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPolynomialInT);
  }
  CHECK_THROWS_AS(integrate_t(t.pow(-1)), Error);
  CHECK_THROWS_AS(integrate_t((Expr(1) + t * P("u")).inverse()), Error);
}

TEST_CASE("integrate_t: ray terms against quadrature") {
  // t (1 + t^2 B)^-2 and t^3 (1 + t^2 B)^-3 with B = u^2 + v^2
  const Expr t = t_param();
  const Expr b = P("u^2 + v^2");
  const Expr den = Expr(1) + t * t * b;
  for (auto [e, k] : {std::pair{1, 2}, {3, 3}, {1, 3}, {3, 4}}) {
    const Expr integrand = t.pow(e) * den.pow(-k);
    const Expr exact = integrate_t(integrand);
    CHECK_FALSE(contains(exact, Symbol::param(kHomotopyParam)));
    for (double uv : {0.3, 1.7}) {
      const double bv = 2 * uv * uv;
      const auto q = nquad([&](std::span<const double> s) {
        return std::pow(s[0], e) * std::pow(1 + s[0] * s[0] * bv, -k);
      }, 1);
      const double got = evaluate(exact, {{Symbol::field(0), uv}, {Symbol::field(1), uv}});
      CHECK(got == doctest::Approx(q.value).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(integrate_t(t * den.pow(-1)), Error);
}

TEST_CASE("properties: canonical form idempotent and printing round-trips") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Expr e = testing::random_expression(rng, kXY, 2, 2);
    REQUIRE(rebuild(e) == e);
    REQUIRE(parse(to_string(e, kXY), kXY) == e);
  }
}

TEST_CASE("properties: partial derivatives commute") {
  std::mt19937_64 rng(11);
  const auto coords = kXY.coordinates(2);
  for (int i = 0; i < 100; ++i) {
    const Expr e = testing::random_expression(rng, kXY, 1, 2);
    const Symbol s1 = coords[rng() % 8], s2 = coords[rng() % 8];
    REQUIRE(equals(partial(partial(e, s1), s2), partial(partial(e, s2), s1)));
  }
}

TEST_CASE("properties: substitution composes") {
  std::mt19937_64 rng(13);
  const Symbol u = Symbol::field(0), v = Symbol::field(1), x = Symbol::base(0), y = Symbol::base(1);
  for (int i = 0; i < 50; ++i) {
    const Expr e = testing::random_expression(rng, kXY, 0, 2);
    const Bindings s1{{u, P("x + v^2")}};
    const Bindings s2{{v, P("y - 1")}, {x, P("2*y")}};
    // s2 after s1: u -> s2(x + v^2), and s2 on the remaining symbols.
    Bindings comp{{u, substitute(P("x + v^2"), s2)}, {v, P("y - 1")}, {x, P("2*y")}};
    REQUIRE(equals(substitute(substitute(e, s1), s2), substitute(e, comp)));
    (void)y;
  }
}

TEST_CASE("properties: integrate_t is linear and commutes with partials") {
  std::mt19937_64 rng(17);
  const Expr t = t_param();
  const JetSpace sp({"x"}, {"u", "v"}, 1);
  for (int i = 0; i < 100; ++i) {
    const Expr a = testing::random_polynomial(rng, sp, 1, 3, 3) * t.pow(static_cast<int>(rng() % 3));
    const Expr b = testing::random_polynomial(rng, sp, 1, 3, 3) * t;
    REQUIRE(integrate_t(a + Expr(3) * b) == integrate_t(a) + Expr(3) * integrate_t(b));
    const Symbol s = Symbol::field(0);
    REQUIRE(partial(integrate_t(a), s) == integrate_t(partial(a, s)));
  }
}

TEST_CASE("nquad: examples") {
  const auto one = nquad([](std::span<const double>) { return 1.0; }, 2);
  CHECK(one.value == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(one.error == doctest::Approx(0.0));
  const auto s = nquad([](std::span<const double> p) { return std::sin(2 * std::numbers::pi * p[0]); }, 1);
  CHECK(std::abs(s.value) < 1e-6);
  // Area of the unit sphere through the chart (theta, phi) = (pi s1, 2 pi s2).
  const auto area = nquad(
      [](std::span<const double> p) {
        return std::sin(std::numbers::pi * p[0]) * std::numbers::pi * 2 * std::numbers::pi;
      },
      2);
  CHECK(area.value == doctest::Approx(4 * std::numbers::pi).epsilon(1e-6));
}

TEST_CASE("nquad: polynomials of degree 2n-1 are exact") {
  const int n = 4;
  const double got = tensor_rule([](std::span<const double> p) { return std::pow(p[0], 7) * std::pow(p[1], 6); }, 2, n);
  CHECK(got == doctest::Approx(1.0 / 56.0).epsilon(1e-14));
}

TEST_CASE("nquad: non-convergence beyond the cap") {
  QuadOptions opt;
  opt.cap = 16;
  CHECK_THROWS_AS(nquad([](std::span<const double> p) { return std::sin(500 * p[0]); }, 1, opt), Error);
}
