#pragma once

#include <random>
#include <string>

#include "vjp/expr.hpp"
#include "vjp/jetspace.hpp"

namespace vjp::testing {

inline std::string source_path(const std::string& rel) { return std::string(VJP_SOURCE_DIR) + "/" + rel; }

/// Random polynomial in the coordinates of `space` up to jet order `order`.
inline Expr random_polynomial(std::mt19937_64& rng, const JetSpace& space, int order, int terms, int max_degree) {
  const auto coords = space.coordinates(order);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(coords.size()) - 1);
  std::uniform_int_distribution<int> deg(0, max_degree);
  std::uniform_int_distribution<int> num(-5, 5);
  std::uniform_int_distribution<int> den(1, 3);
  Expr out;
  for (int k = 0; k < terms; ++k) {
    Rational q(num(rng), den(rng));
    q.canonicalize();
    Expr t(q);
    const int d = deg(rng);
    for (int j = 0; j < d; ++j) t *= Expr::sym(coords[pick(rng)]);
    out += t;
  }
  return out;
}

/// Random expression mixing polynomials with sin/cos/exp and quotients.
inline Expr random_expression(std::mt19937_64& rng, const JetSpace& space, int order, int depth) {
  std::uniform_int_distribution<int> kind(0, depth > 0 ? 6 : 0);
  switch (kind(rng)) {
    case 0:
    case 1:
    case 2:
      return random_polynomial(rng, space, order, 3, 2);
    case 3:
      return Expr::func(Fn::Sin, random_polynomial(rng, space, order, 2, 1)) *
             random_expression(rng, space, order, depth - 1);
    case 4:
      return Expr::func(Fn::Cos, random_polynomial(rng, space, order, 2, 1)).pow(2) +
             random_expression(rng, space, order, depth - 1);
    case 5:
      return Expr::func(Fn::Exp, random_polynomial(rng, space, order, 1, 1)) *
             random_expression(rng, space, order, depth - 1);
    default: {
      Expr d = random_polynomial(rng, space, order, 2, 2) + Expr(3);
      if (d.is_zero()) d = Expr(1);
      return random_expression(rng, space, order, depth - 1) / d;
    }
  }
}

}  // namespace vjp::testing
