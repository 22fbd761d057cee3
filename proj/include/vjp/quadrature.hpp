#pragma once

#include <functional>
#include <span>
#include <vector>

namespace vjp {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  int nodes = 0;
};

struct QuadOptions {
  int nodes = 8;
  double tolerance = 1e-6;
  int cap = 256;
};

using CubeFunction = std::function<double(std::span<const double>)>;

/// Gauss-Legendre nodes and weights on [0,1].
const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n);

/// Tensor Gauss-Legendre over [0,1]^dim, doubling nodes until two successive
/// estimates agree to the tolerance.
QuadResult nquad(const CubeFunction& f, int dim, const QuadOptions& opt = {});

/// Single fixed-order tensor rule.
double tensor_rule(const CubeFunction& f, int dim, int nodes);

}  // namespace vjp
