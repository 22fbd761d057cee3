#include "vjp/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "vjp/error.hpp"

namespace vjp {

const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> x(n), w(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
    }
    const double wi = 2.0 / ((1.0 - z * z) * dp * dp);
    x[i] = 0.5 * (1.0 - z);
    x[n - 1 - i] = 0.5 * (1.0 + z);
    w[i] = w[n - 1 - i] = 0.5 * wi;
  }
  return cache.emplace(n, std::make_pair(std::move(x), std::move(w))).first->second;
}

double tensor_rule(const CubeFunction& f, int dim, int nodes) {
  const auto& [x, w] = gauss_legendre(nodes);
  std::vector<int> idx(dim, 0);
  std::vector<double> pt(dim);
  double sum = 0.0;
  for (;;) {
    double weight = 1.0;
    for (int d = 0; d < dim; ++d) {
      pt[d] = x[idx[d]];
      weight *= w[idx[d]];
    }
    sum += weight * f(pt);
    int d = 0;
    while (d < dim && ++idx[d] == nodes) idx[d++] = 0;
    if (d == dim) break;
  }
  return sum;
}

QuadResult nquad(const CubeFunction& f, int dim, const QuadOptions& opt) {
  if (opt.nodes < 2) throw Error(ErrorCode::PreconditionFailed, "nquad needs at least 2 nodes");
  if (dim == 0) return {f({}), 0.0, 0};
  int n = opt.nodes;
  double prev = tensor_rule(f, dim, n);
  for (;;) {
    const int next = 2 * n;
    if (next > opt.cap)
      throw Error(ErrorCode::NonConvergence,
                  "quadrature did not converge within " + std::to_string(opt.cap) + " nodes per axis");
    const double cur = tensor_rule(f, dim, next);
    if (!std::isfinite(cur)) throw Error(ErrorCode::NonConvergence, "quadrature produced a non-finite value");
    const double err = std::abs(cur - prev);
    if (err < opt.tolerance) return {cur, err, next};
    prev = cur;
    n = next;
  }
}

}  // namespace vjp
