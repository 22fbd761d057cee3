#pragma once

// Brute-force numeric checks that share no code with the varcalc operators:
// the Gateaux derivative of a sampled action, RK4 conservation drift, and
// sampled comparison of symbolic identities.

#include <array>
#include <map>
#include <vector>

#include "vjp/eval.hpp"
#include "vjp/jetgeo.hpp"

namespace vjp {

/// Jet values of a section on a uniform grid over a base box (n = 1 or 2).
struct SampledSection {
  std::vector<std::array<double, 2>> box;
  int points = 0;                             // per axis, endpoints included
  std::vector<double> spacing;                // per axis
  std::map<Symbol, std::vector<double>> values;  // base coordinates and u^a_J
  std::size_t size() const;
};

/// Samples sigma and its jets up to `order` (exact derivatives of the closed form).
SampledSection sample_section(const JetSpace& space, const std::vector<Expr>& sigma,
                              const std::vector<std::array<double, 2>>& box, int points, int order);

/// exp(1 - 1/(1 - rho^2)) for rho < 1, rho = |x - center| / radius.
Expr bump(const JetSpace& space, const std::vector<double>& center, double radius);

struct GateauxOptions {
  int points = 0;  // 0: 2048 for n = 1, 256 for n = 2
  double step = 1e-3;
  double tolerance = 1e-6;
  std::vector<double> direction;  // per field multiplier of the bump; default all 1
};

struct GateauxResult {
  double residual = 0.0;
  double action_derivative = 0.0;
  double euler_pairing = 0.0;
  double richardson = 0.0;  // |residual(h) - residual(2h)|
  bool grid_warning = false;
};

/// |d/ds A(sigma + s dsigma) - int E(j sigma) dsigma| / scale with dsigma a
/// bump centred in the box.
GateauxResult gateaux_check(const Expr& lagrangian, const SourceForm& eta, const JetSpace& space,
                            const std::vector<Expr>& sigma, const std::vector<std::array<double, 2>>& box,
                            const GateauxOptions& opt = {});

struct OdeProblem {
  double t0 = 0.0;
  double t1 = 10.0;
  double step = 1e-3;
  /// Per field: u, u_t, ..., up to one below the order of the equation.
  std::vector<std::vector<double>> initial;
};

struct ConservationResult {
  double drift = 0.0;
  double initial = 0.0;
  int steps = 0;
};

/// Integrates E_a = 0 (n = 1) with RK4, solving for the top derivatives by
/// Newton's method, and tracks the current along the trajectory.
ConservationResult conservation_check(const HorizontalForm& current, const SourceForm& eta, const JetSpace& space,
                                      const OdeProblem& ode);

/// Maximum |div J| along a supplied critical section, by central differences.
double conservation_check_sampled(const HorizontalForm& current, const JetSpace& space, const std::vector<Expr>& sigma,
                                  const std::vector<std::array<double, 2>>& box, int points = 128);

struct CrosscheckResult {
  bool pass = false;
  double max_deviation = 0.0;
};

CrosscheckResult symbolic_numeric_crosscheck(const Expr& a, const Expr& b, int trials,
                                             const EqualityConfig& cfg = equality_config());

}  // namespace vjp
