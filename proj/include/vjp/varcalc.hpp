#pragma once

// Variational-sequence operators on a single chart: Euler-Lagrange,
// Helmholtz, Tonti inverse, d_H homotopy, Lie derivatives and the Noether
// current family.

#include <string>
#include <vector>

#include "vjp/jetgeo.hpp"

namespace vjp {

/// E_a = sum_J (-1)^|J| D_J(dL/du^a_J); L is the coefficient of the volume form.
SourceForm euler_lagrange(const Expr& lagrangian, const JetSpace& space);
SourceForm euler_lagrange(const HorizontalForm& lambda, const JetSpace& space);

struct HelmholtzResidual {
  int a = 0;
  int b = 0;
  MultiIndex k;
  Expr value;
};

struct HelmholtzResult {
  bool passes = true;
  std::vector<HelmholtzResidual> residuals;  // nonzero residuals only
};

/// Self-adjointness of the linearization of eta:
///   dE_a/du^b_K = sum_{J >= K} (-1)^|J| C(J,K) D_{J-K}(dE_b/du^a_J).
HelmholtzResult helmholtz_check(const SourceForm& eta, const JetSpace& space);

/// Fiber point about which the homotopies contract; empty means the origin.
struct Center {
  std::vector<Expr> fiber;
  std::vector<Expr> base;
};

/// L = int_0^1 (u-c)^a E_a(x, c + t(u-c), t u_J) dt. Refuses when Helmholtz fails.
Expr tonti_lagrangian(const SourceForm& eta, const JetSpace& space, const Center& center = {});

/// Potential nu with d_H nu = w for a variationally trivial n-form w.
HorizontalForm dH_homotopy(const HorizontalForm& w, const JetSpace& space, const Center& center = {});
HorizontalForm dH_homotopy(const Expr& w, const JetSpace& space, const Center& center = {});

/// L_Xi lambda and the canonical current epsilon (Lagrangians of order <= 2).
struct LieLagrangian {
  Expr lie;
  HorizontalForm epsilon;
};
LieLagrangian variational_lie_derivative_lagrangian(const VectorField& xi, const Expr& lagrangian,
                                                    const JetSpace& space);

/// Lie derivative of a horizontal n-form coefficient: pr Xi(L) + L div Xi.
Expr lie_derivative_volume(const VectorField& xi, const Expr& lagrangian, const JetSpace& space);
/// Lie derivative of a degree n-1 current.
HorizontalForm lie_derivative_current(const VectorField& xi, const HorizontalForm& f, const JetSpace& space);

/// E_n(Xi_V^a E_a); refuses when eta fails the Helmholtz conditions.
SourceForm variational_lie_derivative_source(const VectorField& xi, const SourceForm& eta, const JetSpace& space);

/// Xi_V^a E_a, the contraction Lagrangian.
Expr contraction(const VectorField& xi, const SourceForm& eta, const JetSpace& space);

enum class SymmetryKind { Lagrangian, EquationOnly, None };
const char* symmetry_kind_name(SymmetryKind k);

SymmetryKind classify_symmetry(const VectorField& xi, const Expr& lagrangian, const SourceForm& eta,
                               const JetSpace& space);

struct BesselHagen {
  HorizontalForm beta;
  HorizontalForm current;  // epsilon - beta
  bool certified = false;  // Xi_V E + d_H(epsilon - beta) = 0
};
BesselHagen noether_bessel_hagen_current(const VectorField& xi, const Expr& lagrangian, const SourceForm& eta,
                                         const JetSpace& space, const Center& center = {});

struct StrongCurrent {
  HorizontalForm nu;
  HorizontalForm current;  // nu + epsilon
  bool certified = false;  // d_H(nu + epsilon) = d_H beta
};
StrongCurrent strong_noether_current(const VectorField& xi, const Expr& lagrangian, const SourceForm& eta,
                                     const JetSpace& space, const Center& center = {});

/// Complete per-chart Noether data for one symmetry.
struct NoetherData {
  SymmetryKind kind = SymmetryKind::None;
  Expr lie_lagrangian;
  HorizontalForm epsilon;
  HorizontalForm beta;
  HorizontalForm nu;
  HorizontalForm bessel_hagen;
  HorizontalForm strong;
  bool bessel_hagen_certified = false;
  bool strong_certified = false;
  bool lie_lie_zero = false;               // L_Xi L_Xi lambda = 0
  bool conservation_certified = false;     // d_H L_Xi(nu + epsilon) = L_Xi L_Xi lambda
};
NoetherData noether_data(const VectorField& xi, const Expr& lagrangian, const SourceForm& eta,
                         const JetSpace& space, const Center& center = {});

}  // namespace vjp
