#pragma once

// Atlases, local presentations, the Cech coboundary, cycles with closure
// certificates, and period-based class reports for delta(eta), delta'(w) and
// section pullbacks.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "vjp/quadrature.hpp"
#include "vjp/varcalc.hpp"

namespace vjp {

struct Chart {
  std::string id;
  std::vector<std::array<double, 2>> base_box;
  std::vector<std::array<double, 2>> fiber_box;
  Center center;
  /// Period of each fiber coordinate that is an angle (empty optional otherwise).
  std::vector<std::optional<Expr>> fiber_periods;
};

/// Fibered transition from chart `from` to chart `to`: x' = phi(x), u' = psi(x,u),
/// written in the coordinates of `from`. Several entries for one pair are
/// separate components; from == to declares a deck identification.
struct Overlap {
  int from = 0;
  int to = 0;
  std::vector<Expr> base_map;
  std::vector<Expr> fiber_map;
};

class Atlas {
 public:
  Atlas() = default;
  Atlas(JetSpace space, std::vector<Chart> charts, std::vector<Overlap> overlaps);

  const JetSpace& space() const { return space_; }
  const std::vector<Chart>& charts() const { return charts_; }
  const std::vector<Overlap>& overlaps() const { return overlaps_; }
  int chart_index(const std::string& id) const;
  bool has_deck() const;

  /// Overlap entries from i to j.
  std::vector<int> between(int i, int j) const;

  /// Symbols of chart `to` (jets up to `order`) as expressions in chart `from`.
  const Bindings& transition(int overlap, int order) const;
  Expr jacobian_determinant(int overlap) const;

  Expr pull(const Expr& f_to, int overlap, int order = -1) const;
  HorizontalForm pull(const HorizontalForm& w_to, int overlap) const;
  SourceForm pull(const SourceForm& eta_to, int overlap) const;
  /// Pullback of a form on Y (coordinates x, u only).
  Form pull(const Form& w_to, int overlap) const;

  /// psi_ik = psi_jk o psi_ij on distinct triples; returns the failures.
  std::vector<std::string> cocycle_failures() const;

  /// Numeric values for the named constants of the space (used before any
  /// quadrature or sampling).
  void set_constant_values(const std::map<std::string, Rational>& values);
  Expr numeric(const Expr& e) const;

 private:
  Bindings constants_;
  JetSpace space_;
  std::vector<Chart> charts_;
  std::vector<Overlap> overlaps_;
  mutable std::vector<std::map<int, Bindings>> cache_;
};

struct Presentation {
  std::vector<Expr> lagrangians;
  std::vector<SourceForm> sources;
  std::vector<Expr> mu;  // per overlap entry: lambda_from - psi* lambda_to
  bool from_tonti = false;
};

/// Throws InconsistentSourceForm when eta does not transform across overlaps.
void check_source_consistency(const Atlas& atlas, const std::vector<SourceForm>& eta);

Presentation build_presentation(const Atlas& atlas, const std::vector<SourceForm>& eta);
Presentation presentation_from_lagrangians(const Atlas& atlas, const std::vector<Expr>& lagrangians);

/// Chart-indexed cochain of horizontal forms over the nerve of distinct
/// charts (deck identifications are not part of the nerve).
struct Cochain {
  int degree = 0;
  std::map<std::vector<int>, HorizontalForm> values;
};

/// (dc)_{i0..ik+1} = -sum_s (-1)^s c_{i0..^is..ik+1}, pulled back to chart i0;
/// for 0-cochains (dc)_ij = c_i - c_j. Nerve truncated at dimension 2.
Cochain cech_coboundary(const Cochain& c, const Atlas& atlas);

struct CyclePiece {
  int chart = 0;
  std::vector<Expr> map;  // coordinates in terms of @s1..@sk
  int sign = 1;
};

struct Cycle {
  std::string name;
  int dim = 0;
  bool in_base = false;
  std::vector<CyclePiece> pieces;
};

struct ClosureCertificate {
  bool closed = false;
  int faces = 0;
  int degenerate = 0;
  int paired = 0;
  std::string failure;
};

ClosureCertificate certify_closed(const Cycle& cycle, const Atlas& atlas, double tol = 1e-6);

struct Period {
  double value = 0.0;
  double error = 0.0;
};

/// Integral of a per-chart form over a cycle by numeric pullback.
Period period(const std::vector<Form>& alpha, const Cycle& cycle, const Atlas& atlas, const QuadOptions& quad);

/// Per-chart partition of unity, each rho_k written in chart k coordinates.
struct PartitionOfUnity {
  std::vector<Expr> rho;
};

struct ClassOptions {
  double tau_class = 1e-4;
  QuadOptions quad;
};

struct ClassReport {
  std::string symbol;
  std::vector<std::string> cycles;
  std::vector<double> periods;
  std::vector<double> errors;
  bool zero = true;
  std::string provenance;
  std::string projection;
  std::vector<Form> representative;
};

/// User-supplied closed (n+1)-form, per chart. Its source projection must be
/// eta, or eta minus E(global_lagrangian) when a global correction is given.
struct Representative {
  std::vector<Form> forms;
  std::vector<Expr> global_lagrangian;
};

/// Closed form of degree n+1 representing delta(eta).
ClassReport delta_class(const Atlas& atlas, const Presentation& p, const std::vector<Cycle>& cycles,
                        const std::optional<Representative>& supplied,
                        const std::optional<PartitionOfUnity>& pou, const ClassOptions& opt);

/// Closed n-form representing the class of a variationally trivial n-form w.
ClassReport delta_prime_class(const Atlas& atlas, const std::vector<Expr>& w, const std::vector<Cycle>& cycles,
                              const std::optional<std::vector<Form>>& supplied,
                              const std::optional<PartitionOfUnity>& pou, const ClassOptions& opt);

struct GlobalSection {
  std::string name;
  std::vector<std::optional<std::vector<Expr>>> values;  // per chart
  std::string homotopic_to;
  std::vector<std::optional<std::vector<Expr>>> homotopy;  // in @h, per chart
};

struct SectionCheck {
  bool global = false;
  std::vector<long> windings;  // per overlap entry
  std::string failure;
};

SectionCheck check_section(const Atlas& atlas, const GlobalSection& s);

/// max |E_a o j sigma| over a grid in each chart's base box.
double criticality_residual(const Atlas& atlas, const std::vector<SourceForm>& eta, const GlobalSection& s,
                            int points_per_axis = 9);

/// Periods of j sigma^* alpha over base cycles (in_base).
ClassReport pullback_class_check(const Atlas& atlas, const std::vector<Form>& alpha, const GlobalSection& s,
                                 const std::vector<Cycle>& cycles, const ClassOptions& opt);

struct BundleInfo {
  std::string kind = "unknown";  // affine | vector | contractible | trivial | product | unknown
  std::vector<int> base_betti;
  std::vector<int> fiber_betti;
};

struct IsomorphismVerdict {
  bool holds = false;
  std::string reason;
};

IsomorphismVerdict isomorphism_hypothesis_check(const Atlas& atlas, const BundleInfo& bundle);

struct SymmetryInput {
  std::string name;
  std::vector<VectorField> fields;  // per chart
  std::optional<std::vector<Form>> representative;
};

struct GlobalExistenceInput {
  std::vector<SymmetryInput> symmetries;
  std::vector<GlobalSection> sections;
  std::vector<Cycle> total_cycles;    // (n+1)-cycles in Y
  std::vector<Cycle> current_cycles;  // n-cycles in Y
  std::vector<Cycle> base_cycles;     // n-cycles in X
  std::optional<Representative> delta_representative;
  std::optional<PartitionOfUnity> pou;
  BundleInfo bundle;
  ClassOptions options;
  double tau_crit = 1e-8;
};

struct SymmetryVerdict {
  std::string name;
  SymmetryKind kind = SymmetryKind::None;
  bool admissible_charts = false;    // L_Xi L_Xi lambda_i = 0
  bool admissible_overlaps = false;  // L_Xi mu_ij = 0
  std::optional<ClassReport> report;  // equation symmetries only
  bool global_current = false;
};

struct SectionPullback {
  std::string symmetry;
  ClassReport report;
  bool obstructed = false;
};

struct SectionVerdict {
  std::string name;
  SectionCheck check;
  double criticality = 0.0;
  bool critical = false;
  std::string homotopic_to;
  std::optional<bool> homotopy_verified;
  std::vector<SectionPullback> pullbacks;
};

struct GlobalExistenceReport {
  ClassReport delta;
  IsomorphismVerdict isomorphism;
  std::vector<SymmetryVerdict> symmetries;
  std::vector<SectionVerdict> sections;
  bool proposition_applies = false;
  int proposition_violations = 0;
  std::string conclusion;
};

/// Throws PropositionViolated when the isomorphism branch is contradicted.
GlobalExistenceReport global_existence_report(const Atlas& atlas, const Presentation& p,
                                              const GlobalExistenceInput& in);

}  // namespace vjp
