#pragma once

// Problem files (vjp-schema-1), the five commands and report rendering.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vjp/cech.hpp"
#include "vjp/oracle.hpp"

namespace vjp {

using Json = nlohmann::ordered_json;

struct Tolerances {
  double tau_eq = 1e-9;
  double tau_quad = 1e-6;
  double tau_class = 1e-4;
  double tau_crit = 1e-8;
};

struct OdeInput {
  int chart = 0;
  OdeProblem problem;
};

struct Problem {
  std::string name;
  JetSpace space;
  Atlas atlas;
  std::map<std::string, Rational> constant_values;
  std::vector<std::optional<Expr>> lagrangians;       // per chart
  std::vector<std::optional<SourceForm>> sources;     // per chart
  std::optional<PartitionOfUnity> pou;
  std::vector<SymmetryInput> symmetries;
  std::vector<GlobalSection> sections;
  std::vector<Cycle> total_cycles;
  std::vector<Cycle> current_cycles;
  std::vector<Cycle> base_cycles;
  std::optional<Representative> representative;
  BundleInfo bundle;
  std::optional<OdeInput> ode;
  Tolerances tolerances;
  std::uint64_t seed = 20240601;
};

Problem load_problem(const Json& doc);
Problem load_problem_file(const std::string& path);

/// Sets numeric values of the named constants (also on the atlas).
void set_constants(Problem& p, const std::map<std::string, Rational>& values);

/// Lagrangians when every chart has one, otherwise Tonti from the source forms.
Presentation presentation_of(const Problem& p);
GlobalExistenceInput existence_input(const Problem& p);
ClassOptions class_options(const Problem& p);

/// Applies the seed and tau_eq to the equality configuration of this thread.
void apply_equality_settings(const Problem& p);

struct CommandResult {
  Json report;
  int exit_code = 0;
};

const std::vector<std::string>& command_names();
CommandResult run_command(const std::string& command, const Problem& p);

std::string render_text(const Json& report);

/// Entry point of the `vjp` executable.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vjp
