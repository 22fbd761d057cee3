#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "vjp/expr.hpp"

namespace vjp {

/// Expression compiled to a stack program over a fixed list of symbol slots.
/// The constant `pi` is always bound; every other symbol must have a slot.
class Evaluator {
 public:
  Evaluator() = default;
  Evaluator(const Expr& e, std::vector<Symbol> slots);

  double operator()(std::span<const double> values) const;
  const std::vector<Symbol>& slots() const { return slots_; }

 private:
  enum class Op : std::uint8_t { Const, Var, Add, Mul, Pow, Sin, Cos, Exp };
  struct Instr {
    Op op;
    int arg;
  };
  void emit(const Expr& e, const std::map<Symbol, int>& slot_of);

  std::vector<Symbol> slots_;
  std::vector<Instr> code_;
  std::vector<double> consts_;
  int depth_ = 0;
};

/// Convenience one-off evaluation.
double evaluate(const Expr& e, const std::map<Symbol, double>& values);

struct EqualityConfig {
  double tolerance = 1e-9;
  int samples = 16;
  int retries = 5;
  std::uint64_t seed = 20240601;
};

/// Thread-local defaults used by equals(); the cli installs file tolerances here.
EqualityConfig& equality_config();

enum class EqualityPath { Canonical, Rational, Sampled };

struct EqualityResult {
  bool equal = false;
  EqualityPath path = EqualityPath::Canonical;
  double max_deviation = 0.0;
};

const char* path_name(EqualityPath p);

EqualityResult equals_detail(const Expr& a, const Expr& b, const EqualityConfig& cfg);
EqualityResult equals_detail(const Expr& a, const Expr& b);
bool equals(const Expr& a, const Expr& b);

/// Purely numeric comparison at `trials` random points (no symbolic shortcut).
EqualityResult sampled_compare(const Expr& a, const Expr& b, int trials, const EqualityConfig& cfg);

}  // namespace vjp
