#include "vjp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "vjp/error.hpp"

namespace vjp {

Evaluator::Evaluator(const Expr& e, std::vector<Symbol> slots) : slots_(std::move(slots)) {
  std::map<Symbol, int> slot_of;
  for (std::size_t i = 0; i < slots_.size(); ++i) slot_of[slots_[i]] = static_cast<int>(i);
  emit(e, slot_of);
  int depth = 0;
  for (const auto& in : code_) {
    switch (in.op) {
      case Op::Const:
      case Op::Var:
        depth_ = std::max(depth_, ++depth);
        break;
      case Op::Add:
      case Op::Mul:
        --depth;
        break;
      default:
        break;
    }
  }
}

void Evaluator::emit(const Expr& e, const std::map<Symbol, int>& slot_of) {
  auto push_const = [&](double v) {
    code_.push_back({Op::Const, static_cast<int>(consts_.size())});
    consts_.push_back(v);
  };
  if (e.is_zero()) {
    push_const(0.0);
    return;
  }
  bool first_term = true;
  for (const auto& t : e.terms()) {
    push_const(t.coef.get_d());
    for (const auto& p : t.mono) {
      switch (p.base.kind) {
        case Factor::Kind::Symbol: {
          const Symbol& s = p.base.symbol;
          auto it = slot_of.find(s);
          if (it != slot_of.end()) {
            code_.push_back({Op::Var, it->second});
          } else if (s.kind == SymbolKind::Constant && s.name == "pi") {
            push_const(std::numbers::pi);
          } else {
            throw Error(ErrorCode::PreconditionFailed, "no value bound for a symbol during evaluation");
          }
          break;
        }
        case Factor::Kind::Func:
          emit(p.base.arg, slot_of);
          code_.push_back({p.base.fn == Fn::Sin ? Op::Sin : p.base.fn == Fn::Cos ? Op::Cos : Op::Exp, 0});
          break;
        case Factor::Kind::Sum:
          emit(p.base.arg, slot_of);
          break;
      }
      if (p.exp != 1) code_.push_back({Op::Pow, p.exp});
      code_.push_back({Op::Mul, 0});
    }
    if (!first_term) code_.push_back({Op::Add, 0});
    first_term = false;
  }
}

double Evaluator::operator()(std::span<const double> values) const {
  double stack_buf[64] = {};
  std::vector<double> heap;
  double* st = stack_buf;
  if (depth_ > 64) {
    heap.resize(depth_);
    st = heap.data();
  }
  int sp = 0;
  for (const auto& in : code_) {
    switch (in.op) {
      case Op::Const:
        st[sp++] = consts_[in.arg];
        break;
      case Op::Var:
        st[sp++] = values[in.arg];
        break;
      case Op::Add:
        --sp;
        st[sp - 1] += st[sp];
        break;
      case Op::Mul:
        --sp;
        st[sp - 1] *= st[sp];
        break;
      case Op::Pow: {
        double b = st[sp - 1];
        int k = in.arg;
        if (k < 0) {
          b = 1.0 / b;
          k = -k;
        }
        double r = 1.0;
        while (k) {
          if (k & 1) r *= b;
          b *= b;
          k >>= 1;
        }
        st[sp - 1] = r;
        break;
      }
      case Op::Sin:
        st[sp - 1] = std::sin(st[sp - 1]);
        break;
      case Op::Cos:
        st[sp - 1] = std::cos(st[sp - 1]);
        break;
      case Op::Exp:
        st[sp - 1] = std::exp(st[sp - 1]);
        break;
    }
  }
  return st[0];
}

double evaluate(const Expr& e, const std::map<Symbol, double>& values) {
  std::vector<Symbol> slots;
  std::vector<double> vals;
  for (const auto& [s, v] : values) {
    slots.push_back(s);
    vals.push_back(v);
  }
  return Evaluator(e, std::move(slots))(vals);
}

EqualityConfig& equality_config() {
  thread_local EqualityConfig cfg;
  return cfg;
}

const char* path_name(EqualityPath p) {
  switch (p) {
    case EqualityPath::Canonical: return "canonical";
    case EqualityPath::Rational: return "rational";
    case EqualityPath::Sampled: return "sampled";
  }
  return "?";
}

EqualityResult sampled_compare(const Expr& a, const Expr& b, int trials, const EqualityConfig& cfg) {
  std::set<Symbol> syms = symbols(a);
  collect_symbols(b, syms);
  std::vector<Symbol> slots;
  for (const auto& s : syms) {
    if (s.kind == SymbolKind::Constant && s.name == "pi") continue;
    slots.push_back(s);
  }
  const Evaluator ea(a, slots);
  const Evaluator eb(b, slots);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> mag(0.1, 2.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> point(slots.size());
  EqualityResult res;
  res.path = EqualityPath::Sampled;
  res.equal = true;
  for (int trial = 0; trial < trials; ++trial) {
    int failures = 0;
    for (;;) {
      for (auto& v : point) v = sign(rng) ? mag(rng) : -mag(rng);
      const double va = ea(point);
      const double vb = eb(point);
      if (std::isfinite(va) && std::isfinite(vb)) {
        const double dev = std::abs(va - vb) / std::max({1.0, std::abs(va), std::abs(vb)});
        res.max_deviation = std::max(res.max_deviation, dev);
        if (dev > cfg.tolerance) res.equal = false;
        break;
      }
      if (++failures > cfg.retries) throw Error(ErrorCode::Undecidable, "undecidable at sampled points");
    }
  }
  return res;
}

EqualityResult equals_detail(const Expr& a, const Expr& b, const EqualityConfig& cfg) {
  const Expr d = a - b;
  if (d.is_zero()) return {true, EqualityPath::Canonical, 0.0};
  if (is_zero_rational(d)) return {true, EqualityPath::Rational, 0.0};
  return sampled_compare(a, b, cfg.samples, cfg);
}

EqualityResult equals_detail(const Expr& a, const Expr& b) { return equals_detail(a, b, equality_config()); }

bool equals(const Expr& a, const Expr& b) { return equals_detail(a, b).equal; }

}  // namespace vjp
