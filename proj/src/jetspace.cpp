#include "vjp/jetspace.hpp"

#include <cctype>
#include <set>

#include "vjp/error.hpp"

namespace vjp {

namespace {

bool valid_identifier(const std::string& s) {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0]))) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

void grow(std::vector<MultiIndex>& out, MultiIndex cur, int start, int left, int n) {
  if (left == 0) {
    out.push_back(cur);
    return;
  }
  for (int i = start; i < n; ++i) {
    cur.push_back(i);
    grow(out, cur, i, left - 1, n);
    cur.pop_back();
  }
}

}  // namespace

JetSpace::JetSpace(std::vector<std::string> base, std::vector<std::string> fields, int order,
                   std::vector<std::string> constants)
    : base_(std::move(base)), fields_(std::move(fields)), order_(order), constants_(std::move(constants)) {
  if (base_.empty() || static_cast<int>(base_.size()) > kMaxBase)
    throw Error(ErrorCode::Schema, "base dimension must be between 1 and 4");
  if (fields_.empty() || static_cast<int>(fields_.size()) > kMaxFields)
    throw Error(ErrorCode::Schema, "fiber dimension must be between 1 and 6");
  if (order_ < 0 || order_ > kMaxOrder)
    throw Error(ErrorCode::JetOrderExceeded, "jet order " + std::to_string(order_) + " exceeds the cap 4");
  static const std::set<std::string> reserved{"sin", "cos", "exp", "pi"};
  std::set<std::string> seen;
  for (const auto* group : {&base_, &fields_, &constants_}) {
    for (const auto& name : *group) {
      if (!valid_identifier(name)) throw Error(ErrorCode::Schema, "invalid coordinate name '" + name + "'");
      if (reserved.count(name)) throw Error(ErrorCode::Schema, "reserved name '" + name + "'");
      if (!seen.insert(name).second) throw Error(ErrorCode::Schema, "duplicate name '" + name + "'");
    }
  }
}

std::vector<MultiIndex> JetSpace::multi_indices(int k) const {
  std::vector<MultiIndex> out;
  for (int len = 0; len <= k; ++len) grow(out, {}, 0, len, n());
  return out;
}

std::vector<Symbol> JetSpace::coordinates(int k) const {
  std::vector<Symbol> out;
  for (int i = 0; i < n(); ++i) out.push_back(Symbol::base(i));
  for (const auto& j : multi_indices(k))
    for (int a = 0; a < m(); ++a) out.push_back(Symbol::field(a, j));
  return out;
}

std::string JetSpace::name(const Symbol& s) const {
  switch (s.kind) {
    case SymbolKind::Base:
      return s.index < n() ? base_[s.index] : "x" + std::to_string(s.index + 1);
    case SymbolKind::Field: {
      std::string out = s.index < m() ? fields_[s.index] : "u" + std::to_string(s.index + 1);
      if (s.jet.empty()) return out;
      out += "_{";
      for (std::size_t k = 0; k < s.jet.size(); ++k) {
        if (k) out += ' ';
        const int i = s.jet[k];
        out += i < n() ? base_[i] : "x" + std::to_string(i + 1);
      }
      return out + "}";
    }
    case SymbolKind::Param:
      if (s.index == kHomotopyParam) return "@t";
      if (s.index == kSectionHomotopyParam) return "@h";
      return "@s" + std::to_string(s.index);
    case SymbolKind::Constant:
      return s.name;
  }
  return "?";
}

void JetSpace::check_order(int k) {
  if (k > kMaxCombinedOrder)
    throw Error(ErrorCode::JetOrderExceeded,
                "jet order " + std::to_string(k) + " exceeds the combined cap " + std::to_string(kMaxCombinedOrder));
}

}  // namespace vjp
