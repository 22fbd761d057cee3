#pragma once

#include <string>
#include <vector>

#include "vjp/expr.hpp"

namespace vjp {

/// Coordinates x^i, u^a and jet order r of J_rY.
class JetSpace {
 public:
  static constexpr int kMaxBase = 4;
  static constexpr int kMaxFields = 6;
  static constexpr int kMaxOrder = 4;
  static constexpr int kMaxCombinedOrder = 8;

  JetSpace() = default;
  JetSpace(std::vector<std::string> base, std::vector<std::string> fields, int order,
           std::vector<std::string> constants = {});

  int n() const { return static_cast<int>(base_.size()); }
  int m() const { return static_cast<int>(fields_.size()); }
  int order() const { return order_; }
  const std::vector<std::string>& base_names() const { return base_; }
  const std::vector<std::string>& field_names() const { return fields_; }
  const std::vector<std::string>& constants() const { return constants_; }

  Expr x(int i) const { return Expr::sym(Symbol::base(i)); }
  Expr u(int a, MultiIndex jet = {}) const { return Expr::sym(Symbol::field(a, std::move(jet))); }

  /// Sorted multi-indices with |J| <= k (the empty index first).
  std::vector<MultiIndex> multi_indices(int k) const;
  /// Base coordinates followed by every u^a_J with |J| <= k.
  std::vector<Symbol> coordinates(int k) const;

  /// Human name of a coordinate or parameter symbol.
  std::string name(const Symbol& s) const;

  /// Throws JetOrderExceeded when order k is beyond the combined cap.
  static void check_order(int k);

 private:
  std::vector<std::string> base_;
  std::vector<std::string> fields_;
  int order_ = 0;
  std::vector<std::string> constants_;
};

}  // namespace vjp
