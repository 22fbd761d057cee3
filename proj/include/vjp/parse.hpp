#pragma once

#include <string>
#include <string_view>

#include "vjp/expr.hpp"
#include "vjp/jetspace.hpp"

namespace vjp {

/// Parses the expression grammar over the coordinates of `space`.
/// Jet symbols may have order at most `max_order` (default: the space order).
Expr parse(std::string_view text, const JetSpace& space, int max_order = -1);

/// Re-parseable rendering.
std::string to_string(const Expr& e, const JetSpace& space);
std::string to_string(const Rational& q);

}  // namespace vjp
