#include "vjp/parse.hpp"

#include <cctype>

#include "vjp/error.hpp"

namespace vjp {

namespace {

class Parser {
 public:
  Parser(std::string_view text, const JetSpace& space, int max_order)
      : text_(text), space_(space), max_order_(max_order) {}

  Expr run() {
    Expr e = sum();
    skip();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::Syntax, "syntax error at position " + std::to_string(pos_) + ": " + what,
                static_cast<int>(pos_));
  }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  Expr sum() {
    Expr acc = product();
    for (;;) {
      if (accept('+')) {
        acc += product();
      } else if (accept('-')) {
        acc -= product();
      } else {
        return acc;
      }
    }
  }

  Expr product() {
    Expr acc = unary();
    for (;;) {
      if (accept('*')) {
        acc *= unary();
      } else if (accept('/')) {
        const std::size_t at = pos_;
        Expr d = unary();
        if (d.is_zero()) {
          pos_ = at;
          throw Error(ErrorCode::DivisionByZero, "division by zero at position " + std::to_string(at),
                      static_cast<int>(at));
        }
        acc = acc / d;
      } else {
        return acc;
      }
    }
  }

  Expr unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr base = atom();
    if (!accept('^')) return base;
    bool paren = accept('(');
    int sign = 1;
    if (accept('-')) {
      sign = -1;
    } else {
      accept('+');
    }
    skip();
    if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
      fail("expected integer exponent");
    long k = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      k = k * 10 + (text_[pos_++] - '0');
      if (k > 1000) fail("exponent too large");
    }
    if (paren) expect(')');
    if (sign < 0 && base.is_zero()) fail("zero raised to a negative power");
    return base.pow(sign * static_cast<int>(k));
  }

  Expr number() {
    const std::size_t start = pos_;
    std::string digits;
    int scale = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) digits += text_[pos_++];
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        digits += text_[pos_++];
        --scale;
      }
    }
    if (digits.empty()) {
      pos_ = start;
      fail("malformed number");
    }
    if (pos_ + 1 < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E') &&
        (std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) || text_[pos_ + 1] == '-' ||
         text_[pos_ + 1] == '+')) {
      ++pos_;
      int esign = 1;
      if (text_[pos_] == '-' || text_[pos_] == '+') esign = text_[pos_++] == '-' ? -1 : 1;
      if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) fail("malformed exponent");
      int ev = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ev = ev * 10 + (text_[pos_++] - '0');
        if (ev > 400) fail("exponent too large");
      }
      scale += esign * ev;
    }
    mpz_class num(digits, 10);
    mpz_class ten = 1;
    for (int i = 0; i < std::abs(scale); ++i) ten *= 10;
    Rational q = scale >= 0 ? Rational(num * ten) : Rational(num, ten);
    q.canonicalize();
    return Expr(q);
  }

  std::string identifier() {
    std::string id;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) id += text_[pos_++];
    return id;
  }

  int base_index(const std::string& name) const {
    const auto& b = space_.base_names();
    for (std::size_t i = 0; i < b.size(); ++i)
      if (b[i] == name) return static_cast<int>(i);
    return -1;
  }

  // Splits a run of concatenated base names, longest match first.
  void split_names(const std::string& run, std::size_t at, MultiIndex& out) const {
    std::size_t k = 0;
    while (k < run.size()) {
      int best = -1;
      std::size_t best_len = 0;
      const auto& b = space_.base_names();
      for (std::size_t i = 0; i < b.size(); ++i) {
        if (b[i].size() > best_len && run.compare(k, b[i].size(), b[i]) == 0) {
          best = static_cast<int>(i);
          best_len = b[i].size();
        }
      }
      if (best < 0)
        throw Error(ErrorCode::UnknownCoordinate,
                    "unknown base coordinate in '" + run + "' at position " + std::to_string(at + k),
                    static_cast<int>(at + k));
      out.push_back(best);
      k += best_len;
    }
  }

  Expr field_symbol(int a, std::size_t at) {
    MultiIndex jet;
    if (pos_ < text_.size() && text_[pos_] == '_') {
      ++pos_;
      if (pos_ < text_.size() && text_[pos_] == '{') {
        ++pos_;
        for (;;) {
          skip();
          if (pos_ < text_.size() && text_[pos_] == '}') {
            ++pos_;
            break;
          }
          const std::size_t s = pos_;
          std::string run = identifier();
          if (run.empty()) fail("expected base coordinate name in jet index");
          split_names(run, s, jet);
        }
      } else {
        const std::size_t s = pos_;
        std::string run = identifier();
        if (run.empty()) fail("expected jet index after '_'");
        split_names(run, s, jet);
      }
      if (jet.empty()) fail("empty jet index");
    }
    const int limit = max_order_ < 0 ? space_.order() : max_order_;
    if (static_cast<int>(jet.size()) > limit)
      throw Error(ErrorCode::JetOrderExceeded,
                  "jet order " + std::to_string(jet.size()) + " exceeds " + std::to_string(limit) + " at position " +
                      std::to_string(at),
                  static_cast<int>(at));
    return Expr::sym(Symbol::field(a, jet));
  }

  Expr atom() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = sum();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (c == '@') {
      const std::size_t at = pos_++;
      std::string id = identifier();
      if (id == "t") return Expr::sym(Symbol::param(kHomotopyParam));
      if (id == "h") return Expr::sym(Symbol::param(kSectionHomotopyParam));
      if (id.size() == 2 && id[0] == 's' && id[1] >= '1' && id[1] <= '9')
        return Expr::sym(Symbol::param(id[1] - '0'));
      pos_ = at;
      fail("unknown reserved name '@" + id + "'");
    }
    if (!std::isalpha(static_cast<unsigned char>(c))) fail("unexpected '" + std::string(1, c) + "'");
    const std::size_t at = pos_;
    std::string id = identifier();
    if (id == "sin" || id == "cos" || id == "exp") {
      const Fn fn = id == "sin" ? Fn::Sin : id == "cos" ? Fn::Cos : Fn::Exp;
      expect('(');
      Expr arg = sum();
      expect(')');
      return Expr::func(fn, arg);
    }
    if (int i = base_index(id); i >= 0) return Expr::sym(Symbol::base(i));
    const auto& f = space_.field_names();
    for (std::size_t a = 0; a < f.size(); ++a)
      if (f[a] == id) return field_symbol(static_cast<int>(a), at);
    if (id == "pi") return Expr::sym(Symbol::constant("pi"));
    for (const auto& k : space_.constants())
      if (k == id) return Expr::sym(Symbol::constant(id));
    throw Error(ErrorCode::UnknownCoordinate,
                "unknown coordinate '" + id + "' at position " + std::to_string(at), static_cast<int>(at));
  }

  std::string_view text_;
  const JetSpace& space_;
  int max_order_;
  std::size_t pos_ = 0;
};

std::string render(const Expr& e, const JetSpace& space);

std::string render_power(const Power& p, const JetSpace& space) {
  std::string base;
  switch (p.base.kind) {
    case Factor::Kind::Symbol:
      base = space.name(p.base.symbol);
      break;
    case Factor::Kind::Func:
      base = std::string(p.base.fn == Fn::Sin ? "sin" : p.base.fn == Fn::Cos ? "cos" : "exp") + "(" +
             render(p.base.arg, space) + ")";
      break;
    case Factor::Kind::Sum:
      base = "(" + render(p.base.arg, space) + ")";
      break;
  }
  if (p.exp == 1) return base;
  return base + "^" + std::to_string(p.exp);
}

std::string render(const Expr& e, const JetSpace& space) {
  if (e.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& t : e.terms()) {
    Rational c = t.coef;
    if (first) {
      if (c < 0) out += "-";
    } else {
      out += c < 0 ? " - " : " + ";
    }
    first = false;
    c = abs(c);
    std::string body;
    for (const auto& p : t.mono) {
      if (!body.empty()) body += "*";
      body += render_power(p, space);
    }
    if (body.empty()) {
      out += to_string(c);
    } else if (c == 1) {
      out += body;
    } else {
      out += to_string(c) + "*" + body;
    }
  }
  return out;
}

}  // namespace

Expr parse(std::string_view text, const JetSpace& space, int max_order) {
  return Parser(text, space, max_order).run();
}

std::string to_string(const Rational& q) { return q.get_str(); }

std::string to_string(const Expr& e, const JetSpace& space) {
  return render(e, space);
}

}  // namespace vjp
