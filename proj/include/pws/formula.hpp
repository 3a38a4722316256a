#pragma once

#include <cctype>
#include <charconv>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pws/address.hpp"
#include "pws/error.hpp"
#include "pws/value.hpp"

namespace pws {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct NumberLit {
  double value = 0;
  bool operator==(const NumberLit&) const = default;
};

struct TextLit {
  std::string value;
  bool operator==(const TextLit&) const = default;
};

// A cell or rectangular range, optionally qualified by sheet and by an
// external workbook. `is_external` is set by the parser for every `[book]`
// reference and is what the linking restriction keys on.
struct Reference {
  std::optional<std::string> book;
  std::optional<std::string> sheet;
  GridPoint first;
  std::optional<GridPoint> last;
  bool is_external = false;

  bool is_range() const { return last.has_value(); }
  Rect rect() const { return last ? Rect::spanning(first, *last) : Rect{first, first}; }

  bool operator==(const Reference&) const = default;
};

enum class UnaryOp { Negate, Plus };

enum class BinaryOp { Add, Sub, Mul, Div, Pow, Concat, Eq, Ne, Lt, Le, Gt, Ge };

enum class Function { Sum, Average, Min, Max, If, Count };

struct Unary {
  UnaryOp op;
  ExprPtr operand;
};

struct Binary {
  BinaryOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};

struct Call {
  Function fn;
  std::vector<ExprPtr> args;
};

struct Expr {
  std::variant<NumberLit, TextLit, Reference, Unary, Binary, Call> node;
};

bool operator==(const Expr& a, const Expr& b);

inline bool same_tree(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return a == b;
  return *a == *b;
}

inline bool operator==(const Unary& a, const Unary& b) { return a.op == b.op && same_tree(a.operand, b.operand); }

inline bool operator==(const Binary& a, const Binary& b) {
  return a.op == b.op && same_tree(a.lhs, b.lhs) && same_tree(a.rhs, b.rhs);
}

inline bool operator==(const Call& a, const Call& b) {
  if (a.fn != b.fn || a.args.size() != b.args.size()) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!same_tree(a.args[i], b.args[i])) return false;
  return true;
}

inline bool operator==(const Expr& a, const Expr& b) { return a.node == b.node; }

// Node factories, mostly for tests and generators.
inline ExprPtr make_number(double v) { return std::make_shared<Expr>(Expr{NumberLit{v}}); }
inline ExprPtr make_text(std::string v) { return std::make_shared<Expr>(Expr{TextLit{std::move(v)}}); }
inline ExprPtr make_ref(Reference r) { return std::make_shared<Expr>(Expr{std::move(r)}); }
inline ExprPtr make_unary(UnaryOp op, ExprPtr e) { return std::make_shared<Expr>(Expr{Unary{op, std::move(e)}}); }
inline ExprPtr make_binary(BinaryOp op, ExprPtr l, ExprPtr r) {
  return std::make_shared<Expr>(Expr{Binary{op, std::move(l), std::move(r)}});
}
inline ExprPtr make_call(Function fn, std::vector<ExprPtr> args) {
  return std::make_shared<Expr>(Expr{Call{fn, std::move(args)}});
}

inline std::string_view function_name(Function fn) {
  switch (fn) {
    case Function::Sum: return "SUM";
    case Function::Average: return "AVERAGE";
    case Function::Min: return "MIN";
    case Function::Max: return "MAX";
    case Function::If: return "IF";
    case Function::Count: return "COUNT";
  }
  return "?";
}

inline std::optional<Function> function_from_name(std::string_view name) {
  std::string upper;
  for (char c : name) upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (auto fn : {Function::Sum, Function::Average, Function::Min, Function::Max, Function::If, Function::Count})
    if (function_name(fn) == upper) return fn;
  return std::nullopt;
}

inline std::string_view operator_text(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Pow: return "^";
    case BinaryOp::Concat: return "&";
    case BinaryOp::Eq: return "=";
    case BinaryOp::Ne: return "<>";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
  }
  return "?";
}

namespace detail {

class FormulaParser {
 public:
  explicit FormulaParser(std::string_view src) : src_(src) {}

  ExprPtr parse() {
    if (src_.empty() || src_.front() != '=') throw SyntaxError(0, "formula must begin with '='");
    pos_ = 1;
    auto e = comparison();
    skip_ws();
    if (pos_ != src_.size()) throw SyntaxError(pos_, "unexpected '" + std::string(1, src_[pos_]) + "'");
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) ++pos_;
  }

  bool accept(std::string_view tok) {
    skip_ws();
    if (src_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  ExprPtr comparison() {
    auto lhs = concat();
    for (;;) {
      std::optional<BinaryOp> op;
      if (accept("<>")) op = BinaryOp::Ne;
      else if (accept("<=")) op = BinaryOp::Le;
      else if (accept(">=")) op = BinaryOp::Ge;
      else if (accept("<")) op = BinaryOp::Lt;
      else if (accept(">")) op = BinaryOp::Gt;
      else if (accept("=")) op = BinaryOp::Eq;
      if (!op) return lhs;
      lhs = make_binary(*op, lhs, concat());
    }
  }

  ExprPtr concat() {
    auto lhs = additive();
    while (accept("&")) lhs = make_binary(BinaryOp::Concat, lhs, additive());
    return lhs;
  }

  ExprPtr additive() {
    auto lhs = multiplicative();
    for (;;) {
      if (accept("+")) lhs = make_binary(BinaryOp::Add, lhs, multiplicative());
      else if (accept("-")) lhs = make_binary(BinaryOp::Sub, lhs, multiplicative());
      else return lhs;
    }
  }

  ExprPtr multiplicative() {
    auto lhs = power();
    for (;;) {
      if (accept("*")) lhs = make_binary(BinaryOp::Mul, lhs, power());
      else if (accept("/")) lhs = make_binary(BinaryOp::Div, lhs, power());
      else return lhs;
    }
  }

  // Left-associative, and prefix minus binds tighter than '^' (-2^2 = 4).
  ExprPtr power() {
    auto lhs = unary();
    while (accept("^")) lhs = make_binary(BinaryOp::Pow, lhs, unary());
    return lhs;
  }

  ExprPtr unary() {
    if (accept("-")) return make_unary(UnaryOp::Negate, unary());
    if (accept("+")) return make_unary(UnaryOp::Plus, unary());
    return primary();
  }

  ExprPtr primary() {
    skip_ws();
    if (pos_ >= src_.size()) throw SyntaxError(pos_, "unexpected end of formula");
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      auto e = comparison();
      if (!accept(")")) throw SyntaxError(pos_, "expected ')'");
      return e;
    }
    if (c == '"') return text_literal();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number_literal();
    if (c == '[') return external_reference();
    if (c == '\'') {
      std::size_t start = pos_;
      auto sheet = scan_sheet_prefix(src_, pos_);
      if (!sheet) throw SyntaxError(start, "malformed quoted sheet name");
      if (!is_valid_sheet_name(*sheet)) throw SyntaxError(start, "invalid sheet name");
      return reference_body(std::nullopt, std::move(*sheet));
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') return name_or_reference();
    throw SyntaxError(pos_, "unexpected '" + std::string(1, c) + "'");
  }

  ExprPtr text_literal() {
    std::size_t start = pos_++;
    std::string out;
    for (;;) {
      if (pos_ >= src_.size()) throw SyntaxError(start, "unterminated string");
      if (src_[pos_] == '"') {
        if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '"') {
          out += '"';
          pos_ += 2;
          continue;
        }
        ++pos_;
        return make_text(std::move(out));
      }
      out += src_[pos_++];
    }
  }

  ExprPtr number_literal() {
    std::size_t start = pos_;
    std::size_t p = pos_;
    while (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) ++p;
    if (p < src_.size() && src_[p] == '.') {
      ++p;
      while (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) ++p;
    }
    if (p < src_.size() && (src_[p] == 'e' || src_[p] == 'E')) {
      std::size_t q = p + 1;
      if (q < src_.size() && (src_[q] == '+' || src_[q] == '-')) ++q;
      if (q < src_.size() && std::isdigit(static_cast<unsigned char>(src_[q]))) {
        while (q < src_.size() && std::isdigit(static_cast<unsigned char>(src_[q]))) ++q;
        p = q;
      }
    }
    double value = 0;
    auto res = std::from_chars(src_.data() + start, src_.data() + p, value);
    if (res.ec != std::errc{} || res.ptr != src_.data() + p || !std::isfinite(value))
      throw SyntaxError(start, "malformed number");
    pos_ = p;
    return make_number(value);
  }

  ExprPtr external_reference() {
    std::size_t start = pos_++;
    auto close = src_.find(']', pos_);
    if (close == std::string_view::npos) throw SyntaxError(start, "unterminated workbook name");
    std::string book(src_.substr(pos_, close - pos_));
    if (book.empty()) throw SyntaxError(start, "empty workbook name");
    pos_ = close + 1;
    std::size_t sheet_at = pos_;
    auto sheet = scan_sheet_prefix(src_, pos_);
    if (!sheet) throw SyntaxError(sheet_at, "external reference needs a sheet");
    return reference_body(std::move(book), std::move(*sheet));
  }

  ExprPtr name_or_reference() {
    std::size_t start = pos_;
    if (auto sheet = scan_sheet_prefix(src_, pos_)) return reference_body(std::nullopt, std::move(*sheet));

    std::size_t p = pos_;
    while (p < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[p])) || src_[p] == '_' || src_[p] == '.'))
      ++p;
    std::size_t after = p;
    while (after < src_.size() && (src_[after] == ' ' || src_[after] == '\t')) ++after;
    if (after < src_.size() && src_[after] == '(') {
      auto name = src_.substr(pos_, p - pos_);
      auto fn = function_from_name(name);
      if (!fn) throw SyntaxError(start, "unknown function '" + std::string(name) + "'");
      pos_ = after + 1;
      return call(*fn, start);
    }
    return reference_body(std::nullopt, std::nullopt);
  }

  ExprPtr call(Function fn, std::size_t start) {
    std::vector<ExprPtr> args;
    if (!accept(")")) {
      for (;;) {
        args.push_back(comparison());
        if (accept(")")) break;
        if (!accept(",")) throw SyntaxError(pos_, "expected ',' or ')'");
      }
    }
    bool ok = fn == Function::If ? args.size() == 3 : !args.empty();
    if (!ok)
      throw Error(ErrorCode::ArityError, std::string(function_name(fn)) + " takes " +
                                             (fn == Function::If ? "3 arguments" : "at least 1 argument") + ", got " +
                                             std::to_string(args.size()) + " at offset " + std::to_string(start));
    return make_call(fn, std::move(args));
  }

  GridPoint point() {
    std::size_t start = pos_;
    auto p = scan_point(src_, pos_);
    if (!p) throw SyntaxError(start, "expected a cell reference");
    if (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      throw SyntaxError(start, "unknown name");
    if (!p->in_bounds()) throw SyntaxError(start, "reference outside the grid");
    return *p;
  }

  ExprPtr reference_body(std::optional<std::string> book, std::optional<std::string> sheet) {
    Reference ref;
    ref.is_external = book.has_value();
    ref.book = std::move(book);
    ref.sheet = std::move(sheet);
    ref.first = point();
    if (pos_ < src_.size() && src_[pos_] == ':') {
      ++pos_;
      ref.last = point();
    }
    return make_ref(std::move(ref));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

inline void unparse_into(const Expr& e, std::string& out, bool nested);

inline void unparse_reference(const Reference& r, std::string& out) {
  if (r.book) out += "[" + *r.book + "]";
  if (r.sheet) out += quote_sheet_name(*r.sheet) + "!";
  out += format_point(r.first);
  if (r.last) out += ":" + format_point(*r.last);
}

inline void unparse_into(const Expr& e, std::string& out, bool nested) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, NumberLit>) {
          out += format_number_exact(n.value);
        } else if constexpr (std::is_same_v<T, TextLit>) {
          out += '"';
          for (char c : n.value) {
            if (c == '"') out += '"';
            out += c;
          }
          out += '"';
        } else if constexpr (std::is_same_v<T, Reference>) {
          unparse_reference(n, out);
        } else if constexpr (std::is_same_v<T, Unary>) {
          out += n.op == UnaryOp::Negate ? "-" : "+";
          unparse_into(*n.operand, out, true);
        } else if constexpr (std::is_same_v<T, Binary>) {
          if (nested) out += '(';
          unparse_into(*n.lhs, out, true);
          out += operator_text(n.op);
          unparse_into(*n.rhs, out, true);
          if (nested) out += ')';
        } else {
          out += function_name(n.fn);
          out += '(';
          for (std::size_t i = 0; i < n.args.size(); ++i) {
            if (i) out += ',';
            unparse_into(*n.args[i], out, false);
          }
          out += ')';
        }
      },
      e.node);
}

}  // namespace detail

// `=...` source text to AST. Throws SyntaxError (with offset) or an
// ArityError-coded Error.
inline ExprPtr parse_formula(std::string_view source) { return detail::FormulaParser(source).parse(); }

// Canonical source text: binary subexpressions are parenthesised, so the
// result re-parses to a structurally equal tree.
inline std::string unparse(const Expr& e) {
  std::string out = "=";
  detail::unparse_into(e, out, false);
  return out;
}

template <typename Fn>
void for_each_reference(const Expr& e, Fn&& fn) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Reference>) {
          fn(n);
        } else if constexpr (std::is_same_v<T, Unary>) {
          for_each_reference(*n.operand, fn);
        } else if constexpr (std::is_same_v<T, Binary>) {
          for_each_reference(*n.lhs, fn);
          for_each_reference(*n.rhs, fn);
        } else if constexpr (std::is_same_v<T, Call>) {
          for (const auto& a : n.args) for_each_reference(*a, fn);
        }
      },
      e.node);
}

inline bool has_external_reference(const Expr& e) {
  bool found = false;
  for_each_reference(e, [&](const Reference& r) { found = found || r.is_external; });
  return found;
}

// Rewrites sheet qualifiers after a rename. Unqualified references are left alone.
inline ExprPtr rename_sheet_refs(const ExprPtr& e, const std::string& from, const std::string& to) {
  return std::visit(
      [&](const auto& n) -> ExprPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Reference>) {
          if (n.is_external || n.sheet != from) return e;
          Reference r = n;
          r.sheet = to;
          return make_ref(std::move(r));
        } else if constexpr (std::is_same_v<T, Unary>) {
          return make_unary(n.op, rename_sheet_refs(n.operand, from, to));
        } else if constexpr (std::is_same_v<T, Binary>) {
          return make_binary(n.op, rename_sheet_refs(n.lhs, from, to), rename_sheet_refs(n.rhs, from, to));
        } else if constexpr (std::is_same_v<T, Call>) {
          std::vector<ExprPtr> args;
          for (const auto& a : n.args) args.push_back(rename_sheet_refs(a, from, to));
          return make_call(n.fn, std::move(args));
        } else {
          return e;
        }
      },
      e->node);
}

}  // namespace pws
