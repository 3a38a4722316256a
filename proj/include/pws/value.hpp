#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace pws {

enum class ErrorKind { Cycle, Ref, Div0, Value, Name };

struct ErrorValue {
  ErrorKind kind;
  bool operator==(const ErrorValue&) const = default;
};

inline std::string_view error_text(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Cycle: return "#CYCLE";
    case ErrorKind::Ref: return "#REF!";
    case ErrorKind::Div0: return "#DIV/0!";
    case ErrorKind::Value: return "#VALUE!";
    case ErrorKind::Name: return "#NAME?";
  }
  return "#VALUE!";
}

// Result of evaluating a cell. Numbers are always finite; arithmetic that would
// overflow or divide by zero produces an ErrorValue instead.
class Value {
 public:
  using Storage = std::variant<double, std::string, bool, ErrorValue>;

  Value() : v_(0.0) {}
  Value(double n) : v_(std::isfinite(n) ? Storage(n) : Storage(ErrorValue{ErrorKind::Value})) {}
  Value(std::string s) : v_(std::move(s)) {}
  Value(const char* s) : v_(std::string(s)) {}
  Value(bool b) : v_(b) {}
  Value(ErrorKind e) : v_(ErrorValue{e}) {}

  static Value number(double n) { return Value(n); }
  static Value text(std::string s) { return Value(std::move(s)); }
  static Value boolean(bool b) { return Value(b); }
  static Value error(ErrorKind e) { return Value(e); }

  bool is_number() const { return std::holds_alternative<double>(v_); }
  bool is_text() const { return std::holds_alternative<std::string>(v_); }
  bool is_boolean() const { return std::holds_alternative<bool>(v_); }
  bool is_error() const { return std::holds_alternative<ErrorValue>(v_); }

  double as_number() const { return std::get<double>(v_); }
  const std::string& as_text() const { return std::get<std::string>(v_); }
  bool as_boolean() const { return std::get<bool>(v_); }
  ErrorKind as_error() const { return std::get<ErrorValue>(v_).kind; }

  const Storage& storage() const { return v_; }

  bool operator==(const Value&) const = default;

 private:
  Storage v_;
};

// Up to 15 significant digits, like the common spreadsheet display.
inline std::string format_number(double n) {
  if (n == 0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", n);
  return buf;
}

// Exact round-trip form, used when a number is serialised as source text.
inline std::string format_number_exact(double n) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, n);
  return std::string(buf, res.ptr);
}

inline std::string display_text(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, double>) {
          return format_number(x);
        } else if constexpr (std::is_same_v<T, std::string>) {
          return x;
        } else if constexpr (std::is_same_v<T, bool>) {
          return x ? "TRUE" : "FALSE";
        } else {
          return std::string(error_text(x.kind));
        }
      },
      v.storage());
}

// Strict decimal parse of a whole string (leading/trailing blanks allowed).
inline std::optional<double> parse_number(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double out = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), out, std::chars_format::general);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(out)) return std::nullopt;
  return out;
}

}  // namespace pws
