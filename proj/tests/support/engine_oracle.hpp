#pragma once

// Independent reference evaluator for a structural family of formulas.
// It never calls the engine: each random workbook is described twice, once
// as formula text for the engine and once as a plain struct the oracle
// evaluates by repeated full-grid passes until nothing changes.

#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "pws/engine.hpp"
#include "pws/workbook.hpp"

namespace pws::testing {

enum class OKind { Empty, Number, Text, Scale, Add, Sub, Div, Sum, If };

struct OCell {
  OKind kind = OKind::Empty;
  double number = 0;     // Number literal, or constant k in Scale / threshold in If
  double offset = 0;     // constant c in Scale, else-constant in If
  std::string text;      // Text literal
  GridPoint a{}, b{};    // operand references; Sum uses a:b
  bool is_formula() const { return kind >= OKind::Scale; }
};

struct OracleBook {
  int rows = 0, cols = 0;
  std::map<GridPoint, OCell> cells;
};

inline constexpr const char* kOracleSheet = "S";

// Oracle values: a number, a text, or an error kind. Empty stays distinct.
struct OEmpty {};
using OValue = std::variant<OEmpty, double, std::string, ErrorKind>;

class Oracle {
 public:
  explicit Oracle(const OracleBook& book) : book_(book) {}

  // Returns the value of every formula cell.
  std::map<GridPoint, OValue> run() {
    std::map<GridPoint, std::optional<OValue>> state;
    for (const auto& [p, c] : book_.cells)
      if (c.is_formula()) state[p] = std::nullopt;

    // Each pass resolves at least one cell or stops, so the cell count bounds it.
    for (std::size_t pass = 0; pass <= state.size(); ++pass) {
      bool changed = false;
      for (auto& [p, slot] : state) {
        if (slot) continue;
        const OCell& c = book_.cells.at(p);
        if (!precedents_resolved(c, state)) continue;
        slot = eval(c, state);
        changed = true;
      }
      if (!changed) break;
    }
    std::map<GridPoint, OValue> out;
    for (auto& [p, slot] : state) out[p] = slot ? *slot : OValue(ErrorKind::Cycle);
    return out;
  }

 private:
  using State = std::map<GridPoint, std::optional<OValue>>;

  std::vector<GridPoint> precedents(const OCell& c) const {
    std::vector<GridPoint> out;
    switch (c.kind) {
      case OKind::Scale: out = {c.a}; break;
      case OKind::Add:
      case OKind::Sub:
      case OKind::Div:
      case OKind::If: out = {c.a, c.b}; break;
      case OKind::Sum:
        for (int r = c.a.row; r <= c.b.row; ++r)
          for (int col = c.a.col; col <= c.b.col; ++col) out.push_back({r, col});
        break;
      default: break;
    }
    return out;
  }

  bool precedents_resolved(const OCell& c, const State& state) const {
    for (auto p : precedents(c)) {
      auto it = state.find(p);
      if (it != state.end() && !it->second) return false;
    }
    return true;
  }

  OValue read(GridPoint p, const State& state) const {
    auto it = book_.cells.find(p);
    if (it == book_.cells.end()) return OEmpty{};
    const OCell& c = it->second;
    switch (c.kind) {
      case OKind::Empty: return OEmpty{};
      case OKind::Number: return c.number;
      case OKind::Text: return c.text;
      default: return *state.at(p);
    }
  }

  // Arithmetic coercion: empty is 0, non-numeric text is VALUE.
  static std::variant<double, ErrorKind> as_number(const OValue& v) {
    if (std::holds_alternative<OEmpty>(v)) return 0.0;
    if (auto* d = std::get_if<double>(&v)) return *d;
    if (auto* e = std::get_if<ErrorKind>(&v)) return *e;
    if (auto n = parse_number(std::get<std::string>(v))) return *n;
    return ErrorKind::Value;
  }

  static OValue finite(double x) { return std::isfinite(x) ? OValue(x) : OValue(ErrorKind::Value); }

  OValue eval(const OCell& c, const State& state) const {
    switch (c.kind) {
      case OKind::Scale: {
        auto x = as_number(read(c.a, state));
        if (auto* e = std::get_if<ErrorKind>(&x)) return *e;
        return finite(std::get<double>(x) * c.number + c.offset);
      }
      case OKind::Add:
      case OKind::Sub:
      case OKind::Div: {
        OValue l = read(c.a, state), r = read(c.b, state);
        // Error operands win left to right before any coercion.
        if (auto* e = std::get_if<ErrorKind>(&l)) return *e;
        if (auto* e = std::get_if<ErrorKind>(&r)) return *e;
        auto x = as_number(l), y = as_number(r);
        if (auto* e = std::get_if<ErrorKind>(&x)) return *e;
        if (auto* e = std::get_if<ErrorKind>(&y)) return *e;
        double a = std::get<double>(x), b = std::get<double>(y);
        if (c.kind == OKind::Add) return finite(a + b);
        if (c.kind == OKind::Sub) return finite(a - b);
        if (b == 0) return ErrorKind::Div0;
        return finite(a / b);
      }
      case OKind::Sum: {
        double s = 0;
        for (auto p : precedents(c)) {
          OValue v = read(p, state);
          if (auto* e = std::get_if<ErrorKind>(&v)) return *e;
          if (auto* d = std::get_if<double>(&v)) s += *d;
        }
        return finite(s);
      }
      case OKind::If: {
        OValue v = read(c.a, state);
        if (auto* e = std::get_if<ErrorKind>(&v)) return *e;
        bool truth;
        if (std::holds_alternative<std::string>(v)) truth = true;  // text sorts above every number
        else if (std::holds_alternative<OEmpty>(v)) truth = 0 > c.number;
        else truth = std::get<double>(v) > c.number;
        if (!truth) return c.offset;
        OValue w = read(c.b, state);
        if (std::holds_alternative<OEmpty>(w)) return 0.0;
        return w;
      }
      default: return OEmpty{};
    }
  }

  const OracleBook& book_;
};

inline std::string oracle_source(const OCell& c) {
  auto num = [](double x) { return format_number_exact(x); };
  auto ref = [](GridPoint p) { return format_point(p); };
  switch (c.kind) {
    case OKind::Empty: return "";
    case OKind::Number: return num(c.number);
    case OKind::Text: return c.text;
    case OKind::Scale: return "=" + ref(c.a) + "*" + num(c.number) + "+" + num(c.offset);
    case OKind::Add: return "=" + ref(c.a) + "+" + ref(c.b);
    case OKind::Sub: return "=" + ref(c.a) + "-" + ref(c.b);
    case OKind::Div: return "=" + ref(c.a) + "/" + ref(c.b);
    case OKind::Sum: return "=SUM(" + ref(c.a) + ":" + ref(c.b) + ")";
    case OKind::If:
      return "=IF(" + ref(c.a) + ">" + num(c.number) + "," + ref(c.b) + "," + num(c.offset) + ")";
  }
  return "";
}

inline CellContent oracle_content(const OCell& c) {
  switch (c.kind) {
    case OKind::Empty: return CellContent::empty();
    case OKind::Number: return CellContent::number(c.number);
    case OKind::Text: return CellContent::text(c.text);
    default: return CellContent::formula(oracle_source(c));
  }
}

inline Workbook to_workbook(const OracleBook& book) {
  Workbook wb;
  auto& s = wb.add_sheet(kOracleSheet);
  for (const auto& [p, c] : book.cells) s.cell_at(p).content = oracle_content(c);
  return wb;
}

// Random cell from the family. `formula_share` is the chance of a formula.
inline OCell random_cell(std::mt19937& rng, int rows, int cols, double formula_share) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto point = [&] { return GridPoint{pick(1, rows), pick(1, cols)}; };
  auto small = [&] { return pick(-20, 20) / (pick(0, 3) == 0 ? 4.0 : 1.0); };
  OCell c;
  if (std::uniform_real_distribution<double>(0, 1)(rng) >= formula_share) {
    int k = pick(0, 9);
    if (k == 0) c.kind = OKind::Empty;
    else if (k == 1) {
      c.kind = OKind::Text;
      c.text = pick(0, 1) ? "x" : "12";
    } else {
      c.kind = OKind::Number;
      c.number = small();
    }
    return c;
  }
  c.kind = static_cast<OKind>(pick(static_cast<int>(OKind::Scale), static_cast<int>(OKind::If)));
  c.a = point();
  c.b = point();
  c.number = small();
  c.offset = small();
  if (c.kind == OKind::Sum) {
    // Keep ranges small so most cells are not downstream of everything.
    GridPoint far{std::min(rows, c.a.row + pick(0, 2)), std::min(cols, c.a.col + pick(0, 2))};
    c.b = far;
  }
  return c;
}

inline OracleBook random_oracle_book(std::mt19937& rng, int max_cells = 400) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  OracleBook book;
  book.rows = pick(1, 20);
  book.cols = pick(1, std::max(1, std::min(20, max_cells / book.rows)));
  double density = pick(3, 10) / 10.0;
  double formula_share = pick(1, 6) / 10.0;
  for (int r = 1; r <= book.rows; ++r)
    for (int c = 1; c <= book.cols; ++c)
      if (std::uniform_real_distribution<double>(0, 1)(rng) < density)
        book.cells[{r, c}] = random_cell(rng, book.rows, book.cols, formula_share);
  return book;
}

inline bool same_value(const OValue& want, const Value& got) {
  if (std::holds_alternative<OEmpty>(want)) return got.is_number() && got.as_number() == 0;
  if (auto* d = std::get_if<double>(&want)) {
    if (!got.is_number()) return false;
    double g = got.as_number();
    return std::abs(g - *d) <= 1e-12 * std::max({1.0, std::abs(g), std::abs(*d)});
  }
  if (auto* s = std::get_if<std::string>(&want)) return got.is_text() && got.as_text() == *s;
  return got.is_error() && got.as_error() == std::get<ErrorKind>(want);
}

inline std::string describe(const OValue& v) {
  if (std::holds_alternative<OEmpty>(v)) return "<empty>";
  if (auto* d = std::get_if<double>(&v)) return format_number(*d);
  if (auto* s = std::get_if<std::string>(&v)) return "\"" + *s + "\"";
  return std::string(error_text(std::get<ErrorKind>(v)));
}

// Empty string when the engine agrees with the oracle, else a description.
inline std::string oracle_mismatch(const OracleBook& book, const ValueMap& values) {
  auto want = Oracle(book).run();
  for (const auto& [p, w] : want) {
    auto it = values.find({kOracleSheet, p});
    if (it == values.end()) return format_point(p) + ": engine produced no value";
    if (!same_value(w, it->second))
      return format_point(p) + " " + oracle_source(book.cells.at(p)) + ": oracle " + describe(w) + ", engine " +
             display_text(it->second);
  }
  return {};
}

}  // namespace pws::testing
