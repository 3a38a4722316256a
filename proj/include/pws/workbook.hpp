#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pws/address.hpp"
#include "pws/error.hpp"
#include "pws/formula.hpp"
#include "pws/passwords.hpp"
#include "pws/value.hpp"

namespace pws {

// Per-cell Locked/Hidden bits. Inert unless the sheet is protected.
struct CellProtectionFormat {
  bool locked = true;
  bool hidden = false;
  bool operator==(const CellProtectionFormat&) const = default;
};

struct SheetProtection {
  bool enabled = false;
  std::optional<ElementPasswordRecord> password;
  bool allow_select_locked = true;
  bool allow_select_unlocked = true;
  bool allow_format_cells = false;
  bool operator==(const SheetProtection&) const = default;
};

enum class SheetVisibility { Visible, Hidden, VeryHidden };

struct WorkbookProtection {
  bool structure = false;
  bool windows = false;
  std::optional<ElementPasswordRecord> password;
  bool operator==(const WorkbookProtection&) const = default;
};

struct EmptyContent {
  bool operator==(const EmptyContent&) const = default;
};

struct LiteralContent {
  std::variant<double, std::string> value;
  bool operator==(const LiteralContent&) const = default;
};

struct FormulaContent {
  std::string source;
  ExprPtr expr;
  bool operator==(const FormulaContent& o) const { return source == o.source && same_tree(expr, o.expr); }
};

class CellContent {
 public:
  using Storage = std::variant<EmptyContent, LiteralContent, FormulaContent>;

  CellContent() = default;

  static CellContent empty() { return {}; }
  static CellContent number(double n) { return CellContent(LiteralContent{n}); }

  static CellContent text(std::string s) {
    if (!s.empty() && s.front() == '=') fail(ErrorCode::InvalidFormat, "literal text cannot begin with '='");
    return CellContent(LiteralContent{std::move(s)});
  }

  static CellContent formula(std::string source) {
    auto expr = parse_formula(source);
    return CellContent(FormulaContent{std::move(source), std::move(expr)});
  }

  // What a user typing into the cell gets: "" clears, "=..." is a formula,
  // a decimal number is a number, anything else is text.
  static CellContent from_input(std::string_view input) {
    if (input.empty()) return empty();
    if (input.front() == '=') return formula(std::string(input));
    if (auto n = parse_number(input)) return number(*n);
    return text(std::string(input));
  }

  bool is_empty() const { return std::holds_alternative<EmptyContent>(v_); }
  bool is_literal() const { return std::holds_alternative<LiteralContent>(v_); }
  bool is_formula() const { return std::holds_alternative<FormulaContent>(v_); }

  const LiteralContent& literal() const { return std::get<LiteralContent>(v_); }
  const FormulaContent& formula_content() const { return std::get<FormulaContent>(v_); }
  const Storage& storage() const { return v_; }

  // Text a user would see in the formula bar.
  std::string source_text() const {
    if (is_formula()) return formula_content().source;
    if (is_literal()) {
      const auto& lit = literal().value;
      if (auto* n = std::get_if<double>(&lit)) return format_number_exact(*n);
      return std::get<std::string>(lit);
    }
    return {};
  }

  bool operator==(const CellContent&) const = default;

 private:
  explicit CellContent(Storage v) : v_(std::move(v)) {}
  Storage v_;
};

struct Cell {
  CellContent content;
  CellProtectionFormat format;
  bool flattened = false;  // replaced by its display value on export
  bool input = false;      // programmer tag: data-entry field
  bool operator==(const Cell&) const = default;
};

struct Sheet {
  std::string name;
  SheetVisibility visibility = SheetVisibility::Visible;
  SheetProtection protection;
  // Format of every cell that has no explicit entry.
  CellProtectionFormat default_format;
  std::map<GridPoint, Cell> cells;

  const Cell* find(GridPoint p) const {
    auto it = cells.find(p);
    return it == cells.end() ? nullptr : &it->second;
  }

  Cell& cell_at(GridPoint p) {
    auto it = cells.find(p);
    if (it != cells.end()) return it->second;
    return cells.emplace(p, Cell{CellContent{}, default_format}).first->second;
  }

  CellProtectionFormat format_at(GridPoint p) const {
    const Cell* c = find(p);
    return c ? c->format : default_format;
  }

  // Bounding box of explicit entries, always including A1.
  Rect used_range() const {
    Rect r{{1, 1}, {1, 1}};
    for (const auto& [p, cell] : cells) {
      r.bottom_right.row = std::max(r.bottom_right.row, p.row);
      r.bottom_right.col = std::max(r.bottom_right.col, p.col);
    }
    return r;
  }

  bool operator==(const Sheet&) const = default;
};

struct Workbook {
  std::vector<Sheet> sheets;
  WorkbookProtection protection;

  Sheet* find_sheet(std::string_view name) {
    auto it = std::find_if(sheets.begin(), sheets.end(), [&](const Sheet& s) { return s.name == name; });
    return it == sheets.end() ? nullptr : &*it;
  }
  const Sheet* find_sheet(std::string_view name) const {
    return const_cast<Workbook*>(this)->find_sheet(name);
  }

  Sheet& sheet(std::string_view name) {
    if (auto* s = find_sheet(name)) return *s;
    fail(ErrorCode::UnknownSheet, "no sheet named '" + std::string(name) + "'");
  }
  const Sheet& sheet(std::string_view name) const { return const_cast<Workbook*>(this)->sheet(name); }

  Sheet& add_sheet(std::string name) {
    if (!is_valid_sheet_name(name)) fail(ErrorCode::InvalidSheetName, "invalid sheet name");
    if (find_sheet(name)) fail(ErrorCode::DuplicateSheet, "sheet '" + name + "' already exists");
    sheets.push_back(Sheet{std::move(name)});
    return sheets.back();
  }

  const Cell* find_cell(const CellAddress& a) const {
    const Sheet* s = find_sheet(a.sheet);
    return s ? s->find(a.at) : nullptr;
  }

  // Throws UnknownAddress for a missing sheet or an out-of-grid point.
  void check_address(const CellAddress& a) const {
    if (!find_sheet(a.sheet)) fail(ErrorCode::UnknownAddress, "no sheet named '" + a.sheet + "'");
    if (!a.at.in_bounds()) fail(ErrorCode::UnknownAddress, format_address(a) + " is outside the grid");
  }

  void set_content(const CellAddress& a, CellContent content) {
    check_address(a);
    sheet(a.sheet).cell_at(a.at).content = std::move(content);
  }

  bool operator==(const Workbook&) const = default;
};

}  // namespace pws
