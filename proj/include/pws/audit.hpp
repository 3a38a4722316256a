#pragma once

#include <algorithm>
#include <array>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "pws/address.hpp"
#include "pws/protection.hpp"
#include "pws/workbook.hpp"

namespace pws {

enum class RuleId { R1 = 1, R2, R3, R4, R5, R6, R7, R8, R9, R10 };

enum class Severity { Error, Warning, Info };

// Fixed rule table: the rule decides the severity.
inline Severity severity_of(RuleId rule) {
  switch (rule) {
    case RuleId::R1:
    case RuleId::R3:
    case RuleId::R6:
    case RuleId::R9: return Severity::Error;
    case RuleId::R10: return Severity::Info;
    default: return Severity::Warning;
  }
}

inline std::string rule_name(RuleId rule) { return "R" + std::to_string(static_cast<int>(rule)); }

inline std::string_view severity_name(Severity s) {
  switch (s) {
    case Severity::Error: return "error";
    case Severity::Warning: return "warning";
    case Severity::Info: return "info";
  }
  return "?";
}

struct FindingLocation {
  enum class Scope { Workbook, Sheet, Cell };
  Scope scope = Scope::Workbook;
  std::string sheet;
  GridPoint at;

  static FindingLocation workbook() { return {}; }
  static FindingLocation of_sheet(std::string name) { return {Scope::Sheet, std::move(name), {}}; }
  static FindingLocation of_cell(std::string name, GridPoint p) { return {Scope::Cell, std::move(name), p}; }

  std::string to_string() const {
    switch (scope) {
      case Scope::Workbook: return "workbook";
      case Scope::Sheet: return quote_sheet_name(sheet);
      case Scope::Cell: return format_address({sheet, at});
    }
    return "?";
  }

  bool operator==(const FindingLocation&) const = default;
};

struct Finding {
  RuleId rule;
  Severity severity;
  FindingLocation location;
  std::string message;

  bool operator==(const Finding&) const = default;
};

namespace detail {

inline Finding make_finding(RuleId rule, FindingLocation loc, std::string message) {
  return {rule, severity_of(rule), std::move(loc), std::move(message)};
}

// Is there a cell a user can select inside `q`? Explicit cells are checked
// one by one; cells without an entry all share the sheet default format.
inline bool has_selectable(const Sheet& s, const Rect& q, bool implicit_selectable) {
  std::int64_t explicit_inside = 0;
  for (const auto& [p, cell] : s.cells) {
    if (!q.contains(p)) continue;
    ++explicit_inside;
    if (capability_at(s, p).selectable) return true;
  }
  return implicit_selectable && q.area() > explicit_inside;
}

}  // namespace detail

// Formula cells that a two-corner selection between selectable cells would
// engulf and copy with their source text. A cell c lies in the rectangle of
// some selectable pair (p, q) iff selectable cells exist in opposite
// quadrants around c: (upper-left and lower-right) or (upper-right and
// lower-left), quadrants taken inclusively.
inline std::vector<Finding> evasion_scan(const Workbook& wb) {
  std::vector<Finding> out;
  for (const auto& s : wb.sheets) {
    if (s.visibility != SheetVisibility::Visible) continue;
    bool implicit_selectable = capability_under(s.protection, s.default_format).selectable;
    for (const auto& [p, cell] : s.cells) {
      if (!cell.content.is_formula() || !capability_at(s, p).copy_reveals_contents) continue;
      Rect nw{{1, 1}, p};
      Rect se{p, {kMaxRows, kMaxCols}};
      Rect ne{{1, p.col}, {p.row, kMaxCols}};
      Rect sw{{p.row, 1}, {kMaxRows, p.col}};
      auto sel = [&](const Rect& q) { return detail::has_selectable(s, q, implicit_selectable); };
      bool engulfed = (sel(nw) && sel(se)) || (sel(ne) && sel(sw));
      if (engulfed)
        out.push_back(detail::make_finding(RuleId::R9, FindingLocation::of_cell(s.name, p),
                                           "formula can be copied with its source via a selection between "
                                           "selectable cells; format it Locked+Hidden or move it off this sheet"));
    }
  }
  return out;
}

inline std::vector<Finding> audit_protection(const Workbook& wb) {
  std::vector<Finding> out;
  auto inputs = data_entry_cells(wb);
  const CellProtectionFormat sealed{true, true};
  const CellProtectionFormat open{false, false};
  bool any_password = wb.protection.password.has_value();

  if (!wb.protection.structure)
    out.push_back(detail::make_finding(RuleId::R6, FindingLocation::workbook(), "workbook structure protection is off"));
  if ((wb.protection.structure || wb.protection.windows) && !wb.protection.password)
    out.push_back(detail::make_finding(RuleId::R7, FindingLocation::workbook(),
                                       "workbook protection has no password"));

  for (const auto& s : wb.sheets) {
    auto sheet_loc = FindingLocation::of_sheet(s.name);
    any_password = any_password || s.protection.password.has_value();

    if (s.default_format != sealed)
      out.push_back(detail::make_finding(RuleId::R1, sheet_loc, "empty cells are not formatted Locked+Hidden"));
    if (!s.default_format.locked && s.default_format.hidden)
      out.push_back(detail::make_finding(RuleId::R8, sheet_loc, "empty cells are formatted unLocked+Hidden"));

    if (!s.protection.enabled) {
      out.push_back(detail::make_finding(RuleId::R3, sheet_loc, "sheet protection is off"));
    } else {
      if (s.protection.allow_select_locked || s.protection.allow_format_cells)
        out.push_back(detail::make_finding(RuleId::R4, sheet_loc,
                                           "sheet protection allows more than selecting unlocked cells"));
      if (!s.protection.password)
        out.push_back(detail::make_finding(RuleId::R7, sheet_loc, "sheet protection has no password"));
    }

    bool any_unlocked = !s.default_format.locked;
    for (const auto& [p, cell] : s.cells) {
      any_unlocked = any_unlocked || !cell.format.locked;
      auto loc = FindingLocation::of_cell(s.name, p);
      bool input = inputs.count({s.name, p}) > 0;
      if (input) {
        if (cell.format != open)
          out.push_back(detail::make_finding(RuleId::R2, loc, "data-entry cell is not unLocked+unHidden"));
      } else if (cell.content.is_formula() || cell.content.is_empty()) {
        if (cell.format != sealed)
          out.push_back(detail::make_finding(RuleId::R1, loc,
                                             std::string(cell.content.is_formula() ? "formula" : "empty") +
                                                 " cell is not Locked+Hidden"));
      }
      if (!cell.format.locked && cell.format.hidden)
        out.push_back(detail::make_finding(RuleId::R8, loc, "cell is unLocked+Hidden: editable but unseen"));
    }
    if (!any_unlocked && s.visibility == SheetVisibility::Visible)
      out.push_back(detail::make_finding(RuleId::R5, sheet_loc, "sheet has no input cells but is not hidden"));
  }

  auto evasions = evasion_scan(wb);
  out.insert(out.end(), evasions.begin(), evasions.end());

  if (any_password)
    out.push_back(detail::make_finding(RuleId::R10, FindingLocation::workbook(),
                                       "element passwords fall into one of 194560 classes and are easily cracked"));

  auto sheet_order = [&](const FindingLocation& loc) -> int {
    if (loc.scope == FindingLocation::Scope::Workbook) return -1;
    for (std::size_t i = 0; i < wb.sheets.size(); ++i)
      if (wb.sheets[i].name == loc.sheet) return static_cast<int>(i);
    return static_cast<int>(wb.sheets.size());
  };
  auto key = [&](const Finding& f) {
    bool cell = f.location.scope == FindingLocation::Scope::Cell;
    return std::make_tuple(sheet_order(f.location), cell ? f.location.at.row : 0, cell ? f.location.at.col : 0,
                           static_cast<int>(f.rule));
  };
  std::stable_sort(out.begin(), out.end(), [&](const Finding& a, const Finding& b) { return key(a) < key(b); });
  return out;
}

inline bool has_errors(const std::vector<Finding>& findings) {
  return std::any_of(findings.begin(), findings.end(), [](const Finding& f) { return f.severity == Severity::Error; });
}

// One finding per line: rule, severity, location, message (tab separated).
inline std::string format_machine(const std::vector<Finding>& findings) {
  std::string out;
  for (const auto& f : findings) {
    out += rule_name(f.rule) + "\t" + std::string(severity_name(f.severity)) + "\t" + f.location.to_string() + "\t" +
           f.message + "\n";
  }
  return out;
}

inline std::string format_text(const std::vector<Finding>& findings) {
  std::ostringstream os;
  std::array<int, 3> counts{};
  for (const auto& f : findings) {
    ++counts[static_cast<int>(f.severity)];
    std::string sev(severity_name(f.severity));
    sev.resize(8, ' ');
    std::string rule = rule_name(f.rule);
    rule.resize(4, ' ');
    os << sev << rule << f.location.to_string() << ": " << f.message << "\n";
  }
  os << counts[0] << " error(s), " << counts[1] << " warning(s), " << counts[2] << " info\n";
  os << (counts[0] == 0 ? "PASS" : "FAIL") << "\n";
  return os.str();
}

}  // namespace pws
