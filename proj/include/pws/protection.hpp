#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pws/address.hpp"
#include "pws/engine.hpp"
#include "pws/error.hpp"
#include "pws/passwords.hpp"
#include "pws/workbook.hpp"

namespace pws {

// Who is acting on a local workbook. The programmer API is the only way to
// reach very hidden sheets and bypasses element passwords.
enum class Actor { User, Programmer };

struct ProtectionCapability {
  bool selectable = true;
  bool editable = true;
  bool contents_visible_normal = true;
  bool contents_visible_formula_view = true;
  bool copy_reveals_contents = true;

  static ProtectionCapability unrestricted() { return {}; }
  bool operator==(const ProtectionCapability&) const = default;
};

// Locked/Hidden bits combined with the sheet protection switches. Formats
// are inert while protection is off.
inline ProtectionCapability capability_under(const SheetProtection& prot, CellProtectionFormat fmt) {
  if (!prot.enabled) return ProtectionCapability::unrestricted();
  ProtectionCapability cap;
  cap.selectable = fmt.locked ? prot.allow_select_locked : prot.allow_select_unlocked;
  cap.editable = !fmt.locked && cap.selectable;
  cap.contents_visible_normal = cap.selectable && !fmt.hidden;
  cap.contents_visible_formula_view = !fmt.hidden;
  cap.copy_reveals_contents = !fmt.hidden;
  return cap;
}

inline ProtectionCapability capability_at(const Sheet& sheet, GridPoint p) {
  return capability_under(sheet.protection, sheet.format_at(p));
}

namespace detail {

inline Sheet& user_visible_sheet(Workbook& wb, const std::string& name, Actor actor) {
  Sheet& s = wb.sheet(name);
  if (actor == Actor::User && s.visibility != SheetVisibility::Visible)
    fail(ErrorCode::SheetNotVisible, "sheet '" + name + "' is not visible");
  return s;
}

inline const Sheet& user_visible_sheet(const Workbook& wb, const std::string& name, Actor actor) {
  return user_visible_sheet(const_cast<Workbook&>(wb), name, actor);
}

}  // namespace detail

inline ProtectionCapability effective_capability(const Workbook& wb, const CellAddress& addr,
                                                 Actor actor = Actor::User) {
  wb.check_address(addr);
  const Sheet& s = detail::user_visible_sheet(wb, addr.sheet, actor);
  if (actor == Actor::Programmer) return ProtectionCapability::unrestricted();
  return capability_at(s, addr.at);
}

enum class Direction { Enter, Tab, Left, Right, Up, Down };

namespace detail {

// Position of `p` in the traversal order for `dir` over `region`.
inline std::int64_t order_key(const Rect& region, GridPoint p, bool column_major) {
  std::int64_t rows = region.bottom_right.row - region.top_left.row + 1;
  std::int64_t cols = region.bottom_right.col - region.top_left.col + 1;
  std::int64_t r = p.row - region.top_left.row;
  std::int64_t c = p.col - region.top_left.col;
  return column_major ? c * rows + r : r * cols + c;
}

inline GridPoint point_at(const Rect& region, std::int64_t key, bool column_major) {
  std::int64_t rows = region.bottom_right.row - region.top_left.row + 1;
  std::int64_t cols = region.bottom_right.col - region.top_left.col + 1;
  if (column_major) return {static_cast<int>(region.top_left.row + key % rows), static_cast<int>(region.top_left.col + key / rows)};
  return {static_cast<int>(region.top_left.row + key / cols), static_cast<int>(region.top_left.col + key % cols)};
}

}  // namespace detail

// Moves the cursor the way a protected sheet does: only cells the user may
// edit are stops. Tab, Enter and Right walk row-major, Left walks row-major
// backwards, Down/Up walk column-major. The walk covers the used range and
// wraps at its edges. With protection off every cell is a stop.
inline CellAddress navigate_next(const Workbook& wb, const std::string& sheet_name, const CellAddress& from,
                                 Direction dir) {
  wb.check_address(from);
  const Sheet& s = detail::user_visible_sheet(wb, sheet_name, Actor::User);
  Rect region = s.used_range();
  region.bottom_right.row = std::max(region.bottom_right.row, from.at.row);
  region.bottom_right.col = std::max(region.bottom_right.col, from.at.col);

  const bool column_major = dir == Direction::Up || dir == Direction::Down;
  const bool backwards = dir == Direction::Left || dir == Direction::Up;
  const std::int64_t total = region.area();
  const std::int64_t start = detail::order_key(region, from.at, column_major);

  auto is_stop = [&](GridPoint p) { return capability_at(s, p).editable; };

  if (!capability_under(s.protection, s.default_format).editable) {
    // Only explicit cells can be stops; pick the nearest in traversal order.
    std::optional<std::int64_t> best;
    std::int64_t best_dist = 0;
    for (const auto& [p, cell] : s.cells) {
      if (!is_stop(p)) continue;
      std::int64_t k = detail::order_key(region, p, column_major);
      std::int64_t dist = backwards ? start - k : k - start;
      dist = ((dist - 1) % total + total) % total + 1;  // in 1..total, self is a full lap
      if (!best || dist < best_dist) {
        best = k;
        best_dist = dist;
      }
    }
    if (!best) fail(ErrorCode::NoUnlockedCells, "sheet '" + sheet_name + "' has no unlocked cells");
    return {s.name, detail::point_at(region, *best, column_major)};
  }

  // Implicit cells are stops, so a run of non-stops is bounded by the number
  // of explicit cells.
  std::int64_t k = start;
  for (std::int64_t step = 0; step < total; ++step) {
    k = backwards ? (k - 1 + total) % total : (k + 1) % total;
    GridPoint p = detail::point_at(region, k, column_major);
    if (is_stop(p)) return {s.name, p};
  }
  fail(ErrorCode::NoUnlockedCells, "sheet '" + sheet_name + "' has no unlocked cells");
}

// Format Cells > Protection. Users lose access to it once the sheet is protected.
inline void set_protection_format(Workbook& wb, const CellAddress& addr, CellProtectionFormat fmt, Actor actor) {
  wb.check_address(addr);
  Sheet& s = detail::user_visible_sheet(wb, addr.sheet, actor);
  if (actor == Actor::User && s.protection.enabled)
    fail(ErrorCode::ProtectionTabUnavailable, "the Protection tab is unavailable while the sheet is protected");
  s.cell_at(addr.at).format = fmt;
}

// Same rule, applied to every cell without an explicit entry ("select all").
inline void set_default_format(Workbook& wb, const std::string& sheet, CellProtectionFormat fmt, Actor actor) {
  Sheet& s = detail::user_visible_sheet(wb, sheet, actor);
  if (actor == Actor::User && s.protection.enabled)
    fail(ErrorCode::ProtectionTabUnavailable, "the Protection tab is unavailable while the sheet is protected");
  s.default_format = fmt;
}

// Local edit of a cell's contents.
inline void edit_cell(Workbook& wb, const CellAddress& addr, std::string_view input, Actor actor) {
  wb.check_address(addr);
  Sheet& s = detail::user_visible_sheet(wb, addr.sheet, actor);
  if (actor == Actor::User && !capability_at(s, addr.at).editable)
    fail(ErrorCode::CellLocked, format_address(addr) + " is locked");
  s.cell_at(addr.at).content = CellContent::from_input(input);
}

struct ClipboardCell {
  GridPoint at;
  std::string text;
  bool is_formula = false;
  bool revealed_source = false;
};

struct ClipboardPayload {
  Rect rect;
  std::vector<ClipboardCell> cells;

  std::size_t leaked_formulas() const {
    return static_cast<std::size_t>(
        std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.is_formula && c.revealed_source; }));
  }
};

// Shift-click selection between two corners, then copy. The corners must be
// selectable; everything the rectangle engulfs is copied, and any cell whose
// format does not hide it contributes its source text.
inline ClipboardPayload copy_range(const Workbook& wb, const ValueMap& values, const std::string& sheet_name,
                                   GridPoint anchor, GridPoint corner, Actor actor) {
  const Sheet& s = detail::user_visible_sheet(wb, sheet_name, actor);
  for (GridPoint p : {anchor, corner}) {
    if (!p.in_bounds()) fail(ErrorCode::UnknownAddress, format_point(p) + " is outside the grid");
    if (actor == Actor::User && !capability_at(s, p).selectable)
      fail(ErrorCode::CornerNotSelectable, format_point(p) + " cannot be selected");
  }
  ClipboardPayload out;
  out.rect = Rect::spanning(anchor, corner);
  detail::for_each_cell_in(s, out.rect, [&](GridPoint p, const Cell& cell) {
    if (cell.content.is_empty()) return;
    ClipboardCell cc;
    cc.at = p;
    cc.is_formula = cell.content.is_formula();
    bool reveal = actor == Actor::Programmer || capability_at(s, p).copy_reveals_contents;
    if (reveal) {
      cc.text = cell.content.source_text();
      cc.revealed_source = true;
    } else {
      auto it = values.find({s.name, p});
      cc.text = it == values.end() ? std::string() : display_text(it->second);
    }
    out.cells.push_back(std::move(cc));
  });
  return out;
}

inline ClipboardPayload copy_range(const Workbook& wb, const std::string& sheet_name, GridPoint anchor,
                                   GridPoint corner, Actor actor) {
  return copy_range(wb, recalculate(wb), sheet_name, anchor, corner, actor);
}

// ---- Sheet structure and visibility -------------------------------------

struct SheetListing {
  std::string name;
  SheetVisibility visibility;
};

// Tabs plus the Unhide dialog's contents. Very hidden sheets never appear
// for a user.
inline std::vector<SheetListing> list_sheets(const Workbook& wb, Actor actor) {
  std::vector<SheetListing> out;
  for (const auto& s : wb.sheets)
    if (actor == Actor::Programmer || s.visibility != SheetVisibility::VeryHidden)
      out.push_back({s.name, s.visibility});
  return out;
}

namespace detail {

// A user cannot name a very hidden sheet; to them it does not exist.
inline Sheet& user_listed_sheet(Workbook& wb, const std::string& name, Actor actor) {
  Sheet* s = wb.find_sheet(name);
  if (actor == Actor::User && s && s->visibility == SheetVisibility::VeryHidden)
    fail(ErrorCode::VeryHiddenNotListable, "no listed sheet named '" + name + "'");
  if (!s) fail(ErrorCode::UnknownSheet, "no sheet named '" + name + "'");
  return *s;
}

inline void require_structure_unlocked(const Workbook& wb, Actor actor) {
  if (actor == Actor::User && wb.protection.structure)
    fail(ErrorCode::StructureProtected, "workbook structure is protected");
}

}  // namespace detail

inline void set_sheet_visibility(Workbook& wb, Actor actor, const std::string& name, SheetVisibility vis) {
  Sheet& s = detail::user_listed_sheet(wb, name, actor);
  if (actor == Actor::User && vis == SheetVisibility::VeryHidden)
    fail(ErrorCode::VeryHiddenNotListable, "very hidden is only settable through the programmer API");
  detail::require_structure_unlocked(wb, actor);
  s.visibility = vis;
}

inline Sheet& insert_sheet(Workbook& wb, Actor actor, const std::string& name) {
  detail::require_structure_unlocked(wb, actor);
  if (actor == Actor::User) {
    if (Sheet* existing = wb.find_sheet(name); existing && existing->visibility == SheetVisibility::VeryHidden)
      fail(ErrorCode::DuplicateSheet, "sheet name is taken");
  }
  return wb.add_sheet(name);
}

inline void delete_sheet(Workbook& wb, Actor actor, const std::string& name) {
  detail::user_listed_sheet(wb, name, actor);
  detail::require_structure_unlocked(wb, actor);
  std::erase_if(wb.sheets, [&](const Sheet& s) { return s.name == name; });
}

inline void move_sheet(Workbook& wb, Actor actor, const std::string& name, std::size_t new_index) {
  detail::user_listed_sheet(wb, name, actor);
  detail::require_structure_unlocked(wb, actor);
  auto it = std::find_if(wb.sheets.begin(), wb.sheets.end(), [&](const Sheet& s) { return s.name == name; });
  Sheet moved = std::move(*it);
  wb.sheets.erase(it);
  new_index = std::min(new_index, wb.sheets.size());
  wb.sheets.insert(wb.sheets.begin() + static_cast<std::ptrdiff_t>(new_index), std::move(moved));
}

// Renames a sheet and rewrites every formula that names it.
inline void rename_sheet(Workbook& wb, Actor actor, const std::string& from, const std::string& to) {
  Sheet& s = detail::user_listed_sheet(wb, from, actor);
  detail::require_structure_unlocked(wb, actor);
  if (!is_valid_sheet_name(to)) fail(ErrorCode::InvalidSheetName, "invalid sheet name");
  if (from == to) return;
  if (wb.find_sheet(to)) fail(ErrorCode::DuplicateSheet, "sheet '" + to + "' already exists");
  s.name = to;
  for (auto& sheet : wb.sheets)
    for (auto& [p, cell] : sheet.cells) {
      if (!cell.content.is_formula()) continue;
      const auto& f = cell.content.formula_content();
      auto rewritten = rename_sheet_refs(f.expr, from, to);
      if (!same_tree(rewritten, f.expr)) cell.content = CellContent::formula(unparse(*rewritten));
    }
}

// Windows protection only ever rejects; geometry itself is not modelled.
inline void resize_windows(const Workbook& wb, Actor actor) {
  if (actor == Actor::User && wb.protection.windows) fail(ErrorCode::WindowsProtected, "workbook windows are protected");
}

// ---- Protect / unprotect -------------------------------------------------

struct SheetProtectionOptions {
  bool allow_select_locked = true;
  bool allow_select_unlocked = true;
  bool allow_format_cells = false;
};

namespace detail {

inline void check_element_password(const std::optional<ElementPasswordRecord>& record,
                                   const std::optional<std::string>& password, Actor actor) {
  if (actor == Actor::Programmer || !record) return;
  if (!password || !verify_element(*record, *password)) fail(ErrorCode::WrongPassword, "wrong password");
}

inline std::optional<ElementPasswordRecord> record_for(const std::optional<std::string>& password) {
  if (!password || password->empty()) return std::nullopt;
  return make_element_record(*password);
}

}  // namespace detail

inline void protect_sheet(Workbook& wb, Actor actor, const std::string& name, SheetProtectionOptions options = {},
                          const std::optional<std::string>& password = std::nullopt) {
  Sheet& s = detail::user_visible_sheet(wb, name, actor);
  if (actor == Actor::User && s.protection.enabled)
    fail(ErrorCode::AlreadyProtected, "sheet '" + name + "' is already protected");
  s.protection.enabled = true;
  s.protection.allow_select_locked = options.allow_select_locked;
  s.protection.allow_select_unlocked = options.allow_select_unlocked;
  s.protection.allow_format_cells = options.allow_format_cells;
  s.protection.password = detail::record_for(password);
}

inline void unprotect_sheet(Workbook& wb, Actor actor, const std::string& name,
                            const std::optional<std::string>& password = std::nullopt) {
  Sheet& s = detail::user_visible_sheet(wb, name, actor);
  if (!s.protection.enabled) return;
  detail::check_element_password(s.protection.password, password, actor);
  s.protection = SheetProtection{};
}

inline void protect_workbook(Workbook& wb, Actor actor, bool structure, bool windows,
                             const std::optional<std::string>& password = std::nullopt) {
  if (actor == Actor::User && (wb.protection.structure || wb.protection.windows))
    fail(ErrorCode::AlreadyProtected, "workbook is already protected");
  wb.protection.structure = structure;
  wb.protection.windows = windows;
  wb.protection.password = detail::record_for(password);
}

inline void unprotect_workbook(Workbook& wb, Actor actor, const std::optional<std::string>& password = std::nullopt) {
  if (!wb.protection.structure && !wb.protection.windows) return;
  detail::check_element_password(wb.protection.password, password, actor);
  wb.protection = WorkbookProtection{};
}

// ---- Data-entry cells and the one-step protection recipe -----------------

// Cells the user is meant to type into: non-formula cells tagged by the
// programmer, or literal cells that some formula reads.
inline std::set<CellAddress> data_entry_cells(const Workbook& wb) {
  std::set<CellAddress> out;
  for (const auto& sheet : wb.sheets)
    for (const auto& [p, cell] : sheet.cells) {
      if (!cell.content.is_formula()) {
        if (cell.input) out.insert({sheet.name, p});
        continue;
      }
      for_each_reference(*cell.content.formula_content().expr, [&](const Reference& r) {
        if (r.is_external) return;
        const Sheet* target = wb.find_sheet(detail::target_sheet(r, sheet.name));
        if (!target) return;
        detail::for_each_cell_in(*target, r.rect(), [&](GridPoint q, const Cell& c) {
          if (c.content.is_literal()) out.insert({target->name, q});
        });
      });
    }
  return out;
}

// Applies every protection step in one go, under one password:
// formats (inputs unlocked+unhidden, everything else locked+hidden), sheet
// protection allowing only unlocked-cell selection, hiding sheets without
// inputs, structure protection, and element passwords everywhere.
inline void apply_protection_recipe(Workbook& wb, const std::string& password) {
  auto inputs = data_entry_cells(wb);
  const CellProtectionFormat sealed{true, true};
  const CellProtectionFormat open{false, false};
  auto record = make_element_record(password);

  std::vector<Sheet*> to_hide;
  bool any_visible_left = false;
  for (auto& sheet : wb.sheets) {
    sheet.default_format = sealed;
    bool has_input = false;
    for (auto& [p, cell] : sheet.cells) {
      bool input = inputs.count({sheet.name, p}) > 0;
      cell.format = input ? open : sealed;
      has_input = has_input || input;
    }
    sheet.protection = SheetProtection{true, record, false, true, false};
    if (sheet.visibility != SheetVisibility::Visible) continue;
    if (has_input) any_visible_left = true;
    else to_hide.push_back(&sheet);
  }
  // A workbook always keeps one visible sheet.
  if (!any_visible_left && !to_hide.empty()) to_hide.erase(to_hide.begin());
  for (Sheet* s : to_hide) s->visibility = SheetVisibility::Hidden;
  wb.protection.structure = true;
  wb.protection.password = record;
}

}  // namespace pws
