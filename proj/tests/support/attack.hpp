#pragma once

// Brute-force copy attacker and random protection states, kept apart from the
// library's own scan so the two can be checked against each other.

#include <random>
#include <set>

#include "pws/protection.hpp"
#include "pws/workbook.hpp"

namespace pws::testing {

// Every formula cell whose source a user obtains by copying some rectangle
// between two selectable cells on a visible sheet. Cells past the used range
// all share the default format, so one extra row and column stand in for the
// rest of the grid.
inline std::set<CellAddress> brute_force_leaks(const Workbook& wb) {
  std::set<CellAddress> leaked;
  auto values = recalculate(wb);
  for (const auto& s : wb.sheets) {
    if (s.visibility != SheetVisibility::Visible) continue;
    Rect used = s.used_range();
    int rows = used.bottom_right.row + 1, cols = used.bottom_right.col + 1;
    std::vector<GridPoint> corners;
    for (int r = 1; r <= rows; ++r)
      for (int c = 1; c <= cols; ++c)
        if (capability_at(s, {r, c}).selectable) corners.push_back({r, c});
    for (std::size_t i = 0; i < corners.size(); ++i)
      for (std::size_t j = i; j < corners.size(); ++j) {
        auto payload = copy_range(wb, values, s.name, corners[i], corners[j], Actor::User);
        for (const auto& cell : payload.cells)
          if (cell.is_formula && cell.revealed_source) leaked.insert({s.name, cell.at});
      }
  }
  return leaked;
}

struct ProtectionGen {
  int max_rows = 5, max_cols = 5, max_sheets = 2;
};

// Random grid contents with random formats, flags and visibility.
inline Workbook random_protected_book(std::mt19937& rng, ProtectionGen g = {}) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto coin = [&] { return pick(0, 1) == 1; };
  Workbook wb;
  int sheets = pick(1, g.max_sheets);
  for (int k = 0; k < sheets; ++k) {
    auto& s = wb.add_sheet("S" + std::to_string(k + 1));
    int rows = pick(1, g.max_rows), cols = pick(1, g.max_cols);
    s.default_format = {coin(), coin()};
    for (int r = 1; r <= rows; ++r)
      for (int c = 1; c <= cols; ++c) {
        int kind = pick(0, 5);
        if (kind == 0) continue;
        Cell& cell = s.cell_at({r, c});
        cell.format = {coin(), coin()};
        if (kind == 1) cell.content = CellContent::empty();
        else if (kind <= 3) cell.content = CellContent::number(pick(-9, 9));
        else {
          std::string ref = format_point({pick(1, rows), pick(1, cols)});
          if (sheets > 1 && coin()) ref = "S" + std::to_string(pick(1, sheets)) + "!" + ref;
          cell.content = CellContent::formula("=" + ref + "*" + std::to_string(pick(2, 9)) + "+" + std::to_string(r * 100 + c));
        }
        cell.input = !cell.content.is_formula() && pick(0, 3) == 0;
      }
    s.protection.enabled = coin();
    s.protection.allow_select_locked = coin();
    s.protection.allow_select_unlocked = coin();
    s.protection.allow_format_cells = pick(0, 3) == 0;
    if (coin()) s.protection.password = make_element_record("pw" + std::to_string(pick(0, 99)));
    if (k > 0 && pick(0, 3) == 0) s.visibility = coin() ? SheetVisibility::Hidden : SheetVisibility::VeryHidden;
  }
  wb.protection.structure = coin();
  wb.protection.windows = coin();
  if (coin()) wb.protection.password = make_element_record("book");
  return wb;
}

}  // namespace pws::testing
