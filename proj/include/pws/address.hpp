#pragma once

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "pws/error.hpp"

namespace pws {

// Desk-scale grid cap; anything outside is UnknownAddress.
inline constexpr int kMaxRows = 10000;
inline constexpr int kMaxCols = 10000;

// Position inside one sheet, 1-based. Ordered row-major.
struct GridPoint {
  int row = 1;
  int col = 1;

  auto operator<=>(const GridPoint&) const = default;

  bool in_bounds() const { return row >= 1 && row <= kMaxRows && col >= 1 && col <= kMaxCols; }
};

struct CellAddress {
  std::string sheet;
  GridPoint at;

  auto operator<=>(const CellAddress&) const = default;

  int row() const { return at.row; }
  int col() const { return at.col; }
};

// Inclusive rectangle normalised so that top_left <= bottom_right on both axes.
struct Rect {
  GridPoint top_left;
  GridPoint bottom_right;

  static Rect spanning(GridPoint a, GridPoint b) {
    return {{std::min(a.row, b.row), std::min(a.col, b.col)},
            {std::max(a.row, b.row), std::max(a.col, b.col)}};
  }

  bool contains(GridPoint p) const {
    return p.row >= top_left.row && p.row <= bottom_right.row && p.col >= top_left.col &&
           p.col <= bottom_right.col;
  }

  std::int64_t area() const {
    return static_cast<std::int64_t>(bottom_right.row - top_left.row + 1) *
           (bottom_right.col - top_left.col + 1);
  }

  auto operator<=>(const Rect&) const = default;
};

inline bool is_valid_sheet_name(std::string_view name) {
  if (name.empty()) return false;
  return std::none_of(name.begin(), name.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return u < 0x20 || u == 0x7f;
  });
}

inline std::string column_letters(int col) {
  std::string out;
  while (col > 0) {
    int rem = (col - 1) % 26;
    out.insert(out.begin(), static_cast<char>('A' + rem));
    col = (col - 1) / 26;
  }
  return out;
}

inline std::string format_point(GridPoint p) { return column_letters(p.col) + std::to_string(p.row); }

// Sheet names that are not plain identifiers are written 'like this', with
// embedded quotes doubled.
inline bool sheet_name_needs_quotes(std::string_view name) {
  if (name.empty()) return true;
  auto first = static_cast<unsigned char>(name.front());
  if (!(std::isalpha(first) || first == '_')) return true;
  return !std::all_of(name.begin(), name.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u == '_' || u == '.';
  });
}

inline std::string quote_sheet_name(std::string_view name) {
  if (!sheet_name_needs_quotes(name)) return std::string(name);
  std::string out = "'";
  for (char c : name) {
    if (c == '\'') out += '\'';
    out += c;
  }
  out += '\'';
  return out;
}

inline std::string format_address(const CellAddress& a) {
  return quote_sheet_name(a.sheet) + "!" + format_point(a.at);
}

namespace detail {

// Parses `[$]COL[$]ROW` starting at `pos`; advances `pos` on success.
inline std::optional<GridPoint> scan_point(std::string_view text, std::size_t& pos) {
  std::size_t p = pos;
  if (p < text.size() && text[p] == '$') ++p;
  std::int64_t col = 0;
  std::size_t letters = 0;
  while (p < text.size() && std::isalpha(static_cast<unsigned char>(text[p]))) {
    col = col * 26 + (std::toupper(static_cast<unsigned char>(text[p])) - 'A' + 1);
    ++p;
    if (++letters > 4) return std::nullopt;
  }
  if (letters == 0) return std::nullopt;
  if (p < text.size() && text[p] == '$') ++p;
  std::int64_t row = 0;
  std::size_t digits = 0;
  while (p < text.size() && std::isdigit(static_cast<unsigned char>(text[p]))) {
    row = row * 10 + (text[p] - '0');
    ++p;
    if (++digits > 6) return std::nullopt;
  }
  if (digits == 0) return std::nullopt;
  pos = p;
  return GridPoint{static_cast<int>(row), static_cast<int>(col)};
}

// Reads a sheet name (quoted or bare) ending at '!'. Returns nullopt and leaves
// `pos` untouched if there is no sheet prefix.
inline std::optional<std::string> scan_sheet_prefix(std::string_view text, std::size_t& pos) {
  std::size_t p = pos;
  std::string name;
  if (p < text.size() && text[p] == '\'') {
    ++p;
    for (;;) {
      if (p >= text.size()) return std::nullopt;
      if (text[p] == '\'') {
        if (p + 1 < text.size() && text[p + 1] == '\'') {
          name += '\'';
          p += 2;
          continue;
        }
        ++p;
        break;
      }
      name += text[p++];
    }
  } else {
    while (p < text.size() && text[p] != '!') {
      auto u = static_cast<unsigned char>(text[p]);
      if (!(std::isalnum(u) || u == '_' || u == '.')) return std::nullopt;
      name += text[p++];
    }
  }
  if (p >= text.size() || text[p] != '!' || name.empty()) return std::nullopt;
  pos = p + 1;
  return name;
}

}  // namespace detail

inline GridPoint parse_point(std::string_view text) {
  std::size_t pos = 0;
  auto p = detail::scan_point(text, pos);
  if (!p || pos != text.size()) fail(ErrorCode::UnknownAddress, "bad cell reference '" + std::string(text) + "'");
  if (!p->in_bounds()) fail(ErrorCode::UnknownAddress, "'" + std::string(text) + "' is outside the grid");
  return *p;
}

// Accepts `Sheet!A1`, `'My sheet'!A1`, or a bare `A1` when a default sheet is given.
inline CellAddress parse_address(std::string_view text, std::optional<std::string_view> default_sheet = std::nullopt) {
  std::size_t pos = 0;
  auto sheet = detail::scan_sheet_prefix(text, pos);
  if (!sheet) {
    if (!default_sheet) fail(ErrorCode::UnknownAddress, "missing sheet in '" + std::string(text) + "'");
    sheet = std::string(*default_sheet);
  }
  if (!is_valid_sheet_name(*sheet)) fail(ErrorCode::UnknownAddress, "bad sheet name in '" + std::string(text) + "'");
  return {*sheet, parse_point(text.substr(pos))};
}

// `A1:C3` (single cell `B2` is accepted as a 1x1 rectangle).
inline Rect parse_rect(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    auto p = parse_point(text);
    return {p, p};
  }
  return Rect::spanning(parse_point(text.substr(0, colon)), parse_point(text.substr(colon + 1)));
}

inline std::string format_rect(const Rect& r) {
  return format_point(r.top_left) + ":" + format_point(r.bottom_right);
}

}  // namespace pws

template <>
struct std::hash<pws::CellAddress> {
  std::size_t operator()(const pws::CellAddress& a) const noexcept {
    std::size_t h = std::hash<std::string>{}(a.sheet);
    h ^= std::hash<std::int64_t>{}((static_cast<std::int64_t>(a.at.row) << 20) ^ a.at.col) + 0x9e3779b97f4a7c15ULL +
         (h << 6) + (h >> 2);
    return h;
  }
};
