#pragma once

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"

#include "pws/access.hpp"
#include "pws/audit.hpp"
#include "pws/error.hpp"
#include "pws/passwords.hpp"
#include "pws/workbook.hpp"

namespace pws {

using json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

namespace detail {

[[noreturn]] inline void bad_file(const std::string& where, const std::string& what) {
  fail(ErrorCode::InvalidFormat, where + ": " + what);
}

inline void expect_object(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) bad_file(where, "expected an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) bad_file(where, "unknown field '" + key + "'");
  }
}

inline const json& field(const json& j, std::string_view key, const std::string& where) {
  auto it = j.find(std::string(key));
  if (it == j.end()) bad_file(where, "missing field '" + std::string(key) + "'");
  return *it;
}

inline bool get_bool(const json& j, std::string_view key, const std::string& where, std::optional<bool> fallback = {}) {
  auto it = j.find(std::string(key));
  if (it == j.end()) {
    if (fallback) return *fallback;
    bad_file(where, "missing field '" + std::string(key) + "'");
  }
  if (!it->is_boolean()) bad_file(where + "." + std::string(key), "expected a boolean");
  return it->get<bool>();
}

inline std::string get_string(const json& j, std::string_view key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_string()) bad_file(where + "." + std::string(key), "expected a string");
  return v.get<std::string>();
}

inline std::string_view visibility_name(SheetVisibility v) {
  switch (v) {
    case SheetVisibility::Visible: return "visible";
    case SheetVisibility::Hidden: return "hidden";
    case SheetVisibility::VeryHidden: return "very_hidden";
  }
  return "visible";
}

}  // namespace detail

// ---- Password records ----------------------------------------------------

inline json to_json(const ElementPasswordRecord& r) { return json{{"kind", "element"}, {"class", r.class_index}}; }

inline json to_json(const OpenFilePasswordRecord& r) {
  return json{{"kind", "open"}, {"salt", to_hex(r.salt)}, {"digest", to_hex(r.digest)}};
}

inline PasswordRecord password_record_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) detail::bad_file(where, "expected a password record");
  std::string kind = detail::get_string(j, "kind", where);
  if (kind == "element") {
    detail::expect_object(j, where, {"kind", "class"});
    const json& c = detail::field(j, "class", where);
    if (!c.is_number_unsigned() || c.get<std::uint64_t>() >= kElementKeyspace)
      detail::bad_file(where + ".class", "expected an integer below 194560");
    return ElementPasswordRecord{static_cast<std::uint32_t>(c.get<std::uint64_t>())};
  }
  if (kind == "open") {
    detail::expect_object(j, where, {"kind", "salt", "digest"});
    auto salt = from_hex<kSaltBytes>(detail::get_string(j, "salt", where));
    auto digest = from_hex<kDigestBytes>(detail::get_string(j, "digest", where));
    if (!salt || !digest) detail::bad_file(where, "malformed salt or digest");
    return OpenFilePasswordRecord{*salt, *digest};
  }
  detail::bad_file(where + ".kind", "unknown password kind '" + kind + "'");
}

namespace detail {

inline json optional_element(const std::optional<ElementPasswordRecord>& r) { return r ? to_json(*r) : json(nullptr); }

inline std::optional<ElementPasswordRecord> element_from(const json& j, std::string_view key, const std::string& where) {
  auto it = j.find(std::string(key));
  if (it == j.end() || it->is_null()) return std::nullopt;
  auto rec = password_record_from_json(*it, where + "." + std::string(key));
  if (auto* e = std::get_if<ElementPasswordRecord>(&rec)) return *e;
  bad_file(where + "." + std::string(key), "element protection needs an element password record");
}

inline json format_json(CellProtectionFormat f) { return json{{"locked", f.locked}, {"hidden", f.hidden}}; }

inline CellProtectionFormat format_from(const json& j, const std::string& where) {
  expect_object(j, where, {"locked", "hidden"});
  return {get_bool(j, "locked", where), get_bool(j, "hidden", where)};
}

inline json content_json(const CellContent& c) {
  if (c.is_formula()) return json{{"kind", "formula"}, {"source", c.formula_content().source}};
  if (c.is_literal()) {
    const auto& v = c.literal().value;
    if (auto* n = std::get_if<double>(&v)) return json{{"kind", "literal"}, {"number", *n}};
    return json{{"kind", "literal"}, {"text", std::get<std::string>(v)}};
  }
  return json{{"kind", "empty"}};
}

inline CellContent content_from(const json& j, const std::string& where) {
  if (!j.is_object()) bad_file(where, "expected an object");
  std::string kind = get_string(j, "kind", where);
  if (kind == "empty") {
    expect_object(j, where, {"kind"});
    return CellContent::empty();
  }
  if (kind == "formula") {
    expect_object(j, where, {"kind", "source"});
    std::string src = get_string(j, "source", where);
    try {
      return CellContent::formula(src);
    } catch (const Error& e) {
      bad_file(where + ".source", e.what());
    }
  }
  if (kind == "literal") {
    if (j.contains("number")) {
      expect_object(j, where, {"kind", "number"});
      const json& n = j.at("number");
      if (!n.is_number()) bad_file(where + ".number", "expected a number");
      return CellContent::number(n.get<double>());
    }
    expect_object(j, where, {"kind", "text"});
    std::string text = get_string(j, "text", where);
    if (!text.empty() && text.front() == '=') bad_file(where + ".text", "literal text cannot begin with '='");
    return CellContent::text(std::move(text));
  }
  bad_file(where + ".kind", "unknown content kind '" + kind + "'");
}

}  // namespace detail

// ---- Workbook file -------------------------------------------------------

inline json sheet_to_json(const Sheet& s) {
  json cells = json::array();
  for (const auto& [p, c] : s.cells) {
    cells.push_back(json{{"addr", format_point(p)},
                         {"content", detail::content_json(c.content)},
                         {"format", detail::format_json(c.format)},
                         {"flattened", c.flattened},
                         {"input", c.input}});
  }
  return json{{"name", s.name},
              {"visibility", detail::visibility_name(s.visibility)},
              {"protection",
               {{"enabled", s.protection.enabled},
                {"allow_select_locked", s.protection.allow_select_locked},
                {"allow_select_unlocked", s.protection.allow_select_unlocked},
                {"allow_format_cells", s.protection.allow_format_cells},
                {"password", detail::optional_element(s.protection.password)}}},
              {"default_format", detail::format_json(s.default_format)},
              {"cells", std::move(cells)}};
}

inline json acl_to_json(const SharingAcl& acl) {
  json grants = json::object();
  for (const auto& [u, r] : acl.grants) grants[u] = role_name(r);
  json overrides = json::object();
  for (const auto& [a, c] : acl.overrides) overrides[format_address(a)] = access_name(c);
  json log = json::array();
  for (const auto& e : acl.grant_log)
    log.push_back(json{{"grantor", e.grantor}, {"user", e.user}, {"role", e.role ? json(role_name(*e.role)) : json(nullptr)}});
  return json{{"owner", acl.owner},
              {"grants", std::move(grants)},
              {"allow_external_links", acl.allow_external_links},
              {"overrides", std::move(overrides)},
              {"grant_log", std::move(log)}};
}

inline json document_to_json(const Document& doc) {
  json sheets = json::array();
  for (const auto& s : doc.workbook.sheets) sheets.push_back(sheet_to_json(s));
  const auto& wp = doc.workbook.protection;
  return json{{"version", kFormatVersion},
              {"sheets", std::move(sheets)},
              {"workbook_protection",
               {{"structure", wp.structure}, {"windows", wp.windows}, {"password", detail::optional_element(wp.password)}}},
              {"acl", doc.acl ? acl_to_json(*doc.acl) : json(nullptr)},
              {"passwords", {{"open_file", doc.open_password ? to_json(*doc.open_password) : json(nullptr)}}}};
}

inline std::string serialize_document(const Document& doc) { return document_to_json(doc).dump(2) + "\n"; }

namespace detail {

inline Sheet sheet_from(const json& j, const std::string& where) {
  expect_object(j, where, {"name", "visibility", "protection", "default_format", "cells"});
  Sheet s;
  s.name = get_string(j, "name", where);
  if (!is_valid_sheet_name(s.name)) bad_file(where + ".name", "invalid sheet name");
  std::string vis = get_string(j, "visibility", where);
  if (vis == "visible") s.visibility = SheetVisibility::Visible;
  else if (vis == "hidden") s.visibility = SheetVisibility::Hidden;
  else if (vis == "very_hidden") s.visibility = SheetVisibility::VeryHidden;
  else bad_file(where + ".visibility", "unknown visibility '" + vis + "'");

  if (auto it = j.find("protection"); it != j.end()) {
    std::string pw = where + ".protection";
    expect_object(*it, pw, {"enabled", "allow_select_locked", "allow_select_unlocked", "allow_format_cells", "password"});
    s.protection.enabled = get_bool(*it, "enabled", pw);
    s.protection.allow_select_locked = get_bool(*it, "allow_select_locked", pw, true);
    s.protection.allow_select_unlocked = get_bool(*it, "allow_select_unlocked", pw, true);
    s.protection.allow_format_cells = get_bool(*it, "allow_format_cells", pw, false);
    s.protection.password = element_from(*it, "password", pw);
  }
  if (auto it = j.find("default_format"); it != j.end()) s.default_format = format_from(*it, where + ".default_format");

  const json& cells = field(j, "cells", where);
  if (!cells.is_array()) bad_file(where + ".cells", "expected an array");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::string cw = where + ".cells[" + std::to_string(i) + "]";
    const json& c = cells[i];
    expect_object(c, cw, {"addr", "content", "format", "flattened", "input"});
    GridPoint p;
    try {
      p = parse_point(get_string(c, "addr", cw));
    } catch (const Error& e) {
      bad_file(cw + ".addr", e.what());
    }
    if (s.cells.count(p)) bad_file(cw + ".addr", "duplicate cell " + format_point(p));
    Cell cell;
    cell.content = content_from(field(c, "content", cw), cw + ".content");
    cell.format = c.contains("format") ? format_from(c.at("format"), cw + ".format") : s.default_format;
    cell.flattened = get_bool(c, "flattened", cw, false);
    cell.input = get_bool(c, "input", cw, false);
    s.cells.emplace(p, std::move(cell));
  }
  return s;
}

inline SharingAcl acl_from(const json& j, const std::string& where) {
  expect_object(j, where, {"owner", "grants", "allow_external_links", "overrides", "grant_log"});
  SharingAcl acl;
  acl.owner = get_string(j, "owner", where);
  if (acl.owner.empty()) bad_file(where + ".owner", "owner must not be empty");
  acl.allow_external_links = get_bool(j, "allow_external_links", where, false);
  if (auto it = j.find("grants"); it != j.end()) {
    if (!it->is_object()) bad_file(where + ".grants", "expected an object");
    for (const auto& [user, r] : it->items()) {
      auto role = r.is_string() ? role_from_name(r.get<std::string>()) : std::nullopt;
      if (!role || *role == Role::Owner) bad_file(where + ".grants." + user, "invalid role");
      if (user == acl.owner) bad_file(where + ".grants." + user, "the owner cannot hold a grant");
      acl.grants.emplace(user, *role);
    }
  }
  if (auto it = j.find("overrides"); it != j.end()) {
    if (!it->is_object()) bad_file(where + ".overrides", "expected an object");
    for (const auto& [addr, c] : it->items()) {
      auto cls = c.is_string() ? access_from_name(c.get<std::string>()) : std::nullopt;
      if (!cls) bad_file(where + ".overrides." + addr, "invalid access class");
      try {
        acl.overrides.emplace(parse_address(addr), *cls);
      } catch (const Error& e) {
        bad_file(where + ".overrides", e.what());
      }
    }
  }
  if (auto it = j.find("grant_log"); it != j.end()) {
    if (!it->is_array()) bad_file(where + ".grant_log", "expected an array");
    for (const auto& e : *it) {
      expect_object(e, where + ".grant_log", {"grantor", "user", "role"});
      GrantEvent ev{get_string(e, "grantor", where + ".grant_log"), get_string(e, "user", where + ".grant_log"), {}};
      const json& r = field(e, "role", where + ".grant_log");
      if (!r.is_null()) {
        ev.role = r.is_string() ? role_from_name(r.get<std::string>()) : std::nullopt;
        if (!ev.role) bad_file(where + ".grant_log", "invalid role");
      }
      acl.grant_log.push_back(std::move(ev));
    }
  }
  return acl;
}

}  // namespace detail

inline Document document_from_json(const json& j) {
  detail::expect_object(j, "$", {"version", "sheets", "workbook_protection", "acl", "passwords"});
  const json& v = detail::field(j, "version", "$");
  if (!v.is_number_integer() || v.get<int>() != kFormatVersion) detail::bad_file("$.version", "unsupported version");

  Document doc;
  const json& sheets = detail::field(j, "sheets", "$");
  if (!sheets.is_array()) detail::bad_file("$.sheets", "expected an array");
  for (std::size_t i = 0; i < sheets.size(); ++i) {
    Sheet s = detail::sheet_from(sheets[i], "$.sheets[" + std::to_string(i) + "]");
    if (doc.workbook.find_sheet(s.name)) detail::bad_file("$.sheets", "duplicate sheet '" + s.name + "'");
    doc.workbook.sheets.push_back(std::move(s));
  }
  if (auto it = j.find("workbook_protection"); it != j.end()) {
    detail::expect_object(*it, "$.workbook_protection", {"structure", "windows", "password"});
    doc.workbook.protection.structure = detail::get_bool(*it, "structure", "$.workbook_protection");
    doc.workbook.protection.windows = detail::get_bool(*it, "windows", "$.workbook_protection", false);
    doc.workbook.protection.password = detail::element_from(*it, "password", "$.workbook_protection");
  }
  if (auto it = j.find("acl"); it != j.end() && !it->is_null()) doc.acl = detail::acl_from(*it, "$.acl");
  if (auto it = j.find("passwords"); it != j.end()) {
    detail::expect_object(*it, "$.passwords", {"open_file"});
    if (auto o = it->find("open_file"); o != it->end() && !o->is_null()) {
      auto rec = password_record_from_json(*o, "$.passwords.open_file");
      auto* open = std::get_if<OpenFilePasswordRecord>(&rec);
      if (!open) detail::bad_file("$.passwords.open_file", "expected an open-file password record");
      doc.open_password = *open;
    }
  }
  return doc;
}

inline Document parse_document(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::InvalidFormat, std::string("not valid JSON: ") + e.what());
  }
  return document_from_json(j);
}

inline Document load_document(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::InvalidFormat, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_document(ss.str());
}

// ---- Views and findings on the wire --------------------------------------

inline json view_to_json(const RedactedView& v) {
  json sheets = json::array();
  for (const auto& s : v.sheets) {
    json cells = json::array();
    for (const auto& c : s.cells) {
      json cell{{"addr", format_point(c.at)}, {"display", c.display}, {"editable", c.editable}};
      if (c.contents) cell["contents"] = *c.contents;
      cells.push_back(std::move(cell));
    }
    sheets.push_back(json{{"name", s.name}, {"cells", std::move(cells)}});
  }
  return json{{"workbook_version", v.workbook_version}, {"sheets", std::move(sheets)}};
}

inline json finding_to_json(const Finding& f) {
  return json{{"rule", rule_name(f.rule)},
              {"severity", severity_name(f.severity)},
              {"location", f.location.to_string()},
              {"message", f.message}};
}

}  // namespace pws
