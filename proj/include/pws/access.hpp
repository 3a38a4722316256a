#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pws/address.hpp"
#include "pws/audit.hpp"
#include "pws/engine.hpp"
#include "pws/error.hpp"
#include "pws/passwords.hpp"
#include "pws/workbook.hpp"

namespace pws {

enum class Role { Owner, Collaborator, Viewer, LimitedUser };

// Ordered by privilege.
enum class AccessClass { NoAccess = 0, DisplayAccess = 1, FullAccess = 2 };

inline std::string_view role_name(Role r) {
  switch (r) {
    case Role::Owner: return "owner";
    case Role::Collaborator: return "collaborator";
    case Role::Viewer: return "viewer";
    case Role::LimitedUser: return "limited_user";
  }
  return "?";
}

inline std::optional<Role> role_from_name(std::string_view name) {
  for (auto r : {Role::Owner, Role::Collaborator, Role::Viewer, Role::LimitedUser})
    if (role_name(r) == name) return r;
  if (name == "limited-user") return Role::LimitedUser;
  return std::nullopt;
}

inline std::string_view access_name(AccessClass a) {
  switch (a) {
    case AccessClass::NoAccess: return "no_access";
    case AccessClass::DisplayAccess: return "display_access";
    case AccessClass::FullAccess: return "full_access";
  }
  return "?";
}

inline std::optional<AccessClass> access_from_name(std::string_view name) {
  for (auto a : {AccessClass::NoAccess, AccessClass::DisplayAccess, AccessClass::FullAccess})
    if (access_name(a) == name) return a;
  return std::nullopt;
}

// One entry of the sharing history. `role` is empty for a revoke.
struct GrantEvent {
  std::string grantor;
  std::string user;
  std::optional<Role> role;
  bool operator==(const GrantEvent&) const = default;
};

struct SharingAcl {
  std::string owner;
  std::map<std::string, Role> grants;
  bool allow_external_links = false;
  std::map<CellAddress, AccessClass> overrides;
  std::vector<GrantEvent> grant_log;
  bool operator==(const SharingAcl&) const = default;
};

// A workbook as stored on disk: content, sharing, and the open-file password.
struct Document {
  Workbook workbook;
  std::optional<SharingAcl> acl;
  std::optional<OpenFilePasswordRecord> open_password;
  bool operator==(const Document&) const = default;
};

// The authenticated caller of an operation.
struct Principal {
  std::string user;
  bool authenticated = true;
};

inline std::optional<Role> role_of(const SharingAcl& acl, std::string_view user) {
  if (user == acl.owner) return Role::Owner;
  auto it = acl.grants.find(std::string(user));
  if (it == acl.grants.end()) return std::nullopt;
  return it->second;
}

// Non-owners see only Visible sheets.
inline bool sheet_visible_to(const Sheet& s, Role role) {
  return role == Role::Owner || s.visibility == SheetVisibility::Visible;
}

inline AccessClass derive_access_class(const Workbook& wb, const SharingAcl& acl, Role role, const CellAddress& addr) {
  wb.check_address(addr);
  const Sheet& s = wb.sheet(addr.sheet);
  if (!sheet_visible_to(s, role))
    fail(ErrorCode::SheetNotVisibleToRole, "sheet '" + addr.sheet + "' is not shared with this role");
  switch (role) {
    case Role::Owner:
    case Role::Collaborator: return AccessClass::FullAccess;
    case Role::Viewer: return AccessClass::DisplayAccess;
    case Role::LimitedUser: break;
  }
  std::optional<AccessClass> override_class;
  if (auto it = acl.overrides.find(addr); it != acl.overrides.end()) override_class = it->second;
  if (override_class == AccessClass::NoAccess) return AccessClass::NoAccess;
  const Cell* c = s.find(addr.at);
  if (c && c->content.is_formula()) return AccessClass::DisplayAccess;
  return override_class.value_or(AccessClass::FullAccess);
}

namespace detail {

inline Role require_role(const SharingAcl& acl, const Principal& who) {
  if (!who.authenticated) fail(ErrorCode::NotAuthenticated, "not authenticated");
  auto role = role_of(acl, who.user);
  if (!role) fail(ErrorCode::RevokedAccess, "'" + who.user + "' has no access to this workbook");
  return *role;
}

inline void require_owner(const SharingAcl& acl, const Principal& who) {
  if (require_role(acl, who) != Role::Owner) fail(ErrorCode::NotOwner, "only the owner may do this");
}

inline const SharingAcl& acl_of(const Document& doc) {
  if (!doc.acl) fail(ErrorCode::RevokedAccess, "workbook is not shared");
  return *doc.acl;
}

inline std::string display_at(const ValueMap& values, const CellAddress& a) {
  auto it = values.find(a);
  return it == values.end() ? std::string() : display_text(it->second);
}

}  // namespace detail

// ---- Redacted views ------------------------------------------------------

struct ViewCell {
  GridPoint at;
  std::string display;
  bool editable = false;
  std::optional<std::string> contents;  // only for FullAccess cells
  bool operator==(const ViewCell&) const = default;
};

struct ViewSheet {
  std::string name;
  std::vector<ViewCell> cells;
  bool operator==(const ViewSheet&) const = default;
};

struct RedactedView {
  std::uint64_t workbook_version = 1;
  std::vector<ViewSheet> sheets;
  bool operator==(const RedactedView&) const = default;
};

// Builds the projection a session is allowed to receive. Protected contents
// are dropped here, before anything is serialised.
inline RedactedView render_view(const Document& doc, const ValueMap& values, const Principal& who,
                                std::uint64_t workbook_version = 1) {
  const SharingAcl& acl = detail::acl_of(doc);
  Role role = detail::require_role(acl, who);
  RedactedView view;
  view.workbook_version = workbook_version;
  for (const auto& s : doc.workbook.sheets) {
    if (!sheet_visible_to(s, role)) continue;
    ViewSheet vs{s.name, {}};
    for (const auto& [p, cell] : s.cells) {
      if (cell.content.is_empty()) continue;
      CellAddress a{s.name, p};
      AccessClass cls = derive_access_class(doc.workbook, acl, role, a);
      if (cls == AccessClass::NoAccess) continue;
      ViewCell vc;
      vc.at = p;
      vc.display = detail::display_at(values, a);
      vc.editable = cls == AccessClass::FullAccess && role != Role::Viewer;
      if (cls == AccessClass::FullAccess) vc.contents = cell.content.source_text();
      vs.cells.push_back(std::move(vc));
    }
    view.sheets.push_back(std::move(vs));
  }
  return view;
}

// ---- Editing -------------------------------------------------------------

struct CellDelta {
  CellAddress addr;
  std::string display;
  bool operator==(const CellDelta&) const = default;
};

// Checks an edit without applying it. Returns the parsed content.
inline CellContent check_edit(const Document& doc, const Principal& who, const CellAddress& addr,
                              std::string_view input) {
  const SharingAcl& acl = detail::acl_of(doc);
  Role role = detail::require_role(acl, who);
  AccessClass cls = derive_access_class(doc.workbook, acl, role, addr);
  if (role == Role::Viewer || cls != AccessClass::FullAccess)
    fail(ErrorCode::EditDenied, format_address(addr) + " is " + std::string(access_name(cls)) + " for " +
                                    std::string(role_name(role)));
  if (role == Role::LimitedUser && !input.empty() && input.front() == '=')
    fail(ErrorCode::FormulaForbidden, "limited users cannot write formulas");
  CellContent content = CellContent::from_input(input);
  if (content.is_formula() && !acl.allow_external_links && has_external_reference(*content.formula_content().expr))
    fail(ErrorCode::ExternalLinkForbidden, "links to other workbooks are not allowed here");
  return content;
}

// Applies a checked edit, recalculates the dependents, and returns the
// changed values the session is allowed to see.
inline std::vector<CellDelta> apply_edit(Document& doc, ValueMap& values, const Principal& who,
                                         const CellAddress& addr, std::string_view input) {
  CellContent content = check_edit(doc, who, addr, input);
  doc.workbook.set_content(addr, std::move(content));
  auto changed = recalculate_incremental(doc.workbook, values, {addr});

  const SharingAcl& acl = *doc.acl;
  Role role = *role_of(acl, who.user);
  std::vector<CellDelta> delta;
  for (const auto& a : changed) {
    if (!sheet_visible_to(doc.workbook.sheet(a.sheet), role)) continue;
    if (derive_access_class(doc.workbook, acl, role, a) == AccessClass::NoAccess) continue;
    delta.push_back({a, detail::display_at(values, a)});
  }
  return delta;
}

// Copy of a rectangle as the session would paste it elsewhere: contents for
// full-access cells, displayed values for the rest, nothing for no-access.
inline std::vector<CellDelta> copy_cells(const Document& doc, const ValueMap& values, const Principal& who,
                                         const std::string& sheet, const Rect& rect) {
  const SharingAcl& acl = detail::acl_of(doc);
  Role role = detail::require_role(acl, who);
  const Sheet& s = doc.workbook.sheet(sheet);
  if (!sheet_visible_to(s, role))
    fail(ErrorCode::SheetNotVisibleToRole, "sheet '" + sheet + "' is not shared with this role");
  std::vector<CellDelta> out;
  detail::for_each_cell_in(s, rect, [&](GridPoint p, const Cell& cell) {
    if (cell.content.is_empty()) return;
    CellAddress a{sheet, p};
    AccessClass cls = derive_access_class(doc.workbook, acl, role, a);
    if (cls == AccessClass::NoAccess) return;
    out.push_back({a, cls == AccessClass::FullAccess ? cell.content.source_text() : detail::display_at(values, a)});
  });
  return out;
}

// ---- Local export --------------------------------------------------------

namespace detail {

inline CellContent flattened_content(const ValueMap& values, const CellAddress& a) {
  auto it = values.find(a);
  if (it == values.end()) return CellContent::text("");
  if (it->second.is_number()) return CellContent::number(it->second.as_number());
  std::string text = display_text(it->second);
  if (!text.empty() && text.front() == '=') text.insert(text.begin(), '\'');
  return CellContent::text(std::move(text));
}

}  // namespace detail

// The copy a session may save locally. Anything below full access becomes a
// literal of its displayed value; no-access cells and unshared sheets are
// left out, as are the sharing list and every password record.
inline Document export_local(const Document& doc, const ValueMap& values, const Principal& who) {
  const SharingAcl& acl = detail::acl_of(doc);
  Role role = detail::require_role(acl, who);
  if (role == Role::Owner) return doc;

  Document out;
  out.workbook.protection = doc.workbook.protection;
  out.workbook.protection.password.reset();
  for (const auto& s : doc.workbook.sheets) {
    if (!sheet_visible_to(s, role)) continue;
    Sheet copy;
    copy.name = s.name;
    copy.visibility = s.visibility;
    copy.protection = s.protection;
    copy.protection.password.reset();
    copy.default_format = s.default_format;
    for (const auto& [p, cell] : s.cells) {
      CellAddress a{s.name, p};
      AccessClass cls = derive_access_class(doc.workbook, acl, role, a);
      if (cls == AccessClass::NoAccess) continue;
      Cell c = cell;
      if (cls != AccessClass::FullAccess && !cell.content.is_empty()) {
        c.content = detail::flattened_content(values, a);
        c.flattened = true;
      }
      copy.cells.emplace(p, std::move(c));
    }
    out.workbook.sheets.push_back(std::move(copy));
  }
  return out;
}

// ---- Sharing -------------------------------------------------------------

inline void grant(SharingAcl& acl, const Principal& who, const std::string& user, Role role) {
  detail::require_owner(acl, who);
  if (user == acl.owner || role == Role::Owner) fail(ErrorCode::CannotDemoteOwner, "ownership cannot be reassigned");
  acl.grants[user] = role;
  acl.grant_log.push_back({who.user, user, role});
}

inline void revoke(SharingAcl& acl, const Principal& who, const std::string& user) {
  detail::require_owner(acl, who);
  if (user == acl.owner) fail(ErrorCode::CannotDemoteOwner, "the owner cannot be revoked");
  acl.grants.erase(user);
  acl.grant_log.push_back({who.user, user, std::nullopt});
}

// Owner-only per-cell override. Formula cells can be hidden entirely but never
// opened up; FullAccess on a data cell simply removes the override.
inline void set_access_override(const Workbook& wb, SharingAcl& acl, const Principal& who, const CellAddress& addr,
                                AccessClass cls) {
  detail::require_owner(acl, who);
  wb.check_address(addr);
  const Cell* c = wb.find_cell(addr);
  bool formula = c && c->content.is_formula();
  if (cls == AccessClass::FullAccess) {
    if (formula) fail(ErrorCode::OverrideForbidden, "formula cells cannot be made full-access");
    acl.overrides.erase(addr);
    return;
  }
  acl.overrides[addr] = cls;
}

// ---- Versions ------------------------------------------------------------

class AuditFailedError : public Error {
 public:
  explicit AuditFailedError(std::vector<Finding> findings)
      : Error(ErrorCode::AuditFailed, std::to_string(findings.size()) + " finding(s)"), findings_(std::move(findings)) {}

  const std::vector<Finding>& findings() const { return findings_; }

 private:
  std::vector<Finding> findings_;
};

// Master copy of a shared application. Sessions always see the current
// version; earlier versions stay archived and are readable by the owner only.
class MasterStore {
 public:
  explicit MasterStore(Document initial) : current_(std::move(initial)), values_(recalculate(current_.workbook)) {
    if (!current_.acl) fail(ErrorCode::InvalidFormat, "a shared workbook needs an owner");
  }

  std::uint64_t version() const { return archive_.size() + 1; }
  const Document& document() const { return current_; }
  Document& document() { return current_; }
  const ValueMap& values() const { return values_; }
  ValueMap& values() { return values_; }
  const SharingAcl& acl() const { return *current_.acl; }
  SharingAcl& acl() { return *current_.acl; }

  // Replaces the content with `next`; sharing is kept. Without `force` the
  // new workbook must audit without Error findings.
  std::uint64_t publish(const Principal& who, Workbook next, bool force = false) {
    detail::require_owner(acl(), who);
    if (!force) {
      auto findings = audit_protection(next);
      std::vector<Finding> errors;
      for (auto& f : findings)
        if (f.severity == Severity::Error) errors.push_back(std::move(f));
      if (!errors.empty()) throw AuditFailedError(std::move(errors));
    }
    archive_.push_back(std::move(current_.workbook));
    current_.workbook = std::move(next);
    values_ = recalculate(current_.workbook);
    return version();
  }

  const Workbook& archived(const Principal& who, std::uint64_t v) const {
    detail::require_owner(acl(), who);
    if (v == version()) return current_.workbook;
    if (v == 0 || v > archive_.size()) fail(ErrorCode::UnknownVersion, "no version " + std::to_string(v));
    return archive_[v - 1];
  }

  // Used when restoring from disk.
  void restore_archive(std::vector<Workbook> archive) { archive_ = std::move(archive); }
  const std::vector<Workbook>& archive_unchecked() const { return archive_; }

 private:
  Document current_;
  ValueMap values_;
  std::vector<Workbook> archive_;
};

}  // namespace pws
