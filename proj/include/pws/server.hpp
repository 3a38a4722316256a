#pragma once

// Multi-user front end over shared workbooks: sessions, the JSON message
// protocol, one writer per workbook, and crash-safe persistence. The
// transport lives in pws/http.hpp; everything here is transport agnostic.

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pws/access.hpp"
#include "pws/audit.hpp"
#include "pws/error.hpp"
#include "pws/passwords.hpp"
#include "pws/pws_file.hpp"

namespace pws {

namespace fs = std::filesystem;

// ---- Users file ----------------------------------------------------------

struct UserEntry {
  std::string user;
  OpenFilePasswordRecord password;
};

inline json users_to_json(const std::vector<UserEntry>& users) {
  json out = json::array();
  for (const auto& u : users) out.push_back(json{{"user", u.user}, {"password", to_json(u.password)}});
  return out;
}

inline std::vector<UserEntry> users_from_json(const json& j) {
  if (!j.is_array()) fail(ErrorCode::InvalidFormat, "users file: expected an array");
  std::vector<UserEntry> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    std::string where = "users[" + std::to_string(i) + "]";
    detail::expect_object(j[i], where, {"user", "password"});
    UserEntry u;
    u.user = detail::get_string(j[i], "user", where);
    auto rec = password_record_from_json(detail::field(j[i], "password", where), where + ".password");
    auto* open = std::get_if<OpenFilePasswordRecord>(&rec);
    if (!open) fail(ErrorCode::InvalidFormat, where + ".password: login passwords must be open-file strength");
    u.password = *open;
    for (const auto& other : out)
      if (other.user == u.user) fail(ErrorCode::InvalidFormat, where + ": duplicate user '" + u.user + "'");
    out.push_back(std::move(u));
  }
  return out;
}

inline std::vector<UserEntry> load_users(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::InvalidFormat, "cannot open users file '" + path + "'");
  try {
    return users_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::InvalidFormat, std::string("users file is not valid JSON: ") + e.what());
  }
}

// ---- Persistence ---------------------------------------------------------

// Workbook ids double as directory names, so they are kept to a safe alphabet.
inline bool is_valid_workbook_id(std::string_view id) {
  if (id.empty() || id.size() > 64 || id.front() == '.') return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
  return true;
}

namespace detail {

[[noreturn]] inline void io_failure(const fs::path& p, const std::string& what) {
  fail(ErrorCode::CorruptStore, what + " '" + p.string() + "': " + std::error_code(errno, std::generic_category()).message());
}

inline void write_and_sync(const fs::path& p, std::string_view bytes) {
  int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) io_failure(p, "cannot create");
  std::size_t done = 0;
  while (done < bytes.size()) {
    ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      io_failure(p, "cannot write");
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    io_failure(p, "cannot sync");
  }
  ::close(fd);
}

inline void sync_directory(const fs::path& dir) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd < 0) io_failure(dir, "cannot open directory");
  ::fsync(fd);
  ::close(fd);
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::CorruptStore, "cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

// Called between the steps of a commit; tests throw from it to simulate a
// crash at that point.
using FaultHook = std::function<void(std::string_view stage)>;

// Layout under the root, per workbook id:
//   <id>.pws                 seed, imported once
//   <id>/rev-<N>.pws         full document at revision N
//   <id>/versions/v-<K>.pws  archived content of published version K
//   <id>/current             {"revision":N,"version":V,"file":"rev-N.pws"}
// Every file is written to a temporary name, synced, then renamed, and the
// pointer moves last, so a crash leaves `current` naming a complete revision.
class FileStore {
 public:
  struct Entry {
    std::string id;
    std::uint64_t revision = 0;
    std::uint64_t version = 1;
    Document document;
    std::vector<Workbook> archive;
  };

  explicit FileStore(fs::path root, FaultHook hook = {}) : root_(std::move(root)), hook_(std::move(hook)) {}

  const fs::path& root() const { return root_; }

  std::vector<Entry> load_all() {
    std::error_code ec;
    if (!fs::is_directory(root_, ec)) fail(ErrorCode::CorruptStore, "store '" + root_.string() + "' is not a directory");
    std::map<std::string, Entry> found;
    for (const auto& item : fs::directory_iterator(root_)) {
      std::string name = item.path().filename().string();
      if (item.is_directory()) {
        if (!is_valid_workbook_id(name)) continue;
        if (auto e = load_dir(name)) found.emplace(name, std::move(*e));
      }
    }
    for (const auto& item : fs::directory_iterator(root_)) {
      if (!item.is_regular_file() || item.path().extension() != ".pws") continue;
      std::string id = item.path().stem().string();
      if (!is_valid_workbook_id(id) || found.count(id)) continue;
      Entry e;
      e.id = id;
      try {
        e.document = load_document(item.path().string());
      } catch (const Error& err) {
        fail(ErrorCode::CorruptStore, "seed '" + item.path().string() + "': " + err.what());
      }
      if (!e.document.acl) fail(ErrorCode::CorruptStore, "seed '" + item.path().string() + "' has no owner");
      commit(e.id, e.revision, e.version, e.document, nullptr);
      found.emplace(id, std::move(e));
    }
    std::vector<Entry> out;
    for (auto& [id, e] : found) out.push_back(std::move(e));
    return out;
  }

  // Makes (revision, version, document) durable. When `archived` is given it
  // is stored as version `version - 1` first.
  void commit(const std::string& id, std::uint64_t revision, std::uint64_t version, const Document& doc,
              const Workbook* archived) {
    fs::path dir = root_ / id;
    fs::create_directories(dir / "versions");
    if (archived) {
      Document d;
      d.workbook = *archived;
      write_atomically(dir / "versions", "v-" + std::to_string(version - 1) + ".pws", serialize_document(d), "archive");
    }
    std::string file = "rev-" + std::to_string(revision) + ".pws";
    write_atomically(dir, file, serialize_document(doc), "revision");
    json pointer{{"revision", revision}, {"version", version}, {"file", file}};
    write_atomically(dir, "current", pointer.dump() + "\n", "pointer");
  }

 private:
  void stage(std::string_view name) {
    if (hook_) hook_(name);
  }

  void write_atomically(const fs::path& dir, const std::string& name, std::string_view bytes, std::string_view what) {
    fs::path tmp = dir / (name + ".tmp");
    detail::write_and_sync(tmp, bytes);
    stage(std::string(what) + "-written");
    std::error_code ec;
    fs::rename(tmp, dir / name, ec);
    if (ec) fail(ErrorCode::CorruptStore, "cannot rename '" + tmp.string() + "': " + ec.message());
    detail::sync_directory(dir);
    stage(std::string(what) + "-renamed");
  }

  std::optional<Entry> load_dir(const std::string& id) {
    fs::path dir = root_ / id;
    for (const auto& item : fs::recursive_directory_iterator(dir))
      if (item.path().extension() == ".tmp") fs::remove(item.path());
    if (!fs::exists(dir / "current")) {
      // Crash before the first pointer: the seed, if any, is imported again.
      if (fs::exists(root_ / (id + ".pws"))) return std::nullopt;
      fail(ErrorCode::CorruptStore, "workbook '" + id + "' has no current pointer");
    }
    Entry e;
    e.id = id;
    try {
      json pointer = json::parse(detail::read_file(dir / "current"));
      e.revision = pointer.at("revision").get<std::uint64_t>();
      e.version = pointer.at("version").get<std::uint64_t>();
      std::string file = pointer.at("file").get<std::string>();
      if (file != "rev-" + std::to_string(e.revision) + ".pws" || e.version == 0)
        fail(ErrorCode::CorruptStore, "inconsistent pointer");
      e.document = parse_document(detail::read_file(dir / file));
      for (std::uint64_t v = 1; v < e.version; ++v)
        e.archive.push_back(
            parse_document(detail::read_file(dir / "versions" / ("v-" + std::to_string(v) + ".pws"))).workbook);
    } catch (const json::exception& ex) {
      fail(ErrorCode::CorruptStore, "workbook '" + id + "': " + ex.what());
    } catch (const Error& ex) {
      fail(ErrorCode::CorruptStore, "workbook '" + id + "': " + ex.what());
    }
    if (!e.document.acl) fail(ErrorCode::CorruptStore, "workbook '" + id + "' has no owner");
    return e;
  }

  fs::path root_;
  FaultHook hook_;
};

// ---- Service -------------------------------------------------------------

using SteadyClock = std::function<std::chrono::steady_clock::time_point()>;
using TokenSource = std::function<std::string()>;

// 128 bits from the system CSPRNG, hex encoded.
inline std::string random_session_token() {
  std::array<std::uint8_t, 16> bytes{};
  secure_random_bytes(bytes);
  return to_hex(bytes);
}

struct ServiceOptions {
  std::optional<fs::path> store;  // in memory only when empty
  std::chrono::seconds session_ttl{8 * 3600};
  int max_login_failures = 5;
  std::chrono::seconds failure_window{60};
  TokenSource token_source = random_session_token;
  SteadyClock clock = [] { return std::chrono::steady_clock::now(); };
  FaultHook fault_hook;
};

class Service {
 public:
  explicit Service(std::vector<UserEntry> users, ServiceOptions options = {}) : options_(std::move(options)) {
    for (auto& u : users) users_.emplace(u.user, std::move(u.password));
    if (options_.store) {
      store_ = std::make_unique<FileStore>(*options_.store, options_.fault_hook);
      for (auto& e : store_->load_all()) install(e.id, e.revision, std::move(e.document), std::move(e.archive));
    }
  }

  // Adds a workbook at revision 0.
  void host(const std::string& id, Document doc) {
    if (!is_valid_workbook_id(id)) fail(ErrorCode::BadRequest, "invalid workbook id");
    if (!doc.acl) fail(ErrorCode::InvalidFormat, "a shared workbook needs an owner");
    {
      std::shared_lock lock(books_mu_);
      if (books_.count(id)) fail(ErrorCode::BadRequest, "workbook '" + id + "' already exists");
    }
    if (store_) store_->commit(id, 0, 1, doc, nullptr);
    install(id, 0, std::move(doc), {});
  }

  std::uint64_t revision(const std::string& id) const { return snapshot(book(id))->revision; }
  Document document(const std::string& id) const { return snapshot(book(id))->master->document(); }

  // One request in, one response out. Never throws.
  json handle(const json& request) {
    try {
      if (!request.is_object()) fail(ErrorCode::BadRequest, "request must be a JSON object");
      std::string kind = str(request, "kind");
      if (kind == "login") return login(request);
      if (kind == "open") return open(request);
      if (kind == "get_view") return get_view(request);
      if (kind == "edit") return edit(request);
      if (kind == "copy") return copy(request);
      if (kind == "export") return export_file(request);
      if (kind == "grant") return grant_role(request);
      if (kind == "revoke") return revoke_role(request);
      if (kind == "set_access") return set_access(request);
      if (kind == "publish") return publish(request);
      if (kind == "audit") return audit(request);
      fail(ErrorCode::BadRequest, "unknown message kind '" + kind + "'");
    } catch (const AuditFailedError& e) {
      json findings = json::array();
      for (const auto& f : e.findings()) findings.push_back(finding_to_json(f));
      return json{{"ok", false}, {"error", code_name(e.code())}, {"findings", std::move(findings)}};
    } catch (const Error& e) {
      return error_response(e.code(), e.message());
    } catch (const std::exception& e) {
      return error_response(ErrorCode::BadRequest, e.what());
    }
  }

  std::string handle_text(std::string_view body) {
    json request;
    try {
      request = json::parse(body);
    } catch (const json::parse_error&) {
      return error_response(ErrorCode::BadRequest, "request is not valid JSON").dump();
    }
    return handle(request).dump();
  }

 private:
  struct Snapshot {
    std::uint64_t revision = 0;
    std::shared_ptr<const MasterStore> master;
  };

  struct Hosted {
    std::string id;
    std::mutex write_mu;  // one writer per workbook
    mutable std::mutex snap_mu;
    std::shared_ptr<const Snapshot> current;
  };

  struct Session {
    std::string user;
    std::string workbook;
    std::chrono::steady_clock::time_point expires;
  };

  struct Caller {
    Hosted* book;
    std::shared_ptr<const Snapshot> snap;
    Principal who;
    Role role;
  };

  static json error_response(ErrorCode code, const std::string& message) {
    return json{{"ok", false}, {"error", code_name(code)}, {"message", message}};
  }

  static json ok(std::uint64_t revision) { return json{{"ok", true}, {"revision", revision}}; }

  static std::string str(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) fail(ErrorCode::BadRequest, std::string("missing string field '") + key + "'");
    return it->get<std::string>();
  }

  void install(const std::string& id, std::uint64_t revision, Document doc, std::vector<Workbook> archive) {
    auto master = std::make_shared<MasterStore>(std::move(doc));
    master->restore_archive(std::move(archive));
    auto hosted = std::make_unique<Hosted>();
    hosted->id = id;
    hosted->current = std::make_shared<const Snapshot>(Snapshot{revision, std::move(master)});
    std::unique_lock lock(books_mu_);
    if (!books_.emplace(id, std::move(hosted)).second) fail(ErrorCode::BadRequest, "workbook '" + id + "' already exists");
  }

  Hosted& book(const std::string& id) const {
    std::shared_lock lock(books_mu_);
    auto it = books_.find(id);
    if (it == books_.end()) fail(ErrorCode::UnknownWorkbook, "no workbook '" + id + "'");
    return *it->second;
  }

  static std::shared_ptr<const Snapshot> snapshot(const Hosted& h) {
    std::lock_guard lock(h.snap_mu);
    return h.current;
  }

  // ---- sessions and login

  json session_response(const std::string& token, const Session& s, Role role, std::uint64_t revision) {
    json r = ok(revision);
    r["session"] = token;
    r["workbook"] = s.workbook;
    r["role"] = role_name(role);
    r["expires_in"] = options_.session_ttl.count();
    return r;
  }

  json start_session(const std::string& user, const std::string& workbook) {
    Hosted& h = book(workbook);
    auto snap = snapshot(h);
    auto role = role_of(snap->master->acl(), user);
    if (!role) fail(ErrorCode::RevokedAccess, "'" + user + "' has no access to '" + workbook + "'");
    Session s{user, workbook, options_.clock() + options_.session_ttl};
    std::string token = options_.token_source();
    {
      std::lock_guard lock(sessions_mu_);
      sessions_[token] = s;
    }
    return session_response(token, s, *role, snap->revision);
  }

  json login(const json& req) {
    std::string user = str(req, "user");
    std::string password = str(req, "password");
    std::string workbook = str(req, "workbook");
    auto now = options_.clock();
    {
      std::lock_guard lock(login_mu_);
      auto& window = failures_[user];
      while (!window.empty() && now - window.front() >= options_.failure_window) window.pop_front();
      if (static_cast<int>(window.size()) + in_flight_[user] >= options_.max_login_failures)
        fail(ErrorCode::Throttled, "too many failed logins; try again later");
      ++in_flight_[user];
    }
    bool good;
    if (auto it = users_.find(user); it != users_.end()) {
      good = verify_open_file(it->second, password);
    } else {
      // Same work for unknown users, so timing does not reveal who exists.
      verify_open_file(dummy_record(), password);
      good = false;
    }
    {
      std::lock_guard lock(login_mu_);
      --in_flight_[user];
      if (!good) failures_[user].push_back(options_.clock());
    }
    if (!good) fail(ErrorCode::BadCredentials, "bad user name or password");
    return start_session(user, workbook);
  }

  const OpenFilePasswordRecord& dummy_record() {
    std::call_once(dummy_once_, [this] { dummy_ = make_open_file_record("unused"); });
    return dummy_;
  }

  Session session_of(const json& req) {
    std::string token = str(req, "session");
    std::lock_guard lock(sessions_mu_);
    auto it = sessions_.find(token);
    if (it == sessions_.end()) fail(ErrorCode::NotAuthenticated, "unknown session");
    if (options_.clock() >= it->second.expires) {
      sessions_.erase(it);
      fail(ErrorCode::NotAuthenticated, "session expired");
    }
    return it->second;
  }

  // Re-checks the role against the current sharing list on every request.
  Caller caller(const json& req) {
    Session s = session_of(req);
    Hosted& h = book(s.workbook);
    auto snap = snapshot(h);
    auto role = role_of(snap->master->acl(), s.user);
    if (!role) fail(ErrorCode::RevokedAccess, "access to '" + s.workbook + "' was revoked");
    return {&h, std::move(snap), Principal{s.user, true}, *role};
  }

  json open(const json& req) {
    Session s = session_of(req);
    return start_session(s.user, str(req, "workbook"));
  }

  // Runs `change` on a private copy of the master under the workbook's write
  // lock, persists it, then publishes it as the next revision.
  template <typename Fn>
  json mutate(const json& req, Fn&& change) {
    Caller c = caller(req);
    std::lock_guard write(c.book->write_mu);
    auto base = snapshot(*c.book);
    auto role = role_of(base->master->acl(), c.who.user);
    if (!role) fail(ErrorCode::RevokedAccess, "access was revoked");
    auto next = std::make_shared<MasterStore>(*base->master);
    json extra = json::object();
    bool archived = change(*next, c.who, extra);
    std::uint64_t revision = base->revision + 1;
    if (store_)
      store_->commit(c.book->id, revision, next->version(), next->document(),
                     archived ? &next->archive_unchecked().back() : nullptr);
    {
      std::lock_guard lock(c.book->snap_mu);
      c.book->current = std::make_shared<const Snapshot>(Snapshot{revision, std::move(next)});
    }
    json r = ok(revision);
    for (auto& [k, v] : extra.items()) r[k] = v;
    return r;
  }

  // ---- message handlers

  json get_view(const json& req) {
    Caller c = caller(req);
    json r = ok(c.snap->revision);
    if (auto it = req.find("since"); it != req.end()) {
      if (!it->is_number_integer() || it->get<std::int64_t>() < 0)
        fail(ErrorCode::BadRequest, "'since' must be a revision number");
      if (it->get<std::uint64_t>() >= c.snap->revision) {
        r["changed"] = false;
        return r;
      }
    }
    const MasterStore& m = *c.snap->master;
    r["changed"] = true;
    r["role"] = role_name(c.role);
    r["view"] = view_to_json(render_view(m.document(), m.values(), c.who, m.version()));
    return r;
  }

  json edit(const json& req) {
    CellAddress addr = parse_address(str(req, "addr"));
    std::string input = str(req, "input");
    return mutate(req, [&](MasterStore& m, const Principal& who, json& extra) {
      json deltas = json::array();
      for (const auto& d : apply_edit(m.document(), m.values(), who, addr, input))
        deltas.push_back(json{{"addr", format_address(d.addr)}, {"display", d.display}});
      extra["deltas"] = std::move(deltas);
      return false;
    });
  }

  json copy(const json& req) {
    Caller c = caller(req);
    std::string sheet = str(req, "sheet");
    Rect rect = parse_rect(str(req, "rect"));
    const MasterStore& m = *c.snap->master;
    json cells = json::array();
    for (const auto& d : copy_cells(m.document(), m.values(), c.who, sheet, rect))
      cells.push_back(json{{"addr", format_address(d.addr)}, {"text", d.display}});
    json r = ok(c.snap->revision);
    r["cells"] = std::move(cells);
    return r;
  }

  json export_file(const json& req) {
    Caller c = caller(req);
    const MasterStore& m = *c.snap->master;
    json r = ok(c.snap->revision);
    r["file"] = document_to_json(export_local(m.document(), m.values(), c.who));
    return r;
  }

  json grant_role(const json& req) {
    std::string user = str(req, "user");
    auto role = role_from_name(str(req, "role"));
    if (!role) fail(ErrorCode::BadRequest, "unknown role");
    return mutate(req, [&](MasterStore& m, const Principal& who, json&) {
      grant(m.acl(), who, user, *role);
      return false;
    });
  }

  json revoke_role(const json& req) {
    std::string user = str(req, "user");
    return mutate(req, [&](MasterStore& m, const Principal& who, json&) {
      revoke(m.acl(), who, user);
      return false;
    });
  }

  json set_access(const json& req) {
    CellAddress addr = parse_address(str(req, "addr"));
    auto cls = access_from_name(str(req, "access"));
    if (!cls) fail(ErrorCode::BadRequest, "unknown access class");
    return mutate(req, [&](MasterStore& m, const Principal& who, json&) {
      set_access_override(m.document().workbook, m.acl(), who, addr, *cls);
      return false;
    });
  }

  json publish(const json& req) {
    auto it = req.find("file");
    if (it == req.end()) fail(ErrorCode::BadRequest, "missing field 'file'");
    bool force = false;
    if (auto f = req.find("force"); f != req.end()) {
      if (!f->is_boolean()) fail(ErrorCode::BadRequest, "'force' must be a boolean");
      force = f->get<bool>();
    }
    Workbook next = document_from_json(*it).workbook;
    return mutate(req, [&](MasterStore& m, const Principal& who, json& extra) {
      extra["version"] = m.publish(who, std::move(next), force);
      return true;
    });
  }

  json audit(const json& req) {
    Caller c = caller(req);
    if (c.role != Role::Owner) fail(ErrorCode::NotOwner, "only the owner may audit");
    auto findings = audit_protection(c.snap->master->document().workbook);
    json list = json::array();
    for (const auto& f : findings) list.push_back(finding_to_json(f));
    json r = ok(c.snap->revision);
    r["pass"] = !has_errors(findings);
    r["findings"] = std::move(list);
    return r;
  }

  ServiceOptions options_;
  std::map<std::string, OpenFilePasswordRecord> users_;
  std::unique_ptr<FileStore> store_;

  mutable std::shared_mutex books_mu_;
  std::map<std::string, std::unique_ptr<Hosted>> books_;

  std::mutex sessions_mu_;
  std::map<std::string, Session> sessions_;

  std::mutex login_mu_;
  std::map<std::string, std::deque<std::chrono::steady_clock::time_point>> failures_;
  std::map<std::string, int> in_flight_;
  std::once_flag dummy_once_;
  OpenFilePasswordRecord dummy_;
};

}  // namespace pws
