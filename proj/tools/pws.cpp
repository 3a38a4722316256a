// pws: command-line entry points over the protection library and the server.
//
// Exit codes: 0 success or clean, 1 findings (audit errors, leaked formulas),
// 2 usage or input error, 3 infeasible.

#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "pws/access.hpp"
#include "pws/audit.hpp"
#include "pws/engine.hpp"
#include "pws/http.hpp"
#include "pws/protection.hpp"
#include "pws/pws_file.hpp"
#include "pws/server.hpp"

namespace {

using namespace pws;

constexpr int kOk = 0;
constexpr int kFindings = 1;
constexpr int kUsage = 2;
constexpr int kInfeasible = 3;

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) fail(ErrorCode::InvalidFormat, "cannot write '" + path + "'");
}

const std::string& first_sheet(const Workbook& wb) {
  if (wb.sheets.empty()) fail(ErrorCode::UnknownSheet, "workbook has no sheets");
  return wb.sheets.front().name;
}

int run_audit(const std::string& file, const std::string& format) {
  auto doc = load_document(file);
  auto findings = audit_protection(doc.workbook);
  std::cout << (format == "machine" ? format_machine(findings) : format_text(findings));
  return has_errors(findings) ? kFindings : kOk;
}

int run_eval(const std::string& file, const std::vector<std::string>& sets, const std::vector<std::string>& gets) {
  auto doc = load_document(file);
  Workbook& wb = doc.workbook;
  const std::string sheet = first_sheet(wb);
  for (const auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) fail(ErrorCode::BadRequest, "--set expects ADDR=INPUT, got '" + s + "'");
    auto addr = parse_address(s.substr(0, eq), sheet);
    wb.check_address(addr);
    wb.set_content(addr, CellContent::from_input(s.substr(eq + 1)));
  }
  std::vector<CellAddress> targets;
  for (const auto& g : gets) {
    targets.push_back(parse_address(g, sheet));
    wb.check_address(targets.back());
  }
  auto values = recalculate(wb);
  for (const auto& a : targets) {
    auto it = values.find(a);
    std::cout << (it == values.end() ? std::string() : display_text(it->second)) << "\n";
  }
  return kOk;
}

int run_crack(const std::string& file, const std::string& sheet, bool workbook, bool open_file) {
  auto doc = load_document(file);
  if (open_file) {
    if (!doc.open_password) fail(ErrorCode::NoPassword, "file has no open password");
    fail(ErrorCode::Infeasible, "open-file passwords use a salted slow hash; there is no short cut to search");
  }
  std::optional<ElementPasswordRecord> record;
  std::string what;
  if (workbook) {
    record = doc.workbook.protection.password;
    what = "workbook structure";
  } else {
    const Sheet* s = doc.workbook.find_sheet(sheet);
    if (!s) fail(ErrorCode::UnknownSheet, "no sheet '" + sheet + "'");
    if (s->protection.enabled) record = s->protection.password;
    what = "sheet '" + sheet + "'";
  }
  if (!record) fail(ErrorCode::NoPassword, what + " has no password");
  auto result = crack_element(*record);
  std::cout << "password: " << result.password << "\n"
            << "attempts: " << result.attempts << "\n";
  return kOk;
}

int run_attack_copy(const std::string& file, const std::string& rect_text, std::string sheet) {
  auto doc = load_document(file);
  if (sheet.empty()) sheet = first_sheet(doc.workbook);
  Rect rect = parse_rect(rect_text);
  auto payload = copy_range(doc.workbook, sheet, rect.top_left, rect.bottom_right, Actor::User);
  for (const auto& c : payload.cells)
    std::cout << format_point(c.at) << "\t" << (c.revealed_source ? "source" : "value") << "\t" << c.text << "\n";
  std::size_t leaked = payload.leaked_formulas();
  if (leaked == 0) {
    std::cout << "values only\n";
    return kOk;
  }
  std::cout << "LEAK: " << leaked << " formula(s) revealed\n";
  return kFindings;
}

int run_export(const std::string& file, const std::string& role_text, const std::string& out) {
  auto doc = load_document(file);
  auto role = role_from_name(role_text);
  if (!role) fail(ErrorCode::BadRequest, "unknown role '" + role_text + "'");
  // Offline, the exporting user is a stand-in granted the requested role.
  if (!doc.acl) doc.acl = SharingAcl{.owner = "owner"};
  std::string user = *role == Role::Owner ? doc.acl->owner : std::string("export");
  if (*role != Role::Owner) doc.acl->grants[user] = *role;
  auto values = recalculate(doc.workbook);
  write_text(out, serialize_document(export_local(doc, values, Principal{user, true})));
  return kOk;
}

int run_protect(const std::string& file, const std::string& password, const std::string& out) {
  auto doc = load_document(file);
  apply_protection_recipe(doc.workbook, password);
  write_text(out, serialize_document(doc));
  auto findings = audit_protection(doc.workbook);
  std::cerr << format_text(findings);
  return kOk;
}

int run_make_user(const std::string& users_file, const std::string& user, const std::string& password) {
  std::vector<UserEntry> users;
  if (std::ifstream probe(users_file); probe) users = load_users(users_file);
  auto record = make_open_file_record(password);
  bool replaced = false;
  for (auto& u : users)
    if (u.user == user) {
      u.password = record;
      replaced = true;
    }
  if (!replaced) users.push_back({user, record});
  write_text(users_file, users_to_json(users).dump(2) + "\n");
  std::cout << (replaced ? "updated " : "added ") << user << "\n";
  return kOk;
}

HttpFrontEnd* g_front = nullptr;

extern "C" void on_signal(int) {
  if (g_front) g_front->stop();
}

int run_serve(const std::string& bind, const std::string& store, const std::string& users_file) {
  auto [host, port] = parse_bind_address(bind);
  ServiceOptions options;
  options.store = store;
  Service service(load_users(users_file), std::move(options));
  HttpFrontEnd front(service);
  int bound = front.bind(host, port);
  g_front = &front;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on " << host << ":" << bound << std::endl;
  front.run();
  g_front = nullptr;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Workbook protection toolkit"};
  app.require_subcommand(1);

  std::string file, format = "text", sheet, rect, role, out, password, users, user, bind, store;
  std::vector<std::string> sets, gets;
  bool workbook = false, open_file = false;

  auto* audit = app.add_subcommand("audit", "Audit protection settings");
  audit->add_option("file", file)->required();
  audit->add_option("--format", format)->check(CLI::IsMember({"text", "machine"}));

  auto* eval = app.add_subcommand("eval", "Evaluate cells after optional edits");
  eval->add_option("file", file)->required();
  eval->add_option("--set", sets, "ADDR=INPUT, applied in order");
  eval->add_option("--get", gets, "address to print")->required();

  auto* crack = app.add_subcommand("crack-element", "Find a password accepted by an element lock");
  crack->add_option("file", file)->required();
  auto* crack_sheet = crack->add_option("--sheet", sheet);
  auto* crack_book = crack->add_flag("--workbook", workbook);
  auto* crack_open = crack->add_flag("--open-file", open_file);
  crack_sheet->excludes(crack_book, crack_open);
  crack_book->excludes(crack_open);

  auto* attack = app.add_subcommand("attack-copy", "Copy a rectangle as a user and show what leaks");
  attack->add_option("file", file)->required();
  attack->add_option("--rect", rect)->required();
  attack->add_option("--sheet", sheet);

  auto* exp = app.add_subcommand("export", "Export the copy a role may save locally");
  exp->add_option("file", file)->required();
  exp->add_option("--as-role", role)->required();
  exp->add_option("--out", out);

  auto* protect = app.add_subcommand("protect", "Apply the full protection recipe");
  protect->add_option("file", file)->required();
  protect->add_option("--password", password)->required();
  protect->add_option("--out", out)->required();

  auto* make_user = app.add_subcommand("make-user", "Add or update a login in a users file");
  make_user->add_option("--users", users)->required();
  make_user->add_option("--user", user)->required();
  make_user->add_option("--password", password)->required();

  auto* serve = app.add_subcommand("serve", "Run the shared-workbook server");
  serve->add_option("--bind", bind)->required();
  serve->add_option("--store", store)->required();
  serve->add_option("--users", users)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*audit) return run_audit(file, format);
    if (*eval) return run_eval(file, sets, gets);
    if (*crack) {
      if (crack_sheet->count() + crack_book->count() + crack_open->count() != 1) {
        std::cerr << "crack-element: give exactly one of --sheet, --workbook, --open-file\n";
        return kUsage;
      }
      return run_crack(file, sheet, workbook, open_file);
    }
    if (*attack) return run_attack_copy(file, rect, sheet);
    if (*exp) return run_export(file, role, out);
    if (*protect) return run_protect(file, password, out);
    if (*make_user) return run_make_user(users, user, password);
    if (*serve) return run_serve(bind, store, users);
  } catch (const pws::Error& e) {
    std::cerr << "pws: " << e.what() << "\n";
    return e.code() == ErrorCode::Infeasible ? kInfeasible : kUsage;
  } catch (const std::exception& e) {
    std::cerr << "pws: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
