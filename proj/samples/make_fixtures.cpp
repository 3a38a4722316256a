// Writes the sample .pws files and users file used by the README and the
// CLI golden tests. Usage: make_fixtures <out-dir>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "pws/protection.hpp"
#include "pws/pws_file.hpp"
#include "pws/server.hpp"

namespace {

using namespace pws;

void put(Workbook& wb, const std::string& sheet, std::string_view addr, std::string_view input) {
  wb.set_content({sheet, parse_point(addr)}, CellContent::from_input(input));
}

void save(const std::filesystem::path& dir, const std::string& name, const Document& doc) {
  std::ofstream(dir / name, std::ios::binary) << serialize_document(doc);
}

// A price quote: the caller types a quantity, the tiered price rule is the
// part worth protecting.
Document quote() {
  Document doc;
  Workbook& wb = doc.workbook;
  wb.add_sheet("Quote");
  put(wb, "Quote", "A1", "Units");
  put(wb, "Quote", "B1", "40");
  put(wb, "Quote", "A2", "Unit price");
  put(wb, "Quote", "B2", "=IF(B1>=100,Rates!B1,Rates!B2)");
  put(wb, "Quote", "A3", "Total");
  put(wb, "Quote", "B3", "=B1*B2");
  wb.add_sheet("Rates");
  put(wb, "Rates", "A1", "Bulk");
  put(wb, "Rates", "B1", "9.5");
  put(wb, "Rates", "A2", "Retail");
  put(wb, "Rates", "B2", "12");
  wb.sheet("Quote").cell_at({1, 2}).input = true;
  doc.acl = SharingAcl{.owner = "alice"};
  doc.acl->grants = {{"bob", Role::Collaborator}, {"carol", Role::LimitedUser}, {"dave", Role::Viewer}};
  return doc;
}

// Locked but not hidden formula between two unlocked inputs.
Document evasion() {
  Document doc;
  Workbook& wb = doc.workbook;
  auto& s = wb.add_sheet("Sheet1");
  put(wb, "Sheet1", "A1", "2");
  put(wb, "Sheet1", "C3", "3");
  put(wb, "Sheet1", "B2", "=A1*C3");
  s.default_format = {true, true};
  s.cell_at({1, 1}).format = {false, false};
  s.cell_at({3, 3}).format = {false, false};
  s.cell_at({2, 2}).format = {true, false};
  s.protection = SheetProtection{true, make_element_record("s3cret!"), false, true, false};
  return doc;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures <out-dir>\n";
    return 2;
  }
  std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);

  Document doubler;
  doubler.workbook.add_sheet("Sheet1");
  put(doubler.workbook, "Sheet1", "A1", "5");
  put(doubler.workbook, "Sheet1", "B2", "=A1*2");
  save(dir, "doubler.pws", doubler);

  Document cycle;
  cycle.workbook.add_sheet("Sheet1");
  put(cycle.workbook, "Sheet1", "A1", "=B1+1");
  put(cycle.workbook, "Sheet1", "B1", "=A1+1");
  save(dir, "cycle.pws", cycle);

  Document locked = doubler;
  locked.open_password = make_open_file_record("letmein");
  save(dir, "open_locked.pws", locked);

  save(dir, "quote.pws", quote());
  Document sealed = quote();
  apply_protection_recipe(sealed.workbook, "s3cret!");
  save(dir, "quote_protected.pws", sealed);

  save(dir, "evasion.pws", evasion());
  Document fixed = evasion();
  apply_protection_recipe(fixed.workbook, "s3cret!");
  save(dir, "evasion_fixed.pws", fixed);

  std::vector<UserEntry> users;
  for (const char* name : {"alice", "bob", "carol", "dave"})
    users.push_back({name, make_open_file_record(std::string(name) + "-pw")});
  std::ofstream(dir / "users.json", std::ios::binary) << users_to_json(users).dump(2) << "\n";
  return 0;
}
