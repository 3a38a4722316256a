// Builds a small shared workbook, shows the copy evasion, seals it with the
// protection recipe, and renders what a limited user is sent.

#include <iostream>

#include "pws/access.hpp"
#include "pws/audit.hpp"
#include "pws/protection.hpp"
#include "pws/pws_file.hpp"

int main() {
  using namespace pws;

  Document doc;
  Workbook& wb = doc.workbook;
  auto& sheet = wb.add_sheet("Sheet1");
  wb.set_content({"Sheet1", parse_point("A1")}, CellContent::from_input("2"));
  wb.set_content({"Sheet1", parse_point("C3")}, CellContent::from_input("3"));
  wb.set_content({"Sheet1", parse_point("B2")}, CellContent::from_input("=A1*C3"));
  sheet.cell_at(parse_point("A1")).input = true;
  sheet.cell_at(parse_point("C3")).input = true;

  // Unlock the inputs and protect the sheet, but forget to hide the formula.
  sheet.cell_at(parse_point("A1")).format = {false, false};
  sheet.cell_at(parse_point("C3")).format = {false, false};
  protect_sheet(wb, Actor::Programmer, "Sheet1", {.allow_select_locked = false}, "pw");

  auto leak = copy_range(wb, "Sheet1", parse_point("A1"), parse_point("C3"), Actor::User);
  std::cout << "before recipe, formulas revealed by copy: " << leak.leaked_formulas() << "\n";
  std::cout << format_text(audit_protection(wb));

  apply_protection_recipe(wb, "pw");
  auto sealed = copy_range(wb, "Sheet1", parse_point("A1"), parse_point("C3"), Actor::User);
  std::cout << "after recipe, formulas revealed by copy: " << sealed.leaked_formulas() << "\n";
  std::cout << format_text(audit_protection(wb));

  doc.acl = SharingAcl{.owner = "alice"};
  grant(*doc.acl, {"alice"}, "carol", Role::LimitedUser);
  auto view = render_view(doc, recalculate(wb), {"carol"});
  std::cout << view_to_json(view).dump(2) << "\n";
  return 0;
}
