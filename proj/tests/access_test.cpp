#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "pws/access.hpp"
#include "pws/pws_file.hpp"
#include "support/builders.hpp"
#include "support/leak_fuzz.hpp"

namespace pws {
namespace {

using testing::at;
using testing::make_book;
using testing::shared;

const Principal kOwner{"owner"};
const Principal kCollab{"col"};
const Principal kViewer{"view"};
const Principal kLimited{"lim"};

Document doc_with_roles(Workbook wb) {
  auto doc = shared(std::move(wb));
  doc.acl->grants = {{"col", Role::Collaborator}, {"view", Role::Viewer}, {"lim", Role::LimitedUser}};
  return doc;
}

Document basic_doc() { return doc_with_roles(make_book({{"A1", "5"}, {"A2", "=A1*2"}})); }

const ViewCell* find_view_cell(const RedactedView& v, const std::string& sheet, std::string_view addr) {
  for (const auto& s : v.sheets)
    if (s.name == sheet)
      for (const auto& c : s.cells)
        if (c.at == parse_point(addr)) return &c;
  return nullptr;
}

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::BadRequest;
}

TEST(AccessClassTest, DocumentedExamples) {
  auto doc = basic_doc();
  const auto& wb = doc.workbook;
  EXPECT_EQ(derive_access_class(wb, *doc.acl, Role::LimitedUser, at("A1")), AccessClass::FullAccess);
  EXPECT_EQ(derive_access_class(wb, *doc.acl, Role::LimitedUser, at("A2")), AccessClass::DisplayAccess);
  for (auto a : {"A1", "A2", "B9"}) {
    EXPECT_EQ(derive_access_class(wb, *doc.acl, Role::Viewer, at(a)), AccessClass::DisplayAccess);
    EXPECT_EQ(derive_access_class(wb, *doc.acl, Role::Collaborator, at(a)), AccessClass::FullAccess);
    EXPECT_EQ(derive_access_class(wb, *doc.acl, Role::Owner, at(a)), AccessClass::FullAccess);
  }
}

TEST(AccessClassTest, HiddenSheetsAreOwnerOnly) {
  auto doc = basic_doc();
  doc.workbook.add_sheet("Calc").visibility = SheetVisibility::Hidden;
  for (Role r : {Role::Collaborator, Role::Viewer, Role::LimitedUser})
    EXPECT_EQ(code_of([&] { derive_access_class(doc.workbook, *doc.acl, r, at("A1", "Calc")); }),
              ErrorCode::SheetNotVisibleToRole);
  EXPECT_EQ(derive_access_class(doc.workbook, *doc.acl, Role::Owner, at("A1", "Calc")), AccessClass::FullAccess);
}

TEST(RenderViewTest, DocumentedExamples) {
  auto doc = basic_doc();
  auto values = recalculate(doc.workbook);

  auto lim = render_view(doc, values, kLimited);
  const ViewCell* a1 = find_view_cell(lim, "Sheet1", "A1");
  const ViewCell* a2 = find_view_cell(lim, "Sheet1", "A2");
  ASSERT_TRUE(a1 && a2);
  EXPECT_EQ(a1->display, "5");
  EXPECT_EQ(a1->contents, "5");
  EXPECT_TRUE(a1->editable);
  EXPECT_EQ(a2->display, "10");
  EXPECT_EQ(a2->contents, std::nullopt);
  EXPECT_FALSE(a2->editable);

  auto col = render_view(doc, values, kCollab);
  EXPECT_EQ(find_view_cell(col, "Sheet1", "A2")->contents, "=A1*2");
  EXPECT_TRUE(find_view_cell(col, "Sheet1", "A2")->editable);
  EXPECT_TRUE(find_view_cell(col, "Sheet1", "A1")->editable);

  doc.acl->overrides[at("A2")] = AccessClass::NoAccess;
  auto hidden = render_view(doc, values, kLimited);
  EXPECT_EQ(find_view_cell(hidden, "Sheet1", "A2"), nullptr);
  EXPECT_NE(find_view_cell(hidden, "Sheet1", "A1"), nullptr);
}

TEST(RenderViewTest, ViewerNeverEditsAndUnknownUsersAreRejected) {
  auto doc = basic_doc();
  auto values = recalculate(doc.workbook);
  for (const auto& s : render_view(doc, values, kViewer).sheets)
    for (const auto& c : s.cells) {
      EXPECT_FALSE(c.editable);
      EXPECT_EQ(c.contents, std::nullopt);
    }
  EXPECT_EQ(code_of([&] { render_view(doc, values, {"stranger"}); }), ErrorCode::RevokedAccess);
  EXPECT_EQ(code_of([&] { render_view(doc, values, {"lim", false}); }), ErrorCode::NotAuthenticated);
}

TEST(ApplyEditTest, DocumentedExamples) {
  auto doc = basic_doc();
  auto values = recalculate(doc.workbook);
  auto delta = apply_edit(doc, values, kLimited, at("A1"), "7");
  EXPECT_NE(std::find(delta.begin(), delta.end(), CellDelta{at("A2"), "14"}), delta.end());

  EXPECT_EQ(code_of([&] { apply_edit(doc, values, kLimited, at("A1"), "=B1"); }), ErrorCode::FormulaForbidden);
  EXPECT_EQ(code_of([&] { apply_edit(doc, values, kLimited, at("A2"), "3"); }), ErrorCode::EditDenied);
  EXPECT_EQ(code_of([&] { apply_edit(doc, values, kViewer, at("A1"), "3"); }), ErrorCode::EditDenied);
  EXPECT_EQ(code_of([&] { apply_edit(doc, values, kCollab, at("A3"), "=[ext.pws]S!A1"); }),
            ErrorCode::ExternalLinkForbidden);
  doc.acl->allow_external_links = true;
  EXPECT_NO_THROW(apply_edit(doc, values, kCollab, at("A3"), "=[ext.pws]S!A1"));
}

TEST(ApplyEditTest, FormulaLookalikeWithoutEqualsIsLiteral) {
  auto doc = basic_doc();
  auto values = recalculate(doc.workbook);
  apply_edit(doc, values, kLimited, at("A1"), "A1*2");
  EXPECT_TRUE(doc.workbook.find_cell(at("A1"))->content.is_literal());
}

TEST(ApplyEditTest, DeltasSkipCellsTheSessionCannotSee) {
  auto doc = basic_doc();
  doc.acl->overrides[at("A2")] = AccessClass::NoAccess;
  auto values = recalculate(doc.workbook);
  auto delta = apply_edit(doc, values, kLimited, at("A1"), "8");
  EXPECT_EQ(delta, (std::vector<CellDelta>{{at("A1"), "8"}}));
  EXPECT_EQ(display_text(values.at(at("A2"))), "16");
}

TEST(ExportTest, DocumentedExamples) {
  auto doc = basic_doc();
  auto values = recalculate(doc.workbook);

  auto lim = export_local(doc, values, kLimited);
  const Cell* a1 = lim.workbook.find_cell(at("A1"));
  const Cell* a2 = lim.workbook.find_cell(at("A2"));
  ASSERT_TRUE(a1 && a2);
  EXPECT_EQ(a1->content, CellContent::number(5));
  EXPECT_FALSE(a1->flattened);
  EXPECT_EQ(a2->content, CellContent::number(10));
  EXPECT_TRUE(a2->flattened);
  EXPECT_EQ(serialize_document(lim).find("A1*2"), std::string::npos);
  EXPECT_FALSE(lim.acl.has_value());

  EXPECT_EQ(export_local(doc, values, kOwner), doc);

  auto view = export_local(doc, values, kViewer);
  for (const auto& [p, cell] : view.workbook.sheet("Sheet1").cells) EXPECT_TRUE(cell.flattened);
}

TEST(ExportTest, TextResultsThatLookLikeFormulasStayLiteral) {
  auto doc = doc_with_roles(make_book({{"A1", "'=secret"}, {"A2", "=A1"}}));
  auto values = recalculate(doc.workbook);
  auto out = export_local(doc, values, kViewer);
  auto reread = parse_document(serialize_document(out));
  EXPECT_TRUE(reread.workbook.find_cell(at("A2"))->content.is_literal());
}

TEST(SharingTest, DocumentedExamples) {
  auto doc = basic_doc();
  auto values = recalculate(doc.workbook);
  grant(*doc.acl, kOwner, "u2", Role::LimitedUser);
  EXPECT_EQ(role_of(*doc.acl, "u2"), Role::LimitedUser);
  EXPECT_EQ(code_of([&] { grant(*doc.acl, kCollab, "u3", Role::Viewer); }), ErrorCode::NotOwner);
  revoke(*doc.acl, kOwner, "u2");
  EXPECT_EQ(code_of([&] { render_view(doc, values, {"u2"}); }), ErrorCode::RevokedAccess);
  EXPECT_EQ(code_of([&] { revoke(*doc.acl, kOwner, "owner"); }), ErrorCode::CannotDemoteOwner);
  for (const auto& e : doc.acl->grant_log) EXPECT_EQ(e.grantor, "owner");
}

TEST(SharingTest, OverridesNeverOpenFormulas) {
  auto doc = basic_doc();
  EXPECT_EQ(code_of([&] { set_access_override(doc.workbook, *doc.acl, kOwner, at("A2"), AccessClass::FullAccess); }),
            ErrorCode::OverrideForbidden);
  set_access_override(doc.workbook, *doc.acl, kOwner, at("A1"), AccessClass::DisplayAccess);
  EXPECT_EQ(derive_access_class(doc.workbook, *doc.acl, Role::LimitedUser, at("A1")), AccessClass::DisplayAccess);
  set_access_override(doc.workbook, *doc.acl, kOwner, at("A1"), AccessClass::FullAccess);
  EXPECT_EQ(derive_access_class(doc.workbook, *doc.acl, Role::LimitedUser, at("A1")), AccessClass::FullAccess);
}

// Every owner-only operation, tried by every role and by a stranger.
TEST(SharingTest, RoleOperationMatrix) {
  struct Op {
    const char* name;
    std::function<void(MasterStore&, const Principal&)> run;
  };
  std::vector<Op> ops = {
      {"grant", [](MasterStore& m, const Principal& p) { grant(m.acl(), p, "new", Role::Viewer); }},
      {"revoke", [](MasterStore& m, const Principal& p) { revoke(m.acl(), p, "view"); }},
      {"set_access",
       [](MasterStore& m, const Principal& p) {
         set_access_override(m.document().workbook, m.acl(), p, at("A1"), AccessClass::NoAccess);
       }},
      {"publish", [](MasterStore& m, const Principal& p) { m.publish(p, make_book({{"A1", "1"}}), true); }},
      {"archived", [](MasterStore& m, const Principal& p) { m.archived(p, 1); }},
  };
  std::vector<std::pair<Principal, std::optional<ErrorCode>>> callers = {
      {kOwner, std::nullopt},
      {kCollab, ErrorCode::NotOwner},
      {kViewer, ErrorCode::NotOwner},
      {kLimited, ErrorCode::NotOwner},
      {{"stranger"}, ErrorCode::RevokedAccess},
      {{"owner", false}, ErrorCode::NotAuthenticated},
  };
  for (const auto& op : ops)
    for (const auto& [who, expected] : callers) {
      MasterStore m(basic_doc());
      auto before = m.document();
      SCOPED_TRACE(std::string(op.name) + " by " + who.user);
      if (!expected) {
        EXPECT_NO_THROW(op.run(m, who));
        continue;
      }
      EXPECT_EQ(code_of([&] { op.run(m, who); }), *expected);
      EXPECT_EQ(m.document(), before);
      EXPECT_EQ(m.version(), 1u);
    }
}

TEST(PublishTest, VersionsAndAudit) {
  auto sealed = make_book({{"A1", "5"}, {"A2", "=A1*3"}});
  apply_protection_recipe(sealed, "pw");
  MasterStore m(basic_doc());
  EXPECT_EQ(m.publish(kOwner, sealed), 2u);
  EXPECT_EQ(render_view(m.document(), m.values(), kLimited, m.version()).workbook_version, 2u);
  EXPECT_EQ(m.archived(kOwner, 1), basic_doc().workbook);
  EXPECT_EQ(code_of([&] { m.publish(kCollab, sealed); }), ErrorCode::NotOwner);

  auto bad = sealed;
  bad.sheet("Sheet1").cell_at({2, 1}).format = {true, false};
  try {
    m.publish(kOwner, bad);
    FAIL() << "publish accepted a workbook with audit errors";
  } catch (const AuditFailedError& e) {
    ASSERT_FALSE(e.findings().empty());
    EXPECT_EQ(e.findings()[0].rule, RuleId::R1);
  }
  EXPECT_EQ(m.version(), 2u);
  EXPECT_EQ(code_of([&] { m.archived(kOwner, 7); }), ErrorCode::UnknownVersion);
}

// Leak-freedom at library level: views, exports, copies and edit deltas.
TEST(LeakFuzzTest, NoFormulaSourceReachesRestrictedRoles) {
  std::mt19937 rng(2024);
  for (int i = 0; i < 1500; ++i) {
    auto c = testing::random_leak_case(rng, i);
    auto values = recalculate(c.doc.workbook);
    for (const Principal& who : {kViewer, kLimited}) {
      auto view = view_to_json(render_view(c.doc, values, who)).dump();
      ASSERT_EQ(testing::find_secret(c, view), "") << "view, case " << i;
      auto file = serialize_document(export_local(c.doc, values, who));
      ASSERT_EQ(testing::find_secret(c, file), "") << "export, case " << i;
      for (const auto& s : c.doc.workbook.sheets) {
        if (!sheet_visible_to(s, *role_of(*c.doc.acl, who.user))) continue;
        for (const auto& d : copy_cells(c.doc, values, who, s.name, s.used_range()))
          ASSERT_EQ(testing::find_secret(c, d.display), "") << "copy, case " << i;
      }
    }
    // A restricted edit's deltas are checked too.
    const auto& target = c.cells[std::uniform_int_distribution<std::size_t>(0, c.cells.size() - 1)(rng)];
    try {
      auto copy = c.doc;
      auto vals = values;
      for (const auto& d : apply_edit(copy, vals, kLimited, target, "3"))
        ASSERT_EQ(testing::find_secret(c, d.display), "") << "delta, case " << i;
    } catch (const Error&) {
    }
  }
}

// Lowering a cell's class never adds fields to its view entry.
TEST(MonotonicityTest, LowerClassNeverAddsFields) {
  std::mt19937 rng(77);
  auto fields = [](const ViewCell* c) {
    std::set<std::string> out;
    if (!c) return out;
    out.insert("display");
    if (c->editable) out.insert("editable");
    if (c->contents) out.insert("contents");
    return out;
  };
  for (int i = 0; i < 200; ++i) {
    auto c = testing::random_leak_case(rng, i);
    auto values = recalculate(c.doc.workbook);
    for (const auto& a : c.cells) {
      if (c.doc.workbook.sheet(a.sheet).visibility != SheetVisibility::Visible) continue;
      std::vector<std::set<std::string>> by_class;
      for (AccessClass cls : {AccessClass::FullAccess, AccessClass::DisplayAccess, AccessClass::NoAccess}) {
        auto doc = c.doc;
        doc.acl->overrides.erase(a);
        if (cls != AccessClass::FullAccess) doc.acl->overrides[a] = cls;
        by_class.push_back(fields(find_view_cell(render_view(doc, values, kLimited), a.sheet, format_point(a.at))));
      }
      EXPECT_TRUE(std::includes(by_class[0].begin(), by_class[0].end(), by_class[1].begin(), by_class[1].end()));
      EXPECT_TRUE(std::includes(by_class[1].begin(), by_class[1].end(), by_class[2].begin(), by_class[2].end()));
      EXPECT_TRUE(by_class[2].empty());
    }
  }
}

std::set<CellAddress> formula_cells(const Workbook& wb) {
  std::set<CellAddress> out;
  for (const auto& s : wb.sheets)
    for (const auto& [p, cell] : s.cells)
      if (cell.content.is_formula()) out.insert({s.name, p});
  return out;
}

TEST(EditGatingTest, LimitedUserEditsNeverChangeFormulaCells) {
  std::mt19937 rng(31337);
  const std::vector<std::string> inputs = {"4", "-2.5", "hello", "=1+1", "=A1", "", "A1*2", "'=A1", "=[x.pws]S!A1"};
  int accepted = 0;
  for (int i = 0; i < 300; ++i) {
    auto c = testing::random_leak_case(rng, i);
    auto values = recalculate(c.doc.workbook);
    auto before = formula_cells(c.doc.workbook);
    for (int e = 0; e < 10; ++e) {
      const auto& target = c.cells[std::uniform_int_distribution<std::size_t>(0, c.cells.size() - 1)(rng)];
      const auto& input = inputs[std::uniform_int_distribution<std::size_t>(0, inputs.size() - 1)(rng)];
      try {
        apply_edit(c.doc, values, kLimited, target, input);
        ++accepted;
      } catch (const Error& err) {
        EXPECT_TRUE(err.code() == ErrorCode::EditDenied || err.code() == ErrorCode::FormulaForbidden ||
                    err.code() == ErrorCode::SheetNotVisibleToRole)
            << err.what();
      }
      ASSERT_EQ(formula_cells(c.doc.workbook), before);
    }
  }
  EXPECT_GT(accepted, 100);
}

TEST(VersionIsolationTest, OldVersionsNeverReachNonOwners) {
  std::mt19937 rng(9001);
  for (int i = 0; i < 200; ++i) {
    auto v1 = testing::random_leak_case(rng, 2 * i);
    auto v2 = testing::random_leak_case(rng, 2 * i + 1);
    MasterStore m(v1.doc);
    m.publish({testing::kFuzzOwner}, v2.doc.workbook, true);
    for (const Principal& who : {kCollab, kViewer, kLimited}) {
      auto view = view_to_json(render_view(m.document(), m.values(), who, m.version())).dump();
      auto file = serialize_document(export_local(m.document(), m.values(), who));
      EXPECT_EQ(testing::find_secret(v1, view), "") << i;
      EXPECT_EQ(testing::find_secret(v1, file), "") << i;
      EXPECT_EQ(code_of([&] { m.archived(who, 1); }), ErrorCode::NotOwner);
    }
  }
}

}  // namespace
}  // namespace pws
