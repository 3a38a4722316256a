#pragma once

#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pws/address.hpp"
#include "pws/formula.hpp"
#include "pws/value.hpp"
#include "pws/workbook.hpp"

namespace pws {

// Values of every non-empty cell, keyed by address. Formula cells always
// have an entry after recalculation.
using ValueMap = std::map<CellAddress, Value>;

// Values of other workbooks that external references may read from.
using ExternalBooks = std::map<std::string, ValueMap>;

// Static reference graph between formula cells. Edges run from a formula to
// the formula cells it reads (directly or through a range).
struct DependencyGraph {
  std::vector<CellAddress> nodes;
  std::map<CellAddress, int> index;
  std::vector<std::vector<int>> precedents;
  std::vector<std::vector<int>> dependents;
};

namespace detail {

inline const std::string& target_sheet(const Reference& r, const std::string& own) { return r.sheet ? *r.sheet : own; }

// Formula cells of `sheet` inside `rect`, in row-major order.
template <typename Fn>
void for_each_cell_in(const Sheet& sheet, const Rect& rect, Fn&& fn) {
  auto it = sheet.cells.lower_bound(rect.top_left);
  auto end = sheet.cells.upper_bound(rect.bottom_right);
  for (; it != end; ++it)
    if (rect.contains(it->first)) fn(it->first, it->second);
}

}  // namespace detail

inline DependencyGraph build_dependency_graph(const Workbook& wb) {
  DependencyGraph g;
  for (const auto& sheet : wb.sheets)
    for (const auto& [p, cell] : sheet.cells)
      if (cell.content.is_formula()) {
        g.index.emplace(CellAddress{sheet.name, p}, static_cast<int>(g.nodes.size()));
        g.nodes.push_back({sheet.name, p});
      }
  g.precedents.resize(g.nodes.size());
  g.dependents.resize(g.nodes.size());

  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& addr = g.nodes[i];
    const auto& expr = *wb.find_cell(addr)->content.formula_content().expr;
    std::set<int> seen;
    for_each_reference(expr, [&](const Reference& r) {
      if (r.is_external) return;
      const Sheet* target = wb.find_sheet(detail::target_sheet(r, addr.sheet));
      if (!target) return;
      detail::for_each_cell_in(*target, r.rect(), [&](GridPoint p, const Cell& c) {
        if (c.content.is_formula()) seen.insert(g.index.at({target->name, p}));
      });
    });
    for (int j : seen) {
      g.precedents[i].push_back(j);
      g.dependents[j].push_back(static_cast<int>(i));
    }
  }
  return g;
}

namespace detail {

// Operand produced while evaluating. A reference to an empty cell is kept
// distinct from 0 and "" until the consumer decides how to coerce it.
struct Operand {
  std::optional<Value> value;  // nullopt: empty cell
};

class Evaluator {
 public:
  Evaluator(const Workbook& wb, const ValueMap& values, const ExternalBooks& externals)
      : wb_(wb), values_(values), externals_(externals) {}

  Value evaluate(const std::string& sheet, const Expr& e) const {
    auto r = eval(sheet, e);
    return r.value ? *r.value : Value(0.0);
  }

 private:
  Operand cell_value(const std::string& sheet, GridPoint p) const {
    const Sheet* s = wb_.find_sheet(sheet);
    if (!s) return {Value(ErrorKind::Name)};
    const Cell* c = s->find(p);
    if (!c || c->content.is_empty()) return {};
    auto it = values_.find({sheet, p});
    if (it != values_.end()) return {it->second};
    if (c->content.is_literal()) {
      const auto& lit = c->content.literal().value;
      if (auto* n = std::get_if<double>(&lit)) return {Value(*n)};
      return {Value(std::get<std::string>(lit))};
    }
    // Formula not yet evaluated: only reachable through a cycle.
    return {Value(ErrorKind::Cycle)};
  }

  Operand external_value(const Reference& r, GridPoint p) const {
    auto book = externals_.find(*r.book);
    if (book == externals_.end()) return {Value(ErrorKind::Ref)};
    auto it = book->second.find({*r.sheet, p});
    if (it == book->second.end()) return {};
    return {it->second};
  }

  // Every non-empty value inside a reference, in row-major order.
  template <typename Fn>
  std::optional<Value> for_each_in_range(const std::string& sheet, const Reference& r, Fn&& fn) const {
    Rect rect = r.rect();
    if (r.is_external) {
      auto book = externals_.find(*r.book);
      if (book == externals_.end()) return Value(ErrorKind::Ref);
      auto it = book->second.lower_bound({*r.sheet, rect.top_left});
      auto end = book->second.upper_bound({*r.sheet, rect.bottom_right});
      for (; it != end; ++it)
        if (rect.contains(it->first.at)) fn(it->second);
      return std::nullopt;
    }
    const std::string& name = target_sheet(r, sheet);
    const Sheet* s = wb_.find_sheet(name);
    if (!s) return Value(ErrorKind::Name);
    for_each_cell_in(*s, rect, [&](GridPoint p, const Cell&) {
      auto v = cell_value(name, p);
      if (v.value) fn(*v.value);
    });
    return std::nullopt;
  }

  static Operand number_or_error(const Operand& o, double& out) {
    if (!o.value) {
      out = 0;
      return {};
    }
    const Value& v = *o.value;
    if (v.is_error()) return o;
    if (v.is_number()) out = v.as_number();
    else if (v.is_boolean()) out = v.as_boolean() ? 1 : 0;
    else if (auto n = parse_number(v.as_text())) out = *n;
    else return {Value(ErrorKind::Value)};
    return {};
  }

  static std::optional<Value> text_or_error(const Operand& o, std::string& out) {
    if (!o.value) {
      out.clear();
      return std::nullopt;
    }
    if (o.value->is_error()) return o.value;
    out = display_text(*o.value);
    return std::nullopt;
  }

  static int type_rank(const Value& v) {
    if (v.is_number()) return 0;
    if (v.is_text()) return 1;
    return 2;
  }

  // Three-way compare; mismatched types order Number < Text < Boolean.
  static int compare(const Operand& a, const Operand& b) {
    auto fill = [](const Operand& self, const Operand& other) -> Value {
      if (self.value) return *self.value;
      if (!other.value || other.value->is_number()) return Value(0.0);
      if (other.value->is_text()) return Value(std::string());
      return Value(false);
    };
    Value x = fill(a, b);
    Value y = fill(b, a);
    int rx = type_rank(x), ry = type_rank(y);
    if (rx != ry) return rx < ry ? -1 : 1;
    if (x.is_number()) return x.as_number() < y.as_number() ? -1 : (x.as_number() > y.as_number() ? 1 : 0);
    if (x.is_text()) {
      int c = x.as_text().compare(y.as_text());
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    return static_cast<int>(x.as_boolean()) - static_cast<int>(y.as_boolean());
  }

  Operand eval(const std::string& sheet, const Expr& e) const {
    return std::visit([&](const auto& n) { return eval_node(sheet, n); }, e.node);
  }

  Operand eval_node(const std::string&, const NumberLit& n) const { return {Value(n.value)}; }
  Operand eval_node(const std::string&, const TextLit& t) const { return {Value(t.value)}; }

  Operand eval_node(const std::string& sheet, const Reference& r) const {
    if (r.is_range()) return {Value(ErrorKind::Value)};
    if (r.is_external) return external_value(r, r.first);
    return cell_value(target_sheet(r, sheet), r.first);
  }

  Operand eval_node(const std::string& sheet, const Unary& u) const {
    auto o = eval(sheet, *u.operand);
    double x = 0;
    if (auto err = number_or_error(o, x); err.value) return err;
    return {Value(u.op == UnaryOp::Negate ? -x : x)};
  }

  Operand eval_node(const std::string& sheet, const Binary& b) const {
    auto lhs = eval(sheet, *b.lhs);
    auto rhs = eval(sheet, *b.rhs);
    if (lhs.value && lhs.value->is_error()) return lhs;
    if (rhs.value && rhs.value->is_error()) return rhs;

    switch (b.op) {
      case BinaryOp::Concat: {
        std::string x, y;
        if (auto err = text_or_error(lhs, x)) return {err};
        if (auto err = text_or_error(rhs, y)) return {err};
        return {Value(x + y)};
      }
      case BinaryOp::Eq: return {Value(compare(lhs, rhs) == 0)};
      case BinaryOp::Ne: return {Value(compare(lhs, rhs) != 0)};
      case BinaryOp::Lt: return {Value(compare(lhs, rhs) < 0)};
      case BinaryOp::Le: return {Value(compare(lhs, rhs) <= 0)};
      case BinaryOp::Gt: return {Value(compare(lhs, rhs) > 0)};
      case BinaryOp::Ge: return {Value(compare(lhs, rhs) >= 0)};
      default: break;
    }

    double x = 0, y = 0;
    if (auto err = number_or_error(lhs, x); err.value) return err;
    if (auto err = number_or_error(rhs, y); err.value) return err;
    switch (b.op) {
      case BinaryOp::Add: return {Value(x + y)};
      case BinaryOp::Sub: return {Value(x - y)};
      case BinaryOp::Mul: return {Value(x * y)};
      case BinaryOp::Div:
        if (y == 0) return {Value(ErrorKind::Div0)};
        return {Value(x / y)};
      case BinaryOp::Pow:
        if (x == 0 && y < 0) return {Value(ErrorKind::Div0)};
        return {Value(std::pow(x, y))};
      default: return {Value(ErrorKind::Value)};
    }
  }

  Operand eval_node(const std::string& sheet, const Call& c) const {
    if (c.fn == Function::If) {
      auto cond = eval(sheet, *c.args[0]);
      bool truth = false;
      if (cond.value) {
        const Value& v = *cond.value;
        if (v.is_error()) return cond;
        if (v.is_boolean()) truth = v.as_boolean();
        else if (v.is_number()) truth = v.as_number() != 0;
        else return {Value(ErrorKind::Value)};
      }
      auto branch = eval(sheet, *c.args[truth ? 1 : 2]);
      if (!branch.value) return {Value(0.0)};
      return branch;
    }

    std::vector<double> numbers;
    std::optional<Value> error;
    for (const auto& arg : c.args) {
      if (error) break;
      if (const auto* ref = std::get_if<Reference>(&arg->node)) {
        auto bad = for_each_in_range(sheet, *ref, [&](const Value& v) {
          if (v.is_number()) numbers.push_back(v.as_number());
          else if (v.is_error() && !error && c.fn != Function::Count) error = v;
        });
        if (bad && c.fn != Function::Count) error = bad;
        continue;
      }
      auto o = eval(sheet, *arg);
      if (c.fn == Function::Count) {
        if (!o.value) continue;
        const Value& v = *o.value;
        if (v.is_number() || v.is_boolean() || (v.is_text() && parse_number(v.as_text()))) numbers.push_back(0);
        continue;
      }
      double x = 0;
      if (auto err = number_or_error(o, x); err.value) {
        error = err.value;
        continue;
      }
      if (o.value) numbers.push_back(x);
    }
    if (error) return {error};

    switch (c.fn) {
      case Function::Count: return {Value(static_cast<double>(numbers.size()))};
      case Function::Sum: {
        double s = 0;
        for (double x : numbers) s += x;
        return {Value(s)};
      }
      case Function::Average: {
        if (numbers.empty()) return {Value(ErrorKind::Div0)};
        double s = 0;
        for (double x : numbers) s += x;
        return {Value(s / static_cast<double>(numbers.size()))};
      }
      case Function::Min:
      case Function::Max: {
        if (numbers.empty()) return {Value(0.0)};
        double best = numbers.front();
        for (double x : numbers) best = c.fn == Function::Min ? std::min(best, x) : std::max(best, x);
        return {Value(best)};
      }
      default: return {Value(ErrorKind::Value)};
    }
  }

  const Workbook& wb_;
  const ValueMap& values_;
  const ExternalBooks& externals_;
};

inline Value literal_value(const LiteralContent& lit) {
  if (auto* n = std::get_if<double>(&lit.value)) return Value(*n);
  return Value(std::get<std::string>(lit.value));
}

// Kahn's algorithm over `subset` (all nodes when empty). Nodes left with
// unresolved predecessors lie on or downstream of a cycle.
inline void evaluate_in_order(const Workbook& wb, const DependencyGraph& g, const std::vector<int>& subset,
                              ValueMap& values, const ExternalBooks& externals) {
  std::vector<char> member(g.nodes.size(), 0);
  for (int i : subset) member[i] = 1;

  std::vector<int> pending(g.nodes.size(), 0);
  for (int i : subset)
    for (int p : g.precedents[i])
      if (member[p]) ++pending[i];

  std::deque<int> ready;
  for (int i : subset)
    if (pending[i] == 0) ready.push_back(i);

  Evaluator eval(wb, values, externals);
  std::vector<char> done(g.nodes.size(), 0);
  while (!ready.empty()) {
    int i = ready.front();
    ready.pop_front();
    done[i] = 1;
    const auto& addr = g.nodes[i];
    bool upstream_cycle = false;
    for (int p : g.precedents[i]) {
      auto it = values.find(g.nodes[p]);
      if (it != values.end() && it->second.is_error() && it->second.as_error() == ErrorKind::Cycle)
        upstream_cycle = true;
    }
    values[addr] = upstream_cycle
                       ? Value(ErrorKind::Cycle)
                       : eval.evaluate(addr.sheet, *wb.find_cell(addr)->content.formula_content().expr);
    for (int d : g.dependents[i])
      if (member[d] && --pending[d] == 0) ready.push_back(d);
  }
  for (int i : subset)
    if (!done[i]) values[g.nodes[i]] = Value(ErrorKind::Cycle);
}

inline std::set<int> dependent_nodes(const Workbook& wb, const DependencyGraph& g, const CellAddress& addr) {
  std::set<int> out;
  std::deque<int> work;
  auto push = [&](int i) {
    if (out.insert(i).second) work.push_back(i);
  };
  // Direct readers: any formula whose references cover `addr`.
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& node = g.nodes[i];
    const auto& expr = *wb.find_cell(node)->content.formula_content().expr;
    bool reads = false;
    for_each_reference(expr, [&](const Reference& r) {
      if (!r.is_external && target_sheet(r, node.sheet) == addr.sheet && r.rect().contains(addr.at)) reads = true;
    });
    if (reads) push(static_cast<int>(i));
  }
  while (!work.empty()) {
    int i = work.front();
    work.pop_front();
    for (int d : g.dependents[i]) push(d);
  }
  return out;
}

}  // namespace detail

// Evaluates one expression as if it lived on `sheet`, against current values.
inline Value evaluate_expression(const Workbook& wb, const ValueMap& values, const std::string& sheet, const Expr& e,
                                 const ExternalBooks& externals = {}) {
  return detail::Evaluator(wb, values, externals).evaluate(sheet, e);
}

// Full recalculation. Never throws on bad formulas: problems surface as error values.
inline ValueMap recalculate(const Workbook& wb, const ExternalBooks& externals = {}) {
  ValueMap values;
  for (const auto& sheet : wb.sheets)
    for (const auto& [p, cell] : sheet.cells)
      if (cell.content.is_literal()) values.emplace(CellAddress{sheet.name, p}, detail::literal_value(cell.content.literal()));

  auto g = build_dependency_graph(wb);
  std::vector<int> all(g.nodes.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  detail::evaluate_in_order(wb, g, all, values, externals);
  return values;
}

// Transitive closure of cells whose value can change when `addr` changes.
inline std::set<CellAddress> dependents_of(const Workbook& wb, const CellAddress& addr) {
  wb.check_address(addr);
  auto g = build_dependency_graph(wb);
  std::set<CellAddress> out;
  for (int i : detail::dependent_nodes(wb, g, addr)) out.insert(g.nodes[i]);
  return out;
}

// Brings `values` up to date after the contents of `edited` changed, touching
// only the edited cells and their dependents. Returns every address whose
// value differs from before (removed values included).
inline std::vector<CellAddress> recalculate_incremental(const Workbook& wb, ValueMap& values,
                                                        const std::vector<CellAddress>& edited,
                                                        const ExternalBooks& externals = {}) {
  auto g = build_dependency_graph(wb);
  std::set<int> affected;
  std::set<CellAddress> touched(edited.begin(), edited.end());
  for (const auto& a : edited) {
    if (auto it = g.index.find(a); it != g.index.end()) affected.insert(it->second);
    for (int i : detail::dependent_nodes(wb, g, a)) affected.insert(i);
  }
  for (int i : affected) touched.insert(g.nodes[i]);

  std::map<CellAddress, std::optional<Value>> before;
  for (const auto& a : touched) {
    auto it = values.find(a);
    before[a] = it == values.end() ? std::nullopt : std::optional<Value>(it->second);
  }

  for (const auto& a : edited) {
    values.erase(a);
    const Cell* c = wb.find_cell(a);
    if (c && c->content.is_literal()) values.emplace(a, detail::literal_value(c->content.literal()));
  }
  for (int i : affected) values.erase(g.nodes[i]);
  detail::evaluate_in_order(wb, g, std::vector<int>(affected.begin(), affected.end()), values, externals);

  std::vector<CellAddress> changed;
  for (const auto& [a, old] : before) {
    auto it = values.find(a);
    std::optional<Value> now = it == values.end() ? std::nullopt : std::optional<Value>(it->second);
    if (now != old) changed.push_back(a);
  }
  return changed;
}

}  // namespace pws
