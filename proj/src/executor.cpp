#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "planest/eval.hpp"
#include "planest/trainer.hpp"

namespace planest {

namespace {

// Intermediate result: each row is one index per participating base table.
struct Inter {
  std::vector<const Table*> tables;
  std::vector<std::vector<uint32_t>> rows;

  int table_slot(std::string_view name) const {
    for (size_t i = 0; i < tables.size(); ++i)
      if (tables[i]->name == name) return static_cast<int>(i);
    return -1;
  }
};

CellValue cell_of(const Column& col, uint32_t row) {
  if (col.type == ColType::Numeric) return CellValue::of(col.nums[row]);
  return CellValue::of(std::string_view(col.strs[row]));
}

// Resolves "table.column" against a composite row.
struct RowGetter {
  const Inter* inter;
  const std::vector<uint32_t>* row;

  CellValue operator()(std::string_view qualified) const {
    auto dot = qualified.find('.');
    if (dot == std::string_view::npos)
      throw data_error("executor needs qualified column names, got \"" +
                       std::string(qualified) + "\"");
    int slot = inter->table_slot(qualified.substr(0, dot));
    if (slot < 0)
      throw data_error("column " + std::string(qualified) +
                       " is not in scope");
    const Column* col =
        inter->tables[slot]->column(qualified.substr(dot + 1));
    if (!col) throw data_error("unknown column " + std::string(qualified));
    return cell_of(*col, (*row)[slot]);
  }
};

double log2n(double n) { return std::log2(std::max(n, 2.0)); }

struct Executor {
  const Dataset& ds;
  const CostModel& costs;
  const ExecLimits& limits;

  void check_rows(size_t n) const {
    if (n > limits.max_rows)
      throw data_error("reference execution exceeded the row cap");
  }

  // Splits an equi-join condition into (left column, right column) slots.
  static bool equi_condition(const PredicateNode& p, const Inter& left,
                             const Inter& right, std::string* lcol,
                             std::string* rcol) {
    if (p.kind != PredicateNode::Kind::Expr || p.op != CmpOp::Eq) return false;
    const auto* ref = std::get_if<ColumnRef>(&p.operand);
    if (!ref) return false;
    auto side = [&](const std::string& name) {
      auto dot = name.find('.');
      if (dot == std::string::npos) return 0;
      std::string t = name.substr(0, dot);
      if (left.table_slot(t) >= 0) return -1;
      if (right.table_slot(t) >= 0) return 1;
      return 0;
    };
    int a = side(p.column), b = side(ref->name);
    if (a == -1 && b == 1) {
      *lcol = p.column;
      *rcol = ref->name;
      return true;
    }
    if (a == 1 && b == -1) {
      *lcol = ref->name;
      *rcol = p.column;
      return true;
    }
    return false;
  }

  Inter scan(const PlanNode& n, double* cost) {
    const Table* t = ds.table(n.table);
    if (!t) throw data_error("unknown table " + n.table);
    Inter out;
    out.tables = {t};
    std::string prefix = t->name + ".";
    for (uint32_t i = 0; i < t->rows; ++i) {
      bool keep = true;
      if (n.predicate) {
        auto get = [&](std::string_view q) -> CellValue {
          std::string_view bare = q;
          if (bare.substr(0, prefix.size()) == prefix)
            bare.remove_prefix(prefix.size());
          const Column* col = t->column(bare);
          if (!col) throw data_error("unknown column " + std::string(q));
          return cell_of(*col, i);
        };
        keep = eval_predicate(*n.predicate, get);
      }
      if (keep) out.rows.push_back({i});
    }
    check_rows(out.rows.size());
    double rows = static_cast<double>(t->rows);
    double matched = static_cast<double>(out.rows.size());
    if (n.op == OpKind::SeqScan)
      *cost = costs.seq_scan * rows;
    else
      *cost = costs.index_scan * matched + log2n(rows);
    return out;
  }

  static Inter combine(const Inter& l, const Inter& r) {
    Inter out;
    out.tables = l.tables;
    out.tables.insert(out.tables.end(), r.tables.begin(), r.tables.end());
    return out;
  }

  Inter join(const PlanNode& n, Inter l, Inter r, double* cost) {
    Inter out = combine(l, r);
    auto emit = [&](const std::vector<uint32_t>& a,
                    const std::vector<uint32_t>& b) {
      std::vector<uint32_t> row = a;
      row.insert(row.end(), b.begin(), b.end());
      out.rows.push_back(std::move(row));
    };

    std::string lcol, rcol;
    bool pairs_scanned = false;
    if (n.predicate && equi_condition(*n.predicate, l, r, &lcol, &rcol)) {
      // Exact hash join: the result is identical for every join operator,
      // only the charged cost differs.
      auto key_of = [](const Inter& side, const std::string& qualified) {
        auto dot = qualified.find('.');
        int slot = side.table_slot(qualified.substr(0, dot));
        const Column* col =
            side.tables[slot]->column(qualified.substr(dot + 1));
        return std::pair{slot, col};
      };
      auto [ls, lc] = key_of(l, lcol);
      auto [rs, rc] = key_of(r, rcol);
      if (lc->type != ColType::Numeric || rc->type != ColType::Numeric)
        throw data_error("join keys must be numeric");
      std::unordered_map<double, std::vector<size_t>> build;
      build.reserve(l.rows.size() * 2);
      for (size_t i = 0; i < l.rows.size(); ++i)
        build[lc->nums[l.rows[i][ls]]].push_back(i);
      for (const auto& rrow : r.rows) {
        auto it = build.find(rc->nums[rrow[rs]]);
        if (it == build.end()) continue;
        for (size_t li : it->second) emit(l.rows[li], rrow);
        check_rows(out.rows.size());
      }
    } else if (n.predicate) {
      pairs_scanned = true;
      check_rows(l.rows.size() * r.rows.size());
      for (const auto& lrow : l.rows) {
        for (const auto& rrow : r.rows) {
          std::vector<uint32_t> row = lrow;
          row.insert(row.end(), rrow.begin(), rrow.end());
          RowGetter get{&out, &row};
          if (eval_predicate(*n.predicate, get)) {
            out.rows.push_back(std::move(row));
            check_rows(out.rows.size());
          }
        }
      }
    } else {
      throw data_error("join without a predicate");
    }
    (void)pairs_scanned;

    double ln = static_cast<double>(l.rows.size());
    double rn = static_cast<double>(r.rows.size());
    double on = static_cast<double>(out.rows.size());
    switch (n.op) {
      case OpKind::HashJoin:
        *cost = costs.hash_build * ln + costs.hash_probe * rn +
                costs.join_output * on;
        break;
      case OpKind::MergeJoin:
        *cost = costs.merge_join * (ln + rn) + costs.join_output * on;
        break;
      default:
        *cost = costs.nl_pair * ln * rn + costs.join_output * on;
        break;
    }
    return out;
  }

  Inter unary(const PlanNode& n, Inter in, double* cost) {
    double rows = static_cast<double>(in.rows.size());
    bool is_sort = n.op == OpKind::Sort || n.op == OpKind::HashSort ||
                   n.op == OpKind::MergeSort;
    if (is_sort) {
      *cost = costs.sort_unit * rows * log2n(rows);
      return in;  // row set unchanged
    }
    // Aggregation: grouped output has one row per distinct key combination.
    *cost = costs.agg_unit * rows;
    if (n.op == OpKind::PlainAggregate || n.columns.empty()) {
      Inter out;
      out.tables = in.tables;
      if (!in.rows.empty()) out.rows.push_back(in.rows[0]);
      return out;
    }
    std::set<std::string> groups;
    Inter out;
    out.tables = in.tables;
    for (const auto& row : in.rows) {
      RowGetter get{&in, &row};
      std::string key;
      for (const auto& col : n.columns) {
        CellValue v = get(col);
        key += v.type == ColType::Numeric ? std::to_string(v.num)
                                          : std::string(v.str);
        key += '\x1f';
      }
      if (groups.insert(std::move(key)).second) out.rows.push_back(row);
    }
    return out;
  }

  Inter exec(const PlanNode& n, PlanNode& labeled) {
    double own_cost = 0;
    Inter result;
    double child_cost = 0;
    if (is_scan(n.op)) {
      result = scan(n, &own_cost);
    } else if (is_join(n.op)) {
      auto lchild = std::make_shared<PlanNode>(*n.children[0]);
      auto rchild = std::make_shared<PlanNode>(*n.children[1]);
      Inter l = exec(*n.children[0], *lchild);
      Inter r = exec(*n.children[1], *rchild);
      child_cost = *lchild->true_cost + *rchild->true_cost;
      result = join(n, std::move(l), std::move(r), &own_cost);
      labeled.children = {lchild, rchild};
    } else {
      auto child = std::make_shared<PlanNode>(*n.children[0]);
      Inter in = exec(*n.children[0], *child);
      child_cost = *child->true_cost;
      result = unary(n, std::move(in), &own_cost);
      labeled.children = {child, nullptr};
    }
    labeled.true_card =
        std::max(1.0, static_cast<double>(result.rows.size()));
    labeled.true_cost = std::max(0.01, own_cost + child_cost);
    return result;
  }
};

}  // namespace

PlanTree execute_reference(const PlanTree& plan, const Dataset& ds,
                           const CostModel& costs, const ExecLimits& limits) {
  if (!plan.root) throw data_error("cannot execute an empty plan");
  if (!is_binarized(*plan.root))
    throw data_error("plans must be binarized before execution");
  Executor ex{ds, costs, limits};
  auto labeled = std::make_shared<PlanNode>(*plan.root);
  ex.exec(*plan.root, *labeled);
  return PlanTree{labeled};
}

}  // namespace planest
