#include <algorithm>
#include <cmath>
#include <set>

#include "planest/eval.hpp"
#include "planest/trainer.hpp"

namespace planest {

IndependenceBaseline::IndependenceBaseline(const Dataset& ds, int buckets) {
  if (buckets < 1) throw data_error("histogram needs at least one bucket");
  for (const auto& t : ds.tables) {
    table_rows_[t.name] = t.rows;
    for (const auto& [name, col] : t.columns) {
      std::string qualified = t.name + "." + name;
      if (col.type == ColType::Numeric) {
        NumericHist h;
        h.n = col.nums.size();
        if (!col.nums.empty()) {
          auto [mn, mx] = std::minmax_element(col.nums.begin(),
                                              col.nums.end());
          h.min = *mn;
          h.max = *mx;
        }
        h.counts.assign(buckets, 0);
        double width = (h.max - h.min) / buckets;
        std::set<double> distinct;
        for (double v : col.nums) {
          int b = width > 0 ? std::min(buckets - 1,
                                       static_cast<int>((v - h.min) / width))
                            : 0;
          ++h.counts[b];
          distinct.insert(v);
        }
        h.distinct = distinct.size();
        numeric_[qualified] = std::move(h);
      } else {
        StringStats s;
        s.n = col.strs.size();
        for (const auto& v : col.strs) ++s.counts[v];
        strings_[qualified] = std::move(s);
      }
    }
  }
}

double IndependenceBaseline::column_distinct(
    const std::string& qualified) const {
  if (auto it = numeric_.find(qualified); it != numeric_.end())
    return std::max<double>(1.0, static_cast<double>(it->second.distinct));
  if (auto it = strings_.find(qualified); it != strings_.end())
    return std::max<double>(1.0, static_cast<double>(it->second.counts.size()));
  throw data_error("unknown column " + qualified);
}

double IndependenceBaseline::leaf_selectivity(const PredicateNode& p) const {
  if (std::holds_alternative<ColumnRef>(p.operand))
    return 1.0;  // join conditions are handled at the join node

  if (const auto* num = std::get_if<double>(&p.operand)) {
    auto it = numeric_.find(p.column);
    if (it == numeric_.end()) throw data_error("unknown column " + p.column);
    const NumericHist& h = it->second;
    if (h.n == 0) return 0.0;
    double n = static_cast<double>(h.n);
    double width = (h.max - h.min) / static_cast<double>(h.counts.size());
    // Fraction of rows strictly below v, with linear interpolation inside the
    // bucket.
    auto frac_below = [&](double v) {
      if (v <= h.min) return 0.0;
      if (v > h.max) return 1.0;
      if (width <= 0) return 0.5;
      double pos = (v - h.min) / width;
      int b = std::min(static_cast<int>(pos),
                       static_cast<int>(h.counts.size()) - 1);
      double acc = 0;
      for (int i = 0; i < b; ++i) acc += static_cast<double>(h.counts[i]);
      acc += (pos - b) * static_cast<double>(h.counts[b]);
      return acc / n;
    };
    switch (p.op) {
      case CmpOp::Eq:
        return 1.0 / column_distinct(p.column);
      case CmpOp::Ne:
        return 1.0 - 1.0 / column_distinct(p.column);
      case CmpOp::Lt:
        return frac_below(*num);
      case CmpOp::Gt:
        return 1.0 - frac_below(*num) - 1.0 / column_distinct(p.column);
      default:
        throw data_error("operator not defined on numbers");
    }
  }

  auto it = strings_.find(p.column);
  if (it == strings_.end()) throw data_error("unknown column " + p.column);
  const StringStats& s = it->second;
  if (s.n == 0) return 0.0;
  double n = static_cast<double>(s.n);

  auto freq = [&](const std::string& v) {
    auto f = s.counts.find(v);
    // Unseen constants get half a row, the usual smoothing.
    return f == s.counts.end() ? 0.5 / n
                               : static_cast<double>(f->second) / n;
  };

  if (const auto* str = std::get_if<std::string>(&p.operand)) {
    switch (p.op) {
      case CmpOp::Eq:
        return freq(*str);
      case CmpOp::Ne:
        return 1.0 - freq(*str);
      case CmpOp::Like:
      case CmpOp::NotLike: {
        // Exact single-column marginal from the distinct-value summary; the
        // independence assumption only bites across columns.
        double match = 0;
        for (const auto& [v, c] : s.counts)
          if (like_match(v, *str)) match += static_cast<double>(c);
        double sel = match / n;
        return p.op == CmpOp::Like ? sel : 1.0 - sel;
      }
      default:
        throw data_error("operator not defined on strings");
    }
  }
  const auto& set = std::get<std::vector<std::string>>(p.operand);
  double sel = 0;
  for (const auto& v : set) sel += freq(v);
  sel = std::min(sel, 1.0);
  return p.op == CmpOp::Ne ? 1.0 - sel : sel;
}

double IndependenceBaseline::predicate_selectivity(
    const PredicateNode& p) const {
  switch (p.kind) {
    case PredicateNode::Kind::Expr:
      return std::clamp(leaf_selectivity(p), 0.0, 1.0);
    case PredicateNode::Kind::And: {
      double sel = 1.0;
      for (const auto& c : p.children) sel *= predicate_selectivity(*c);
      return sel;
    }
    case PredicateNode::Kind::Or: {
      double fail = 1.0;
      for (const auto& c : p.children)
        fail *= 1.0 - predicate_selectivity(*c);
      return 1.0 - fail;
    }
  }
  return 1.0;
}

namespace {

// The join-condition columns of a node's predicate, if any.
const PredicateNode* find_join_condition(const PredicateNode& p) {
  if (p.kind == PredicateNode::Kind::Expr)
    return std::holds_alternative<ColumnRef>(p.operand) ? &p : nullptr;
  for (const auto& c : p.children)
    if (const auto* found = find_join_condition(*c)) return found;
  return nullptr;
}

}  // namespace

double IndependenceBaseline::estimate_card(const PlanNode& node) const {
  if (is_scan(node.op)) {
    auto it = table_rows_.find(node.table);
    if (it == table_rows_.end())
      throw data_error("unknown table " + node.table);
    double rows = static_cast<double>(it->second);
    double sel =
        node.predicate ? predicate_selectivity(*node.predicate) : 1.0;
    return std::max(1.0, rows * sel);
  }
  if (is_join(node.op)) {
    double l = estimate_card(*node.children[0]);
    double r = estimate_card(*node.children[1]);
    double dv = 1.0;
    if (node.predicate) {
      if (const auto* cond = find_join_condition(*node.predicate)) {
        const auto& ref = std::get<ColumnRef>(cond->operand);
        dv = std::max(column_distinct(cond->column),
                      column_distinct(ref.name));
      }
    }
    return std::max(1.0, l * r / dv);
  }
  double in = estimate_card(*node.children[0]);
  switch (node.op) {
    case OpKind::Sort:
    case OpKind::HashSort:
    case OpKind::MergeSort:
      return in;
    case OpKind::PlainAggregate:
      return 1.0;
    default: {  // grouped aggregation
      if (node.columns.empty()) return 1.0;
      double groups = 1.0;
      for (const auto& c : node.columns) groups *= column_distinct(c);
      return std::max(1.0, std::min(in, groups));
    }
  }
}

double IndependenceBaseline::estimate_cost(const PlanNode& node,
                                           const CostModel& costs) const {
  double out = estimate_card(node);
  if (is_scan(node.op)) {
    double rows = static_cast<double>(table_rows_.at(node.table));
    if (node.op == OpKind::SeqScan) return costs.seq_scan * rows;
    return costs.index_scan * out + std::log2(std::max(rows, 2.0));
  }
  if (is_join(node.op)) {
    double lc = estimate_cost(*node.children[0], costs);
    double rc = estimate_cost(*node.children[1], costs);
    double l = estimate_card(*node.children[0]);
    double r = estimate_card(*node.children[1]);
    double own = 0;
    switch (node.op) {
      case OpKind::HashJoin:
        own = costs.hash_build * l + costs.hash_probe * r +
              costs.join_output * out;
        break;
      case OpKind::MergeJoin:
        own = costs.merge_join * (l + r) + costs.join_output * out;
        break;
      default:
        own = costs.nl_pair * l * r + costs.join_output * out;
        break;
    }
    return lc + rc + own;
  }
  double cc = estimate_cost(*node.children[0], costs);
  double in = estimate_card(*node.children[0]);
  bool is_sort = node.op == OpKind::Sort || node.op == OpKind::HashSort ||
                 node.op == OpKind::MergeSort;
  double own = is_sort
                   ? costs.sort_unit * in * std::log2(std::max(in, 2.0))
                   : costs.agg_unit * in;
  return cc + own;
}

}  // namespace planest
