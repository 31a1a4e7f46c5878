#include <algorithm>
#include <random>

#include "planest/nn.hpp"
#include "planest/trainer.hpp"

namespace planest {

namespace {

struct QueryRng {
  std::mt19937_64 rng;
  double uniform() { return unit_uniform(rng); }
  size_t below(size_t n) {
    return std::min(n - 1, static_cast<size_t>(uniform() * n));
  }
  bool chance(double p) { return uniform() < p; }
};

int pick_weighted(QueryRng& rng, const std::vector<double>& weights) {
  double total = 0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u <= 0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

const Column* pick_column(const Table& t, ColType type, QueryRng& rng,
                          std::string* name) {
  std::vector<const std::pair<std::string, Column>*> of_type;
  for (const auto& entry : t.columns)
    if (entry.second.type == type) of_type.push_back(&entry);
  if (of_type.empty()) return nullptr;
  const auto* e = of_type[rng.below(of_type.size())];
  *name = e->first;
  return &e->second;
}

PredPtr numeric_expr(const Table& t, QueryRng& rng) {
  std::string name;
  const Column* col = pick_column(t, ColType::Numeric, rng, &name);
  if (!col) return nullptr;
  double v = col->nums[rng.below(col->nums.size())];
  static constexpr CmpOp kNumericOps[] = {CmpOp::Gt, CmpOp::Lt, CmpOp::Eq,
                                          CmpOp::Ne};
  CmpOp op = kNumericOps[rng.below(4)];
  return PredicateNode::make_expr(t.name + "." + name, op, v);
}

PredPtr string_expr(const Table& t, QueryRng& rng,
                    const std::vector<double>& mix) {
  std::string name;
  const Column* col = pick_column(t, ColType::Str, rng, &name);
  if (!col) return nullptr;
  const std::string& value = col->strs[rng.below(col->strs.size())];
  std::string qualified = t.name + "." + name;

  int pick = pick_weighted(rng, mix);
  switch (pick) {
    case 0:
      return PredicateNode::make_expr(qualified, CmpOp::Eq, value);
    case 1:
      return PredicateNode::make_expr(qualified, CmpOp::Ne, value);
    case 2:
    case 3: {
      // Substring of a value actually present in the data.
      size_t len = 2 + rng.below(3);
      len = std::min(len, value.size());
      std::string pattern;
      switch (rng.below(3)) {
        case 0:
          pattern = value.substr(0, len) + "%";
          break;
        case 1:
          pattern = "%" + value.substr(value.size() - len);
          break;
        default: {
          size_t start = rng.below(value.size() - len + 1);
          pattern = "%" + value.substr(start, len) + "%";
          break;
        }
      }
      CmpOp op = pick == 2 ? CmpOp::Like : CmpOp::NotLike;
      return PredicateNode::make_expr(qualified, op, pattern);
    }
    default: {
      std::vector<std::string> set;
      size_t k = 2 + rng.below(3);
      for (size_t i = 0; i < k; ++i)
        set.push_back(col->strs[rng.below(col->strs.size())]);
      std::sort(set.begin(), set.end());
      set.erase(std::unique(set.begin(), set.end()), set.end());
      return PredicateNode::make_expr(qualified, CmpOp::In, std::move(set));
    }
  }
}

// Random AND/OR shape over the expressions (left-deep with occasional right
// nesting).
PredPtr combine(std::vector<PredPtr> exprs, QueryRng& rng) {
  if (exprs.empty()) return nullptr;
  PredPtr acc = exprs[0];
  for (size_t i = 1; i < exprs.size(); ++i) {
    bool conj = rng.chance(0.6);
    std::vector<PredPtr> pair =
        rng.chance(0.5) ? std::vector<PredPtr>{acc, exprs[i]}
                        : std::vector<PredPtr>{exprs[i], acc};
    acc = conj ? PredicateNode::make_and(std::move(pair))
               : PredicateNode::make_or(std::move(pair));
  }
  return acc;
}

PlanPtr make_scan(const Table& t, const WorkloadConfig& cfg, QueryRng& rng) {
  auto scan = std::make_shared<PlanNode>();
  scan->op = OpKind::SeqScan;
  scan->table = t.name;
  std::vector<PredPtr> exprs;
  for (int i = 0; i < cfg.numeric_preds; ++i)
    if (auto e = numeric_expr(t, rng)) exprs.push_back(std::move(e));
  if (rng.chance(cfg.string_pred_prob))
    if (auto e = string_expr(t, rng, cfg.string_op_mix))
      exprs.push_back(std::move(e));
  scan->predicate = combine(std::move(exprs), rng);
  return scan;
}

// IN sets and NOT forms arrive through the plan-file parser in production;
// the in-memory generator mirrors the parser's rewrites so downstream stages
// see the same canonical trees.
PredPtr normalize_generated(const PredPtr& p) {
  if (!p) return p;
  if (p->kind != PredicateNode::Kind::Expr) {
    std::vector<PredPtr> cs;
    for (const auto& c : p->children) cs.push_back(normalize_generated(c));
    return p->kind == PredicateNode::Kind::And
               ? PredicateNode::make_and(std::move(cs))
               : PredicateNode::make_or(std::move(cs));
  }
  if (p->op != CmpOp::In) return p;
  const auto& set = std::get<std::vector<std::string>>(p->operand);
  PredPtr acc;
  std::vector<PredPtr> leaves;
  for (const auto& v : set)
    leaves.push_back(PredicateNode::make_expr(p->column, CmpOp::Eq, v));
  while (leaves.size() > 1) {
    std::vector<PredPtr> next;
    for (size_t i = 0; i + 1 < leaves.size(); i += 2)
      next.push_back(PredicateNode::make_or({leaves[i], leaves[i + 1]}));
    if (leaves.size() % 2 == 1) next.push_back(leaves.back());
    leaves = std::move(next);
  }
  return leaves[0];
}

PlanPtr normalize_plan(const PlanPtr& n) {
  if (!n) return n;
  auto out = std::make_shared<PlanNode>(*n);
  out->predicate = normalize_generated(n->predicate);
  for (auto& c : out->children) c = normalize_plan(c);
  return out;
}

}  // namespace

std::vector<PlanTree> generate_queries(const Dataset& ds,
                                       const WorkloadConfig& cfg) {
  if (ds.tables.empty()) throw data_error("dataset has no tables");
  std::vector<PlanTree> out;
  out.reserve(cfg.query_count);

  static constexpr OpKind kJoinOps[] = {OpKind::HashJoin, OpKind::MergeJoin,
                                        OpKind::NestedLoopJoin};

  for (int q = 0; q < cfg.query_count; ++q) {
    // Per-query stream: queries can be regenerated independently.
    QueryRng rng{std::mt19937_64(cfg.seed * 0x9e3779b97f4a7c15ull +
                                 static_cast<uint64_t>(q))};
    int span = cfg.max_tables - cfg.min_tables + 1;
    int tables = cfg.min_tables + static_cast<int>(rng.below(span));
    tables = std::min<int>(tables, static_cast<int>(ds.tables.size()));

    PlanPtr node;
    if (tables <= 1) {
      const Table& t = ds.tables[rng.below(ds.tables.size())];
      node = make_scan(t, cfg, rng);
    } else {
      // Left-deep joins in join-graph order: items, then events on the FK.
      node = make_scan(ds.tables[0], cfg, rng);
      for (int i = 1; i < tables; ++i) {
        auto join = std::make_shared<PlanNode>();
        join->op = kJoinOps[rng.below(3)];
        join->predicate = PredicateNode::make_expr(
            ds.tables[i].name + ".item_id", CmpOp::Eq,
            ColumnRef{ds.tables[0].name + ".id"});
        join->children = {node, make_scan(ds.tables[i], cfg, rng)};
        node = join;
      }
    }

    if (rng.chance(cfg.sort_prob)) {
      auto sort = std::make_shared<PlanNode>();
      sort->op = rng.chance(0.5) ? OpKind::Sort
               : rng.chance(0.5) ? OpKind::HashSort
                                 : OpKind::MergeSort;
      sort->columns = {"items.val_a"};
      sort->children = {node};
      node = sort;
    } else if (rng.chance(cfg.agg_prob)) {
      auto agg = std::make_shared<PlanNode>();
      double u = rng.uniform();
      if (u < 0.34) {
        agg->op = OpKind::PlainAggregate;
      } else {
        agg->op = u < 0.67 ? OpKind::Aggregate : OpKind::HashAggregate;
        agg->columns = {"items.val_c"};
      }
      agg->children = {node};
      node = agg;
    }

    // Sort/aggregate keys reference the main table; single-table queries on
    // the detail table would dangle, so regroup them there.
    if (is_unary(node->op) && !node->columns.empty()) {
      const PlanNode* below = node->children[0].get();
      while (!is_scan(below->op)) below = below->children[0].get();
      if (below->table != "items") {
        auto fixed = std::make_shared<PlanNode>(*node);
        fixed->columns = {below->table + "." +
                          (node->op == OpKind::Sort ||
                                   node->op == OpKind::HashSort ||
                                   node->op == OpKind::MergeSort
                               ? "amount"
                               : "label")};
        node = fixed;
      }
    }

    out.push_back(binarize(PlanTree{normalize_plan(node)}));
  }
  return out;
}

}  // namespace planest
