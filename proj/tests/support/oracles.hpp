#pragma once

// Independent reference implementations used as test oracles. These must stay
// decoupled from the library code paths they check.

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "planest/dataset.hpp"
#include "planest/eval.hpp"
#include "planest/mat.hpp"
#include "planest/plan.hpp"
#include "planest/strings.hpp"

namespace planest::testsupport {

// Straightforward y = x W^T + b, scalar loops in double.
inline MatD naive_affine(const MatD& W, const MatD& b, const MatD& x) {
  MatD y(x.rows, W.rows);
  for (int r = 0; r < x.rows; ++r)
    for (int o = 0; o < W.rows; ++o) {
      double acc = b(0, o);
      for (int k = 0; k < W.cols; ++k) acc += x(r, k) * W(o, k);
      y(r, o) = acc;
    }
  return y;
}

// Single recurrent step written as plain scalar code.
struct ScalarCellParams {
  MatD Wf, bf, Wk1, bk1, Wr, br, Wk2, bk2;
};

inline std::pair<MatD, MatD> scalar_cell(const ScalarCellParams& p,
                                         const MatD& x, const MatD& g_prev,
                                         const MatD& r_prev) {
  int n = x.rows, h = p.Wf.rows;
  MatD cat(n, r_prev.cols + x.cols);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < r_prev.cols; ++c) cat(r, c) = r_prev(r, c);
    for (int c = 0; c < x.cols; ++c) cat(r, r_prev.cols + c) = x(r, c);
  }
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  MatD f = naive_affine(p.Wf, p.bf, cat);
  MatD k1 = naive_affine(p.Wk1, p.bk1, cat);
  MatD rr = naive_affine(p.Wr, p.br, cat);
  MatD k2 = naive_affine(p.Wk2, p.bk2, cat);
  MatD g(n, h), rep(n, h);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < h; ++c) {
      double fv = sig(f(r, c)), k1v = sig(k1(r, c)), rv = std::tanh(rr(r, c)),
             k2v = sig(k2(r, c));
      g(r, c) = fv * g_prev(r, c) + k1v * rv;
      rep(r, c) = k2v * std::tanh(g(r, c));
    }
  return {g, rep};
}

// Exact per-node cardinalities by nested-loop evaluation. No hashing, no
// shortcuts: every join is a full pair scan.
class BruteForceCards {
 public:
  explicit BruteForceCards(const Dataset& ds) : ds_(ds) {}

  // Returns cardinalities in post-order (children before parents, left before
  // right), skipping null children.
  std::vector<double> run(const PlanNode& root) {
    cards_.clear();
    eval(root);
    return cards_;
  }

 private:
  struct Rows {
    std::vector<const Table*> tables;
    std::vector<std::vector<uint32_t>> rows;
  };

  const Dataset& ds_;
  std::vector<double> cards_;

  CellValue value_at(const Rows& rs, const std::vector<uint32_t>& row,
                     std::string_view qualified) const {
    auto dot = qualified.find('.');
    std::string_view tname = qualified.substr(0, dot);
    for (size_t i = 0; i < rs.tables.size(); ++i) {
      if (rs.tables[i]->name != tname) continue;
      const Column* col = rs.tables[i]->column(qualified.substr(dot + 1));
      if (!col) break;
      if (col->type == ColType::Numeric)
        return CellValue::of(col->nums[row[i]]);
      return CellValue::of(std::string_view(col->strs[row[i]]));
    }
    throw data_error("oracle: unknown column " + std::string(qualified));
  }

  Rows eval(const PlanNode& n) {
    Rows out;
    if (is_scan(n.op)) {
      const Table* t = ds_.table(n.table);
      out.tables = {t};
      for (uint32_t i = 0; i < t->rows; ++i) {
        std::vector<uint32_t> row{i};
        bool keep = true;
        if (n.predicate) {
          auto get = [&](std::string_view q) {
            std::string qualified =
                q.find('.') == std::string_view::npos
                    ? t->name + "." + std::string(q)
                    : std::string(q);
            return value_at(out, row, qualified);
          };
          keep = eval_predicate(*n.predicate, get);
        }
        if (keep) out.rows.push_back(std::move(row));
      }
    } else if (is_join(n.op)) {
      Rows l = eval(*n.children[0]);
      Rows r = eval(*n.children[1]);
      out.tables = l.tables;
      out.tables.insert(out.tables.end(), r.tables.begin(), r.tables.end());
      for (const auto& lrow : l.rows)
        for (const auto& rrow : r.rows) {
          std::vector<uint32_t> row = lrow;
          row.insert(row.end(), rrow.begin(), rrow.end());
          auto get = [&](std::string_view q) {
            return value_at(out, row, std::string(q));
          };
          if (!n.predicate || eval_predicate(*n.predicate, get))
            out.rows.push_back(std::move(row));
        }
    } else {
      Rows in = eval(*n.children[0]);
      bool is_sort = n.op == OpKind::Sort || n.op == OpKind::HashSort ||
                     n.op == OpKind::MergeSort;
      if (is_sort) {
        out = std::move(in);
      } else if (n.op == OpKind::PlainAggregate || n.columns.empty()) {
        out.tables = in.tables;
        if (!in.rows.empty()) out.rows.push_back(in.rows[0]);
      } else {
        out.tables = in.tables;
        std::set<std::string> seen;
        for (const auto& row : in.rows) {
          std::string key;
          for (const auto& col : n.columns) {
            CellValue v = value_at(in, row, col);
            key += v.type == ColType::Numeric ? std::to_string(v.num)
                                              : std::string(v.str);
            key += '\x1f';
          }
          if (seen.insert(std::move(key)).second) out.rows.push_back(row);
        }
      }
    }
    cards_.push_back(
        std::max(1.0, static_cast<double>(out.rows.size())));
    return out;
  }
};

// Exhaustive set-cover feasibility: is there any rule subset whose extracted
// union covers the workload within the budget?
inline bool exhaustive_cover_exists(
    const std::vector<std::set<std::string>>& extracted,
    const std::set<std::string>& workload, size_t budget) {
  size_t n = extracted.size();
  for (uint64_t mask = 1; mask < (1ull << n); ++mask) {
    std::set<std::string> u;
    for (size_t i = 0; i < n; ++i)
      if (mask & (1ull << i)) u.insert(extracted[i].begin(),
                                       extracted[i].end());
    if (u.size() >= budget) continue;
    bool all = true;
    for (const auto& w : workload)
      if (!u.count(w)) {
        all = false;
        break;
      }
    if (all) return true;
  }
  return false;
}

// Linear scan for the longest dictionary key that is a prefix / suffix of q,
// restricted to the matching provenance.
inline int scan_longest(const SubstringDictionary& dict, std::string_view q,
                        bool prefix_side) {
  int best = -1;
  size_t best_len = 0;
  for (size_t i = 0; i < dict.entries.size(); ++i) {
    const auto& e = dict.entries[i];
    if (prefix_side && !e.from_prefix) continue;
    if (!prefix_side && !e.from_suffix) continue;
    if (e.key.size() > q.size() || e.key.size() < best_len) continue;
    bool hit = prefix_side
                   ? q.substr(0, e.key.size()) == e.key
                   : q.substr(q.size() - e.key.size()) == e.key;
    // Ties resolve to the first key in sorted order, matching trie insertion.
    if (hit && (best < 0 || e.key.size() > best_len)) {
      best = static_cast<int>(i);
      best_len = e.key.size();
    }
  }
  return best;
}

}  // namespace planest::testsupport
