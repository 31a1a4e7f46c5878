#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "planest/featurize.hpp"
#include "support/random_plans.hpp"

using namespace planest;
namespace ts = planest::testsupport;

TEST_SUITE_BEGIN("featurize");

namespace {

struct Fixture {
  ts::SchemaSpec schema = ts::small_schema();
  SchemaCatalog catalog = schema.catalog(200);
  Dataset ds = ts::make_dataset(schema, 200, 31);
  SampleStore store = SampleStore::build(ds, 64, 5);
  HashStringEncoder enc;
  FeatureSpace space;

  Fixture() {
    space.catalog = &catalog;
    space.string_dim = 16;
    space.sample_size = 64;
    space.max_pred_codes = 32;
  }
};

std::string bytes_of(const std::vector<std::vector<float>>& seq) {
  std::string out;
  for (const auto& code : seq)
    out.append(reinterpret_cast<const char*>(code.data()),
               code.size() * sizeof(float));
  return out;
}

int popcount(const std::vector<float>& bits) {
  int n = 0;
  for (float b : bits) n += b != 0.0f;
  return n;
}

}  // namespace

TEST_CASE("operation one-hots are distinct and 14 wide") {
  std::set<std::vector<float>> seen;
  for (int i = 0; i < kOpKindCount; ++i) {
    auto v = encode_operation(static_cast<OpKind>(i));
    CHECK(v.size() == 14);
    CHECK(popcount(v) == 1);
    seen.insert(v);
  }
  CHECK(seen.size() == kOpKindCount);
}

TEST_CASE("metadata is the union of referenced names") {
  Fixture fx;
  const int nt = 2;

  PlanNode scan;
  scan.op = OpKind::SeqScan;
  scan.table = "alpha";
  scan.columns = {"alpha.year"};
  auto bits = encode_metadata(scan, fx.catalog);
  CHECK(bits.size() ==
        fx.catalog.tables.size() + fx.catalog.columns.size() +
            fx.catalog.indexes.size());
  CHECK(popcount(bits) == 2);
  CHECK(bits[fx.catalog.table_id("alpha")] == 1.0f);
  CHECK(bits[nt + fx.catalog.column_id("alpha.year")] == 1.0f);

  // A join references both inputs' tables through its column pair.
  PlanNode join;
  join.op = OpKind::HashJoin;
  join.predicate = PredicateNode::make_expr("beta.alpha_id", CmpOp::Eq,
                                            ColumnRef{"alpha.id"});
  auto jbits = encode_metadata(join, fx.catalog);
  CHECK(jbits[nt + fx.catalog.column_id("beta.alpha_id")] == 1.0f);
  CHECK(jbits[nt + fx.catalog.column_id("alpha.id")] == 1.0f);

  PlanNode bare;
  bare.op = OpKind::PlainAggregate;
  CHECK(popcount(encode_metadata(bare, fx.catalog)) == 0);

  PlanNode bad;
  bad.op = OpKind::SeqScan;
  bad.table = "ghost";
  CHECK_THROWS_AS(encode_metadata(bad, fx.catalog), data_error);
}

TEST_CASE("numeric normalization is clamped min-max") {
  ColumnInfo col{"t.x", "t", ColType::Numeric, 10, 30};
  CHECK(normalize_numeric(col, 10) == 0.0f);
  CHECK(normalize_numeric(col, 30) == 1.0f);
  CHECK(normalize_numeric(col, 20) == 0.5f);
  CHECK(normalize_numeric(col, 45) == 1.0f);
  CHECK(normalize_numeric(col, -5) == 0.0f);
  ColumnInfo flat{"t.y", "t", ColType::Numeric, 7, 7};
  CHECK(normalize_numeric(flat, 7) == 0.5f);
}

TEST_CASE("predicate serialization follows depth-first order with sentinels") {
  Fixture fx;
  auto leaf = PredicateNode::make_expr("alpha.year", CmpOp::Gt, 1988.0);
  auto single = serialize_predicate(*leaf, fx.space, fx.enc);
  CHECK(single.size() == 1);  // no backtracking, no sentinel

  auto a = PredicateNode::make_expr("alpha.year", CmpOp::Gt, 1988.0);
  auto b = PredicateNode::make_expr("alpha.year", CmpOp::Lt, 1993.0);
  auto both = PredicateNode::make_and({a, b});
  auto seq = serialize_predicate(*both, fx.space, fx.enc);
  REQUIRE(seq.size() == 5);  // [AND, a, empty, b, empty]
  CHECK(seq[0][0] == 1.0f);  // AND tag
  CHECK(seq[1] == single[0]);
  CHECK(popcount(seq[2]) == 0);
  CHECK(popcount(seq[4]) == 0);
  CHECK(seq[3][3 + static_cast<int>(CmpOp::Lt)] == 1.0f);
}

TEST_CASE("serialization is injective over small predicate trees") {
  // Every binary AND/OR shape with up to 4 internal nodes over a two-leaf
  // alphabet; all serializations must be pairwise distinct.
  Fixture fx;
  auto l1 = PredicateNode::make_expr("alpha.year", CmpOp::Gt, 1988.0);
  auto l2 = PredicateNode::make_expr("alpha.score", CmpOp::Lt, 5.0);
  std::vector<PredPtr> leaves{l1, l2};

  std::vector<std::vector<PredPtr>> by_internal(5);
  by_internal[0] = leaves;
  for (int n = 1; n <= 4; ++n) {
    for (int left = 0; left < n; ++left) {
      int right = n - 1 - left;
      for (const auto& lc : by_internal[left])
        for (const auto& rc : by_internal[right]) {
          by_internal[n].push_back(PredicateNode::make_and({lc, rc}));
          by_internal[n].push_back(PredicateNode::make_or({lc, rc}));
        }
    }
  }

  std::map<std::string, int> seen;
  int total = 0;
  for (const auto& bucket : by_internal)
    for (const auto& tree : bucket) {
      auto seq = serialize_predicate(*tree, fx.space, fx.enc);
      auto [it, fresh] = seen.emplace(bytes_of(seq), total);
      INFO("collision between tree " << it->second << " and " << total);
      CHECK(fresh);
      ++total;
    }
  CHECK(total > 500);
}

TEST_CASE("oversized predicates are rejected rather than truncated") {
  Fixture fx;
  fx.space.max_pred_codes = 5;
  auto a = PredicateNode::make_expr("alpha.year", CmpOp::Gt, 1988.0);
  auto b = PredicateNode::make_expr("alpha.year", CmpOp::Lt, 1993.0);
  auto both = PredicateNode::make_and({a, b});
  CHECK_NOTHROW(serialize_predicate(*both, fx.space, fx.enc));
  auto wide = PredicateNode::make_and({both, both});
  CHECK_THROWS_AS(serialize_predicate(*wide, fx.space, fx.enc), data_error);
}

TEST_CASE("sample bitmaps evaluate predicates exactly") {
  Fixture fx;
  const TableSample* sample = fx.store.table("alpha");
  size_t populated = sample->row_ids.size();

  // year >= lo for the whole domain: a tautology over the sample.
  auto taut = PredicateNode::make_expr("alpha.year", CmpOp::Gt, 1899.0);
  auto bits = compute_sample_bitmap(*taut, "alpha", fx.store, fx.space);
  CHECK(bits.size() == 64);
  CHECK(popcount(bits) == static_cast<int>(populated));

  auto none = PredicateNode::make_expr("alpha.year", CmpOp::Gt, 3000.0);
  CHECK(popcount(compute_sample_bitmap(*none, "alpha", fx.store, fx.space)) ==
        0);

  CHECK_THROWS_AS(
      compute_sample_bitmap(
          *PredicateNode::make_expr("alpha.title", CmpOp::Gt, 3.0), "alpha",
          fx.store, fx.space),
      data_error);
}

TEST_CASE("bitmaps distribute over AND and OR bitwise") {
  Fixture fx;
  ts::PlanGen gen{fx.schema, std::mt19937_64(77)};
  for (int round = 0; round < 100; ++round) {
    PredPtr a = gen.predicate("alpha", 1);
    PredPtr b = gen.predicate("alpha", 1);
    auto ba = compute_sample_bitmap(*a, "alpha", fx.store, fx.space);
    auto bb = compute_sample_bitmap(*b, "alpha", fx.store, fx.space);
    auto band = compute_sample_bitmap(*PredicateNode::make_and({a, b}),
                                      "alpha", fx.store, fx.space);
    auto bor = compute_sample_bitmap(*PredicateNode::make_or({a, b}), "alpha",
                                     fx.store, fx.space);
    for (size_t i = 0; i < ba.size(); ++i) {
      CHECK(band[i] == std::min(ba[i], bb[i]));
      CHECK(bor[i] == std::max(ba[i], bb[i]));
    }
  }
}

TEST_CASE("bitmap density estimates selectivity on uniform data") {
  // Uniform column, range predicates: |popcount/S - true selectivity| stays
  // within 5/sqrt(S) on average.
  ts::SchemaSpec schema = ts::small_schema();
  SchemaCatalog catalog = schema.catalog(20000);
  Dataset ds = ts::make_dataset(schema, 20000, 53);
  const int S = 400;
  SampleStore store = SampleStore::build(ds, S, 12);
  FeatureSpace space{&catalog, 16, S, 32};
  HashStringEncoder enc;

  const Column* year = ds.table("alpha")->column("year");
  std::mt19937_64 rng(200);
  double total_err = 0;
  int rounds = 60;
  for (int i = 0; i < rounds; ++i) {
    double cut = 1900 + unit_uniform(rng) * 121;
    auto pred = PredicateNode::make_expr("alpha.year", CmpOp::Lt, cut);
    double truth = 0;
    for (double v : year->nums) truth += v < cut;
    truth /= static_cast<double>(year->nums.size());
    auto bits = compute_sample_bitmap(*pred, "alpha", store, space);
    double est = static_cast<double>(popcount(bits)) / S;
    total_err += std::abs(est - truth);
  }
  CHECK(total_err / rounds < 5.0 / std::sqrt(static_cast<double>(S)));
}

TEST_CASE("batch layout matches the tree structure") {
  Fixture fx;

  // One bare scan: a single level, no edges.
  auto scan = std::make_shared<PlanNode>();
  scan->op = OpKind::SeqScan;
  scan->table = "alpha";
  PlanTree single{scan};
  auto batch1 =
      encode_plan_batch(std::span(&single, 1), fx.space, fx.enc, fx.store);
  REQUIRE(batch1.levels.size() == 1);
  CHECK(batch1.levels[0].rows() == 1);
  CHECK(batch1.levels[0].left[0] == -1);
  CHECK(batch1.levels[0].right[0] == -1);
  CHECK_FALSE(batch1.has_targets);

  // Full binary join tree of depth 3: level sizes 1, 2, 4.
  ts::PlanGen gen{fx.schema, std::mt19937_64(3)};
  auto join = [&](PlanPtr l, PlanPtr r) {
    auto j = std::make_shared<PlanNode>();
    j->op = OpKind::HashJoin;
    j->predicate = PredicateNode::make_expr("beta.alpha_id", CmpOp::Eq,
                                            ColumnRef{"alpha.id"});
    j->children = {l, r};
    return j;
  };
  PlanTree full{join(join(gen.scan("alpha"), gen.scan("beta")),
                     join(gen.scan("alpha"), gen.scan("beta")))};
  full = binarize(full);
  auto batch2 =
      encode_plan_batch(std::span(&full, 1), fx.space, fx.enc, fx.store);
  REQUIRE(batch2.levels.size() == 3);
  CHECK(batch2.levels[0].rows() == 1);
  CHECK(batch2.levels[1].rows() == 2);
  CHECK(batch2.levels[2].rows() == 4);
  CHECK(batch2.levels[0].left[0] == 0);
  CHECK(batch2.levels[0].right[0] == 1);
  CHECK(batch2.levels[1].left[1] == 2);
  CHECK(batch2.levels[1].right[1] == 3);

  // Non-scan nodes carry a zero sample bitmap.
  CHECK(popcount(std::vector<float>(
            batch2.levels[0].bitmaps.row(0),
            batch2.levels[0].bitmaps.row(0) + 64)) == 0);
}

TEST_CASE("feature widths are a pure function of the catalog") {
  Fixture fx;
  ts::PlanGen gen{fx.schema, std::mt19937_64(17)};
  std::vector<PlanTree> trees;
  for (int i = 0; i < 8; ++i) trees.push_back(gen.plan(3));
  auto batch = encode_plan_batch(trees, fx.space, fx.enc, fx.store);

  // Reload the catalog from its text form and re-encode: bit-identical.
  SchemaCatalog reloaded = SchemaCatalog::parse(fx.catalog.to_text());
  FeatureSpace space2 = fx.space;
  space2.catalog = &reloaded;
  auto batch2 = encode_plan_batch(trees, space2, fx.enc, fx.store);
  REQUIRE(batch.levels.size() == batch2.levels.size());
  for (size_t l = 0; l < batch.levels.size(); ++l) {
    CHECK(batch.levels[l].ops == batch2.levels[l].ops);
    CHECK(batch.levels[l].meta == batch2.levels[l].meta);
    CHECK(batch.levels[l].bitmaps == batch2.levels[l].bitmaps);
    CHECK(batch.levels[l].pred_leaves == batch2.levels[l].pred_leaves);
    CHECK(batch.levels[l].left == batch2.levels[l].left);
    CHECK(batch.levels[l].right == batch2.levels[l].right);
  }
}

TEST_CASE("operand queries classify LIKE patterns") {
  auto [q1, m1] = operand_query("Din%", CmpOp::Like);
  CHECK(q1 == "Din");
  CHECK(m1 == LookupMode::Prefix);
  auto [q2, m2] = operand_query("%06%", CmpOp::Like);
  CHECK(q2 == "06");
  CHECK(m2 == LookupMode::Contains);
  auto [q3, m3] = operand_query("%Kas", CmpOp::NotLike);
  CHECK(q3 == "Kas");
  CHECK(m3 == LookupMode::Suffix);
  auto [q4, m4] = operand_query("exact", CmpOp::Eq);
  CHECK(q4 == "exact");
  CHECK(m4 == LookupMode::Exact);
}

TEST_SUITE_END();
