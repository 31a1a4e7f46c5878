#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "planest/errors.hpp"

namespace planest {

// Physical operator kinds. The one-hot operation feature is indexed by the
// enum value, so the order here is part of the encoding contract.
enum class OpKind : uint8_t {
  Aggregate,
  Sort,
  HashJoin,
  MergeJoin,
  NestedLoopJoin,
  SeqScan,
  IndexScan,
  IndexOnlyScan,
  BitmapHeapScan,
  BitmapIndexScan,
  HashAggregate,
  PlainAggregate,
  HashSort,
  MergeSort,
};
inline constexpr int kOpKindCount = 14;

const char* to_string(OpKind op);
std::optional<OpKind> op_kind_from_string(std::string_view s);

bool is_scan(OpKind op);   // leaf operator, requires a table
bool is_join(OpKind op);   // binary operator
bool is_unary(OpKind op);  // sort / aggregate family

// Comparison operators on predicate leaves. Also an encoding contract.
enum class CmpOp : uint8_t { Eq, Ne, Gt, Lt, Like, NotLike, In };
inline constexpr int kCmpOpCount = 7;

const char* to_string(CmpOp op);
std::optional<CmpOp> cmp_op_from_string(std::string_view s);

// Right-hand side of a join condition (column = column).
struct ColumnRef {
  std::string name;
  friend bool operator==(const ColumnRef&, const ColumnRef&) = default;
};

// Numeric literal, string literal, string set (IN), or column reference.
using Operand =
    std::variant<double, std::string, std::vector<std::string>, ColumnRef>;

struct PredicateNode;
using PredPtr = std::shared_ptr<const PredicateNode>;

// AND/OR internal nodes and <column, operator, operand> leaves. Trees are
// immutable after construction and may share subtrees.
struct PredicateNode {
  enum class Kind : uint8_t { And, Or, Expr };

  Kind kind = Kind::Expr;
  std::string column;  // Expr only
  CmpOp op = CmpOp::Eq;
  Operand operand;                // Expr only
  std::vector<PredPtr> children;  // And/Or only, >=2 before binarization

  static PredPtr make_and(std::vector<PredPtr> children);
  static PredPtr make_or(std::vector<PredPtr> children);
  static PredPtr make_expr(std::string column, CmpOp op, Operand operand);
};

bool equal(const PredicateNode& a, const PredicateNode& b);

struct PlanNode;
using PlanPtr = std::shared_ptr<const PlanNode>;

struct PlanNode {
  OpKind op = OpKind::SeqScan;
  std::string table;                 // scans only
  std::string index;                 // index scans only
  std::vector<std::string> columns;  // keys / outputs, kept sorted
  PredPtr predicate;                 // may be null
  // Before binarization: any arity. After: exactly two entries for internal
  // nodes, where entry 1 may be null (the explicit empty-child marker of a
  // unary operator); scans keep an empty vector.
  std::vector<PlanPtr> children;
  std::optional<double> true_card;  // >= 1 when present
  std::optional<double> true_cost;  // > 0 when present
};

bool equal(const PlanNode& a, const PlanNode& b);

struct PlanTree {
  PlanPtr root;
};

// Parses the plan-tree file format (see docs/plan_format.md). NOT predicates
// are eliminated (negated leaf operators, De Morgan over AND/OR) and IN sets
// are rewritten to balanced ORs of equality leaves, so downstream code never
// sees either form.
PlanTree parse_plan(std::string_view text);

// Canonical JSON writer; parse_plan(serialize_plan(t)) reproduces t, and
// serialize_plan(parse_plan(s)) == s for canonical s.
std::string serialize_plan(const PlanTree& tree);

// Rewrites k-ary AND/OR into left-deep binary nests and gives every unary
// plan node an explicit null right child. Leaf order and semantics are
// preserved; untouched subtrees are shared with the input.
PlanTree binarize(const PlanTree& tree);
PredPtr binarize_predicate(const PredPtr& p);

bool is_binarized(const PlanNode& node);

// Fixed-length digest of the canonical sub-plan serialization. Keys the
// representation memory pool.
struct PlanDigest {
  std::array<uint8_t, 8> bytes{};
  std::string hex() const;
  friend bool operator==(const PlanDigest&, const PlanDigest&) = default;
};

struct PlanDigestHash {
  size_t operator()(const PlanDigest& d) const;
};

// Injective over the plan grammar (labels excluded: the digest identifies the
// computation, not its observed outcome).
std::string canonical_serialization(const PlanNode& node);
PlanDigest canonical_hash(const PlanNode& node);

}  // namespace planest
