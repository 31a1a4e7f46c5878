#include "planest/plan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include <json.hpp>

namespace planest {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct OpName {
  OpKind kind;
  const char* name;
};

constexpr OpName kOpNames[] = {
    {OpKind::Aggregate, "Aggregate"},
    {OpKind::Sort, "Sort"},
    {OpKind::HashJoin, "HashJoin"},
    {OpKind::MergeJoin, "MergeJoin"},
    {OpKind::NestedLoopJoin, "NestedLoopJoin"},
    {OpKind::SeqScan, "SeqScan"},
    {OpKind::IndexScan, "IndexScan"},
    {OpKind::IndexOnlyScan, "IndexOnlyScan"},
    {OpKind::BitmapHeapScan, "BitmapHeapScan"},
    {OpKind::BitmapIndexScan, "BitmapIndexScan"},
    {OpKind::HashAggregate, "HashAggregate"},
    {OpKind::PlainAggregate, "PlainAggregate"},
    {OpKind::HashSort, "HashSort"},
    {OpKind::MergeSort, "MergeSort"},
};

static_assert(sizeof(kOpNames) / sizeof(kOpNames[0]) == kOpKindCount);

constexpr const char* kCmpNames[kCmpOpCount] = {"=",    "!=",       ">", "<",
                                                "like", "not like", "in"};

}  // namespace

const char* to_string(OpKind op) { return kOpNames[static_cast<int>(op)].name; }

std::optional<OpKind> op_kind_from_string(std::string_view s) {
  for (const auto& e : kOpNames)
    if (s == e.name) return e.kind;
  return std::nullopt;
}

bool is_scan(OpKind op) {
  switch (op) {
    case OpKind::SeqScan:
    case OpKind::IndexScan:
    case OpKind::IndexOnlyScan:
    case OpKind::BitmapHeapScan:
    case OpKind::BitmapIndexScan:
      return true;
    default:
      return false;
  }
}

bool is_join(OpKind op) {
  return op == OpKind::HashJoin || op == OpKind::MergeJoin ||
         op == OpKind::NestedLoopJoin;
}

bool is_unary(OpKind op) { return !is_scan(op) && !is_join(op); }

const char* to_string(CmpOp op) { return kCmpNames[static_cast<int>(op)]; }

std::optional<CmpOp> cmp_op_from_string(std::string_view s) {
  for (int i = 0; i < kCmpOpCount; ++i)
    if (s == kCmpNames[i]) return static_cast<CmpOp>(i);
  return std::nullopt;
}

PredPtr PredicateNode::make_and(std::vector<PredPtr> children) {
  auto n = std::make_shared<PredicateNode>();
  n->kind = Kind::And;
  n->children = std::move(children);
  return n;
}

PredPtr PredicateNode::make_or(std::vector<PredPtr> children) {
  auto n = std::make_shared<PredicateNode>();
  n->kind = Kind::Or;
  n->children = std::move(children);
  return n;
}

PredPtr PredicateNode::make_expr(std::string column, CmpOp op,
                                 Operand operand) {
  auto n = std::make_shared<PredicateNode>();
  n->kind = Kind::Expr;
  n->column = std::move(column);
  n->op = op;
  n->operand = std::move(operand);
  return n;
}

bool equal(const PredicateNode& a, const PredicateNode& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == PredicateNode::Kind::Expr)
    return a.column == b.column && a.op == b.op && a.operand == b.operand;
  if (a.children.size() != b.children.size()) return false;
  for (size_t i = 0; i < a.children.size(); ++i)
    if (!equal(*a.children[i], *b.children[i])) return false;
  return true;
}

bool equal(const PlanNode& a, const PlanNode& b) {
  if (a.op != b.op || a.table != b.table || a.index != b.index ||
      a.columns != b.columns || a.true_card != b.true_card ||
      a.true_cost != b.true_cost)
    return false;
  if (static_cast<bool>(a.predicate) != static_cast<bool>(b.predicate))
    return false;
  if (a.predicate && !equal(*a.predicate, *b.predicate)) return false;
  if (a.children.size() != b.children.size()) return false;
  for (size_t i = 0; i < a.children.size(); ++i) {
    if (static_cast<bool>(a.children[i]) != static_cast<bool>(b.children[i]))
      return false;
    if (a.children[i] && !equal(*a.children[i], *b.children[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

std::pair<int, int> line_col_of(std::string_view text, size_t byte) {
  int line = 1, col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

[[noreturn]] void fail(const std::string& msg) { throw parse_error(msg); }

Operand parse_operand(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) {
    std::vector<std::string> set;
    for (const auto& e : j) {
      if (!e.is_string()) fail("operand sets may contain only strings");
      set.push_back(e.get<std::string>());
    }
    if (set.empty()) fail("operand set must be nonempty");
    return set;
  }
  if (j.is_object() && j.contains("column") && j["column"].is_string())
    return ColumnRef{j["column"].get<std::string>()};
  fail("operand must be a number, string, string array, or {\"column\": ...}");
}

// Negates a predicate without introducing NOT nodes. Gt/Lt have no closed
// complement in the operator set, so their negation expands to OR with
// equality.
PredPtr negate(const PredPtr& p) {
  using K = PredicateNode::Kind;
  if (p->kind == K::And || p->kind == K::Or) {
    std::vector<PredPtr> negated;
    negated.reserve(p->children.size());
    for (const auto& c : p->children) negated.push_back(negate(c));
    return p->kind == K::And ? PredicateNode::make_or(std::move(negated))
                             : PredicateNode::make_and(std::move(negated));
  }
  switch (p->op) {
    case CmpOp::Eq:
      return PredicateNode::make_expr(p->column, CmpOp::Ne, p->operand);
    case CmpOp::Ne:
      return PredicateNode::make_expr(p->column, CmpOp::Eq, p->operand);
    case CmpOp::Like:
      return PredicateNode::make_expr(p->column, CmpOp::NotLike, p->operand);
    case CmpOp::NotLike:
      return PredicateNode::make_expr(p->column, CmpOp::Like, p->operand);
    case CmpOp::Gt:
      return PredicateNode::make_or(
          {PredicateNode::make_expr(p->column, CmpOp::Lt, p->operand),
           PredicateNode::make_expr(p->column, CmpOp::Eq, p->operand)});
    case CmpOp::Lt:
      return PredicateNode::make_or(
          {PredicateNode::make_expr(p->column, CmpOp::Gt, p->operand),
           PredicateNode::make_expr(p->column, CmpOp::Eq, p->operand)});
    case CmpOp::In: {
      const auto* set = std::get_if<std::vector<std::string>>(&p->operand);
      if (!set) fail("IN operand must be a string set");
      std::vector<PredPtr> conj;
      conj.reserve(set->size());
      for (const auto& v : *set)
        conj.push_back(PredicateNode::make_expr(p->column, CmpOp::Ne, v));
      if (conj.size() == 1) return conj[0];
      return PredicateNode::make_and(std::move(conj));
    }
  }
  fail("unreachable negation case");
}

// Balanced OR over equality leaves; reuses the max-pooling OR semantics and
// avoids a variable-width operand encoding.
PredPtr balanced_or_of_eq(const std::string& column,
                          const std::vector<std::string>& values, size_t lo,
                          size_t hi) {
  if (hi - lo == 1)
    return PredicateNode::make_expr(column, CmpOp::Eq, values[lo]);
  size_t mid = lo + (hi - lo + 1) / 2;
  return PredicateNode::make_or({balanced_or_of_eq(column, values, lo, mid),
                                 balanced_or_of_eq(column, values, mid, hi)});
}

PredPtr rewrite_in(const PredPtr& p) {
  using K = PredicateNode::Kind;
  if (p->kind != K::Expr) {
    std::vector<PredPtr> children;
    children.reserve(p->children.size());
    bool changed = false;
    for (const auto& c : p->children) {
      children.push_back(rewrite_in(c));
      changed |= children.back() != c;
    }
    if (!changed) return p;
    return p->kind == K::And ? PredicateNode::make_and(std::move(children))
                             : PredicateNode::make_or(std::move(children));
  }
  if (p->op != CmpOp::In) return p;
  const auto* set = std::get_if<std::vector<std::string>>(&p->operand);
  if (!set || set->empty()) fail("IN operand must be a nonempty string set");
  return balanced_or_of_eq(p->column, *set, 0, set->size());
}

PredPtr parse_predicate(const json& j) {
  if (!j.is_object()) fail("predicate must be an object");
  if (!j.contains("kind") || !j["kind"].is_string())
    fail("predicate requires a string \"kind\"");
  std::string kind = j["kind"].get<std::string>();

  if (kind == "expr") {
    if (!j.contains("column") || !j["column"].is_string() ||
        j["column"].get<std::string>().empty())
      fail("predicate expression references no column");
    if (!j.contains("operator") || !j["operator"].is_string())
      fail("predicate expression requires an operator");
    std::string op_s = j["operator"].get<std::string>();
    std::transform(op_s.begin(), op_s.end(), op_s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    auto op = cmp_op_from_string(op_s);
    if (!op) fail("unknown predicate operator \"" + op_s + "\"");
    if (!j.contains("operand")) fail("predicate expression requires operand");
    Operand operand = parse_operand(j["operand"]);
    if (*op == CmpOp::In &&
        !std::holds_alternative<std::vector<std::string>>(operand))
      fail("IN operand must be a string set");
    if ((*op == CmpOp::Like || *op == CmpOp::NotLike) &&
        !std::holds_alternative<std::string>(operand))
      fail("LIKE operand must be a string pattern");
    return PredicateNode::make_expr(j["column"].get<std::string>(), *op,
                                    std::move(operand));
  }

  if (kind == "and" || kind == "or" || kind == "not") {
    if (!j.contains("children") || !j["children"].is_array())
      fail("\"" + kind + "\" predicate requires a children array");
    std::vector<PredPtr> children;
    for (const auto& c : j["children"]) children.push_back(parse_predicate(c));
    if (kind == "not") {
      if (children.size() != 1) fail("\"not\" takes exactly one child");
      return negate(children[0]);
    }
    if (children.size() < 2)
      fail("\"" + kind + "\" requires at least two children");
    return kind == "and" ? PredicateNode::make_and(std::move(children))
                         : PredicateNode::make_or(std::move(children));
  }
  fail("unknown predicate kind \"" + kind + "\"");
}

PlanPtr parse_plan_node(const json& j) {
  if (!j.is_object()) fail("plan node must be an object");
  if (!j.contains("op") || !j["op"].is_string())
    fail("plan node requires a string \"op\"");
  std::string op_s = j["op"].get<std::string>();
  auto op = op_kind_from_string(op_s);
  if (!op) fail("unknown operator kind \"" + op_s + "\"");

  auto node = std::make_shared<PlanNode>();
  node->op = *op;
  if (j.contains("table")) {
    if (!j["table"].is_string()) fail("\"table\" must be a string");
    node->table = j["table"].get<std::string>();
  }
  if (j.contains("index")) {
    if (!j["index"].is_string()) fail("\"index\" must be a string");
    node->index = j["index"].get<std::string>();
  }
  if (j.contains("columns")) {
    if (!j["columns"].is_array()) fail("\"columns\" must be an array");
    for (const auto& c : j["columns"]) {
      if (!c.is_string()) fail("column names must be strings");
      node->columns.push_back(c.get<std::string>());
    }
    std::sort(node->columns.begin(), node->columns.end());
    node->columns.erase(
        std::unique(node->columns.begin(), node->columns.end()),
        node->columns.end());
  }
  if (j.contains("predicate") && !j["predicate"].is_null())
    node->predicate = rewrite_in(parse_predicate(j["predicate"]));
  if (j.contains("children")) {
    if (!j["children"].is_array()) fail("\"children\" must be an array");
    for (const auto& c : j["children"])
      node->children.push_back(c.is_null() ? nullptr : parse_plan_node(c));
  }
  if (j.contains("true_card")) {
    if (!j["true_card"].is_number()) fail("\"true_card\" must be a number");
    double v = j["true_card"].get<double>();
    if (v < 1.0) fail("\"true_card\" must be >= 1");
    node->true_card = v;
  }
  if (j.contains("true_cost")) {
    if (!j["true_cost"].is_number()) fail("\"true_cost\" must be a number");
    double v = j["true_cost"].get<double>();
    if (v <= 0.0) fail("\"true_cost\" must be > 0");
    node->true_cost = v;
  }

  size_t arity = node->children.size();
  size_t real = 0;
  for (const auto& c : node->children) real += c != nullptr;
  if (is_scan(node->op)) {
    if (node->table.empty())
      fail(std::string(to_string(node->op)) + " requires a table");
    if (arity != 0)
      fail(std::string(to_string(node->op)) + " cannot have inputs");
  } else if (is_join(node->op)) {
    if (real < 2 || real != arity) fail("join requires two inputs");
  } else {
    // Sort / aggregate family: one real input. A trailing null marks the
    // empty right child of an already-binarized tree.
    bool bare = arity == 1 && real == 1;
    bool marked = arity == 2 && real == 1 && node->children[0];
    if (!bare && !marked)
      fail(std::string(to_string(node->op)) + " requires one input");
  }
  return node;
}

}  // namespace

PlanTree parse_plan(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_col_of(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    // Strip the library's "[json.exception...]" prefix, keep the explanation.
    if (auto pos = msg.find("] "); pos != std::string::npos)
      msg = msg.substr(pos + 2);
    throw parse_error("syntax error: " + msg, line, col);
  }
  return PlanTree{parse_plan_node(doc)};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

ordered_json operand_to_json(const Operand& o) {
  if (const auto* n = std::get_if<double>(&o)) return *n;
  if (const auto* s = std::get_if<std::string>(&o)) return *s;
  if (const auto* set = std::get_if<std::vector<std::string>>(&o)) {
    ordered_json arr = ordered_json::array();
    for (const auto& v : *set) arr.push_back(v);
    return arr;
  }
  const auto& ref = std::get<ColumnRef>(o);
  return ordered_json{{"column", ref.name}};
}

ordered_json predicate_to_json(const PredicateNode& p) {
  ordered_json j;
  switch (p.kind) {
    case PredicateNode::Kind::Expr:
      j["kind"] = "expr";
      j["column"] = p.column;
      j["operator"] = to_string(p.op);
      j["operand"] = operand_to_json(p.operand);
      return j;
    case PredicateNode::Kind::And:
      j["kind"] = "and";
      break;
    case PredicateNode::Kind::Or:
      j["kind"] = "or";
      break;
  }
  ordered_json children = ordered_json::array();
  for (const auto& c : p.children) children.push_back(predicate_to_json(*c));
  j["children"] = std::move(children);
  return j;
}

ordered_json plan_to_json(const PlanNode& n) {
  ordered_json j;
  j["op"] = to_string(n.op);
  if (!n.table.empty()) j["table"] = n.table;
  if (!n.index.empty()) j["index"] = n.index;
  if (!n.columns.empty()) j["columns"] = n.columns;
  if (n.predicate) j["predicate"] = predicate_to_json(*n.predicate);
  if (!n.children.empty()) {
    ordered_json children = ordered_json::array();
    for (const auto& c : n.children) {
      if (c)
        children.push_back(plan_to_json(*c));
      else
        children.push_back(nullptr);
    }
    j["children"] = std::move(children);
  }
  if (n.true_card) j["true_card"] = *n.true_card;
  if (n.true_cost) j["true_cost"] = *n.true_cost;
  return j;
}

}  // namespace

std::string serialize_plan(const PlanTree& tree) {
  if (!tree.root) throw error("cannot serialize an empty plan");
  return plan_to_json(*tree.root).dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Binarization
// ---------------------------------------------------------------------------

PredPtr binarize_predicate(const PredPtr& p) {
  if (!p || p->kind == PredicateNode::Kind::Expr) return p;
  std::vector<PredPtr> children;
  children.reserve(p->children.size());
  bool changed = false;
  for (const auto& c : p->children) {
    children.push_back(binarize_predicate(c));
    changed |= children.back() != c;
  }
  auto rebuild = [&](std::vector<PredPtr> cs) {
    return p->kind == PredicateNode::Kind::And
               ? PredicateNode::make_and(std::move(cs))
               : PredicateNode::make_or(std::move(cs));
  };
  if (children.size() == 2) return changed ? rebuild(std::move(children)) : p;
  // Left-deep nesting preserves the DFS leaf order.
  PredPtr acc = rebuild({children[0], children[1]});
  for (size_t i = 2; i < children.size(); ++i)
    acc = rebuild({acc, children[i]});
  return acc;
}

namespace {

PlanPtr binarize_node(const PlanPtr& n) {
  if (!n) return nullptr;
  std::vector<PlanPtr> children;
  children.reserve(n->children.size());
  bool changed = false;
  for (const auto& c : n->children) {
    children.push_back(binarize_node(c));
    changed |= children.back() != c;
  }
  PredPtr pred = binarize_predicate(n->predicate);
  changed |= pred != n->predicate;

  auto clone_with = [&](std::vector<PlanPtr> cs) {
    auto out = std::make_shared<PlanNode>(*n);
    out->predicate = pred;
    out->children = std::move(cs);
    return out;
  };

  if (is_scan(n->op)) return changed ? clone_with({}) : n;

  if (is_unary(n->op)) {
    if (children.size() == 2 && !children[1] && !changed) return n;
    PlanPtr input = children.empty() ? nullptr : children[0];
    return clone_with({input, nullptr});
  }

  // Joins: nest k-ary inputs into left-deep pairs of the same join kind.
  if (children.size() == 2)
    return changed ? clone_with(std::move(children)) : n;
  PlanPtr acc = children[0];
  for (size_t i = 1; i + 1 < children.size(); ++i) {
    auto mid = std::make_shared<PlanNode>();
    mid->op = n->op;
    mid->children = {acc, children[i]};
    acc = mid;
  }
  return clone_with({acc, children.back()});
}

}  // namespace

PlanTree binarize(const PlanTree& tree) {
  return PlanTree{binarize_node(tree.root)};
}

namespace {

bool pred_is_binary(const PredicateNode& p) {
  if (p.kind == PredicateNode::Kind::Expr) return p.children.empty();
  if (p.children.size() != 2) return false;
  for (const auto& c : p.children)
    if (!c || !pred_is_binary(*c)) return false;
  return true;
}

}  // namespace

bool is_binarized(const PlanNode& node) {
  if (node.predicate && !pred_is_binary(*node.predicate)) return false;
  if (is_scan(node.op)) return node.children.empty();
  if (node.children.size() != 2) return false;
  if (!node.children[0]) return false;
  if (is_join(node.op) && !node.children[1]) return false;
  for (const auto& c : node.children)
    if (c && !is_binarized(*c)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Canonical hashing
// ---------------------------------------------------------------------------

namespace {

// Escapes the serialization metacharacters so the encoding stays injective.
void append_escaped(std::string& out, std::string_view s) {
  for (char c : s) {
    if (c == '|' || c == '(' || c == ')' || c == '[' || c == ']' || c == ',' ||
        c == '%') {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02x", static_cast<unsigned char>(c));
      out += buf;
    } else {
      out += c;
    }
  }
}

void append_operand(std::string& out, const Operand& o) {
  if (const auto* n = std::get_if<double>(&o)) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "n:%.17g", *n);
    out += buf;
  } else if (const auto* s = std::get_if<std::string>(&o)) {
    out += "s:";
    append_escaped(out, *s);
  } else if (const auto* set = std::get_if<std::vector<std::string>>(&o)) {
    out += "v:";
    for (const auto& v : *set) {
      append_escaped(out, v);
      out += ',';
    }
  } else {
    out += "c:";
    append_escaped(out, std::get<ColumnRef>(o).name);
  }
}

void append_predicate(std::string& out, const PredicateNode& p) {
  switch (p.kind) {
    case PredicateNode::Kind::And:
      out += "[&";
      break;
    case PredicateNode::Kind::Or:
      out += "[|";
      break;
    case PredicateNode::Kind::Expr:
      out += "[e";
      append_escaped(out, p.column);
      out += '|';
      out += to_string(p.op);
      out += '|';
      append_operand(out, p.operand);
      out += ']';
      return;
  }
  for (const auto& c : p.children) append_predicate(out, *c);
  out += ']';
}

void append_plan(std::string& out, const PlanNode& n) {
  out += '(';
  out += to_string(n.op);
  out += '|';
  append_escaped(out, n.table);
  out += '|';
  append_escaped(out, n.index);
  out += '|';
  for (const auto& c : n.columns) {
    append_escaped(out, c);
    out += ',';
  }
  out += '|';
  if (n.predicate) append_predicate(out, *n.predicate);
  out += '|';
  for (const auto& c : n.children) {
    if (c)
      append_plan(out, *c);
    else
      out += "()";
  }
  out += ')';
}

}  // namespace

std::string canonical_serialization(const PlanNode& node) {
  std::string out;
  out.reserve(256);
  append_plan(out, node);
  return out;
}

PlanDigest canonical_hash(const PlanNode& node) {
  std::string s = canonical_serialization(node);
  // FNV-1a, 64 bit.
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  PlanDigest d;
  for (int i = 0; i < 8; ++i) d.bytes[i] = static_cast<uint8_t>(h >> (8 * i));
  return d;
}

std::string PlanDigest::hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(16);
  for (uint8_t b : bytes) {
    out += digits[b >> 4];
    out += digits[b & 0xf];
  }
  return out;
}

size_t PlanDigestHash::operator()(const PlanDigest& d) const {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(d.bytes[i]) << (8 * i);
  return static_cast<size_t>(v);
}

}  // namespace planest
