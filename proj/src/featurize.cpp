#include "planest/featurize.hpp"

#include <algorithm>
#include <cstring>

#include "planest/eval.hpp"

namespace planest {

void HashStringEncoder::encode(std::string_view query, LookupMode,
                               std::span<float> out) const {
  auto bits = hash_bitmap(query, static_cast<int>(out.size()));
  std::copy(bits.begin(), bits.end(), out.begin());
}

void DictStringEncoder::encode(std::string_view query, LookupMode mode,
                               std::span<float> out) const {
  LookupResult r = lookup(query, mode, tries_);
  if (r.fallback) {
    auto bits = hash_bitmap(query, static_cast<int>(out.size()));
    std::copy(bits.begin(), bits.end(), out.begin());
    return;
  }
  const auto& vec = dict_->entries[r.entry].vec;
  if (vec.size() != out.size())
    throw data_error("dictionary vector width does not match the encoder");
  std::copy(vec.begin(), vec.end(), out.begin());
}

std::pair<std::string, LookupMode> operand_query(std::string_view operand,
                                                 CmpOp op) {
  if (op != CmpOp::Like && op != CmpOp::NotLike)
    return {std::string(operand), LookupMode::Exact};
  bool leading = !operand.empty() && operand.front() == '%';
  bool trailing = operand.size() > (leading ? 1u : 0u) &&
                  operand.back() == '%';
  std::string_view body = operand;
  if (leading) body.remove_prefix(1);
  if (trailing) body.remove_suffix(1);
  LookupMode mode = leading && trailing  ? LookupMode::Contains
                    : trailing           ? LookupMode::Prefix
                    : leading            ? LookupMode::Suffix
                                         : LookupMode::Exact;
  return {std::string(body), mode};
}

std::vector<float> encode_operation(OpKind op) {
  std::vector<float> v(kOpKindCount, 0.0f);
  v[static_cast<int>(op)] = 1.0f;
  return v;
}

namespace {

void collect_predicate_names(const PredicateNode& p,
                             std::vector<std::string>& out) {
  if (p.kind == PredicateNode::Kind::Expr) {
    out.push_back(p.column);
    if (const auto* ref = std::get_if<ColumnRef>(&p.operand))
      out.push_back(ref->name);
    return;
  }
  for (const auto& c : p.children) collect_predicate_names(*c, out);
}

}  // namespace

std::vector<float> encode_metadata(const PlanNode& node,
                                   const SchemaCatalog& catalog) {
  const int nt = static_cast<int>(catalog.tables.size());
  const int nc = static_cast<int>(catalog.columns.size());
  const int ni = static_cast<int>(catalog.indexes.size());
  std::vector<float> bits(nt + nc + ni, 0.0f);

  auto set_table = [&](const std::string& name) {
    int id = catalog.table_id(name);
    if (id < 0) throw data_error("unknown table \"" + name + "\"");
    bits[id] = 1.0f;
  };
  auto set_column = [&](const std::string& name) {
    int id = catalog.column_id(name);
    if (id < 0) throw data_error("unknown column \"" + name + "\"");
    bits[nt + id] = 1.0f;
  };

  if (!node.table.empty()) set_table(node.table);
  if (!node.index.empty()) {
    int id = catalog.index_id(node.index);
    if (id < 0) throw data_error("unknown index \"" + node.index + "\"");
    bits[nt + nc + id] = 1.0f;
  }
  for (const auto& c : node.columns) set_column(c);
  if (node.predicate) {
    std::vector<std::string> names;
    collect_predicate_names(*node.predicate, names);
    for (const auto& n : names) set_column(n);
  }
  return bits;
}

float normalize_numeric(const ColumnInfo& col, double v) {
  if (col.max == col.min) return 0.5f;
  double x = (v - col.min) / (col.max - col.min);
  return static_cast<float>(std::clamp(x, 0.0, 1.0));
}

std::vector<float> compute_sample_bitmap(const PredicateNode& pred,
                                         std::string_view table,
                                         const SampleStore& store,
                                         const FeatureSpace& space) {
  const TableSample* sample = store.table(table);
  if (!sample)
    throw data_error("no sample for table \"" + std::string(table) + "\"");
  std::vector<float> bits(space.bitmap_width(), 0.0f);
  size_t rows = sample->row_ids.size();
  if (rows > bits.size())
    throw data_error("sample larger than the configured bitmap");

  std::string prefix = std::string(table) + ".";
  for (size_t i = 0; i < rows; ++i) {
    auto get = [&](std::string_view col) -> CellValue {
      std::string_view bare = col;
      if (bare.substr(0, prefix.size()) == prefix)
        bare.remove_prefix(prefix.size());
      else if (bare.find('.') != std::string_view::npos)
        throw data_error("predicate column " + std::string(col) +
                         " is not on table " + std::string(table));
      const Column* c = sample->column(bare);
      if (!c)
        throw data_error("unknown column \"" + std::string(col) + "\"");
      if (c->type == ColType::Numeric) return CellValue::of(c->nums[i]);
      return CellValue::of(std::string_view(c->strs[i]));
    };
    if (eval_predicate(pred, get)) bits[i] = 1.0f;
  }
  return bits;
}

// ---------------------------------------------------------------------------
// Predicate codes
// ---------------------------------------------------------------------------

namespace {

std::vector<float> encode_leaf_code(const PredicateNode& p,
                                    const FeatureSpace& space,
                                    const StringEncoder& enc) {
  const auto& catalog = *space.catalog;
  std::vector<float> code(space.leaf_width(), 0.0f);
  code[2] = 1.0f;  // kind = expression
  code[3 + static_cast<int>(p.op)] = 1.0f;

  int col_id = catalog.column_id(p.column);
  if (col_id < 0) throw data_error("unknown column \"" + p.column + "\"");
  const int col_base = 3 + kCmpOpCount;
  code[col_base + col_id] = 1.0f;

  const int ncols = static_cast<int>(catalog.columns.size());
  const int num_slot = col_base + ncols;
  const int str_base = num_slot + 1;
  const int flag_slot = str_base + space.string_dim;
  const ColumnInfo& col = catalog.columns[col_id];

  if (const auto* num = std::get_if<double>(&p.operand)) {
    if (col.type != ColType::Numeric)
      throw data_error("numeric operand on string column " + p.column);
    code[num_slot] = normalize_numeric(col, *num);
    code[flag_slot] = 0.0f;
  } else if (const auto* str = std::get_if<std::string>(&p.operand)) {
    if (col.type != ColType::Str)
      throw data_error("string operand on numeric column " + p.column);
    auto [query, mode] = operand_query(*str, p.op);
    enc.encode(query, mode,
               std::span<float>(code.data() + str_base, space.string_dim));
    code[flag_slot] = 1.0f;
  } else if (const auto* ref = std::get_if<ColumnRef>(&p.operand)) {
    int rhs = catalog.column_id(ref->name);
    if (rhs < 0) throw data_error("unknown column \"" + ref->name + "\"");
    // Column-valued operand: metadata-style one-hot folded into the string
    // slot.
    code[str_base + rhs % space.string_dim] = 1.0f;
    code[flag_slot] = 1.0f;
  } else {
    throw data_error(
        "IN must be rewritten to OR-of-equality before encoding");
  }
  return code;
}

size_t serialized_length(const PredicateNode& p) {
  if (p.kind == PredicateNode::Kind::Expr) return 1;
  size_t n = 1;
  for (const auto& c : p.children) n += serialized_length(*c) + 1;
  return n;
}

void serialize_rec(const PredicateNode& p, const FeatureSpace& space,
                   const StringEncoder& enc,
                   std::vector<std::vector<float>>& out) {
  if (p.kind == PredicateNode::Kind::Expr) {
    out.push_back(encode_leaf_code(p, space, enc));
    return;
  }
  std::vector<float> code(space.leaf_width(), 0.0f);
  code[p.kind == PredicateNode::Kind::And ? 0 : 1] = 1.0f;
  out.push_back(std::move(code));
  for (const auto& c : p.children) {
    serialize_rec(*c, space, enc, out);
    out.emplace_back(space.leaf_width(), 0.0f);  // backtrack sentinel
  }
}

}  // namespace

std::vector<std::vector<float>> serialize_predicate(const PredicateNode& pred,
                                                    const FeatureSpace& space,
                                                    const StringEncoder& enc) {
  size_t len = serialized_length(pred);
  if (len > static_cast<size_t>(space.max_pred_codes))
    throw data_error("predicate serializes to " + std::to_string(len) +
                     " codes, over the cap of " +
                     std::to_string(space.max_pred_codes));
  std::vector<std::vector<float>> out;
  out.reserve(len);
  serialize_rec(pred, space, enc, out);
  return out;
}

NodeFeatures featurize_node(const PlanNode& node, const FeatureSpace& space,
                            const StringEncoder& enc,
                            const SampleStore& store) {
  NodeFeatures f;
  f.O = encode_operation(node.op);
  f.M = encode_metadata(node, *space.catalog);
  if (node.predicate && is_scan(node.op))
    f.B = compute_sample_bitmap(*node.predicate, node.table, store, space);
  else
    f.B.assign(space.bitmap_width(), 0.0f);
  if (node.predicate) f.P = serialize_predicate(*node.predicate, space, enc);
  return f;
}

// ---------------------------------------------------------------------------
// Batched encoding
// ---------------------------------------------------------------------------

namespace {

// Emits leaf codes into `leaves` and pooling steps into `prog`; returns the
// index of the step producing this node's value.
int32_t build_program(const PredicateNode& p, const FeatureSpace& space,
                      const StringEncoder& enc,
                      std::vector<std::vector<float>>& leaves,
                      PredProgram& prog) {
  if (p.kind == PredicateNode::Kind::Expr) {
    leaves.push_back(encode_leaf_code(p, space, enc));
    prog.steps.push_back({PredProgram::Step::K::Leaf,
                          static_cast<int32_t>(leaves.size() - 1), 0});
    return static_cast<int32_t>(prog.steps.size() - 1);
  }
  if (p.children.size() != 2)
    throw data_error("predicate must be binarized before encoding");
  int32_t a = build_program(*p.children[0], space, enc, leaves, prog);
  int32_t b = build_program(*p.children[1], space, enc, leaves, prog);
  prog.steps.push_back({p.kind == PredicateNode::Kind::And
                            ? PredProgram::Step::K::Min
                            : PredProgram::Step::K::Max,
                        a, b});
  return static_cast<int32_t>(prog.steps.size() - 1);
}

MatF pack_rows(const std::vector<std::vector<float>>& rows, int width) {
  MatF m(static_cast<int>(rows.size()), width);
  for (size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<int>(rows[r].size()) != width)
      throw model_error("feature width mismatch while packing");
    std::memcpy(m.row(static_cast<int>(r)), rows[r].data(),
                sizeof(float) * width);
  }
  return m;
}

}  // namespace

EncodedNode encode_node(const PlanNode& node, const FeatureSpace& space,
                        const StringEncoder& enc, const SampleStore& store) {
  NodeFeatures f = featurize_node(node, space, enc, store);
  EncodedNode out;
  out.op = pack_rows({f.O}, space.op_width());
  out.meta = pack_rows({f.M}, space.meta_width());
  out.bitmap = pack_rows({f.B}, space.bitmap_width());
  std::vector<std::vector<float>> leaves;
  if (node.predicate) {
    // Leaf codes appear once in the pooling form; the DFS sequence above is
    // the transport form.
    build_program(*node.predicate, space, enc, leaves, out.pred);
  }
  out.pred_leaves = leaves.empty() ? MatF(0, space.leaf_width())
                                   : pack_rows(leaves, space.leaf_width());
  return out;
}

EncodedPlanBatch encode_plan_batch(std::span<const PlanTree> trees,
                                   const FeatureSpace& space,
                                   const StringEncoder& enc,
                                   const SampleStore& store) {
  EncodedPlanBatch batch;
  batch.n_trees = static_cast<int>(trees.size());

  struct Pending {
    const PlanNode* node;
  };
  std::vector<std::vector<const PlanNode*>> levels;
  std::vector<std::vector<std::pair<int32_t, int32_t>>> edges;

  levels.emplace_back();
  for (const auto& t : trees) {
    if (!t.root) throw data_error("cannot encode an empty plan");
    if (!is_binarized(*t.root))
      throw data_error("plans must be binarized before encoding");
    levels[0].push_back(t.root.get());
  }

  for (size_t l = 0; !levels[l].empty(); ++l) {
    levels.emplace_back();
    edges.emplace_back();
    auto& next = levels[l + 1];
    for (const PlanNode* n : levels[l]) {
      int32_t li = -1, ri = -1;
      if (!n->children.empty()) {
        if (n->children[0]) {
          li = static_cast<int32_t>(next.size());
          next.push_back(n->children[0].get());
        }
        if (n->children.size() > 1 && n->children[1]) {
          ri = static_cast<int32_t>(next.size());
          next.push_back(n->children[1].get());
        }
      }
      edges[l].emplace_back(li, ri);
    }
  }
  levels.pop_back();  // trailing empty level

  for (size_t l = 0; l < levels.size(); ++l) {
    LevelBlock block;
    std::vector<std::vector<float>> ops, metas, bitmaps, leaves;
    for (const PlanNode* n : levels[l]) {
      NodeFeatures f = featurize_node(*n, space, enc, store);
      ops.push_back(std::move(f.O));
      metas.push_back(std::move(f.M));
      bitmaps.push_back(std::move(f.B));
      PredProgram prog;
      if (n->predicate) build_program(*n->predicate, space, enc, leaves, prog);
      block.preds.push_back(std::move(prog));
      block.left.push_back(edges[l][block.preds.size() - 1].first);
      block.right.push_back(edges[l][block.preds.size() - 1].second);
    }
    block.ops = pack_rows(ops, space.op_width());
    block.meta = pack_rows(metas, space.meta_width());
    block.bitmaps = pack_rows(bitmaps, space.bitmap_width());
    block.pred_leaves = leaves.empty() ? MatF(0, space.leaf_width())
                                       : pack_rows(leaves, space.leaf_width());
    batch.levels.push_back(std::move(block));
  }

  batch.targets = MatF(batch.n_trees, 2);
  batch.has_targets = true;
  for (int i = 0; i < batch.n_trees; ++i) {
    const PlanNode& root = *trees[i].root;
    if (root.true_cost && root.true_card) {
      batch.targets(i, 0) = static_cast<float>(*root.true_cost);
      batch.targets(i, 1) = static_cast<float>(*root.true_card);
    } else {
      batch.has_targets = false;
    }
  }
  return batch;
}

}  // namespace planest
