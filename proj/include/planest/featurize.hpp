#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "planest/catalog.hpp"
#include "planest/dataset.hpp"
#include "planest/mat.hpp"
#include "planest/plan.hpp"
#include "planest/strings.hpp"

namespace planest {

// Feature widths; a pure function of the schema catalog and the encoding
// configuration, so re-encoding after a catalog reload is bit-identical.
struct FeatureSpace {
  const SchemaCatalog* catalog = nullptr;
  int string_dim = 64;     // operand embedding width
  int sample_size = 1000;  // sample bitmap length
  int max_pred_codes = 32; // longer predicate serializations are rejected

  int op_width() const { return kOpKindCount; }
  int meta_width() const {
    return static_cast<int>(catalog->tables.size() + catalog->columns.size() +
                            catalog->indexes.size());
  }
  // [kind(3) | operator(7) | column one-hot | numeric | string | type flag]
  int leaf_width() const {
    return 3 + kCmpOpCount + static_cast<int>(catalog->columns.size()) + 1 +
           string_dim + 1;
  }
  int bitmap_width() const { return sample_size; }
};

// Fills the operand slot of a predicate leaf for one query string.
class StringEncoder {
 public:
  virtual ~StringEncoder() = default;
  virtual void encode(std::string_view query, LookupMode mode,
                      std::span<float> out) const = 0;
  virtual std::string name() const = 0;
};

// Character-hash signature; order- and frequency-blind but needs no training.
class HashStringEncoder : public StringEncoder {
 public:
  void encode(std::string_view query, LookupMode mode,
              std::span<float> out) const override;
  std::string name() const override { return "hash"; }
};

// Longest-match dictionary vectors, falling back to the hash signature for
// strings no trie path covers.
class DictStringEncoder : public StringEncoder {
 public:
  explicit DictStringEncoder(const SubstringDictionary& dict)
      : dict_(&dict), tries_(build_tries(dict)) {}
  void encode(std::string_view query, LookupMode mode,
              std::span<float> out) const override;
  std::string name() const override { return "dict"; }

 private:
  const SubstringDictionary* dict_;
  TriePair tries_;
};

// Strips the outer % wildcards of a LIKE operand and classifies the lookup
// mode ("Din%" -> prefix, "%06%" -> contains, ...). Equality operands map to
// exact mode.
std::pair<std::string, LookupMode> operand_query(std::string_view operand,
                                                 CmpOp op);

// --- per-node features ------------------------------------------------------

std::vector<float> encode_operation(OpKind op);

// OR over the bits of every table, column, and index the node touches
// (including predicate columns and join column refs).
std::vector<float> encode_metadata(const PlanNode& node,
                                   const SchemaCatalog& catalog);

// (v - min) / (max - min) clamped to [0, 1]; degenerate columns map to 0.5.
float normalize_numeric(const ColumnInfo& col, double v);

// Exact evaluation of the predicate over the table's sample rows; bit i set
// iff sample row i satisfies it. Slots past the populated sample stay 0.
std::vector<float> compute_sample_bitmap(const PredicateNode& pred,
                                         std::string_view table,
                                         const SampleStore& store,
                                         const FeatureSpace& space);

// Depth-first serialization of a binarized predicate tree: one code per node
// in visit order plus one all-zero sentinel per backtrack edge. Injective on
// the predicate grammar.
std::vector<std::vector<float>> serialize_predicate(const PredicateNode& pred,
                                                    const FeatureSpace& space,
                                                    const StringEncoder& enc);

struct NodeFeatures {
  std::vector<float> O;                // operation one-hot
  std::vector<float> M;                // metadata bitmap
  std::vector<float> B;                // sample bitmap
  std::vector<std::vector<float>> P;   // serialized predicate codes
};

NodeFeatures featurize_node(const PlanNode& node, const FeatureSpace& space,
                            const StringEncoder& enc, const SampleStore& store);

// --- batched tensors --------------------------------------------------------

// Pooling recipe of one node's predicate over its leaf-code rows; steps are
// post-order, the last step is the root.
struct PredProgram {
  struct Step {
    enum class K : uint8_t { Leaf, Min, Max };
    K kind = K::Leaf;
    int32_t a = 0;  // Leaf: row in the level's leaf matrix; else step index
    int32_t b = 0;  // Min/Max: step index
  };
  std::vector<Step> steps;
  bool empty() const { return steps.empty(); }
};

// All nodes of one depth across the batch.
struct LevelBlock {
  MatF ops, meta, bitmaps;         // rows = nodes at this level
  MatF pred_leaves;                // all predicate leaf codes at this level
  std::vector<PredProgram> preds;  // per node; empty -> zero embedding
  std::vector<int32_t> left, right;  // rows in the next level, -1 for none
  int rows() const { return ops.rows; }
};

// Width-first encoding: levels[0] holds the batch roots (row i = tree i) and
// child edges point one level down.
struct EncodedPlanBatch {
  std::vector<LevelBlock> levels;
  MatF targets;  // n_trees x 2: true (cost, card) in natural units
  bool has_targets = false;
  int n_trees = 0;
};

EncodedPlanBatch encode_plan_batch(std::span<const PlanTree> trees,
                                   const FeatureSpace& space,
                                   const StringEncoder& enc,
                                   const SampleStore& store);

// Structure-only encoding of a single node (row count 1 matrices), shared by
// the recursive evaluation path.
struct EncodedNode {
  MatF op, meta, bitmap;  // 1 x width
  MatF pred_leaves;       // k x leaf_width
  PredProgram pred;
};

EncodedNode encode_node(const PlanNode& node, const FeatureSpace& space,
                        const StringEncoder& enc, const SampleStore& store);

}  // namespace planest
