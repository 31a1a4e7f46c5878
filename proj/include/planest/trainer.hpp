#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "planest/dataset.hpp"
#include "planest/featurize.hpp"
#include "planest/model.hpp"
#include "planest/plan.hpp"

namespace planest {

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct DatasetConfig {
  uint64_t seed = 1;
  int rows_main = 10000;    // "items"
  int rows_detail = 10000;  // "events", FK into items
  double correlation = 0.9; // target Pearson of items.val_a vs items.val_b
};

// Two-table schema joined on items.id = events.item_id. items carries a
// correlated numeric pair, an independent numeric column, and three string
// columns (word pairs, tags with reversed twins, date stamps).
Dataset generate_dataset(const DatasetConfig& cfg);

std::vector<IndexInfo> default_indexes();

double pearson(const std::vector<double>& a, const std::vector<double>& b);

// ---------------------------------------------------------------------------
// Workload generation
// ---------------------------------------------------------------------------

struct WorkloadConfig {
  int query_count = 1000;
  int min_tables = 1, max_tables = 2;
  int numeric_preds = 2;          // numeric expressions per scan
  double string_pred_prob = 0.5;  // chance a scan gets a string expression
  // Weights over {=, !=, LIKE, NOT LIKE, IN} for string expressions.
  std::vector<double> string_op_mix = {0.3, 0.2, 0.25, 0.15, 0.1};
  double sort_prob = 0.2;
  double agg_prob = 0.2;
  uint64_t seed = 7;
};

// Unlabeled plans: scans with random AND/OR predicate trees, left-deep joins
// over the FK graph, optional sort/aggregate root. Values and LIKE substrings
// are drawn from the dataset. Deterministic per query under the seed.
std::vector<PlanTree> generate_queries(const Dataset& ds,
                                       const WorkloadConfig& cfg);

// ---------------------------------------------------------------------------
// Reference executor
// ---------------------------------------------------------------------------

// Unit costs per tuple processed; the plan's cost is the sum over its nodes.
struct CostModel {
  double seq_scan = 1.0;     // per input tuple
  double index_scan = 2.0;   // per output tuple, plus log2(table) lookup
  double hash_build = 1.5;   // per left tuple
  double hash_probe = 1.0;   // per right tuple
  double merge_join = 1.2;   // per tuple of both inputs
  double nl_pair = 0.05;     // per compared pair
  double join_output = 0.1;  // per emitted tuple
  double sort_unit = 0.8;    // * n log2 n
  double agg_unit = 1.0;     // per input tuple
};

struct ExecLimits {
  uint64_t max_rows = 50'000'000;  // intermediate result cap
};

// Exact cardinalities by full evaluation, deterministic costs from the unit
// table. Returns a copy of the plan with true_card/true_cost on every node
// (card floored at 1, cost at 0.01 so q-error stays defined).
PlanTree execute_reference(const PlanTree& plan, const Dataset& ds,
                           const CostModel& costs = {},
                           const ExecLimits& limits = {});

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  float lr = 1e-3f;
  double omega = 1.0;
  int patience = 5;           // epochs without val-card improvement
  double val_fraction = 0.1;  // 90/10 split
  uint64_t seed = 99;
};

struct EpochStats {
  double train_loss = 0;
  double val_loss = 0;
  double val_card_qerr = 0;  // mean q-error in natural units
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = -1;
};

// Width-first mini-batch training with Adam; fits the normalizer on the
// training split, early-stops on the validation cardinality error, and leaves
// the best-epoch parameters in the model.
TrainResult train(EstimatorModel& model, TargetNormalizer& norm,
                  std::span<const PlanTree> examples, const StringEncoder& enc,
                  const SampleStore& store, const TrainConfig& cfg);

// Concatenates pre-encoded plans into one width-first batch.
EncodedPlanBatch merge_batches(std::span<const EncodedPlanBatch> parts);

// Loss-weight selection by k-fold cross validation over the fixed candidate
// grid. fold_error trains with the given weight and returns the validation
// error (cost q-error + card q-error); ties pick the smaller weight.
using FoldErrorFn = std::function<double(
    double omega, std::span<const PlanTree> train_part,
    std::span<const PlanTree> val_part)>;

double select_loss_weight(std::span<const PlanTree> data, int folds,
                          const FoldErrorFn& fold_error);

FoldErrorFn training_fold_error(const SchemaCatalog& catalog,
                                const StringEncoder& enc,
                                const SampleStore& store, ModelConfig mcfg,
                                TrainConfig tcfg);

// ---------------------------------------------------------------------------
// Histogram independence baseline
// ---------------------------------------------------------------------------

// Per-column equi-width histograms and exact string marginals; conjunctions
// multiply selectivities, joins use |L|*|R| / max(dv(a), dv(b)).
class IndependenceBaseline {
 public:
  IndependenceBaseline(const Dataset& ds, int buckets = 100);

  double leaf_selectivity(const PredicateNode& expr) const;
  double predicate_selectivity(const PredicateNode& pred) const;
  double estimate_card(const PlanNode& node) const;
  double estimate_cost(const PlanNode& node, const CostModel& costs = {}) const;

 private:
  struct NumericHist {
    double min = 0, max = 0;
    uint64_t n = 0, distinct = 0;
    std::vector<uint64_t> counts;
  };
  struct StringStats {
    uint64_t n = 0;
    std::map<std::string, uint64_t> counts;
  };
  std::map<std::string, NumericHist> numeric_;  // by qualified column
  std::map<std::string, StringStats> strings_;
  std::map<std::string, uint64_t> table_rows_;
  double column_distinct(const std::string& qualified) const;
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalReport {
  ErrorStats model_cost, model_card;
  ErrorStats base_cost, base_card;
  bool has_baseline = false;
  // Per-query rows: true/model/baseline values for both targets.
  std::vector<std::array<double, 6>> raw;  // tc, mc, bc, tr, mr, br

  std::string metrics_tsv() const;
  std::string raw_tsv() const;
};

EvalReport evaluate(const EstimatorModel& model, const TargetNormalizer& norm,
                    const IndependenceBaseline* baseline,
                    std::span<const PlanTree> labeled,
                    const StringEncoder& enc, const SampleStore& store,
                    MemoryPool* pool = nullptr);

}  // namespace planest
