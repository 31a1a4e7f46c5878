#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "planest/featurize.hpp"
#include "planest/nn.hpp"
#include "planest/plan.hpp"

namespace planest {

struct ModelConfig {
  int op_embed = 64;
  int meta_embed = 64;
  int bitmap_embed = 64;
  int pred_embed = 64;
  int hidden = 128;
  int head_hidden = 64;
  int string_dim = 64;
  int sample_size = 1000;
  int max_pred_codes = 32;
  uint64_t seed = 1;

  int embed_width() const {
    return op_embed + meta_embed + bitmap_embed + pred_embed;
  }
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

// Loss weight between the cost and cardinality tasks; chosen from the fixed
// candidate grid by cross validation.
inline constexpr double kLossWeightCandidates[] = {0.1, 0.2, 0.5, 1, 2, 5, 10};

// Q-error floor: normalized values are mapped to [eps, 1] before the ratio so
// the loss stays bounded and smooth almost everywhere.
inline constexpr double kQErrorEps = 1e-3;

// Min-max over the log of the labels; sigmoid outputs then span a log-linear
// range of natural units.
struct TargetNormalizer {
  double log_cost_min = 0, log_cost_max = 0;
  double log_card_min = 0, log_card_max = 0;
  bool fitted = false;

  static TargetNormalizer fit(std::span<const PlanTree> labeled);

  double norm_cost(double v) const;
  double norm_card(double v) const;
  double denorm_cost(double normalized) const;
  double denorm_card(double normalized) const;
};

// max(a,b)/min(a,b); symmetric, >= 1. Throws on nonpositive input.
double qerror(double true_value, double estimate);

struct ErrorStats {
  double median = 0, p90 = 0, p95 = 0, p99 = 0, max = 0, mean = 0;
};

// Kth percentile statistic = mean of the sorted errors from 1-based index
// ceil(K*n/100) upward (the top-(100-K)% tail, boundary included).
ErrorStats compute_metrics(std::vector<double> qerrors);

// Per-node output of the representation layer.
struct RepState {
  std::vector<float> G;  // long memory
  std::vector<float> R;  // sub-plan representation
};

class MemoryPool;
struct LoadedModel;

// Three-layer tree model: per-node feature embedding (with min/max pooling
// over predicate trees), a shared recurrent cell applied bottom-up with child
// averaging, and the two estimation heads.
class EstimatorModel {
 public:
  EstimatorModel(ModelConfig cfg, FeatureSpace space);

  const ModelConfig& config() const { return cfg_; }
  const FeatureSpace& space() const { return space_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  uint64_t cell_invocations() const { return cell_invocations_; }
  void reset_cell_invocations() { cell_invocations_ = 0; }

  template <class T>
  struct Forward {
    typename Tape<T>::Id cost;       // (n,1) normalized, in (0,1)
    typename Tape<T>::Id card;       // (n,1)
    typename Tape<T>::Id root_repr;  // (n,hidden)
  };

  // Binds parameter values (in store order) onto a tape.
  template <class T>
  std::vector<typename Tape<T>::Id> bind(Tape<T>& tape,
                                         const std::vector<Mat<T>>& values)
      const;
  std::vector<Tape<float>::Id> bind_current(Tape<float>& tape) const;

  // Level-wise batched forward: one cell invocation per populated level.
  template <class T>
  Forward<T> forward_batch(Tape<T>& tape, const EncodedPlanBatch& batch,
                           const std::vector<typename Tape<T>::Id>& params)
      const;

  // Mean over the batch of omega * qerror(cost) + qerror(card), computed on
  // normalized targets (natural units go through the normalizer first).
  template <class T>
  typename Tape<T>::Id build_loss(Tape<T>& tape, const Forward<T>& fwd,
                                  const Mat<T>& normalized_targets,
                                  double omega) const;

  // Recursive bottom-up evaluation of one plan; memoizes every sub-plan in
  // the pool when one is given. One cell invocation per evaluated node.
  RepState represent_plan(const PlanNode& root, const StringEncoder& enc,
                          const SampleStore& store,
                          MemoryPool* pool = nullptr) const;

  // Estimation heads on any sub-plan state, denormalized to natural units.
  std::pair<double, double> estimate(const RepState& state,
                                     const TargetNormalizer& norm) const;

  // Test hooks: concrete values of the embedding layer on one node.
  MatF embed_predicate_values(const MatF& leaf_codes,
                              const PredProgram& prog) const;
  MatF embed_node_values(const EncodedNode& node) const;

  void save_checkpoint(const std::string& path, const TargetNormalizer& norm,
                       const std::string& encoder_name) const;
  static LoadedModel load_checkpoint(const std::string& path,
                                     const SchemaCatalog& catalog);

 private:
  ModelConfig cfg_;
  FeatureSpace space_;
  ParamStore params_;
  mutable uint64_t cell_invocations_ = 0;

  int pid(const std::string& name) const;  // index in store order

  template <class T>
  typename Tape<T>::Id embed_predicate_graph(
      Tape<T>& tape, const std::vector<typename Tape<T>::Id>& params,
      typename Tape<T>::Id leaf_emb, const PredProgram& prog) const;

  template <class T>
  typename Tape<T>::Id embed_level(
      Tape<T>& tape, const std::vector<typename Tape<T>::Id>& params,
      const LevelBlock& block) const;

  friend struct RecursiveEvaluator;
};

struct LoadedModel {
  EstimatorModel model;
  TargetNormalizer normalizer;
  std::string encoder_name;
};

FeatureSpace feature_space_for(const ModelConfig& cfg,
                               const SchemaCatalog& catalog);

}  // namespace planest
