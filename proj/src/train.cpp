#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "planest/pool.hpp"
#include "planest/trainer.hpp"

namespace planest {

EncodedPlanBatch merge_batches(std::span<const EncodedPlanBatch> parts) {
  if (parts.empty()) throw data_error("nothing to merge");
  EncodedPlanBatch out;
  size_t depth = 0;
  for (const auto& p : parts) depth = std::max(depth, p.levels.size());

  out.has_targets = true;
  for (const auto& p : parts) {
    out.n_trees += p.n_trees;
    out.has_targets = out.has_targets && p.has_targets;
  }
  out.targets = MatF(out.n_trees, 2);
  int tree_at = 0;
  for (const auto& p : parts)
    for (int i = 0; i < p.n_trees; ++i, ++tree_at) {
      out.targets(tree_at, 0) = p.targets(i, 0);
      out.targets(tree_at, 1) = p.targets(i, 1);
    }

  for (size_t l = 0; l < depth; ++l) {
    // Row offsets of each part within this level and the next.
    std::vector<int32_t> here(parts.size(), 0), below(parts.size(), 0);
    int32_t acc_here = 0, acc_below = 0;
    int leaf_total = 0;
    for (size_t p = 0; p < parts.size(); ++p) {
      here[p] = acc_here;
      below[p] = acc_below;
      if (l < parts[p].levels.size()) {
        acc_here += parts[p].levels[l].rows();
        leaf_total += parts[p].levels[l].pred_leaves.rows;
      }
      if (l + 1 < parts[p].levels.size())
        acc_below += parts[p].levels[l + 1].rows();
    }

    const auto& any = parts[0].levels[0];
    LevelBlock block;
    block.ops = MatF(acc_here, any.ops.cols);
    block.meta = MatF(acc_here, any.meta.cols);
    block.bitmaps = MatF(acc_here, any.bitmaps.cols);
    block.pred_leaves = MatF(leaf_total, any.pred_leaves.cols);

    int row_at = 0, leaf_at = 0;
    for (size_t p = 0; p < parts.size(); ++p) {
      if (l >= parts[p].levels.size()) continue;
      const LevelBlock& src = parts[p].levels[l];
      for (int r = 0; r < src.rows(); ++r, ++row_at) {
        std::copy(src.ops.row(r), src.ops.row(r) + src.ops.cols,
                  block.ops.row(row_at));
        std::copy(src.meta.row(r), src.meta.row(r) + src.meta.cols,
                  block.meta.row(row_at));
        std::copy(src.bitmaps.row(r), src.bitmaps.row(r) + src.bitmaps.cols,
                  block.bitmaps.row(row_at));
        PredProgram prog = src.preds[r];
        for (auto& step : prog.steps)
          if (step.kind == PredProgram::Step::K::Leaf) step.a += leaf_at;
        block.preds.push_back(std::move(prog));
        auto shift = [&](int32_t idx) {
          return idx < 0 ? idx : idx + below[p];
        };
        block.left.push_back(shift(src.left[r]));
        block.right.push_back(shift(src.right[r]));
      }
      for (int r = 0; r < src.pred_leaves.rows; ++r, ++leaf_at)
        std::copy(src.pred_leaves.row(r),
                  src.pred_leaves.row(r) + src.pred_leaves.cols,
                  block.pred_leaves.row(leaf_at));
    }
    out.levels.push_back(std::move(block));
  }
  return out;
}

namespace {

MatF normalized_targets(const MatF& raw, const TargetNormalizer& norm) {
  MatF out(raw.rows, 2);
  for (int i = 0; i < raw.rows; ++i) {
    out(i, 0) = static_cast<float>(norm.norm_cost(raw(i, 0)));
    out(i, 1) = static_cast<float>(norm.norm_card(raw(i, 1)));
  }
  return out;
}

struct BatchEval {
  double loss = 0;
  std::vector<double> cost_est, card_est;  // natural units
};

BatchEval eval_batch(const EstimatorModel& model, const EncodedPlanBatch& batch,
                     const TargetNormalizer& norm, double omega) {
  Tape<float> tape;
  auto params = model.bind_current(tape);
  auto fwd = model.forward_batch(tape, batch, params);
  auto loss =
      model.build_loss(tape, fwd, normalized_targets(batch.targets, norm),
                       omega);
  BatchEval out;
  out.loss = tape.scalar(loss);
  const MatF& c = tape.value(fwd.cost);
  const MatF& d = tape.value(fwd.card);
  for (int i = 0; i < c.rows; ++i) {
    out.cost_est.push_back(norm.denorm_cost(c(i, 0)));
    out.card_est.push_back(norm.denorm_card(d(i, 0)));
  }
  return out;
}

}  // namespace

TrainResult train(EstimatorModel& model, TargetNormalizer& norm,
                  std::span<const PlanTree> examples, const StringEncoder& enc,
                  const SampleStore& store, const TrainConfig& cfg) {
  if (examples.empty()) throw data_error("no training examples");

  std::mt19937_64 rng(cfg.seed);
  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  for (size_t i = 0; i + 1 < order.size(); ++i) {
    size_t j = i + static_cast<size_t>(unit_uniform(rng) *
                                       static_cast<double>(order.size() - i));
    std::swap(order[i], order[j]);
  }
  size_t val_n = static_cast<size_t>(
      std::round(cfg.val_fraction * static_cast<double>(examples.size())));
  val_n = std::min(val_n, examples.size() - 1);
  std::vector<size_t> val_idx(order.begin(), order.begin() + val_n);
  std::vector<size_t> train_idx(order.begin() + val_n, order.end());

  std::vector<PlanTree> train_set;
  for (size_t i : train_idx) train_set.push_back(examples[i]);
  norm = TargetNormalizer::fit(train_set);

  // Encode every plan once; batches are assembled per epoch by merging.
  std::vector<EncodedPlanBatch> encoded(examples.size());
  for (size_t i = 0; i < examples.size(); ++i) {
    encoded[i] = encode_plan_batch(std::span(&examples[i], 1), model.space(),
                                   enc, store);
    if (!encoded[i].has_targets)
      throw data_error("training plans must carry true_cost and true_card");
  }
  auto assemble = [&](std::span<const size_t> ids) {
    std::vector<EncodedPlanBatch> parts;
    parts.reserve(ids.size());
    for (size_t i : ids) parts.push_back(encoded[i]);
    return merge_batches(parts);
  };

  std::vector<EncodedPlanBatch> val_batches;
  for (size_t at = 0; at < val_idx.size(); at += cfg.batch_size)
    val_batches.push_back(assemble(std::span(val_idx).subspan(
        at, std::min<size_t>(cfg.batch_size, val_idx.size() - at))));

  AdamState adam;
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<MatF> best_params;
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = 0; i + 1 < train_idx.size(); ++i) {
      size_t j = i + static_cast<size_t>(
                         unit_uniform(rng) *
                         static_cast<double>(train_idx.size() - i));
      std::swap(train_idx[i], train_idx[j]);
    }

    double epoch_loss = 0;
    size_t batches = 0;
    for (size_t at = 0; at < train_idx.size(); at += cfg.batch_size) {
      auto batch = assemble(std::span(train_idx).subspan(
          at, std::min<size_t>(cfg.batch_size, train_idx.size() - at)));
      Tape<float> tape;
      auto params = model.bind_current(tape);
      auto fwd = model.forward_batch(tape, batch, params);
      Tape<float>::Id loss;
      try {
        loss = model.build_loss(
            tape, fwd, normalized_targets(batch.targets, norm), cfg.omega);
        tape.backward(loss);
      } catch (const model_error& e) {
        throw model_error("training diverged at epoch " +
                          std::to_string(epoch) + ", batch " +
                          std::to_string(batches) + ": " + e.what());
      }
      epoch_loss += tape.scalar(loss);
      ++batches;

      std::vector<MatF*> values;
      std::vector<const MatF*> grads;
      for (size_t p = 0; p < params.size(); ++p) {
        values.push_back(&model.params().entries[p].second);
        grads.push_back(&tape.gradient(params[p]));
      }
      adam_step(values, grads, adam, adam_cfg);
    }

    EpochStats stats;
    stats.train_loss = batches ? epoch_loss / static_cast<double>(batches) : 0;
    std::vector<double> val_q;
    double val_loss = 0;
    for (size_t b = 0; b < val_batches.size(); ++b) {
      BatchEval ev = eval_batch(model, val_batches[b], norm, cfg.omega);
      val_loss += ev.loss;
      for (size_t i = 0; i < ev.card_est.size(); ++i)
        val_q.push_back(
            qerror(val_batches[b].targets(static_cast<int>(i), 1),
                   ev.card_est[i]));
    }
    stats.val_loss =
        val_batches.empty() ? 0 : val_loss / static_cast<double>(val_batches.size());
    stats.val_card_qerr =
        val_q.empty() ? 0
                      : std::accumulate(val_q.begin(), val_q.end(), 0.0) /
                            static_cast<double>(val_q.size());
    result.history.push_back(stats);

    double marker = val_q.empty() ? stats.train_loss : stats.val_card_qerr;
    if (marker < best_val - 1e-9) {
      best_val = marker;
      result.best_epoch = epoch;
      since_best = 0;
      best_params.clear();
      for (const auto& [name, m] : model.params().entries)
        best_params.push_back(m);
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  if (!best_params.empty()) model.params().assign(best_params);
  return result;
}

double select_loss_weight(std::span<const PlanTree> data, int folds,
                          const FoldErrorFn& fold_error) {
  if (folds < 2) throw data_error("cross validation needs at least 2 folds");
  if (data.size() < static_cast<size_t>(folds))
    throw data_error("not enough examples for the requested folds");

  double best_omega = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (double omega : kLossWeightCandidates) {
    double total = 0;
    for (int f = 0; f < folds; ++f) {
      size_t lo = data.size() * f / folds;
      size_t hi = data.size() * (f + 1) / folds;
      std::vector<PlanTree> train_part;
      for (size_t i = 0; i < data.size(); ++i)
        if (i < lo || i >= hi) train_part.push_back(data[i]);
      total += fold_error(omega, train_part, data.subspan(lo, hi - lo));
    }
    double mean = total / folds;
    if (mean < best_err - 1e-12) {
      best_err = mean;
      best_omega = omega;
    }
  }
  return best_omega;
}

FoldErrorFn training_fold_error(const SchemaCatalog& catalog,
                                const StringEncoder& enc,
                                const SampleStore& store, ModelConfig mcfg,
                                TrainConfig tcfg) {
  return [&catalog, &enc, &store, mcfg, tcfg](
             double omega, std::span<const PlanTree> train_part,
             std::span<const PlanTree> val_part) {
    FeatureSpace space = feature_space_for(mcfg, catalog);
    EstimatorModel model(mcfg, space);
    TargetNormalizer norm;
    TrainConfig cfg = tcfg;
    cfg.omega = omega;
    train(model, norm, train_part, enc, store, cfg);
    double total = 0;
    for (const auto& t : val_part) {
      RepState state = model.represent_plan(*t.root, enc, store);
      auto [cost, card] = model.estimate(state, norm);
      total += qerror(*t.root->true_cost, cost) +
               qerror(*t.root->true_card, card);
    }
    return total / static_cast<double>(val_part.size());
  };
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

std::string stats_row(const char* target, const char* method,
                      const ErrorStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%s\t%s\t%.6g\t%.6g\t%.6g\t%.6g\t%.6g\t%.6g\n", target, method,
                s.median, s.p90, s.p95, s.p99, s.max, s.mean);
  return buf;
}

}  // namespace

std::string EvalReport::metrics_tsv() const {
  std::string out = "target\tmethod\tmedian\tp90\tp95\tp99\tmax\tmean\n";
  out += stats_row("cost", "model", model_cost);
  out += stats_row("card", "model", model_card);
  if (has_baseline) {
    out += stats_row("cost", "baseline", base_cost);
    out += stats_row("card", "baseline", base_card);
  }
  return out;
}

std::string EvalReport::raw_tsv() const {
  std::string out =
      "query\ttrue_cost\tmodel_cost\tbaseline_cost\ttrue_card\tmodel_card\t"
      "baseline_card\n";
  char buf[256];
  for (size_t i = 0; i < raw.size(); ++i) {
    std::snprintf(buf, sizeof buf,
                  "%zu\t%.6g\t%.6g\t%.6g\t%.6g\t%.6g\t%.6g\n", i, raw[i][0],
                  raw[i][1], raw[i][2], raw[i][3], raw[i][4], raw[i][5]);
    out += buf;
  }
  return out;
}

EvalReport evaluate(const EstimatorModel& model, const TargetNormalizer& norm,
                    const IndependenceBaseline* baseline,
                    std::span<const PlanTree> labeled,
                    const StringEncoder& enc, const SampleStore& store,
                    MemoryPool* pool) {
  if (labeled.empty()) throw data_error("no queries to evaluate");
  EvalReport report;
  report.has_baseline = baseline != nullptr;
  std::vector<double> mc, mr, bc, br;
  for (const auto& t : labeled) {
    if (!t.root || !t.root->true_cost || !t.root->true_card)
      throw data_error("evaluation needs labeled plans");
    double tc = *t.root->true_cost, tr = *t.root->true_card;
    RepState state = model.represent_plan(*t.root, enc, store, pool);
    auto [cost, card] = model.estimate(state, norm);
    mc.push_back(qerror(tc, cost));
    mr.push_back(qerror(tr, card));
    double bcost = 0, bcard = 0;
    if (baseline) {
      bcost = baseline->estimate_cost(*t.root);
      bcard = baseline->estimate_card(*t.root);
      bc.push_back(qerror(tc, bcost));
      br.push_back(qerror(tr, bcard));
    }
    report.raw.push_back({tc, cost, bcost, tr, card, bcard});
  }
  report.model_cost = compute_metrics(mc);
  report.model_card = compute_metrics(mr);
  if (baseline) {
    report.base_cost = compute_metrics(bc);
    report.base_card = compute_metrics(br);
  }
  return report;
}

}  // namespace planest
