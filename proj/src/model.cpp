#include "planest/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "planest/binio.hpp"
#include "planest/pool.hpp"

namespace planest {

using nlohmann::json;

std::string ModelConfig::to_json() const {
  json j{{"op_embed", op_embed},       {"meta_embed", meta_embed},
         {"bitmap_embed", bitmap_embed}, {"pred_embed", pred_embed},
         {"hidden", hidden},           {"head_hidden", head_hidden},
         {"string_dim", string_dim},   {"sample_size", sample_size},
         {"max_pred_codes", max_pred_codes}, {"seed", seed}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig c;
  c.op_embed = j.at("op_embed").get<int>();
  c.meta_embed = j.at("meta_embed").get<int>();
  c.bitmap_embed = j.at("bitmap_embed").get<int>();
  c.pred_embed = j.at("pred_embed").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.head_hidden = j.at("head_hidden").get<int>();
  c.string_dim = j.at("string_dim").get<int>();
  c.sample_size = j.at("sample_size").get<int>();
  c.max_pred_codes = j.at("max_pred_codes").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

FeatureSpace feature_space_for(const ModelConfig& cfg,
                               const SchemaCatalog& catalog) {
  FeatureSpace space;
  space.catalog = &catalog;
  space.string_dim = cfg.string_dim;
  space.sample_size = cfg.sample_size;
  space.max_pred_codes = cfg.max_pred_codes;
  return space;
}

// ---------------------------------------------------------------------------
// Targets, q-error, metrics
// ---------------------------------------------------------------------------

TargetNormalizer TargetNormalizer::fit(std::span<const PlanTree> labeled) {
  TargetNormalizer n;
  bool first = true;
  for (const auto& t : labeled) {
    if (!t.root || !t.root->true_cost || !t.root->true_card)
      throw data_error("normalizer needs labeled roots");
    double lc = std::log(*t.root->true_cost);
    double lr = std::log(*t.root->true_card);
    if (first) {
      n.log_cost_min = n.log_cost_max = lc;
      n.log_card_min = n.log_card_max = lr;
      first = false;
    } else {
      n.log_cost_min = std::min(n.log_cost_min, lc);
      n.log_cost_max = std::max(n.log_cost_max, lc);
      n.log_card_min = std::min(n.log_card_min, lr);
      n.log_card_max = std::max(n.log_card_max, lr);
    }
  }
  if (first) throw data_error("cannot fit a normalizer on no examples");
  // Degenerate ranges still need an invertible map.
  if (n.log_cost_max - n.log_cost_min < 1e-12) {
    n.log_cost_min -= 1.0;
    n.log_cost_max += 1.0;
  }
  if (n.log_card_max - n.log_card_min < 1e-12) {
    n.log_card_min -= 1.0;
    n.log_card_max += 1.0;
  }
  n.fitted = true;
  return n;
}

namespace {

double norm_log(double v, double lo, double hi) {
  if (v <= 0) throw data_error("labels must be positive");
  return std::clamp((std::log(v) - lo) / (hi - lo), 0.0, 1.0);
}

double denorm_log(double x, double lo, double hi) {
  return std::exp(x * (hi - lo) + lo);
}

}  // namespace

double TargetNormalizer::norm_cost(double v) const {
  return norm_log(v, log_cost_min, log_cost_max);
}
double TargetNormalizer::norm_card(double v) const {
  return norm_log(v, log_card_min, log_card_max);
}
double TargetNormalizer::denorm_cost(double x) const {
  return denorm_log(x, log_cost_min, log_cost_max);
}
double TargetNormalizer::denorm_card(double x) const {
  return denorm_log(x, log_card_min, log_card_max);
}

double qerror(double true_value, double estimate) {
  if (true_value <= 0 || estimate <= 0)
    throw data_error("q-error needs positive values");
  return std::max(true_value, estimate) / std::min(true_value, estimate);
}

ErrorStats compute_metrics(std::vector<double> q) {
  if (q.empty()) throw data_error("no errors to summarize");
  std::sort(q.begin(), q.end());
  const size_t n = q.size();
  ErrorStats s;
  s.max = q.back();
  double sum = 0;
  for (double v : q) sum += v;
  s.mean = sum / static_cast<double>(n);
  s.median = n % 2 == 1 ? q[n / 2] : 0.5 * (q[n / 2 - 1] + q[n / 2]);
  auto tail_mean = [&](double k) {
    size_t b = static_cast<size_t>(
        std::ceil(k / 100.0 * static_cast<double>(n)));
    b = std::max<size_t>(b, 1);
    double acc = 0;
    for (size_t i = b - 1; i < n; ++i) acc += q[i];
    return acc / static_cast<double>(n - b + 1);
  };
  s.p90 = tail_mean(90);
  s.p95 = tail_mean(95);
  s.p99 = tail_mean(99);
  return s;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

EstimatorModel::EstimatorModel(ModelConfig cfg, FeatureSpace space)
    : cfg_(cfg), space_(space) {
  std::mt19937_64 rng(cfg_.seed);
  const int e = cfg_.embed_width();
  const int h = cfg_.hidden;
  const int cell_in = h + e;

  params_.add_weight("emb.op.W", cfg_.op_embed, space_.op_width(), rng);
  params_.add_bias("emb.op.b", cfg_.op_embed);
  params_.add_weight("emb.meta.W", cfg_.meta_embed, space_.meta_width(), rng);
  params_.add_bias("emb.meta.b", cfg_.meta_embed);
  params_.add_weight("emb.bitmap.W", cfg_.bitmap_embed, space_.bitmap_width(),
                     rng);
  params_.add_bias("emb.bitmap.b", cfg_.bitmap_embed);
  params_.add_weight("emb.pred.W", cfg_.pred_embed, space_.leaf_width(), rng);
  params_.add_bias("emb.pred.b", cfg_.pred_embed);
  for (const char* gate : {"f", "k1", "r", "k2"}) {
    params_.add_weight("cell." + std::string(gate) + ".W", h, cell_in, rng);
    params_.add_bias("cell." + std::string(gate) + ".b", h);
  }
  for (const char* head : {"cost", "card"}) {
    params_.add_weight("head." + std::string(head) + ".hidden.W",
                       cfg_.head_hidden, h, rng);
    params_.add_bias("head." + std::string(head) + ".hidden.b",
                     cfg_.head_hidden);
    params_.add_weight("head." + std::string(head) + ".out.W", 1,
                       cfg_.head_hidden, rng);
    params_.add_bias("head." + std::string(head) + ".out.b", 1);
  }
}

int EstimatorModel::pid(const std::string& name) const {
  for (size_t i = 0; i < params_.entries.size(); ++i)
    if (params_.entries[i].first == name) return static_cast<int>(i);
  throw model_error("unknown parameter " + name);
}

template <class T>
std::vector<typename Tape<T>::Id> EstimatorModel::bind(
    Tape<T>& tape, const std::vector<Mat<T>>& values) const {
  if (values.size() != params_.entries.size())
    throw model_error("parameter value count mismatch");
  std::vector<typename Tape<T>::Id> ids;
  ids.reserve(values.size());
  for (const auto& v : values) ids.push_back(tape.param(v));
  return ids;
}

std::vector<Tape<float>::Id> EstimatorModel::bind_current(
    Tape<float>& tape) const {
  std::vector<Tape<float>::Id> ids;
  ids.reserve(params_.entries.size());
  for (const auto& [name, m] : params_.entries) ids.push_back(tape.param(m));
  return ids;
}

// Min/max pooling over the leaf embeddings, following the predicate tree.
template <class T>
typename Tape<T>::Id EstimatorModel::embed_predicate_graph(
    Tape<T>& tape, const std::vector<typename Tape<T>::Id>& params,
    typename Tape<T>::Id leaf_emb, const PredProgram& prog) const {
  using Id = typename Tape<T>::Id;
  std::vector<Id> results(prog.steps.size());
  for (size_t i = 0; i < prog.steps.size(); ++i) {
    const auto& step = prog.steps[i];
    switch (step.kind) {
      case PredProgram::Step::K::Leaf:
        results[i] = tape.gather_rows(leaf_emb, {step.a});
        break;
      case PredProgram::Step::K::Min:
        results[i] = tape.pmin(results[step.a], results[step.b]);
        break;
      case PredProgram::Step::K::Max:
        results[i] = tape.pmax(results[step.a], results[step.b]);
        break;
    }
  }
  return results.back();
}

template <class T>
typename Tape<T>::Id EstimatorModel::embed_level(
    Tape<T>& tape, const std::vector<typename Tape<T>::Id>& params,
    const LevelBlock& block) const {
  using Id = typename Tape<T>::Id;
  auto P = [&](const char* name) { return params[pid(name)]; };

  Id ops = tape.input(block.ops.template cast<T>());
  Id meta = tape.input(block.meta.template cast<T>());
  Id bitmaps = tape.input(block.bitmaps.template cast<T>());
  Id op_e = tape.relu(tape.affine(P("emb.op.W"), P("emb.op.b"), ops));
  Id meta_e = tape.relu(tape.affine(P("emb.meta.W"), P("emb.meta.b"), meta));
  Id bm_e =
      tape.relu(tape.affine(P("emb.bitmap.W"), P("emb.bitmap.b"), bitmaps));

  // Leaf affine carries no activation; AND/OR pool elementwise.
  Id leaf_emb = -1;
  if (block.pred_leaves.rows > 0) {
    Id leaves = tape.input(block.pred_leaves.template cast<T>());
    leaf_emb = tape.affine(P("emb.pred.W"), P("emb.pred.b"), leaves);
  }
  Id zero_pred = tape.zeros(1, cfg_.pred_embed);
  std::vector<Id> rows;
  rows.reserve(block.preds.size());
  for (const auto& prog : block.preds) {
    if (prog.empty())
      rows.push_back(zero_pred);
    else
      rows.push_back(embed_predicate_graph(tape, params, leaf_emb, prog));
  }
  Id pred_e = tape.concat_rows(rows);

  std::array<Id, 4> parts{op_e, meta_e, bm_e, pred_e};
  return tape.concat_cols(parts);
}

template <class T>
EstimatorModel::Forward<T> EstimatorModel::forward_batch(
    Tape<T>& tape, const EncodedPlanBatch& batch,
    const std::vector<typename Tape<T>::Id>& params) const {
  using Id = typename Tape<T>::Id;
  if (batch.levels.empty()) throw model_error("empty batch");
  auto P = [&](const char* name) { return params[pid(name)]; };
  const int h = cfg_.hidden;

  CellParamIds<T> cell{P("cell.f.W"),  P("cell.f.b"),  P("cell.k1.W"),
                       P("cell.k1.b"), P("cell.r.W"),  P("cell.r.b"),
                       P("cell.k2.W"), P("cell.k2.b")};

  Id g_below = -1, r_below = -1;
  for (int l = static_cast<int>(batch.levels.size()) - 1; l >= 0; --l) {
    const LevelBlock& block = batch.levels[l];
    Id embed = embed_level(tape, params, block);
    Id g_prev, r_prev;
    if (l + 1 < static_cast<int>(batch.levels.size())) {
      Id gl = tape.gather_rows(g_below, block.left);
      Id gr = tape.gather_rows(g_below, block.right);
      Id rl = tape.gather_rows(r_below, block.left);
      Id rr = tape.gather_rows(r_below, block.right);
      g_prev = tape.scale_shift(tape.add(gl, gr), T(0.5), T(0));
      r_prev = tape.scale_shift(tape.add(rl, rr), T(0.5), T(0));
    } else {
      g_prev = tape.zeros(block.rows(), h);
      r_prev = tape.zeros(block.rows(), h);
    }
    auto [g, r] = lstm_cell(tape, cell, embed, g_prev, r_prev,
                            &cell_invocations_);
    g_below = g;
    r_below = r;
  }

  Forward<T> out;
  out.root_repr = r_below;
  Id cost_h = tape.relu(
      tape.affine(P("head.cost.hidden.W"), P("head.cost.hidden.b"), r_below));
  out.cost = tape.sigmoid(
      tape.affine(P("head.cost.out.W"), P("head.cost.out.b"), cost_h));
  Id card_h = tape.relu(
      tape.affine(P("head.card.hidden.W"), P("head.card.hidden.b"), r_below));
  out.card = tape.sigmoid(
      tape.affine(P("head.card.out.W"), P("head.card.out.b"), card_h));
  return out;
}

template <class T>
typename Tape<T>::Id EstimatorModel::build_loss(Tape<T>& tape,
                                                const Forward<T>& fwd,
                                                const Mat<T>& targets,
                                                double omega) const {
  using Id = typename Tape<T>::Id;
  const int n = targets.rows;
  if (targets.cols != 2 || tape.value(fwd.cost).rows != n)
    throw model_error("target shape mismatch");
  Mat<T> cost_t(n, 1), card_t(n, 1);
  for (int i = 0; i < n; ++i) {
    cost_t(i, 0) = targets(i, 0);
    card_t(i, 0) = targets(i, 1);
  }
  const T a = T(1 - kQErrorEps), b = T(kQErrorEps);
  auto squeeze = [&](Id x) { return tape.scale_shift(x, a, b); };
  Id tc = squeeze(tape.input(std::move(cost_t)));
  Id td = squeeze(tape.input(std::move(card_t)));
  Id pc = squeeze(fwd.cost);
  Id pd = squeeze(fwd.card);
  Id qc = tape.div(tape.pmax(pc, tc), tape.pmin(pc, tc));
  Id qd = tape.div(tape.pmax(pd, td), tape.pmin(pd, td));
  return tape.mean_all(
      tape.add(tape.scale_shift(qc, T(omega), T(0)), qd));
}

template std::vector<Tape<float>::Id> EstimatorModel::bind(
    Tape<float>&, const std::vector<MatF>&) const;
template std::vector<Tape<double>::Id> EstimatorModel::bind(
    Tape<double>&, const std::vector<MatD>&) const;
template EstimatorModel::Forward<float> EstimatorModel::forward_batch(
    Tape<float>&, const EncodedPlanBatch&,
    const std::vector<Tape<float>::Id>&) const;
template EstimatorModel::Forward<double> EstimatorModel::forward_batch(
    Tape<double>&, const EncodedPlanBatch&,
    const std::vector<Tape<double>::Id>&) const;
template Tape<float>::Id EstimatorModel::build_loss(
    Tape<float>&, const Forward<float>&, const MatF&, double) const;
template Tape<double>::Id EstimatorModel::build_loss(
    Tape<double>&, const Forward<double>&, const MatD&, double) const;

// ---------------------------------------------------------------------------
// Recursive evaluation
// ---------------------------------------------------------------------------

namespace {

struct RecursiveCtx {
  Tape<float>* tape;
  std::vector<Tape<float>::Id> params;
  const EstimatorModel* model;
  const StringEncoder* enc;
  const SampleStore* store;
  MemoryPool* pool;
};

}  // namespace

struct RecursiveEvaluator {
  static std::pair<Tape<float>::Id, Tape<float>::Id> eval(RecursiveCtx& ctx,
                                                          const PlanNode& n) {
    Tape<float>& tape = *ctx.tape;
    const EstimatorModel& m = *ctx.model;
    const int h = m.cfg_.hidden;

    PlanDigest digest;
    if (ctx.pool) {
      digest = canonical_hash(n);
      if (auto hit = ctx.pool->get(digest)) {
        MatF g(1, h), r(1, h);
        std::copy(hit->state.G.begin(), hit->state.G.end(), g.d.begin());
        std::copy(hit->state.R.begin(), hit->state.R.end(), r.d.begin());
        return {tape.input(std::move(g)), tape.input(std::move(r))};
      }
    }

    Tape<float>::Id g_prev, r_prev;
    if (n.children.empty()) {
      g_prev = tape.zeros(1, h);
      r_prev = tape.zeros(1, h);
    } else {
      auto fuse = [&](Tape<float>::Id a, Tape<float>::Id b) {
        return tape.scale_shift(tape.add(a, b), 0.5f, 0.0f);
      };
      auto zero = [&] { return tape.zeros(1, h); };
      std::pair<Tape<float>::Id, Tape<float>::Id> left =
          n.children[0] ? eval(ctx, *n.children[0])
                        : std::pair{zero(), zero()};
      std::pair<Tape<float>::Id, Tape<float>::Id> right =
          n.children.size() > 1 && n.children[1]
              ? eval(ctx, *n.children[1])
              : std::pair{zero(), zero()};
      g_prev = fuse(left.first, right.first);
      r_prev = fuse(left.second, right.second);
    }

    EncodedNode en = encode_node(n, m.space_, *ctx.enc, *ctx.store);
    LevelBlock block;
    block.ops = std::move(en.op);
    block.meta = std::move(en.meta);
    block.bitmaps = std::move(en.bitmap);
    block.pred_leaves = std::move(en.pred_leaves);
    block.preds.push_back(std::move(en.pred));
    Tape<float>::Id embed = m.embed_level(tape, ctx.params, block);

    CellParamIds<float> cell{
        ctx.params[m.pid("cell.f.W")],  ctx.params[m.pid("cell.f.b")],
        ctx.params[m.pid("cell.k1.W")], ctx.params[m.pid("cell.k1.b")],
        ctx.params[m.pid("cell.r.W")],  ctx.params[m.pid("cell.r.b")],
        ctx.params[m.pid("cell.k2.W")], ctx.params[m.pid("cell.k2.b")]};
    auto [g, r] = lstm_cell(tape, cell, embed, g_prev, r_prev,
                            &m.cell_invocations_);

    if (ctx.pool) {
      MemoryPool::Entry entry;
      const MatF& gv = tape.value(g);
      const MatF& rv = tape.value(r);
      entry.state.G.assign(gv.d.begin(), gv.d.end());
      entry.state.R.assign(rv.d.begin(), rv.d.end());
      ctx.pool->put(digest, std::move(entry));
    }
    return {g, r};
  }
};

RepState EstimatorModel::represent_plan(const PlanNode& root,
                                        const StringEncoder& enc,
                                        const SampleStore& store,
                                        MemoryPool* pool) const {
  Tape<float> tape;
  RecursiveCtx ctx{&tape, {}, this, &enc, &store, pool};
  ctx.params = bind_current(tape);
  auto [g, r] = RecursiveEvaluator::eval(ctx, root);
  RepState out;
  const MatF& gv = tape.value(g);
  const MatF& rv = tape.value(r);
  out.G.assign(gv.d.begin(), gv.d.end());
  out.R.assign(rv.d.begin(), rv.d.end());
  return out;
}

std::pair<double, double> EstimatorModel::estimate(
    const RepState& state, const TargetNormalizer& norm) const {
  if (!norm.fitted) throw model_error("normalizer is not fitted");
  Tape<float> tape;
  auto P = [&](const char* name) { return tape.param(params_.get(name)); };
  MatF r(1, cfg_.hidden);
  std::copy(state.R.begin(), state.R.end(), r.d.begin());
  Tape<float>::Id rep = tape.input(std::move(r));
  Tape<float>::Id cost = tape.sigmoid(tape.affine(
      P("head.cost.out.W"), P("head.cost.out.b"),
      tape.relu(
          tape.affine(P("head.cost.hidden.W"), P("head.cost.hidden.b"), rep))));
  Tape<float>::Id card = tape.sigmoid(tape.affine(
      P("head.card.out.W"), P("head.card.out.b"),
      tape.relu(
          tape.affine(P("head.card.hidden.W"), P("head.card.hidden.b"), rep))));
  return {norm.denorm_cost(tape.scalar(cost)),
          norm.denorm_card(tape.scalar(card))};
}

MatF EstimatorModel::embed_predicate_values(const MatF& leaf_codes,
                                            const PredProgram& prog) const {
  Tape<float> tape;
  auto params = bind_current(tape);
  Tape<float>::Id leaves = tape.input(leaf_codes);
  Tape<float>::Id emb = tape.affine(params[pid("emb.pred.W")],
                                    params[pid("emb.pred.b")], leaves);
  Tape<float>::Id out = embed_predicate_graph(tape, params, emb, prog);
  return tape.value(out);
}

MatF EstimatorModel::embed_node_values(const EncodedNode& node) const {
  Tape<float> tape;
  auto params = bind_current(tape);
  LevelBlock block;
  block.ops = node.op;
  block.meta = node.meta;
  block.bitmaps = node.bitmap;
  block.pred_leaves = node.pred_leaves;
  block.preds.push_back(node.pred);
  return tape.value(embed_level(tape, params, block));
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {
constexpr char kCkptMagic[8] = {'P', 'L', 'N', 'C', 'K', 'P', '0', '1'};
}

void EstimatorModel::save_checkpoint(const std::string& path,
                                     const TargetNormalizer& norm,
                                     const std::string& encoder_name) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw model_error("cannot write checkpoint " + path);
  out.write(kCkptMagic, 8);
  binio::put_u32(out, 1);
  json meta{{"config", json::parse(cfg_.to_json())},
            {"encoder", encoder_name},
            {"meta_width", space_.meta_width()},
            {"leaf_width", space_.leaf_width()}};
  binio::put_str(out, meta.dump());
  binio::put_f64(out, norm.log_cost_min);
  binio::put_f64(out, norm.log_cost_max);
  binio::put_f64(out, norm.log_card_min);
  binio::put_f64(out, norm.log_card_max);
  out.put(norm.fitted ? 1 : 0);
  params_.write(out);
}

LoadedModel EstimatorModel::load_checkpoint(
    const std::string& path, const SchemaCatalog& catalog) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw model_error("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw model_error("bad checkpoint magic");
  if (binio::get_u32(in) != 1) throw model_error("bad checkpoint version");
  json meta = json::parse(binio::get_str(in));
  ModelConfig cfg = ModelConfig::from_json(meta.at("config").dump());
  TargetNormalizer norm;
  norm.log_cost_min = binio::get_f64(in);
  norm.log_cost_max = binio::get_f64(in);
  norm.log_card_min = binio::get_f64(in);
  norm.log_card_max = binio::get_f64(in);
  norm.fitted = in.get() == 1;
  ParamStore params = ParamStore::read(in);

  FeatureSpace space = feature_space_for(cfg, catalog);
  if (space.meta_width() != meta.at("meta_width").get<int>() ||
      space.leaf_width() != meta.at("leaf_width").get<int>())
    throw model_error(
        "checkpoint was trained against a different schema catalog");
  EstimatorModel model(cfg, space);
  model.params_ = std::move(params);
  return {std::move(model), norm, meta.at("encoder").get<std::string>()};
}

}  // namespace planest
