#include "planest/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "planest/dataset.hpp"
#include "planest/eval.hpp"
#include "planest/featurize.hpp"
#include "planest/model.hpp"
#include "planest/pool.hpp"
#include "planest/strings.hpp"
#include "planest/trainer.hpp"

namespace planest::cmd {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write " + path);
  out << text;
}

SampleStore load_samples(const std::string& data_dir) {
  return SampleStore::load((fs::path(data_dir) / "samples.bin").string());
}

SchemaCatalog load_catalog(const std::string& data_dir) {
  return SchemaCatalog::load((fs::path(data_dir) / "catalog.txt").string());
}

// Builds the encoder the checkpoint was trained with.
struct EncoderBox {
  std::unique_ptr<SubstringDictionary> dict;
  std::unique_ptr<StringEncoder> enc;
};

EncoderBox make_encoder(const std::string& name, const std::string& dict_path) {
  EncoderBox box;
  if (name == "dict") {
    if (dict_path.empty())
      throw data_error("this checkpoint needs --dict (trained with one)");
    box.dict = std::make_unique<SubstringDictionary>(
        SubstringDictionary::load(dict_path));
    box.enc = std::make_unique<DictStringEncoder>(*box.dict);
  } else {
    box.enc = std::make_unique<HashStringEncoder>();
  }
  return box;
}

}  // namespace

std::vector<PlanTree> load_workload(const std::string& dir) {
  std::vector<std::string> files;
  if (!fs::is_directory(dir))
    throw data_error("workload directory " + dir + " does not exist");
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw data_error("no .json plans in " + dir);
  std::vector<PlanTree> plans;
  plans.reserve(files.size());
  for (const auto& f : files)
    plans.push_back(binarize(parse_plan(read_file(f))));
  return plans;
}

void save_workload(const std::vector<PlanTree>& plans,
                   const std::string& dir) {
  fs::create_directories(dir);
  char name[32];
  for (size_t i = 0; i < plans.size(); ++i) {
    std::snprintf(name, sizeof name, "q%05zu.json", i);
    write_file((fs::path(dir) / name).string(), serialize_plan(plans[i]));
  }
}

namespace {

void collect_strings(const PredicateNode& p,
                     std::vector<std::pair<std::string, LookupMode>>& out) {
  if (p.kind != PredicateNode::Kind::Expr) {
    for (const auto& c : p.children) collect_strings(*c, out);
    return;
  }
  if (const auto* s = std::get_if<std::string>(&p.operand)) {
    auto [query, mode] = operand_query(*s, p.op);
    if (!query.empty()) out.emplace_back(query, mode);
  }
}

void walk_plans(const PlanNode& n,
                std::vector<std::pair<std::string, LookupMode>>& out) {
  if (n.predicate) collect_strings(*n.predicate, out);
  for (const auto& c : n.children)
    if (c) walk_plans(*c, out);
}

}  // namespace

std::vector<std::string> collect_workload_strings(
    const std::vector<PlanTree>& plans) {
  std::vector<std::pair<std::string, LookupMode>> found;
  for (const auto& t : plans)
    if (t.root) walk_plans(*t.root, found);
  std::set<std::string> dedup;
  for (auto& [s, mode] : found) dedup.insert(s);
  return {dedup.begin(), dedup.end()};
}

// ---------------------------------------------------------------------------

int gen_data(const GenDataOpts& opts) {
  if (opts.data_dir.empty()) throw data_error("--data-dir is required");
  DatasetConfig cfg;
  cfg.seed = opts.seed;
  cfg.rows_main = opts.rows;
  cfg.rows_detail = opts.rows_detail > 0 ? opts.rows_detail : opts.rows;
  Dataset ds = generate_dataset(cfg);
  ds.save(opts.data_dir, default_indexes());
  SampleStore store = SampleStore::build(
      ds, static_cast<uint32_t>(opts.sample_size), opts.seed);
  store.save((fs::path(opts.data_dir) / "samples.bin").string());
  std::printf("wrote %zu tables and samples (S=%d) to %s\n", ds.tables.size(),
              opts.sample_size, opts.data_dir.c_str());
  return kExitOk;
}

int gen_queries(const GenQueriesOpts& opts) {
  Dataset ds = Dataset::load(opts.data_dir);
  WorkloadConfig cfg;
  cfg.seed = opts.seed;
  cfg.query_count = opts.queries;
  cfg.min_tables = opts.min_tables;
  cfg.max_tables = opts.max_tables;
  cfg.string_pred_prob = opts.string_pred_prob;
  std::vector<PlanTree> plans = generate_queries(ds, cfg);
  std::vector<PlanTree> labeled;
  labeled.reserve(plans.size());
  for (const auto& p : plans) labeled.push_back(execute_reference(p, ds));
  save_workload(labeled, opts.workload_dir);
  std::printf("wrote %zu labeled plans to %s\n", labeled.size(),
              opts.workload_dir.c_str());
  return kExitOk;
}

int mine_rules(const MineRulesOpts& opts) {
  Dataset ds = Dataset::load(opts.data_dir);
  std::vector<PlanTree> plans = load_workload(opts.workload_dir);
  std::vector<std::string> corpus = ds.string_corpus();

  std::vector<std::pair<std::string, LookupMode>> queries;
  for (const auto& t : plans)
    if (t.root) walk_plans(*t.root, queries);
  std::map<std::string, LookupMode> wanted;
  for (auto& [s, mode] : queries) wanted.emplace(s, mode);

  std::vector<Rule> candidates;
  std::set<std::string> seen;
  std::vector<std::string> workload_strings;
  for (const auto& [q, mode] : wanted) {
    SearchKind kind = mode == LookupMode::Prefix    ? SearchKind::PrefixSearch
                      : mode == LookupMode::Suffix  ? SearchKind::SuffixSearch
                                                    : SearchKind::SubstringSearch;
    auto matches = [&](const std::string& v) {
      switch (kind) {
        case SearchKind::PrefixSearch:
          return v.size() >= q.size() && v.compare(0, q.size(), q) == 0;
        case SearchKind::SuffixSearch:
          return v.size() >= q.size() &&
                 v.compare(v.size() - q.size(), q.size(), q) == 0;
        default:
          return v.find(q) != std::string::npos;
      }
    };
    const std::string* value = nullptr;
    for (const auto& v : corpus)
      if (matches(v)) {
        value = &v;
        break;
      }
    if (!value) continue;  // string not derivable from this dataset
    workload_strings.push_back(q);
    for (auto& r : generate_candidate_rules(q, *value, kind))
      if (seen.insert(to_string(r)).second) candidates.push_back(std::move(r));
  }
  if (workload_strings.empty())
    throw data_error("the workload contains no coverable string predicates");

  size_t budget =
      opts.budget > 0 ? opts.budget : 10 * workload_strings.size();
  std::vector<Rule> rules =
      select_rules(std::move(candidates), workload_strings, corpus, budget);

  SubstringDictionary dict =
      build_dictionary(rules, corpus, opts.string_dim, budget);

  // One sentence per row: the row key plus every dictionary substring that
  // occurs in the row's string values.
  std::map<std::string, std::vector<int>> hits_cache;
  auto entries_in = [&](const std::string& value) {
    auto it = hits_cache.find(value);
    if (it != hits_cache.end()) return it->second;
    std::vector<int> ids;
    for (size_t i = 0; i < dict.entries.size(); ++i)
      if (value.find(dict.entries[i].key) != std::string::npos)
        ids.push_back(static_cast<int>(i));
    hits_cache.emplace(value, ids);
    return ids;
  };
  std::vector<std::vector<std::string>> sentences;
  for (const auto& t : ds.tables) {
    const Column* id_col = t.column("id");
    for (uint64_t row = 0; row < t.rows; ++row) {
      std::set<int> ids;
      for (const auto& [cname, col] : t.columns)
        if (col.type == ColType::Str)
          for (int e : entries_in(col.strs[row])) ids.insert(e);
      if (ids.empty()) continue;
      std::vector<std::string> sent;
      std::string key = t.name + "#";
      key += id_col && id_col->type == ColType::Numeric
                 ? std::to_string(static_cast<long long>(id_col->nums[row]))
                 : std::to_string(row);
      sent.push_back(std::move(key));
      for (int e : ids) sent.push_back(dict.entries[e].key);
      sentences.push_back(std::move(sent));
    }
  }

  SkipGramConfig sg;
  sg.epochs = opts.skipgram_epochs;
  sg.seed = opts.seed;
  train_skipgram(sentences, dict, sg);

  dict.save(opts.dict_path);
  std::string rules_path =
      opts.rules_path.empty() ? opts.dict_path + ".rules" : opts.rules_path;
  save_rules(rules, rules_path);
  std::printf(
      "selected %zu rules covering %zu workload strings; dictionary has %zu "
      "entries (budget %zu)\n",
      rules.size(), workload_strings.size(), dict.entries.size(), budget);
  return kExitOk;
}

int train(const TrainOpts& opts) {
  SchemaCatalog catalog = load_catalog(opts.data_dir);
  SampleStore store = load_samples(opts.data_dir);
  std::vector<PlanTree> plans = load_workload(opts.workload_dir);

  EncoderBox box =
      make_encoder(opts.dict_path.empty() ? "hash" : "dict", opts.dict_path);

  ModelConfig mcfg;
  mcfg.op_embed = mcfg.meta_embed = mcfg.bitmap_embed = mcfg.pred_embed =
      opts.embed;
  mcfg.hidden = opts.hidden;
  mcfg.head_hidden = std::max(8, opts.hidden / 2);
  mcfg.string_dim = box.dict ? box.dict->dim : opts.string_dim;
  mcfg.sample_size = static_cast<int>(store.sample_size);
  mcfg.seed = opts.seed;
  if (opts.sample_size != mcfg.sample_size)
    std::fprintf(stderr,
                 "note: using the stored sample size S=%d (flag said %d)\n",
                 mcfg.sample_size, opts.sample_size);

  EstimatorModel model(mcfg, feature_space_for(mcfg, catalog));
  TargetNormalizer norm;
  TrainConfig tcfg;
  tcfg.epochs = opts.epochs;
  tcfg.batch_size = opts.batch_size;
  tcfg.omega = opts.omega;
  tcfg.seed = opts.seed;
  TrainResult result = train(model, norm, plans, *box.enc, store, tcfg);

  model.save_checkpoint(opts.checkpoint, norm, box.enc->name());
  for (size_t e = 0; e < result.history.size(); ++e)
    std::printf("epoch %zu: train loss %.4f, val loss %.4f, val card q %.3f\n",
                e, result.history[e].train_loss, result.history[e].val_loss,
                result.history[e].val_card_qerr);
  std::printf("best epoch %d; checkpoint written to %s\n", result.best_epoch,
              opts.checkpoint.c_str());
  return kExitOk;
}

int estimate(const EstimateOpts& opts) {
  SchemaCatalog catalog = load_catalog(opts.data_dir);
  SampleStore store = load_samples(opts.data_dir);
  LoadedModel loaded = EstimatorModel::load_checkpoint(opts.checkpoint,
                                                       catalog);
  EncoderBox box = make_encoder(loaded.encoder_name, opts.dict_path);

  std::vector<std::pair<std::string, PlanTree>> plans;
  for (const auto& f : opts.plan_files)
    plans.emplace_back(f, binarize(parse_plan(read_file(f))));
  if (!opts.workload_dir.empty()) {
    auto from_dir = load_workload(opts.workload_dir);
    for (size_t i = 0; i < from_dir.size(); ++i)
      plans.emplace_back(opts.workload_dir + "#" + std::to_string(i),
                         std::move(from_dir[i]));
  }
  if (plans.empty()) throw data_error("no plans to estimate");

  MemoryPool pool(opts.pool_capacity);
  loaded.model.reset_cell_invocations();
  for (const auto& [name, tree] : plans) {
    PlanDigest digest = canonical_hash(*tree.root);
    if (auto hit = pool.get(digest); hit && hit->has_estimates) {
      std::printf("%s\tcost=%.6g\tcard=%.6g\t(pooled)\n", name.c_str(),
                  hit->cost, hit->card);
      continue;
    }
    RepState state = loaded.model.represent_plan(*tree.root, *box.enc, store,
                                                 &pool);
    auto [cost, card] = loaded.model.estimate(state, loaded.normalizer);
    pool.put(digest, {state, cost, card, true});
    std::printf("%s\tcost=%.6g\tcard=%.6g\n", name.c_str(), cost, card);
  }
  std::printf("cell_invocations=%llu pool_hits=%llu pool_misses=%llu\n",
              static_cast<unsigned long long>(
                  loaded.model.cell_invocations()),
              static_cast<unsigned long long>(pool.hits()),
              static_cast<unsigned long long>(pool.misses()));
  return kExitOk;
}

int evaluate(const EvaluateOpts& opts) {
  SchemaCatalog catalog = load_catalog(opts.data_dir);
  SampleStore store = load_samples(opts.data_dir);
  Dataset ds = Dataset::load(opts.data_dir);
  std::vector<PlanTree> plans = load_workload(opts.workload_dir);
  LoadedModel loaded = EstimatorModel::load_checkpoint(opts.checkpoint,
                                                       catalog);
  EncoderBox box = make_encoder(loaded.encoder_name, opts.dict_path);

  IndependenceBaseline baseline(ds);
  MemoryPool pool(opts.pool_capacity);
  EvalReport report = planest::evaluate(loaded.model, loaded.normalizer,
                                        &baseline, plans, *box.enc, store,
                                        &pool);
  std::string table = report.metrics_tsv();
  std::fputs(table.c_str(), stdout);
  if (!opts.metrics_out.empty()) {
    write_file(opts.metrics_out, table);
    std::string raw_path =
        opts.raw_out.empty() ? opts.metrics_out + ".raw" : opts.raw_out;
    write_file(raw_path, report.raw_tsv());
  }
  return kExitOk;
}

}  // namespace planest::cmd
