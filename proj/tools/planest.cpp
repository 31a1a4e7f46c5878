#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "planest/commands.hpp"
#include "planest/errors.hpp"

using namespace planest;

int main(int argc, char** argv) {
  CLI::App app{"Learned cost and cardinality estimation over plan trees"};
  app.require_subcommand(1);

  cmd::GenDataOpts gd;
  auto* gen_data = app.add_subcommand(
      "gen-data", "Generate the synthetic dataset, catalog, and samples");
  gen_data->add_option("--data-dir", gd.data_dir, "Output directory")
      ->required();
  gen_data->add_option("--seed", gd.seed, "RNG seed")->capture_default_str();
  gen_data->add_option("--rows", gd.rows, "Rows in the main table")
      ->capture_default_str();
  gen_data->add_option("--rows-detail", gd.rows_detail,
                       "Rows in the detail table (defaults to --rows)");
  gen_data->add_option("--sample-size", gd.sample_size,
                       "Sample bitmap length")
      ->capture_default_str();

  cmd::GenQueriesOpts gq;
  auto* gen_queries = app.add_subcommand(
      "gen-queries", "Generate and label a random query workload");
  gen_queries->add_option("--data-dir", gq.data_dir, "Dataset directory")
      ->required();
  gen_queries
      ->add_option("--workload-dir", gq.workload_dir, "Output directory")
      ->required();
  gen_queries->add_option("--seed", gq.seed, "RNG seed")
      ->capture_default_str();
  gen_queries->add_option("--queries", gq.queries, "Number of queries")
      ->capture_default_str();
  gen_queries->add_option("--min-tables", gq.min_tables, "Minimum join size")
      ->capture_default_str();
  gen_queries->add_option("--max-tables", gq.max_tables, "Maximum join size")
      ->capture_default_str();
  gen_queries
      ->add_option("--string-pred-prob", gq.string_pred_prob,
                   "Probability of a string predicate per scan")
      ->capture_default_str();

  cmd::MineRulesOpts mr;
  auto* mine_rules = app.add_subcommand(
      "mine-rules",
      "Mine extraction rules and train the substring dictionary");
  mine_rules->add_option("--data-dir", mr.data_dir, "Dataset directory")
      ->required();
  mine_rules
      ->add_option("--workload-dir", mr.workload_dir, "Workload directory")
      ->required();
  mine_rules->add_option("--dict", mr.dict_path, "Output dictionary file")
      ->required();
  mine_rules->add_option("--rules-out", mr.rules_path,
                         "Output rules file (defaults to <dict>.rules)");
  mine_rules->add_option("--seed", mr.seed, "RNG seed")->capture_default_str();
  mine_rules
      ->add_option("--budget", mr.budget,
                   "Substring budget (0: ten per workload string)")
      ->capture_default_str();
  mine_rules->add_option("--string-dim", mr.string_dim, "Embedding width")
      ->capture_default_str();
  mine_rules
      ->add_option("--skipgram-epochs", mr.skipgram_epochs,
                   "Skip-gram training epochs")
      ->capture_default_str();

  cmd::TrainOpts tr;
  auto* train = app.add_subcommand("train", "Train a model checkpoint");
  train->add_option("--data-dir", tr.data_dir, "Dataset directory")
      ->required();
  train->add_option("--workload-dir", tr.workload_dir, "Labeled workload")
      ->required();
  train->add_option("--checkpoint", tr.checkpoint, "Output checkpoint")
      ->required();
  train->add_option("--dict", tr.dict_path,
                    "Substring dictionary (omit for hash encoding)");
  train->add_option("--seed", tr.seed, "RNG seed")->capture_default_str();
  train->add_option("--omega", tr.omega, "Cost-loss weight")
      ->capture_default_str();
  train->add_option("--epochs", tr.epochs, "Training epochs")
      ->capture_default_str();
  train->add_option("--batch-size", tr.batch_size, "Mini-batch size")
      ->capture_default_str();
  train->add_option("--sample-size", tr.sample_size, "Sample bitmap length")
      ->capture_default_str();
  train->add_option("--hidden", tr.hidden, "Representation width")
      ->capture_default_str();
  train->add_option("--embed", tr.embed, "Per-feature embedding width")
      ->capture_default_str();
  train->add_option("--string-dim", tr.string_dim, "Operand embedding width")
      ->capture_default_str();

  cmd::EstimateOpts es;
  auto* estimate = app.add_subcommand(
      "estimate", "Estimate cost and cardinality for plan files");
  estimate->add_option("--data-dir", es.data_dir, "Dataset directory")
      ->required();
  estimate->add_option("--checkpoint", es.checkpoint, "Model checkpoint")
      ->required();
  estimate->add_option("--dict", es.dict_path, "Substring dictionary");
  estimate->add_option("--workload-dir", es.workload_dir,
                       "Estimate every plan in a directory");
  estimate->add_option("plans", es.plan_files, "Plan files");
  estimate
      ->add_option("--pool-capacity", es.pool_capacity,
                   "Representation memory pool capacity")
      ->capture_default_str();

  cmd::EvaluateOpts ev;
  auto* evaluate = app.add_subcommand(
      "evaluate", "Q-error metrics for a checkpoint on a labeled workload");
  evaluate->add_option("--data-dir", ev.data_dir, "Dataset directory")
      ->required();
  evaluate->add_option("--workload-dir", ev.workload_dir, "Labeled workload")
      ->required();
  evaluate->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")
      ->required();
  evaluate->add_option("--dict", ev.dict_path, "Substring dictionary");
  evaluate->add_option("--metrics-out", ev.metrics_out,
                       "Write the metrics table here");
  evaluate->add_option("--raw-out", ev.raw_out,
                       "Write per-query errors here");
  evaluate
      ->add_option("--pool-capacity", ev.pool_capacity,
                   "Representation memory pool capacity")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cmd::kExitUsage;
  }

  try {
    if (gen_data->parsed()) return cmd::gen_data(gd);
    if (gen_queries->parsed()) return cmd::gen_queries(gq);
    if (mine_rules->parsed()) return cmd::mine_rules(mr);
    if (train->parsed()) return cmd::train(tr);
    if (estimate->parsed()) return cmd::estimate(es);
    if (evaluate->parsed()) return cmd::evaluate(ev);
  } catch (const model_error& e) {
    std::fprintf(stderr, "model error: %s\n", e.what());
    return cmd::kExitModel;
  } catch (const error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return cmd::kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return cmd::kExitData;
  }
  return cmd::kExitUsage;
}
