#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "planest/plan.hpp"

// Thin, exit-code-disciplined wrappers around the library operations. The
// CLI binary maps flags onto these option structs; tests call them directly.
namespace planest::cmd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitModel = 3;

struct GenDataOpts {
  std::string data_dir;
  uint64_t seed = 1;
  int rows = 10000;
  int rows_detail = -1;  // defaults to rows
  int sample_size = 1000;
};
int gen_data(const GenDataOpts& opts);

struct GenQueriesOpts {
  std::string data_dir;
  std::string workload_dir;
  uint64_t seed = 7;
  int queries = 1000;
  int min_tables = 1;
  int max_tables = 2;
  double string_pred_prob = 0.5;
};
int gen_queries(const GenQueriesOpts& opts);

struct MineRulesOpts {
  std::string data_dir;
  std::string workload_dir;
  std::string dict_path;
  std::string rules_path;  // defaults to dict_path + ".rules"
  uint64_t seed = 42;
  size_t budget = 0;  // 0: ten entries per workload string
  int string_dim = 64;
  int skipgram_epochs = 5;
};
int mine_rules(const MineRulesOpts& opts);

struct TrainOpts {
  std::string data_dir;
  std::string workload_dir;
  std::string checkpoint;
  std::string dict_path;  // empty: hash encoding
  uint64_t seed = 1;
  double omega = 1.0;
  int epochs = 30;
  int batch_size = 64;
  int sample_size = 1000;
  int hidden = 128;
  int embed = 64;
  int string_dim = 64;
};
int train(const TrainOpts& opts);

struct EstimateOpts {
  std::string data_dir;
  std::string checkpoint;
  std::string dict_path;
  std::vector<std::string> plan_files;
  std::string workload_dir;  // alternative to plan_files
  size_t pool_capacity = 1024;
};
int estimate(const EstimateOpts& opts);

struct EvaluateOpts {
  std::string data_dir;
  std::string workload_dir;
  std::string checkpoint;
  std::string dict_path;
  std::string metrics_out;  // empty: stdout only
  std::string raw_out;      // defaults to metrics_out + ".raw"
  size_t pool_capacity = 1024;
};
int evaluate(const EvaluateOpts& opts);

// Shared helpers.
std::vector<PlanTree> load_workload(const std::string& dir);
void save_workload(const std::vector<PlanTree>& plans, const std::string& dir);
std::vector<std::string> collect_workload_strings(
    const std::vector<PlanTree>& plans);

}  // namespace planest::cmd
