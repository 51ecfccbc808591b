#pragma once

#include <filesystem>

#include "skippy/oracles.hpp"

#include <nlohmann/json_fwd.hpp>

namespace skippy {

using Json = nlohmann::json;

struct Instance {
  Mdp mdp;
  FeatureTable features;
  std::string name;
  uint64_t seed = 0;
};

// Builtin generators: fig1, random_linear, padded_linear, zero_range, tabular.
struct InstanceSpec {
  std::string name;
  int d = 2;
  int horizon = 3;
  int num_actions = 2;
  int states_per_stage = 3;
  int chain = 1;               // padded_linear: pad stages between decisions
  bool bernoulli_rewards = true;
  uint64_t seed = 1;
};

Instance generate_instance(const InstanceSpec& spec);

// Instance metadata: eta-hat certificate over all deterministic policies plus
// the per-state range table (computed when the policy count fits the cap).
Json instance_metadata(const Instance& inst, uint64_t enumeration_cap = uint64_t{1} << 16);

Json instance_to_json(const Instance& inst);
Instance instance_from_json(const Json& j);
void save_instance(const Instance& inst, const std::filesystem::path& path);
Instance load_instance(const std::filesystem::path& path);

struct RunConfig {
  InstanceSpec instance;
  std::string instance_path;  // used instead of the generator when non-empty
  double eps = 0.1;
  double zeta = 0.1;
  ConstantMode mode = ConstantMode::kPractical;
  Opt1Mode opt1 = Opt1Mode::kOracleAssisted;
  PracticalOverrides overrides;
  int repeats = 1;
  uint64_t seed = 1;
  uint64_t episode_cap = 1000000;
  int opt1_restarts = 32;
  std::string out_dir = "runs";
};

RunConfig run_config_from_json(const Json& j);  // strict: unknown keys rejected
RunConfig load_run_config(const std::filesystem::path& path);

struct RunSummaryRow {
  uint64_t seed = 0;
  std::string instance;
  double v_star = 0.0;
  double v_pi = 0.0;
  uint64_t episodes = 0;
  int q_updates = 0;
  std::string terminated_by;
};

struct ExperimentResult {
  std::vector<RunSummaryRow> rows;
  std::filesystem::path summary_path;
};

// One learner run on a prepared instance; wires the enumeration-backed guess
// provider for oracle-assisted mode and evaluates the returned policy exactly.
struct SingleRunResult {
  RunSummaryRow row;
  RunLog log;
  PolicyDescriptor policy;
};

SingleRunResult run_single(const Instance& inst, const RunConfig& config,
                           uint64_t run_seed);

ExperimentResult run_experiment(const RunConfig& config);

// Plot-ready series from run logs: one row per iteration, tab-separated, plus
// a final suboptimality table. No rendering.
std::string emit_metrics(const std::vector<std::filesystem::path>& run_logs);

std::string summary_header();
std::string summary_row_csv(const RunSummaryRow& row);

}  // namespace skippy
