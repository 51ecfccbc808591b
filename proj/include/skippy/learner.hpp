#pragma once

#include <functional>
#include <optional>

#include "skippy/skippy_policy.hpp"

namespace skippy {

struct EpisodeRecord {
  int l = 0;  // iteration counter m at collection time (1-based)
  int k = 0;  // skippy budget (1-based)
  int j = 0;  // episode index within (l, k)
  SkippyTrajectory st;

  // p(k): 0-based landing stage of the k-th skippy step; horizon == saturated.
  int landing_stage() const { return st.stage_map[k - 1]; }
  const Vec landing_feature(const FeatureTable& ft) const;
};

// Trajectory store across iterations. Records discarded after a failed
// consistency check are kept separately for post-hoc inspection.
struct DataStore {
  std::vector<EpisodeRecord> records;
  std::vector<EpisodeRecord> discarded;

  // I^m(t) for all t: indices into `records` with l < m and p(k) == t.
  std::vector<std::vector<int>> index_sets(int m, int horizon) const;
  void discard_iteration(int m);
};

// Per-stage ridge matrices X_mt with cached factorizations.
struct LsState {
  std::vector<Mat> x;
  std::vector<Eigen::LDLT<Mat>> fact;
  std::vector<std::vector<int>> idx;  // I^m(t)

  static LsState build(const DataStore& data, const FeatureTable& ft, int m,
                       int horizon, double lambda);
  double feature_uncertainty(const Vec& phi, int t) const;  // ||phi||_{X_mt^{-1}}
};

// Least-squares target for a record landing at stage t:
// E^->(traj_{t+1}) + sum of rewards from t.
double lsq_target(const SkippyContext& ctx, const Trajectory& traj, int t);

// Scalar-target ridge estimates theta_hat_t for all stages under (G, theta_bar).
std::vector<Vec> scalar_lse(const SkippyContext& ctx, const DataStore& data,
                            const LsState& ls);

// Matrix-target ridge coefficients for the pair (t, i), stored as d x d^2 with
// row-major vectorized d x d targets F(traj_i).
Mat matrix_lse(const SkippyContext& ctx, const DataStore& data, const LsState& ls,
               int t, int i);
Mat matrix_lse_predict(const Mat& coef, const Vec& phi);

struct ConsistencyStats {
  // y^{ki} and hat F^{ki} for 1-based k in [1, H-1], i in [k+1, H];
  // storage indexed [k-1][i-k-1].
  std::vector<std::vector<Mat>> y;
  std::vector<std::vector<Mat>> f_hat;
  Vec sigma_bar;  // per 1-based k in [1, H]
};

ConsistencyStats consistency_stats(const SkippyContext& ctx, const DataStore& data,
                                   const LsState& ls, int m, int n,
                                   const ConstantSet& cs);

struct ConsistencyResult {
  double x = 0.0;
  Vec v;       // unit direction
  Vec w;       // projected direction P_{Z(Q,i)} v
  int k = 0;   // 1-based
  int i = 0;   // 1-based stage
  double w_quad = 0.0;  // w^T M w, for the projection-gap audit
};

ConsistencyResult solve_consistency(const ConsistencyStats& stats,
                                    const Preconditioning& pc);

enum class Opt1Mode { kSearch, kOracleAssisted };

// Supplies the correct guess for the current preconditioning; wired up from
// the enumeration oracles by the harness. Only consulted in oracle mode.
using GuessProvider = std::function<Guess(const Preconditioning&)>;

struct LearnerConfig {
  double eps = 0.1;
  double zeta = 0.1;
  ConstantSet constants;
  Opt1Mode opt1_mode = Opt1Mode::kSearch;
  int opt1_restarts = 32;
  int opt1_ascent_rounds = 8;
  uint64_t seed = 1;
  uint64_t episode_cap = 1000000;
  GuessProvider guess_provider;  // required in oracle mode
};

struct OptimisticSolution {
  Guess guess;
  OptimisticParams theta_bar;
  double c_value = 0.0;
  std::vector<Vec> theta_hat;
  bool search_optimum_only = false;  // set in search mode: not a global argmax
};

OptimisticSolution solve_optimistic(const Mdp& mdp, const FeatureTable& ft,
                                    const Preconditioning& pc, const DataStore& data,
                                    const LsState& ls, const LearnerConfig& config,
                                    Rng& rng);

struct QUpdateEvent {
  int mprime = 0;
  int k = 0;
  int stage_i = 0;  // 1-based
  double w_norm = 0.0;
  double x = 0.0;
};

struct IterationLog {
  int m = 0;
  int mprime = 0;
  double c_value = 0.0;
  double x = 0.0;
  double v_quad = 0.0;       // v^T M v (== x)
  double w_quad = 0.0;       // w^T M w
  Vec sigma_bar;
  double sigma_bar_sum = 0.0;
  double feasibility_slack = 0.0;  // max_t ||theta_bar - theta_hat||_X - beta H
  bool q_updated = false;
  int update_stage = 0;      // 1-based, 0 when no update
  double update_w_norm = 0.0;
  uint64_t episodes_total = 0;
  double wall_seconds = 0.0;
};

struct PolicyDescriptor {
  Guess guess;
  OptimisticParams theta_bar;
  int k = 0;
  Preconditioning precond;
};

struct RunLog {
  std::vector<IterationLog> iterations;
  std::vector<QUpdateEvent> q_updates;
  std::string terminated_by;
  uint64_t episodes_total = 0;
};

struct LearnerResult {
  PolicyDescriptor policy;
  RunLog log;
  DataStore data;  // final store, for the verification oracles
};

LearnerResult run_skippy_eleanor(const Mdp& mdp, const FeatureTable& ft,
                                 const LearnerConfig& config);

// Exact value of SkippyPolicy(G, theta_bar, k) from s1, enumerating the
// Bernoulli skip randomness by dynamic programming over (state, landings).
double skippy_policy_value_exact(const SkippyContext& ctx, int k);

}  // namespace skippy
