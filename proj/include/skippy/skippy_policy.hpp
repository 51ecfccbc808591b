#pragma once

#include "skippy/geometry.hpp"

namespace skippy {

// Candidate design parameters ("guess") per stage h >= 2, d0 vectors each in
// the ball of radius sqrt(d1+1). Stage indexing is 0-based; entry 0 is unused.
struct Guess {
  std::vector<std::vector<Vec>> vartheta;  // [stage][k in d0]
  double norm_bound = 0.0;

  static Guess zero(int dim, int horizon, int d0, double norm_bound);
  static Guess correct_from_designs(const std::vector<DesignSet>& designs,
                                    double norm_bound, int d0, int dim);
  std::vector<std::string> validate() const;
};

// Optimistic per-stage parameters theta_bar.
struct OptimisticParams {
  std::vector<Vec> theta_bar;  // per stage
  double norm_bound = 0.0;

  static OptimisticParams zero(int dim, int horizon, double norm_bound);
};

// One SkippyPolicy episode: the raw trajectory plus the stage map p (0-based
// landing index -> 0-based stage; horizon value means exhausted), skip
// probabilities and Bernoulli outcomes per stage.
struct SkippyTrajectory {
  Trajectory traj;
  std::vector<int> stage_map;     // length horizon
  std::vector<double> tau;        // per stage
  std::vector<int> skip_draws;    // B_i per stage
  int phase_budget = 0;           // k

  int landing_count() const;
};

// Bundles the inputs every correction-term quantity depends on.
struct SkippyContext {
  const Mdp& mdp;
  const FeatureTable& ft;
  const Guess& guess;
  const OptimisticParams& theta_bar;
  const Preconditioning& precond;
  double eps;
};

// range_Q^G(s): guess-based range from preconditioned feature differences.
double range_q_guess(const Mdp& mdp, const FeatureTable& ft, int s,
                     const Guess& guess, const Preconditioning& pc);

// Skip probability: tau(s1) = 1; otherwise min{1, range_Q^G(s) sqrt(2d) H/eps}.
double tau(const SkippyContext& ctx, int s);

// Greedy action under theta_bar (ties to the lowest index) and its clipped value.
std::pair<int, double> pi_plus_and_c(const SkippyContext& ctx, int s);

SkippyTrajectory run_skippy_policy(const SkippyContext& ctx, int k, uint64_t ep_seed);

// D(traj_i) = C(s_i) - sum of realized rewards from stage i. 0-based i >= 1.
double d_value(const SkippyContext& ctx, const Trajectory& traj, int i);

// E^->(traj_i) via the recursion tau_i D_i + (1 - tau_i) E^->(traj_{i+1}).
double e_to(const SkippyContext& ctx, const Trajectory& traj, int i);
// Same quantity via the explicit probability form (independent route).
double e_to_probability_form(const SkippyContext& ctx, const Trajectory& traj, int i);
// E(traj_i) = tau_i (D_i - E^->(traj_{i+1})).
double e_step(const SkippyContext& ctx, const Trajectory& traj, int i);

// Unit vector of the largest preconditioned feature difference at s, or zero.
Vec phi_bar_q(const Mdp& mdp, const FeatureTable& ft, const Preconditioning& pc, int s);

// Per-state tables of the quantities every correction-term evaluation needs.
// Built once per (guess, theta_bar, Q) tuple; the learner refreshes the
// theta_bar-dependent columns stage by stage during its backward passes.
struct SkippyTables {
  std::vector<double> tau;      // per state
  std::vector<int> a_plus;      // per state
  std::vector<double> c_value;  // per state, clipped
  std::vector<Vec> phi_bar;     // per state; empty vector at stage 1
};

SkippyTables make_skippy_tables(const SkippyContext& ctx);
// Recomputes a_plus and c_value at one stage after theta_bar changed there.
void refresh_stage_actions(const SkippyContext& ctx, int t, SkippyTables& tables);

// E^->(traj_i) for all i, computed backward in one pass; entry [i] covers the
// suffix from 0-based stage i, entries [0] and [horizon] are 0.
std::vector<double> e_to_suffix(const SkippyTables& tables, const Trajectory& traj,
                                int horizon);

SkippyTrajectory run_skippy_policy_with_tables(const SkippyContext& ctx,
                                               const SkippyTables& tables, int k,
                                               uint64_t ep_seed);

// F(traj_i) = phi_bar phi_bar^T E(traj_i).
Mat f_value(const SkippyContext& ctx, const Trajectory& traj, int i);

// bar F(s) = E_{pi^0, s}[F(...)]. Exact DP below the state-count cutoff,
// seeded Monte-Carlo beyond it.
Mat bar_f(const SkippyContext& ctx, int s, int dp_state_cutoff = 10000,
          int mc_episodes = 100000, uint64_t mc_seed = 1);

// E_{pi^0, s}[E^->(traj_{stage(s)})] by exact DP; helper shared with bar_f
// and the optimism construction.
Vec bar_e_to_all_states(const SkippyContext& ctx);

}  // namespace skippy
