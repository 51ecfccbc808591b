#pragma once

#include "skippy/learner.hpp"

namespace skippy {

// Exhaustive deterministic-policy enumeration with exact values and fits.
struct PolicyEnumeration {
  std::vector<MemorylessPolicy> policies;
  std::vector<ValueTables> values;
  std::vector<PolicyParameter> params;
  ThetaSample thetas;  // per-stage fitted parameters, deduplicated by suffix
  // Representative policy index for each deduplicated parameter, parallel to
  // thetas.per_stage. Needed when a construction has to follow the policy
  // behind a design point.
  std::vector<std::vector<int>> theta_policy_rep;
  double eta_hat = 0.0;
};

PolicyEnumeration enumerate_policies(const Mdp& mdp, const FeatureTable& ft,
                                     uint64_t cap = uint64_t{1} << 20);

// Realizability of admissible functions: rebuilds the two-policy-per-design-
// index construction, forms theta_tilde, and compares <phi, theta_tilde>
// against the exact expectation of f at stage h from every earlier (s, a).
struct AdmissibilityReport {
  bool admissible_precondition = true;
  double max_deviation = 0.0;   // max |E f(S_h) - <phi, theta_tilde>|
  double theta_tilde_norm = 0.0;
  double norm_bound = 0.0;      // 4 d0 L2 / alpha
  std::vector<Vec> theta_tilde; // per earlier stage t < h
};

AdmissibilityReport verify_admissible_realizability(
    const Mdp& mdp, const FeatureTable& ft, int h, const Vec& f_over_stage_h,
    double alpha, const Preconditioning& pc, const std::vector<DesignSet>& designs,
    const PolicyEnumeration& enumeration, const MemorylessPolicy& base_policy,
    double eta_hat = 0.0);

// Skip-converted MDP: stage copies of kept states, an absorbing episode-over
// state per stage, block-lifted features (+ constant and episode-over flags).
struct ConvertedMdp {
  Mdp mdp;
  FeatureTable features;
  std::vector<int> orig_state;      // per converted state; -1 for episode-over
  std::vector<int> episode_over;    // converted episode-over state per stage (-1 at stage 1)
  int kept_states = 0;              // distinct original states kept
};

struct LinearityCertificate {
  double reward_residual = 0.0;       // Def. 1 (i)
  double transition_residual = 0.0;   // Def. 1 (ii) over the test battery
  double kappa_hat = 0.0;             // max of the two
  int battery_size = 0;
};

std::pair<ConvertedMdp, LinearityCertificate> skip_convert_to_linear(
    const Mdp& mdp, const FeatureTable& ft, double alpha, const ThetaSample& thetas,
    int battery_policies = 50, int battery_random = 20, uint64_t seed = 7);

// Value of a converted-MDP policy replayed on the original MDP as a skippy
// policy (skipped originals take action 1), exact DP. Used by the
// value-preservation check.
double converted_policy_value_on_original(const Mdp& mdp, const ConvertedMdp& conv,
                                          const MemorylessPolicy& conv_policy);

// Self-normalized confidence-bound simulation: sigma-subgaussian noise plus
// bounded misspecification, coverage of the ridge-estimate bound over all k.
struct CoverageResult {
  double coverage = 0.0;
  int trials = 0;
  double j2_max_violation = 0.0;  // max of ||sum A_i D_i||^2_{V^-1} - n xi^2
};

CoverageResult lse_confidence_check(double sigma, double xi, double lambda, int d,
                                    int trials, double zeta, uint64_t seed,
                                    int k_max = 300);

// Optimism surrogate: constructs the correct-guess optimistic parameters from
// exact fits and checks feasibility plus C(s1) >= v*(s1) - 2 eps.
struct OptimismReport {
  bool feasible = true;
  double feasibility_slack = 0.0;  // max over stages of ||.||_X - beta H
  double c_value = 0.0;
  double v_star = 0.0;
  double policy_value = 0.0;       // exact value of the constructed policy
  bool optimistic = false;         // c_value >= v_star - 2 eps
};

OptimismReport optimism_check(const Mdp& mdp, const FeatureTable& ft,
                              const DataStore& data, const LsState& ls,
                              const Preconditioning& pc,
                              const std::vector<DesignSet>& designs,
                              const PolicyEnumeration& enumeration,
                              const ConstantSet& cs, double eps);

// Elliptical potential inequality slacks on one random sequence; both are
// >= -tol when the lemmas hold. Drives the geometry invariants.
struct PotentialSlack {
  double potential_vs_logdet = 0.0;  // 2 log det ratio - sum min{1, ||a||^2}
  double logdet_vs_trace = 0.0;      // trace bound - 2 log det ratio
  double infrequent_update = 0.0;    // sum ||a||^2_{V_i^-1} - min{1, 0.5 sum ||a||^2_{V^-1}}
};

PotentialSlack elliptical_potential_slack(const std::vector<Vec>& seq, const Mat& v0,
                                          double norm_bound);

}  // namespace skippy
