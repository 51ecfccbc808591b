#pragma once

#include <string>
#include <utility>
#include <vector>

#include "skippy/linalg.hpp"
#include "skippy/rng.hpp"

namespace skippy {

// Finite-support reward distribution on [0,1].
struct RewardDist {
  Vec support;
  Vec probs;

  static RewardDist point(double v);
  double mean() const { return support.dot(probs); }
  double sample(double u) const;  // inverse cdf of a uniform draw
};

// Staged episodic MDP. States are globally indexed 0..num_states()-1 and
// grouped by stage; stage 0 holds the single initial state. Transitions from
// a stage-t state are dense probability rows over the stage-(t+1) states and
// are absent at the last stage.
struct Mdp {
  int horizon = 0;
  int num_actions = 0;
  std::vector<std::vector<int>> stages;
  std::vector<int> stage_of;
  std::vector<std::vector<Vec>> transitions;        // [state][action]
  std::vector<std::vector<RewardDist>> rewards;     // [state][action]

  int num_states() const { return static_cast<int>(stage_of.size()); }
  int initial_state() const { return stages.at(0).at(0); }
  // index of `s` within its own stage
  int index_in_stage(int s) const;
  double mean_reward(int s, int a) const { return rewards[s][a].mean(); }
};

std::vector<std::string> validate_mdp(const Mdp& mdp);

struct MemorylessPolicy {
  Mat action_probs;  // num_states x num_actions

  static MemorylessPolicy deterministic(const Mdp& mdp, const std::vector<int>& actions);
  static MemorylessPolicy uniform(const Mdp& mdp);
  static MemorylessPolicy always_first_action(const Mdp& mdp);  // pi^0
};

std::vector<std::string> validate_policy(const Mdp& mdp, const MemorylessPolicy& pi);

struct Trajectory {
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<double> rewards;
  uint64_t seed = 0;

  int length() const { return static_cast<int>(states.size()); }
  double total_reward() const;
  double reward_tail(int from_stage) const;  // sum of rewards from 0-based stage
};

struct ValueTables {
  Vec v;  // per state
  Mat q;  // num_states x num_actions
};

// Draws (next state, reward); next state is -1 when stage(s) is the last stage.
std::pair<int, double> step(const Mdp& mdp, int s, int a, Rng& rng);

// Length-H episode from s1. All randomness is keyed by (episode seed, stage),
// so identical seeds give bitwise-identical trajectories.
Trajectory rollout(const Mdp& mdp, const MemorylessPolicy& pi, uint64_t ep_seed);

// Exact q^pi, v^pi by backward induction over stages.
ValueTables evaluate_policy_exact(const Mdp& mdp, const MemorylessPolicy& pi);

// Exact q*, v* and a greedy optimal policy (ties to the lowest action index).
std::pair<ValueTables, MemorylessPolicy> optimal_values(const Mdp& mdp);

}  // namespace skippy
