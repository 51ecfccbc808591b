#include "skippy/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace skippy {

RewardDist RewardDist::point(double v) {
  RewardDist r;
  r.support = Vec::Constant(1, v);
  r.probs = Vec::Constant(1, 1.0);
  return r;
}

double RewardDist::sample(double u) const {
  double acc = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return support[i];
  }
  return support[support.size() - 1];
}

int Mdp::index_in_stage(int s) const {
  const auto& st = stages[stage_of[s]];
  auto it = std::find(st.begin(), st.end(), s);
  return static_cast<int>(it - st.begin());
}

std::vector<std::string> validate_mdp(const Mdp& mdp) {
  std::vector<std::string> report;
  auto fail = [&](std::string msg) { report.push_back(std::move(msg)); };

  if (mdp.horizon <= 0) fail("horizon must be positive");
  if (mdp.num_actions <= 0) fail("action count must be positive");
  if (static_cast<int>(mdp.stages.size()) != mdp.horizon) {
    fail("stage list count does not match horizon");
    return report;
  }
  if (mdp.stages[0].size() != 1) fail("stage 1 must hold a single initial state");

  std::vector<int> seen(mdp.num_states(), 0);
  for (int t = 0; t < mdp.horizon; ++t) {
    for (int s : mdp.stages[t]) {
      if (s < 0 || s >= mdp.num_states()) {
        fail("state id out of range at stage " + std::to_string(t + 1));
        continue;
      }
      if (seen[s]++) fail("state " + std::to_string(s) + " appears in more than one stage");
      if (mdp.stage_of[s] != t) fail("stage_of mismatch for state " + std::to_string(s));
    }
  }

  for (int s = 0; s < mdp.num_states(); ++s) {
    const int t = mdp.stage_of[s];
    if (static_cast<int>(mdp.rewards[s].size()) != mdp.num_actions) {
      fail("state " + std::to_string(s) + ": reward row count != action count");
      continue;
    }
    for (int a = 0; a < mdp.num_actions; ++a) {
      const RewardDist& r = mdp.rewards[s][a];
      if (r.support.size() == 0 || r.support.size() != r.probs.size()) {
        fail("state " + std::to_string(s) + " action " + std::to_string(a + 1) +
             ": malformed reward support");
        continue;
      }
      if (std::abs(r.probs.sum() - 1.0) > 1e-12 || r.probs.minCoeff() < -1e-15) {
        fail("state " + std::to_string(s) + " action " + std::to_string(a + 1) +
             ": reward probabilities do not sum to 1");
      }
      if (r.support.minCoeff() < -1e-15 || r.support.maxCoeff() > 1.0 + 1e-15) {
        fail("state " + std::to_string(s) + " action " + std::to_string(a + 1) +
             ": reward support outside [0,1]");
      }
    }
    const bool last = (t == mdp.horizon - 1);
    if (last) {
      if (!mdp.transitions[s].empty()) {
        fail("state " + std::to_string(s) + ": last-stage state has transitions");
      }
      continue;
    }
    if (static_cast<int>(mdp.transitions[s].size()) != mdp.num_actions) {
      fail("state " + std::to_string(s) + ": transition row count != action count");
      continue;
    }
    const int next_count = static_cast<int>(mdp.stages[t + 1].size());
    for (int a = 0; a < mdp.num_actions; ++a) {
      const Vec& row = mdp.transitions[s][a];
      if (static_cast<int>(row.size()) != next_count) {
        fail("state " + std::to_string(s) + " action " + std::to_string(a + 1) +
             ": transition row targets wrong stage size");
        continue;
      }
      if (std::abs(row.sum() - 1.0) > 1e-12) {
        fail("state " + std::to_string(s) + " action " + std::to_string(a + 1) +
             ": transition row sums to " + std::to_string(row.sum()));
      }
      if (row.minCoeff() < -1e-15) {
        fail("state " + std::to_string(s) + " action " + std::to_string(a + 1) +
             ": negative transition probability");
      }
    }
  }
  return report;
}

MemorylessPolicy MemorylessPolicy::deterministic(const Mdp& mdp, const std::vector<int>& actions) {
  MemorylessPolicy pi;
  pi.action_probs = Mat::Zero(mdp.num_states(), mdp.num_actions);
  for (int s = 0; s < mdp.num_states(); ++s) pi.action_probs(s, actions[s]) = 1.0;
  return pi;
}

MemorylessPolicy MemorylessPolicy::uniform(const Mdp& mdp) {
  MemorylessPolicy pi;
  pi.action_probs =
      Mat::Constant(mdp.num_states(), mdp.num_actions, 1.0 / mdp.num_actions);
  return pi;
}

MemorylessPolicy MemorylessPolicy::always_first_action(const Mdp& mdp) {
  return deterministic(mdp, std::vector<int>(mdp.num_states(), 0));
}

std::vector<std::string> validate_policy(const Mdp& mdp, const MemorylessPolicy& pi) {
  std::vector<std::string> report;
  if (pi.action_probs.rows() != mdp.num_states() ||
      pi.action_probs.cols() != mdp.num_actions) {
    report.push_back("policy shape mismatch");
    return report;
  }
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (std::abs(pi.action_probs.row(s).sum() - 1.0) > 1e-12) {
      report.push_back("policy row " + std::to_string(s) + " does not sum to 1");
    }
    if (pi.action_probs.row(s).minCoeff() < -1e-15) {
      report.push_back("policy row " + std::to_string(s) + " has negative entries");
    }
  }
  return report;
}

double Trajectory::total_reward() const {
  return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

double Trajectory::reward_tail(int from_stage) const {
  double acc = 0.0;
  for (int t = std::max(0, from_stage); t < length(); ++t) acc += rewards[t];
  return acc;
}

std::pair<int, double> step(const Mdp& mdp, int s, int a, Rng& rng) {
  if (s < 0 || s >= mdp.num_states()) throw std::invalid_argument("step: unknown state");
  if (a < 0 || a >= mdp.num_actions) throw std::invalid_argument("step: invalid action index");
  const int t = mdp.stage_of[s];
  const double reward = mdp.rewards[s][a].sample(rng.uniform());
  if (t == mdp.horizon - 1) return {-1, reward};
  const int local = rng.categorical(mdp.transitions[s][a]);
  return {mdp.stages[t + 1][local], reward};
}

namespace {
int sample_next_state(const Mdp& mdp, int s, int a, uint64_t ep_seed, int stage) {
  const Vec& row = mdp.transitions[s][a];
  const double u = stage_uniform(ep_seed, stage, kDrawTransition);
  double acc = 0.0;
  for (int i = 0; i < row.size(); ++i) {
    acc += row[i];
    if (u < acc) return mdp.stages[stage + 1][i];
  }
  for (int i = static_cast<int>(row.size()) - 1; i >= 0; --i) {
    if (row[i] > 0.0) return mdp.stages[stage + 1][i];
  }
  throw std::runtime_error("rollout: empty transition row");
}
}  // namespace

Trajectory rollout(const Mdp& mdp, const MemorylessPolicy& pi, uint64_t ep_seed) {
  Trajectory tr;
  tr.seed = ep_seed;
  int s = mdp.initial_state();
  for (int t = 0; t < mdp.horizon; ++t) {
    const double ua = stage_uniform(ep_seed, t, kDrawAction);
    double acc = 0.0;
    int a = mdp.num_actions - 1;
    for (int cand = 0; cand < mdp.num_actions; ++cand) {
      acc += pi.action_probs(s, cand);
      if (ua < acc) {
        a = cand;
        break;
      }
    }
    const double reward = mdp.rewards[s][a].sample(stage_uniform(ep_seed, t, kDrawReward));
    tr.states.push_back(s);
    tr.actions.push_back(a);
    tr.rewards.push_back(reward);
    if (t + 1 < mdp.horizon) s = sample_next_state(mdp, s, a, ep_seed, t);
  }
  return tr;
}

ValueTables evaluate_policy_exact(const Mdp& mdp, const MemorylessPolicy& pi) {
  ValueTables vt;
  vt.v = Vec::Zero(mdp.num_states());
  vt.q = Mat::Zero(mdp.num_states(), mdp.num_actions);
  for (int t = mdp.horizon - 1; t >= 0; --t) {
    for (int s : mdp.stages[t]) {
      for (int a = 0; a < mdp.num_actions; ++a) {
        double q = mdp.mean_reward(s, a);
        if (t + 1 < mdp.horizon) {
          const Vec& row = mdp.transitions[s][a];
          for (int i = 0; i < row.size(); ++i) {
            q += row[i] * vt.v[mdp.stages[t + 1][i]];
          }
        }
        vt.q(s, a) = q;
      }
      vt.v[s] = pi.action_probs.row(s).dot(vt.q.row(s));
    }
  }
  return vt;
}

std::pair<ValueTables, MemorylessPolicy> optimal_values(const Mdp& mdp) {
  ValueTables vt;
  vt.v = Vec::Zero(mdp.num_states());
  vt.q = Mat::Zero(mdp.num_states(), mdp.num_actions);
  std::vector<int> greedy(mdp.num_states(), 0);
  for (int t = mdp.horizon - 1; t >= 0; --t) {
    for (int s : mdp.stages[t]) {
      double best = -1.0;
      for (int a = 0; a < mdp.num_actions; ++a) {
        double q = mdp.mean_reward(s, a);
        if (t + 1 < mdp.horizon) {
          const Vec& row = mdp.transitions[s][a];
          for (int i = 0; i < row.size(); ++i) {
            q += row[i] * vt.v[mdp.stages[t + 1][i]];
          }
        }
        vt.q(s, a) = q;
        if (q > best) {
          best = q;
          greedy[s] = a;
        }
      }
      vt.v[s] = best;
    }
  }
  return {vt, MemorylessPolicy::deterministic(mdp, greedy)};
}

}  // namespace skippy
