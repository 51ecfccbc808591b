#include "skippy/skippy_policy.hpp"

#include <cmath>
#include <stdexcept>

namespace skippy {

Guess Guess::zero(int dim, int horizon, int d0, double norm_bound) {
  Guess g;
  g.norm_bound = norm_bound;
  g.vartheta.resize(horizon);
  for (int h = 1; h < horizon; ++h) {
    g.vartheta[h].assign(d0, Vec::Zero(dim));
  }
  return g;
}

Guess Guess::correct_from_designs(const std::vector<DesignSet>& designs,
                                  double norm_bound, int d0, int dim) {
  Guess g;
  g.norm_bound = norm_bound;
  g.vartheta.resize(designs.size());
  for (size_t h = 1; h < designs.size(); ++h) {
    if (designs[h].points.empty()) {
      g.vartheta[h].assign(d0, Vec::Zero(dim));
    } else {
      g.vartheta[h] = designs[h].points;
    }
  }
  return g;
}

std::vector<std::string> Guess::validate() const {
  std::vector<std::string> report;
  for (size_t h = 1; h < vartheta.size(); ++h) {
    for (size_t k = 0; k < vartheta[h].size(); ++k) {
      if (vartheta[h][k].norm() > norm_bound + 1e-9) {
        report.push_back("guess entry (stage " + std::to_string(h + 1) + ", " +
                         std::to_string(k + 1) + ") exceeds the validity ball");
      }
    }
  }
  return report;
}

OptimisticParams OptimisticParams::zero(int dim, int horizon, double norm_bound) {
  OptimisticParams p;
  p.norm_bound = norm_bound;
  p.theta_bar.assign(horizon, Vec::Zero(dim));
  return p;
}

int SkippyTrajectory::landing_count() const {
  int c = 0;
  const int horizon = static_cast<int>(stage_map.size());
  for (int p : stage_map) {
    if (p < horizon) ++c;
  }
  return c;
}

namespace {
double range_q_guess_unchecked(const Mdp& mdp, const FeatureTable& ft, int s,
                               const Guess& guess, const Preconditioning& pc) {
  const int t = mdp.stage_of[s];
  const Mat& q = pc.q[t];
  double best = 0.0;
  for (const Vec& vt : guess.vartheta[t]) {
    const Vec back = q * vt;  // <Q diff, vt> = <diff, Q vt>
    for (int i = 0; i < mdp.num_actions; ++i) {
      const double vi = ft.phi[s].row(i).dot(back);
      for (int j = 0; j < mdp.num_actions; ++j) {
        best = std::max(best, vi - ft.phi[s].row(j).dot(back));
      }
    }
  }
  return best;
}
}  // namespace

double range_q_guess(const Mdp& mdp, const FeatureTable& ft, int s,
                     const Guess& guess, const Preconditioning& pc) {
  const int t = mdp.stage_of[s];
  if (t < 1) throw std::invalid_argument("range_q_guess: defined for stage >= 2");
  auto bad = guess.validate();
  if (!bad.empty()) throw std::invalid_argument("range_q_guess: " + bad.front());
  return range_q_guess_unchecked(mdp, ft, s, guess, pc);
}

double tau(const SkippyContext& ctx, int s) {
  const int t = ctx.mdp.stage_of[s];
  if (t == 0) {
    if (s != ctx.mdp.initial_state()) {
      throw std::logic_error("tau: stage-1 state other than s1");
    }
    return 1.0;
  }
  const double r = range_q_guess_unchecked(ctx.mdp, ctx.ft, s, ctx.guess, ctx.precond);
  const double d = static_cast<double>(ctx.ft.dim);
  return std::min(1.0, r * std::sqrt(2.0 * d) * ctx.mdp.horizon / ctx.eps);
}

std::pair<int, double> pi_plus_and_c(const SkippyContext& ctx, int s) {
  const int t = ctx.mdp.stage_of[s];
  const Vec& theta = ctx.theta_bar.theta_bar[t];
  int best_a = 0;
  double best_ip = ctx.ft.at(s, 0).dot(theta);
  for (int a = 1; a < ctx.mdp.num_actions; ++a) {
    const double ip = ctx.ft.at(s, a).dot(theta);
    if (ip > best_ip) {
      best_ip = ip;
      best_a = a;
    }
  }
  const double c = std::min(static_cast<double>(ctx.mdp.horizon), std::max(0.0, best_ip));
  return {best_a, c};
}

SkippyTrajectory run_skippy_policy(const SkippyContext& ctx, int k, uint64_t ep_seed) {
  const int horizon = ctx.mdp.horizon;
  if (k < 1 || k > horizon) throw std::invalid_argument("run_skippy_policy: k out of range");
  SkippyTrajectory st;
  st.phase_budget = k;
  st.stage_map.assign(horizon, horizon);  // saturate by default, overwritten below
  st.tau.assign(horizon, 0.0);
  st.skip_draws.assign(horizon, 0);
  st.traj.seed = ep_seed;

  int s = ctx.mdp.initial_state();
  int j = 0;  // next landing index to assign
  for (int i = 0; i < horizon; ++i) {
    const double tau_i = tau(ctx, s);
    st.tau[i] = tau_i;
    const int b = stage_uniform(ep_seed, i, kDrawSkip) < tau_i ? 1 : 0;
    st.skip_draws[i] = b;
    int a = 0;
    if (b == 1) {
      const auto [a_plus, c] = pi_plus_and_c(ctx, s);
      st.stage_map[j] = i;
      ++j;
      // Phase I while the 0-based landing index is below k, so budgets k and
      // k+1 agree through the state of landing k (their stage maps included).
      a = (j <= k) ? a_plus : 0;
    }
    const double reward = ctx.mdp.rewards[s][a].sample(stage_uniform(ep_seed, i, kDrawReward));
    st.traj.states.push_back(s);
    st.traj.actions.push_back(a);
    st.traj.rewards.push_back(reward);
    if (i + 1 < horizon) {
      const Vec& row = ctx.mdp.transitions[s][a];
      const double u = stage_uniform(ep_seed, i, kDrawTransition);
      double acc = 0.0;
      int local = static_cast<int>(row.size()) - 1;
      for (int c2 = 0; c2 < row.size(); ++c2) {
        acc += row[c2];
        if (u < acc) {
          local = c2;
          break;
        }
      }
      s = ctx.mdp.stages[i + 1][local];
    }
  }
  return st;
}

double d_value(const SkippyContext& ctx, const Trajectory& traj, int i) {
  if (i < 1) throw std::invalid_argument("d_value: defined for stage >= 2");
  const auto [a, c] = pi_plus_and_c(ctx, traj.states[i]);
  (void)a;
  return c - traj.reward_tail(i);
}

double e_to(const SkippyContext& ctx, const Trajectory& traj, int i) {
  const int horizon = ctx.mdp.horizon;
  double acc = 0.0;  // E^->(traj_{H+1}) = 0
  for (int u = horizon - 1; u >= i; --u) {
    const double t = tau(ctx, traj.states[u]);
    acc = t * d_value(ctx, traj, u) + (1.0 - t) * acc;
  }
  return acc;
}

double e_to_probability_form(const SkippyContext& ctx, const Trajectory& traj, int i) {
  const int horizon = ctx.mdp.horizon;
  double acc = 0.0;
  double no_skip_mass = 1.0;  // prod_{j' < j} (1 - tau(s_j'))
  for (int j = i; j < horizon; ++j) {
    const double t = tau(ctx, traj.states[j]);
    acc += d_value(ctx, traj, j) * t * no_skip_mass;
    no_skip_mass *= (1.0 - t);
  }
  return acc;
}

double e_step(const SkippyContext& ctx, const Trajectory& traj, int i) {
  const double next = (i + 1 < ctx.mdp.horizon) ? e_to(ctx, traj, i + 1) : 0.0;
  return tau(ctx, traj.states[i]) * (d_value(ctx, traj, i) - next);
}

Vec phi_bar_q(const Mdp& mdp, const FeatureTable& ft, const Preconditioning& pc, int s) {
  const int t = mdp.stage_of[s];
  if (t < 1) throw std::invalid_argument("phi_bar_q: defined for stage >= 2");
  const Mat& q = pc.q[t];
  Vec best = Vec::Zero(ft.dim);
  double best_norm = 0.0;
  for (int i = 0; i < mdp.num_actions; ++i) {
    for (int j = 0; j < mdp.num_actions; ++j) {
      Vec cand = q * ft.diff(s, i, j);
      const double n = cand.norm();
      if (n > best_norm + 1e-15) {  // strict improvement keeps the (i,j) order
        best_norm = n;
        best = cand;
      }
    }
  }
  if (best_norm < 1e-14) return Vec::Zero(ft.dim);
  return best / best_norm;
}

Mat f_value(const SkippyContext& ctx, const Trajectory& traj, int i) {
  const Vec pb = phi_bar_q(ctx.mdp, ctx.ft, ctx.precond, traj.states[i]);
  return pb * pb.transpose() * e_step(ctx, traj, i);
}

SkippyTables make_skippy_tables(const SkippyContext& ctx) {
  const Mdp& mdp = ctx.mdp;
  SkippyTables tables;
  tables.tau.assign(mdp.num_states(), 0.0);
  tables.a_plus.assign(mdp.num_states(), 0);
  tables.c_value.assign(mdp.num_states(), 0.0);
  tables.phi_bar.assign(mdp.num_states(), Vec());
  for (int s = 0; s < mdp.num_states(); ++s) {
    tables.tau[s] = tau(ctx, s);
    const auto [a, c] = pi_plus_and_c(ctx, s);
    tables.a_plus[s] = a;
    tables.c_value[s] = c;
    if (mdp.stage_of[s] >= 1) {
      tables.phi_bar[s] = phi_bar_q(mdp, ctx.ft, ctx.precond, s);
    }
  }
  return tables;
}

void refresh_stage_actions(const SkippyContext& ctx, int t, SkippyTables& tables) {
  for (int s : ctx.mdp.stages[t]) {
    const auto [a, c] = pi_plus_and_c(ctx, s);
    tables.a_plus[s] = a;
    tables.c_value[s] = c;
  }
}

std::vector<double> e_to_suffix(const SkippyTables& tables, const Trajectory& traj,
                                int horizon) {
  std::vector<double> out(horizon + 1, 0.0);
  double tail = 0.0;
  for (int i = horizon - 1; i >= 1; --i) {
    tail += traj.rewards[i];
    const int s = traj.states[i];
    const double d = tables.c_value[s] - tail;
    out[i] = tables.tau[s] * d + (1.0 - tables.tau[s]) * out[i + 1];
  }
  return out;
}

SkippyTrajectory run_skippy_policy_with_tables(const SkippyContext& ctx,
                                               const SkippyTables& tables, int k,
                                               uint64_t ep_seed) {
  const int horizon = ctx.mdp.horizon;
  if (k < 1 || k > horizon) throw std::invalid_argument("run_skippy_policy: k out of range");
  SkippyTrajectory st;
  st.phase_budget = k;
  st.stage_map.assign(horizon, horizon);
  st.tau.assign(horizon, 0.0);
  st.skip_draws.assign(horizon, 0);
  st.traj.seed = ep_seed;
  st.traj.states.resize(horizon);
  st.traj.actions.resize(horizon);
  st.traj.rewards.resize(horizon);

  int s = ctx.mdp.initial_state();
  int j = 0;
  for (int i = 0; i < horizon; ++i) {
    const double tau_i = tables.tau[s];
    st.tau[i] = tau_i;
    const int b = stage_uniform(ep_seed, i, kDrawSkip) < tau_i ? 1 : 0;
    st.skip_draws[i] = b;
    int a = 0;
    if (b == 1) {
      st.stage_map[j] = i;
      ++j;
      a = (j <= k) ? tables.a_plus[s] : 0;
    }
    st.traj.states[i] = s;
    st.traj.actions[i] = a;
    st.traj.rewards[i] =
        ctx.mdp.rewards[s][a].sample(stage_uniform(ep_seed, i, kDrawReward));
    if (i + 1 < horizon) {
      const Vec& row = ctx.mdp.transitions[s][a];
      const double u = stage_uniform(ep_seed, i, kDrawTransition);
      double acc = 0.0;
      int local = static_cast<int>(row.size()) - 1;
      for (int c2 = 0; c2 < row.size(); ++c2) {
        acc += row[c2];
        if (u < acc) {
          local = c2;
          break;
        }
      }
      s = ctx.mdp.stages[i + 1][local];
    }
  }
  return st;
}

Vec bar_e_to_all_states(const SkippyContext& ctx) {
  const Mdp& mdp = ctx.mdp;
  const ValueTables vt = evaluate_policy_exact(mdp, MemorylessPolicy::always_first_action(mdp));
  Vec bar(mdp.num_states());
  bar.setZero();
  for (int t = mdp.horizon - 1; t >= 1; --t) {
    for (int s : mdp.stages[t]) {
      const double tau_s = tau(ctx, s);
      const auto [a_plus, c] = pi_plus_and_c(ctx, s);
      (void)a_plus;
      double next = 0.0;
      if (t + 1 < mdp.horizon) {
        const Vec& row = mdp.transitions[s][0];
        for (int i = 0; i < row.size(); ++i) next += row[i] * bar[mdp.stages[t + 1][i]];
      }
      bar[s] = tau_s * (c - vt.q(s, 0)) + (1.0 - tau_s) * next;
    }
  }
  return bar;
}

Mat bar_f(const SkippyContext& ctx, int s, int dp_state_cutoff, int mc_episodes,
          uint64_t mc_seed) {
  const Mdp& mdp = ctx.mdp;
  const int t = mdp.stage_of[s];
  if (t < 1) throw std::invalid_argument("bar_f: defined for stage >= 2");
  const Vec pb = phi_bar_q(mdp, ctx.ft, ctx.precond, s);

  if (mdp.num_states() <= dp_state_cutoff) {
    const ValueTables vt =
        evaluate_policy_exact(mdp, MemorylessPolicy::always_first_action(mdp));
    const Vec bar_next = bar_e_to_all_states(ctx);
    const double tau_s = tau(ctx, s);
    const auto [a_plus, c] = pi_plus_and_c(ctx, s);
    (void)a_plus;
    double next = 0.0;
    if (t + 1 < mdp.horizon) {
      const Vec& row = mdp.transitions[s][0];
      for (int i = 0; i < row.size(); ++i) next += row[i] * bar_next[mdp.stages[t + 1][i]];
    }
    const double bar_e = tau_s * (c - vt.q(s, 0) - next);
    return pb * pb.transpose() * bar_e;
  }

  // Monte-Carlo fallback: roll pi^0 suffixes from s.
  double acc = 0.0;
  for (int ep = 0; ep < mc_episodes; ++ep) {
    const uint64_t seed = episode_seed(mc_seed, ep);
    Trajectory traj;
    traj.states.assign(mdp.horizon, s);
    traj.actions.assign(mdp.horizon, 0);
    traj.rewards.assign(mdp.horizon, 0.0);
    int cur = s;
    for (int u = t; u < mdp.horizon; ++u) {
      traj.states[u] = cur;
      traj.rewards[u] = mdp.rewards[cur][0].sample(stage_uniform(seed, u, kDrawReward));
      if (u + 1 < mdp.horizon) {
        const Vec& row = mdp.transitions[cur][0];
        const double draw = stage_uniform(seed, u, kDrawTransition);
        double sum = 0.0;
        int local = static_cast<int>(row.size()) - 1;
        for (int c2 = 0; c2 < row.size(); ++c2) {
          sum += row[c2];
          if (draw < sum) {
            local = c2;
            break;
          }
        }
        cur = mdp.stages[u + 1][local];
      }
    }
    acc += e_step(ctx, traj, t);
  }
  return pb * pb.transpose() * (acc / mc_episodes);
}

}  // namespace skippy
