#include "skippy/learner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

namespace skippy {

const Vec EpisodeRecord::landing_feature(const FeatureTable& ft) const {
  const int t = landing_stage();
  return ft.at(st.traj.states[t], st.traj.actions[t]);
}

std::vector<std::vector<int>> DataStore::index_sets(int m, int horizon) const {
  std::vector<std::vector<int>> sets(horizon);
  for (int r = 0; r < static_cast<int>(records.size()); ++r) {
    const EpisodeRecord& rec = records[r];
    if (rec.l >= m) continue;
    const int t = rec.landing_stage();
    if (t < horizon) sets[t].push_back(r);
  }
  return sets;
}

void DataStore::discard_iteration(int m) {
  auto it = std::stable_partition(records.begin(), records.end(),
                                  [m](const EpisodeRecord& r) { return r.l != m; });
  discarded.insert(discarded.end(), std::make_move_iterator(it),
                   std::make_move_iterator(records.end()));
  records.erase(it, records.end());
}

LsState LsState::build(const DataStore& data, const FeatureTable& ft, int m,
                       int horizon, double lambda) {
  LsState ls;
  ls.idx = data.index_sets(m, horizon);
  ls.x.reserve(horizon);
  ls.fact.reserve(horizon);
  for (int t = 0; t < horizon; ++t) {
    Mat x = lambda * Mat::Identity(ft.dim, ft.dim);
    for (int r : ls.idx[t]) {
      const Vec phi = data.records[r].landing_feature(ft);
      x.noalias() += phi * phi.transpose();
    }
    ls.x.push_back(x);
    ls.fact.emplace_back(x.ldlt());
  }
  return ls;
}

double LsState::feature_uncertainty(const Vec& phi, int t) const {
  return std::sqrt(std::max(0.0, phi.dot(fact[t].solve(phi))));
}

double lsq_target(const SkippyContext& ctx, const Trajectory& traj, int t) {
  return e_to(ctx, traj, t + 1) + traj.reward_tail(t);
}

namespace {

std::vector<Vec> scalar_lse_tables(const SkippyContext& ctx, const SkippyTables& tables,
                                   const DataStore& data, const LsState& ls) {
  const int horizon = ctx.mdp.horizon;
  std::vector<Vec> theta_hat(horizon);
  for (int t = 0; t < horizon; ++t) {
    Vec rhs = Vec::Zero(ctx.ft.dim);
    for (int r : ls.idx[t]) {
      const EpisodeRecord& rec = data.records[r];
      const std::vector<double> suffix = e_to_suffix(tables, rec.st.traj, horizon);
      const double target = suffix[t + 1] + rec.st.traj.reward_tail(t);
      rhs.noalias() += rec.landing_feature(ctx.ft) * target;
    }
    theta_hat[t] = ls.fact[t].solve(rhs);
  }
  return theta_hat;
}

}  // namespace

std::vector<Vec> scalar_lse(const SkippyContext& ctx, const DataStore& data,
                            const LsState& ls) {
  return scalar_lse_tables(ctx, make_skippy_tables(ctx), data, ls);
}

Mat matrix_lse(const SkippyContext& ctx, const DataStore& data, const LsState& ls,
               int t, int i) {
  const int d = ctx.ft.dim;
  Mat rhs = Mat::Zero(d, d * d);
  for (int r : ls.idx[t]) {
    const EpisodeRecord& rec = data.records[r];
    const Mat f = f_value(ctx, rec.st.traj, i);
    const Vec phi = rec.landing_feature(ctx.ft);
    rhs.noalias() += phi * Eigen::Map<const Vec>(f.data(), d * d).transpose();
  }
  return ls.fact[t].solve(rhs);
}

Mat matrix_lse_predict(const Mat& coef, const Vec& phi) {
  const int d = static_cast<int>(phi.size());
  Vec flat = coef.transpose() * phi;
  return Eigen::Map<const Mat>(flat.data(), d, d);
}

namespace {

ConsistencyStats consistency_stats_tables(const SkippyContext& ctx,
                                          const SkippyTables& tables,
                                          const DataStore& data, const LsState& ls,
                                          int m, int n, const ConstantSet& cs) {
  const int horizon = ctx.mdp.horizon;
  const int d = ctx.ft.dim;
  const double cap = cs.uncertainty_cap();

  ConsistencyStats stats;
  stats.sigma_bar = Vec::Zero(horizon);
  stats.y.resize(std::max(0, horizon - 1));
  stats.f_hat.resize(std::max(0, horizon - 1));

  // vec(phi_bar phi_bar^T) per state, reused across records.
  std::vector<Vec> pb_outer(ctx.mdp.num_states());
  for (int s = 0; s < ctx.mdp.num_states(); ++s) {
    if (ctx.mdp.stage_of[s] >= 1 && tables.phi_bar[s].size() == d) {
      Mat outer = tables.phi_bar[s] * tables.phi_bar[s].transpose();
      pb_outer[s] = Eigen::Map<const Vec>(outer.data(), d * d);
    }
  }

  // Matrix-target ridge coefficients theta_hat^{ti} over prior iterations.
  std::vector<std::vector<Mat>> coef(horizon, std::vector<Mat>(horizon));
  {
    std::vector<std::vector<Mat>> rhs(horizon, std::vector<Mat>(horizon));
    for (int t = 0; t < horizon; ++t) {
      for (int i = t + 1; i < horizon; ++i) rhs[t][i] = Mat::Zero(d, d * d);
    }
    for (int t = 0; t < horizon; ++t) {
      for (int r : ls.idx[t]) {
        const EpisodeRecord& rec = data.records[r];
        const std::vector<double> suffix = e_to_suffix(tables, rec.st.traj, horizon);
        const Vec phi = rec.landing_feature(ctx.ft);
        for (int i = t + 1; i < horizon; ++i) {
          const double e_i = suffix[i] - suffix[i + 1];
          if (e_i == 0.0) continue;
          const int s_i = rec.st.traj.states[i];
          if (pb_outer[s_i].size() == 0) continue;
          rhs[t][i].noalias() += phi * (e_i * pb_outer[s_i]).transpose();
        }
      }
      for (int i = t + 1; i < horizon; ++i) coef[t][i] = ls.fact[t].solve(rhs[t][i]);
    }
  }

  std::vector<std::vector<const EpisodeRecord*>> by_k(horizon + 1);
  for (const EpisodeRecord& rec : data.records) {
    if (rec.l == m) by_k[rec.k].push_back(&rec);
  }

  for (int k = 1; k <= horizon; ++k) {
    double sigma = 0.0;
    for (const EpisodeRecord* rec : by_k[k]) {
      const int t = rec->landing_stage();
      if (t >= horizon) continue;  // saturated stage map
      const Vec phi = rec->landing_feature(ctx.ft);
      sigma += std::min(cap, ls.feature_uncertainty(phi, t));
    }
    stats.sigma_bar[k - 1] = sigma / n;
  }

  for (int k = 1; k <= horizon - 1; ++k) {
    stats.y[k - 1].assign(horizon - k, Mat::Zero(d, d));
    stats.f_hat[k - 1].assign(horizon - k, Mat::Zero(d, d));
    for (const EpisodeRecord* rec : by_k[k]) {
      const int t = rec->landing_stage();
      if (t >= horizon) continue;
      const Vec phi = rec->landing_feature(ctx.ft);
      const bool low_uncertainty = ls.feature_uncertainty(phi, t) < cap;
      const bool nonneg_pred = phi.dot(ctx.theta_bar.theta_bar[t]) >= 0.0;
      if (!(low_uncertainty && nonneg_pred)) continue;
      const std::vector<double> suffix = e_to_suffix(tables, rec->st.traj, horizon);
      for (int i = k + 1; i <= horizon; ++i) {
        const int i0 = i - 1;
        if (!(t < i0)) continue;
        stats.y[k - 1][i - k - 1].noalias() += matrix_lse_predict(coef[t][i0], phi) / n;
        const double e_i = suffix[i0] - suffix[i0 + 1];
        if (e_i != 0.0 && pb_outer[rec->st.traj.states[i0]].size() != 0) {
          const Vec& po = pb_outer[rec->st.traj.states[i0]];
          stats.f_hat[k - 1][i - k - 1].noalias() +=
              Eigen::Map<const Mat>(po.data(), d, d) * (e_i / n);
        }
      }
    }
  }
  return stats;
}

}  // namespace

ConsistencyStats consistency_stats(const SkippyContext& ctx, const DataStore& data,
                                   const LsState& ls, int m, int n,
                                   const ConstantSet& cs) {
  return consistency_stats_tables(ctx, make_skippy_tables(ctx), data, ls, m, n, cs);
}

ConsistencyResult solve_consistency(const ConsistencyStats& stats,
                                    const Preconditioning& pc) {
  ConsistencyResult res;
  const int dim = pc.dim();
  res.v = Vec::Unit(dim, 0);
  res.w = res.v;
  res.k = 1;
  res.i = std::min(2, pc.horizon());
  res.x = 0.0;

  bool found = false;
  for (int k = 1; k <= static_cast<int>(stats.y.size()); ++k) {
    for (int off = 0; off < static_cast<int>(stats.y[k - 1].size()); ++off) {
      const int i = k + 1 + off;
      Mat m = stats.y[k - 1][off] - stats.f_hat[k - 1][off];
      m = 0.5 * (m + m.transpose());  // symmetric by construction; defensive
      Eigen::SelfAdjointEigenSolver<Mat> es(m);
      const int top = dim - 1;
      const double val = es.eigenvalues()[top];
      if (!found || val > res.x) {
        found = true;
        res.x = val;
        res.k = k;
        res.i = i;
        Vec v = es.eigenvectors().col(top);
        int imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v[imax] < 0) v = -v;
        res.v = v;
        res.w = z_projector(pc, i - 1) * v;
        res.w_quad = res.w.dot(m * res.w);
      }
    }
  }
  if (!found) res.w_quad = 0.0;
  return res;
}

namespace {

// States seen at each stage anywhere in the collected trajectories, with
// visit frequencies. Used as the support of the optimism objective.
std::vector<std::vector<std::pair<int, double>>> observed_states(
    const Mdp& mdp, const DataStore& data) {
  std::vector<std::map<int, double>> seen(mdp.horizon);
  for (const EpisodeRecord& rec : data.records) {
    for (int t = 0; t < rec.st.traj.length(); ++t) {
      seen[t][rec.st.traj.states[t]] += 1.0;
    }
  }
  std::vector<std::vector<std::pair<int, double>>> out(mdp.horizon);
  for (int t = 0; t < mdp.horizon; ++t) {
    double total = 0.0;
    for (auto& [s, c] : seen[t]) total += c;
    for (auto& [s, c] : seen[t]) out[t].push_back({s, c / std::max(1.0, total)});
    if (out[t].empty() && t == 0) out[t].push_back({mdp.initial_state(), 1.0});
  }
  return out;
}

// Maximize sum_s w_s clip(max_a <phi(s,a), theta>) over the confidence
// ellipsoid ||theta - center||_{X_t} <= radius. The objective is a maximum of
// linear pieces, so the per-(s,a) ellipsoid-boundary points are candidate
// maximizers; iterated linearization polishes the best one. The per-action
// candidates are what lets an unexplored action inherit its full uncertainty
// bonus.
Vec optimistic_bump(const Mdp& mdp, const FeatureTable& ft, const LsState& ls, int t,
                    const Vec& center, double radius, double clip_high,
                    const std::vector<std::pair<int, double>>& states) {
  if (states.empty() || radius <= 0.0) return center;
  auto objective = [&](const Vec& theta) {
    double acc = 0.0;
    for (const auto& [s, w] : states) {
      double best = -1e300;
      for (int a = 0; a < mdp.num_actions; ++a) {
        best = std::max(best, ft.at(s, a).dot(theta));
      }
      acc += w * std::min(clip_high, std::max(0.0, best));
    }
    return acc;
  };
  auto boundary_towards = [&](const Vec& g) {
    Vec dir = ls.fact[t].solve(g);
    const double dn = std::sqrt(std::max(1e-300, g.dot(dir)));
    return Vec(center + (radius / dn) * dir);
  };

  Vec best_theta = center;
  double best_val = objective(center);
  for (const auto& [s, w] : states) {
    (void)w;
    for (int a = 0; a < mdp.num_actions; ++a) {
      const Vec phi = ft.at(s, a);
      if (phi.norm() <= 1e-300) continue;
      Vec cand = boundary_towards(phi);
      const double val = objective(cand);
      if (val > best_val + 1e-12) {
        best_val = val;
        best_theta = cand;
      }
    }
  }
  Vec theta = best_theta;
  for (int round = 0; round < 6; ++round) {
    Vec g = Vec::Zero(ft.dim);
    for (const auto& [s, w] : states) {
      int arg = 0;
      double best = -1e300;
      for (int a = 0; a < mdp.num_actions; ++a) {
        const double ip = ft.at(s, a).dot(theta);
        if (ip > best) {
          best = ip;
          arg = a;
        }
      }
      g.noalias() += w * ft.at(s, arg);
    }
    theta = boundary_towards(g);
    const double val = objective(theta);
    if (val > best_val + 1e-12) {
      best_val = val;
      best_theta = theta;
    } else {
      break;
    }
  }
  return best_theta;
}

// Backward pass: theta_hat at stage t depends on theta_bar at later stages
// only, so assigning stages from the back keeps the ellipsoid constraint
// exact for the returned point.
OptimisticSolution backward_pass(const Mdp& mdp, const FeatureTable& ft,
                                 const Preconditioning& pc, const DataStore& data,
                                 const LsState& ls, const LearnerConfig& config,
                                 const Guess& guess, bool bump,
                                 const std::vector<std::vector<std::pair<int, double>>>& states) {
  const ConstantSet& cs = config.constants;
  OptimisticSolution sol;
  sol.guess = guess;
  sol.theta_bar = OptimisticParams::zero(ft.dim, mdp.horizon, cs.theta_bar_radius());
  const double radius = cs.beta * mdp.horizon;

  SkippyContext ctx{mdp, ft, sol.guess, sol.theta_bar, pc, config.eps};
  SkippyTables tables = make_skippy_tables(ctx);
  sol.theta_hat.assign(mdp.horizon, Vec::Zero(ft.dim));
  for (int t = mdp.horizon - 1; t >= 0; --t) {
    Vec rhs = Vec::Zero(ft.dim);
    for (int r : ls.idx[t]) {
      const EpisodeRecord& rec = data.records[r];
      const std::vector<double> suffix = e_to_suffix(tables, rec.st.traj, mdp.horizon);
      rhs.noalias() +=
          rec.landing_feature(ft) * (suffix[t + 1] + rec.st.traj.reward_tail(t));
    }
    Vec theta_hat = ls.fact[t].solve(rhs);
    sol.theta_hat[t] = theta_hat;
    Vec theta = theta_hat;
    if (bump) {
      theta = optimistic_bump(mdp, ft, ls, t, theta_hat, radius,
                              static_cast<double>(mdp.horizon), states[t]);
    }
    const double nrm = theta.norm();
    if (nrm > cs.theta_bar_radius()) {
      theta *= cs.theta_bar_radius() / nrm;  // never binds at desk scale
    }
    sol.theta_bar.theta_bar[t] = theta;
    refresh_stage_actions(ctx, t, tables);
  }
  sol.c_value = tables.c_value[mdp.initial_state()];
  return sol;
}

}  // namespace

OptimisticSolution solve_optimistic(const Mdp& mdp, const FeatureTable& ft,
                                    const Preconditioning& pc, const DataStore& data,
                                    const LsState& ls, const LearnerConfig& config,
                                    Rng& rng) {
  const ConstantSet& cs = config.constants;
  const auto states = observed_states(mdp, data);

  if (config.opt1_mode == Opt1Mode::kOracleAssisted) {
    if (!config.guess_provider) {
      throw std::invalid_argument("solve_optimistic: oracle mode needs a guess provider");
    }
    Guess g = config.guess_provider(pc);
    return backward_pass(mdp, ft, pc, data, ls, config, g, true, states);
  }

  // Search mode: multi-start over guesses, backward optimistic pass each.
  const int d0 = static_cast<int>(cs.d0);
  OptimisticSolution best;
  bool have = false;
  for (int restart = 0; restart < std::max(1, config.opt1_restarts); ++restart) {
    Guess g = Guess::zero(ft.dim, mdp.horizon, d0, cs.guess_radius());
    if (restart > 0) {
      for (int h = 1; h < mdp.horizon; ++h) {
        for (int kk = 0; kk < d0; ++kk) {
          const double r =
              cs.guess_radius() * std::pow(rng.uniform(), 1.0 / std::max(1, ft.dim));
          g.vartheta[h][kk] = r * rng.unit_vector(ft.dim);
        }
      }
    }
    OptimisticSolution cand = backward_pass(mdp, ft, pc, data, ls, config, g, true, states);
    if (!have || cand.c_value > best.c_value) {
      best = std::move(cand);
      have = true;
    }
  }
  // Local ascent on the best guess.
  for (int round = 0; round < config.opt1_ascent_rounds; ++round) {
    Guess g = best.guess;
    const double scale = cs.guess_radius() * std::pow(0.5, round + 1);
    for (int h = 1; h < mdp.horizon; ++h) {
      for (auto& v : g.vartheta[h]) {
        v += scale * rng.gaussian_vector(ft.dim);
        const double nrm = v.norm();
        if (nrm > cs.guess_radius()) v *= cs.guess_radius() / nrm;
      }
    }
    OptimisticSolution cand = backward_pass(mdp, ft, pc, data, ls, config, g, true, states);
    if (cand.c_value > best.c_value) best = std::move(cand);
  }
  best.search_optimum_only = true;
  return best;
}

double skippy_policy_value_exact(const SkippyContext& ctx, int k) {
  const Mdp& mdp = ctx.mdp;
  const int horizon = mdp.horizon;
  const SkippyTables tables = make_skippy_tables(ctx);
  // value[s][j]: expected reward-to-go from s with j landings so far.
  std::vector<std::vector<double>> value(mdp.num_states(),
                                         std::vector<double>(horizon + 2, 0.0));
  for (int t = horizon - 1; t >= 0; --t) {
    for (int s : mdp.stages[t]) {
      const double tau_s = tables.tau[s];
      const int a_plus = tables.a_plus[s];
      for (int j = 0; j <= horizon; ++j) {
        // Skip branch: action 1.
        double skip_val = mdp.mean_reward(s, 0);
        if (t + 1 < horizon) {
          const Vec& row = mdp.transitions[s][0];
          for (int r = 0; r < row.size(); ++r) {
            skip_val += row[r] * value[mdp.stages[t + 1][r]][j];
          }
        }
        // Landing branch: this landing has 0-based index j.
        const int a = (j < k) ? a_plus : 0;
        double land_val = mdp.mean_reward(s, a);
        if (t + 1 < horizon) {
          const Vec& row = mdp.transitions[s][a];
          for (int r = 0; r < row.size(); ++r) {
            land_val += row[r] * value[mdp.stages[t + 1][r]][std::min(j + 1, horizon)];
          }
        }
        value[s][j] = (1.0 - tau_s) * skip_val + tau_s * land_val;
      }
    }
  }
  return value[mdp.initial_state()][0];
}

LearnerResult run_skippy_eleanor(const Mdp& mdp, const FeatureTable& ft,
                                 const LearnerConfig& config) {
  const ConstantSet& cs = config.constants;
  const int horizon = mdp.horizon;
  const int n = static_cast<int>(cs.n);

  LearnerResult result;
  result.log.terminated_by = "mprime_budget";
  Preconditioning pc = Preconditioning::initial(ft.dim, horizon, ft.l2_bound, cs.l3);
  DataStore data;
  Rng rng(mix_seed(config.seed, 0x0b5e55edULL));

  int m = 0;
  int mprime = 0;
  uint64_t episodes = 0;
  std::vector<int> updates_per_stage(horizon, 0);

  OptimisticSolution sol;
  while (mprime < static_cast<int>(cs.mprime_max)) {
    const auto t0 = std::chrono::steady_clock::now();
    m += 1;
    mprime += 1;
    if (m > static_cast<int>(cs.m_max)) {
      throw std::runtime_error("run_skippy_eleanor: m exceeded m_max");
    }

    LsState ls = LsState::build(data, ft, m, horizon, cs.lambda);
    sol = solve_optimistic(mdp, ft, pc, data, ls, config, rng);
    SkippyContext ctx{mdp, ft, sol.guess, sol.theta_bar, pc, config.eps};
    SkippyTables tables = make_skippy_tables(ctx);

    // Feasibility always attainable; assert the returned point is inside.
    double max_slack = -1e300;
    for (int t = 0; t < horizon; ++t) {
      const Vec delta = sol.theta_bar.theta_bar[t] - sol.theta_hat[t];
      max_slack = std::max(max_slack, quad_norm(delta, ls.x[t]) - cs.beta * horizon);
    }
    if (max_slack > 1e-6) {
      throw std::runtime_error("run_skippy_eleanor: optimistic point infeasible");
    }

    for (int k = 1; k <= horizon; ++k) {
      for (int j = 0; j < n; ++j) {
        const uint64_t seed = episode_seed(config.seed, episodes);
        EpisodeRecord rec;
        rec.l = m;
        rec.k = k;
        rec.j = j;
        rec.st = run_skippy_policy_with_tables(ctx, tables, k, seed);
        data.records.push_back(std::move(rec));
        ++episodes;
      }
    }

    ConsistencyStats stats = consistency_stats_tables(ctx, tables, data, ls, m, n, cs);
    ConsistencyResult cons = solve_consistency(stats, pc);

    IterationLog il;
    il.m = m;
    il.mprime = mprime;
    il.c_value = sol.c_value;
    il.x = cons.x;
    il.v_quad = cons.x;
    il.w_quad = cons.w_quad;
    il.sigma_bar = stats.sigma_bar;
    il.sigma_bar_sum = stats.sigma_bar.sum();
    il.feasibility_slack = max_slack;
    il.episodes_total = episodes;

    const double threshold = cs.discrepancy_threshold(stats.sigma_bar[cons.k - 1]);
    if (cons.x > threshold && cons.w.norm() > 1e-9) {
      const int i0 = cons.i - 1;
      pc.append_direction(i0, cons.w);
      updates_per_stage[i0] += 1;
      if (updates_per_stage[i0] > static_cast<int>(cs.d1)) {
        throw std::runtime_error("run_skippy_eleanor: per-stage Q updates exceeded d1");
      }
      data.discard_iteration(m);
      m -= 1;
      il.q_updated = true;
      il.update_stage = cons.i;
      il.update_w_norm = cons.w.norm();
      result.log.q_updates.push_back({mprime, cons.k, cons.i, cons.w.norm(), cons.x});
      il.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      result.log.iterations.push_back(std::move(il));
      if (episodes >= config.episode_cap) {
        result.log.terminated_by = "episode_cap";
        break;
      }
      continue;
    }

    il.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.iterations.push_back(std::move(il));

    if (stats.sigma_bar.sum() <= cs.uncertainty_threshold) {
      result.log.terminated_by = "uncertainty_threshold";
      break;
    }
    if (episodes >= config.episode_cap) {
      result.log.terminated_by = "episode_cap";
      break;
    }
  }

  result.policy = PolicyDescriptor{sol.guess, sol.theta_bar, horizon, pc};
  result.log.episodes_total = episodes;
  result.data = std::move(data);
  return result;
}

}  // namespace skippy
