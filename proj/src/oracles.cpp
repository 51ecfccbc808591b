#include "skippy/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace skippy {

namespace {

// Stage-h Chebyshev fit of a q-table row block, fast path through plain
// least squares when the instance is exactly realizable.
ChebyshevFit fit_stage(const Mdp& mdp, const FeatureTable& ft, const Mat& q, int t) {
  const auto& st = mdp.stages[t];
  Mat a(static_cast<int>(st.size()) * mdp.num_actions, ft.dim);
  Vec b(a.rows());
  int r = 0;
  for (int s : st) {
    for (int act = 0; act < mdp.num_actions; ++act, ++r) {
      a.row(r) = ft.phi[s].row(act);
      b[r] = q(s, act);
    }
  }
  return chebyshev_fit(a, b, ft.l2_bound);
}

}  // namespace

PolicyEnumeration enumerate_policies(const Mdp& mdp, const FeatureTable& ft,
                                     uint64_t cap) {
  const int s_count = mdp.num_states();
  const int a_count = mdp.num_actions;
  double total_d = std::pow(static_cast<double>(a_count), s_count);
  if (total_d > static_cast<double>(cap)) {
    throw std::invalid_argument("enumerate_policies: A^|S| exceeds the enumeration cap");
  }
  const uint64_t total = static_cast<uint64_t>(std::llround(total_d));

  PolicyEnumeration out;
  out.policies.reserve(total);
  out.values.reserve(total);
  out.params.reserve(total);
  out.thetas.per_stage.resize(mdp.horizon);
  out.theta_policy_rep.resize(mdp.horizon);

  // q^pi at stage t depends on pi only through actions at stages > t, so the
  // per-stage parameter sets are deduplicated by action suffix.
  std::vector<std::map<std::vector<int>, int>> suffix_fit(mdp.horizon);
  std::vector<std::vector<double>> fit_gap(mdp.horizon);

  std::vector<int> assign(s_count, 0);
  for (uint64_t idx = 0; idx < total; ++idx) {
    MemorylessPolicy pi = MemorylessPolicy::deterministic(mdp, assign);
    ValueTables vt = evaluate_policy_exact(mdp, pi);

    PolicyParameter pp;
    pp.theta.resize(mdp.horizon);
    pp.error.resize(mdp.horizon);
    pp.gap.resize(mdp.horizon);
    for (int t = 0; t < mdp.horizon; ++t) {
      std::vector<int> key;
      for (int s = 0; s < s_count; ++s) {
        if (mdp.stage_of[s] > t) key.push_back(assign[s]);
      }
      auto it = suffix_fit[t].find(key);
      if (it == suffix_fit[t].end()) {
        ChebyshevFit fit = fit_stage(mdp, ft, vt.q, t);
        out.thetas.per_stage[t].push_back(fit.theta);
        out.theta_policy_rep[t].push_back(static_cast<int>(idx));
        fit_gap[t].push_back(fit.gap());
        it = suffix_fit[t].emplace(key, static_cast<int>(out.thetas.per_stage[t].size()) - 1).first;
      }
      pp.theta[t] = out.thetas.per_stage[t][it->second];
      pp.gap[t] = fit_gap[t][it->second];
      double err = 0.0;
      for (int s : mdp.stages[t]) {
        for (int a = 0; a < a_count; ++a) {
          err = std::max(err, std::abs(vt.q(s, a) - ft.at(s, a).dot(pp.theta[t])));
        }
      }
      pp.error[t] = err;
      out.eta_hat = std::max(out.eta_hat, err);
    }

    out.policies.push_back(std::move(pi));
    out.values.push_back(std::move(vt));
    out.params.push_back(std::move(pp));

    for (int s = 0; s < s_count; ++s) {
      if (++assign[s] < a_count) break;
      assign[s] = 0;
    }
  }
  return out;
}

namespace {

// Distribution over stage-h states starting from (s, a) and then following pi.
Vec state_distribution_at_stage(const Mdp& mdp, const MemorylessPolicy& pi, int s,
                                int a, int h) {
  const int t0 = mdp.stage_of[s];
  Vec dist = Vec::Zero(mdp.num_states());
  if (t0 == h) {
    dist[s] = 1.0;
    return dist;
  }
  const Vec& row0 = mdp.transitions[s][a];
  for (int i = 0; i < row0.size(); ++i) dist[mdp.stages[t0 + 1][i]] = row0[i];
  for (int t = t0 + 1; t < h; ++t) {
    Vec next = Vec::Zero(mdp.num_states());
    for (int x : mdp.stages[t]) {
      if (dist[x] == 0.0) continue;
      for (int act = 0; act < mdp.num_actions; ++act) {
        const double pa = pi.action_probs(x, act);
        if (pa == 0.0) continue;
        const Vec& row = mdp.transitions[x][act];
        for (int i = 0; i < row.size(); ++i) {
          next[mdp.stages[t + 1][i]] += dist[x] * pa * row[i];
        }
      }
    }
    dist = std::move(next);
  }
  return dist;
}

}  // namespace

AdmissibilityReport verify_admissible_realizability(
    const Mdp& mdp, const FeatureTable& ft, int h, const Vec& f_over_stage_h,
    double alpha, const Preconditioning& pc, const std::vector<DesignSet>& designs,
    const PolicyEnumeration& enumeration, const MemorylessPolicy& base_policy,
    double eta_hat) {
  AdmissibilityReport rep;
  rep.norm_bound = 4.0 * designs[h].points.size() * ft.l2_bound / alpha;
  const auto& stage = mdp.stages[h];
  const DesignSet& design = designs[h];
  const int d0 = static_cast<int>(design.points.size());
  if (design.empty()) {
    throw std::invalid_argument("verify_admissible_realizability: empty design");
  }

  // Admissibility precondition against range_Q.
  for (int si = 0; si < static_cast<int>(stage.size()); ++si) {
    const double rq = range_q(mdp, ft, stage[si], designs);
    if (std::abs(f_over_stage_h[si]) > rq / alpha + 1e-9) {
      rep.admissible_precondition = false;
    }
  }
  if (!rep.admissible_precondition) return rep;

  // hat-q range of each design policy at s, its maximizing policy index, and
  // the extreme action pair under the f-sign convention.
  std::vector<int> ord(stage.size(), 0);
  std::vector<int> a_plus(stage.size(), 0), a_minus(stage.size(), 0);
  std::vector<double> f_prime(stage.size(), 0.0);
  for (int si = 0; si < static_cast<int>(stage.size()); ++si) {
    const int s = stage[si];
    double best_range = -1e300;
    for (int k = 0; k < d0; ++k) {
      const Vec& theta = design.points_orig[k];
      double mx = -1e300, mn = 1e300;
      for (int a = 0; a < mdp.num_actions; ++a) {
        const double v = ft.at(s, a).dot(theta);
        mx = std::max(mx, v);
        mn = std::min(mn, v);
      }
      if (mx - mn > best_range + 1e-15) {
        best_range = mx - mn;
        ord[si] = k;
      }
    }
    const Vec& theta = design.points_orig[ord[si]];
    // Lexicographically first extreme pair.
    double best = (f_over_stage_h[si] >= 0.0) ? -1e300 : 1e300;
    for (int i = 0; i < mdp.num_actions; ++i) {
      for (int j = 0; j < mdp.num_actions; ++j) {
        const double gap = ft.at(s, i).dot(theta) - ft.at(s, j).dot(theta);
        const bool better = (f_over_stage_h[si] >= 0.0) ? (gap > best + 1e-15)
                                                        : (gap < best - 1e-15);
        if (better) {
          best = gap;
          a_plus[si] = i;
          a_minus[si] = j;
        }
      }
    }
  }

  // Policies behind the design support points.
  std::vector<int> support_policy(d0);
  std::vector<const ValueTables*> design_values(d0, nullptr);
  for (int k = 0; k < d0; ++k) {
    support_policy[k] = enumeration.theta_policy_rep[h][design.support_indices[k]];
    design_values[k] = &enumeration.values[support_policy[k]];
  }
  for (int si = 0; si < static_cast<int>(stage.size()); ++si) {
    const int s = stage[si];
    const double f = f_over_stage_h[si];
    if (std::abs(alpha * f) >= 4.0 * eta_hat && f != 0.0) {
      const ValueTables& vt = *design_values[ord[si]];
      const double gap = vt.q(s, a_plus[si]) - vt.q(s, a_minus[si]);
      f_prime[si] = 0.5 * alpha * f / gap;
    }
  }

  // Policy pairs and their parameter difference, accumulated into theta_tilde.
  rep.theta_tilde.assign(h, Vec::Zero(ft.dim));
  for (int k = 0; k < d0; ++k) {
    const MemorylessPolicy& gk = enumeration.policies[support_policy[k]];
    MemorylessPolicy plus = gk, minus = gk;
    for (int s = 0; s < mdp.num_states(); ++s) {
      const int t = mdp.stage_of[s];
      if (t < h) {
        plus.action_probs.row(s) = base_policy.action_probs.row(s);
        minus.action_probs.row(s) = base_policy.action_probs.row(s);
      } else if (t == h) {
        const int si = mdp.index_in_stage(s);
        if (ord[si] == k) {
          plus.action_probs.row(s).setZero();
          plus.action_probs(s, a_plus[si]) += f_prime[si];
          plus.action_probs(s, a_minus[si]) += 1.0 - f_prime[si];
          minus.action_probs.row(s).setZero();
          minus.action_probs(s, a_minus[si]) = 1.0;
        }
      }
    }
    PolicyParameter pp_plus = fit_policy_parameters(mdp, ft, plus);
    PolicyParameter pp_minus = fit_policy_parameters(mdp, ft, minus);
    for (int t = 0; t < h; ++t) {
      rep.theta_tilde[t] += (2.0 / alpha) * (pp_plus.theta[t] - pp_minus.theta[t]);
    }
  }

  for (int t = 0; t < h; ++t) {
    rep.theta_tilde_norm = std::max(rep.theta_tilde_norm, rep.theta_tilde[t].norm());
    for (int s : mdp.stages[t]) {
      for (int a = 0; a < mdp.num_actions; ++a) {
        const Vec dist = state_distribution_at_stage(mdp, base_policy, s, a, h);
        double expectation = 0.0;
        for (int si = 0; si < static_cast<int>(stage.size()); ++si) {
          expectation += dist[stage[si]] * f_over_stage_h[si];
        }
        const double pred = ft.at(s, a).dot(rep.theta_tilde[t]);
        rep.max_deviation = std::max(rep.max_deviation, std::abs(expectation - pred));
      }
    }
  }
  return rep;
}

namespace {

struct SkipStep {
  Vec land_prob;      // over kept original states (by kept index)
  double eo_prob = 0.0;
  double exp_reward = 0.0;
};

}  // namespace

std::pair<ConvertedMdp, LinearityCertificate> skip_convert_to_linear(
    const Mdp& mdp, const FeatureTable& ft, double alpha, const ThetaSample& thetas,
    int battery_policies, int battery_random, uint64_t seed) {
  const int horizon = mdp.horizon;
  std::vector<bool> kept(mdp.num_states(), false);
  kept[mdp.initial_state()] = true;  // the initial state is never skipped
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (range_exact(mdp, ft, s, thetas) >= alpha) kept[s] = true;
  }
  std::vector<int> kept_index(mdp.num_states(), -1);
  std::vector<int> kept_list;
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (kept[s]) {
      kept_index[s] = static_cast<int>(kept_list.size());
      kept_list.push_back(s);
    }
  }
  const int kept_count = static_cast<int>(kept_list.size());

  // Skip continuation from every original state under action 1: landing
  // distribution over kept states, episode-over mass, accumulated reward.
  std::vector<SkipStep> cont(mdp.num_states());
  for (int t = horizon - 1; t >= 0; --t) {
    for (int s : mdp.stages[t]) {
      SkipStep step;
      step.land_prob = Vec::Zero(kept_count);
      if (kept[s]) {
        step.land_prob[kept_index[s]] = 1.0;  // absorption at kept states
        cont[s] = std::move(step);
        continue;
      }
      step.exp_reward = mdp.mean_reward(s, 0);
      if (t + 1 == horizon) {
        step.eo_prob = 1.0;
      } else {
        const Vec& row = mdp.transitions[s][0];
        for (int i = 0; i < row.size(); ++i) {
          const int nxt = mdp.stages[t + 1][i];
          step.land_prob += row[i] * cont[nxt].land_prob;
          step.eo_prob += row[i] * cont[nxt].eo_prob;
          step.exp_reward += row[i] * cont[nxt].exp_reward;
        }
      }
      cont[s] = std::move(step);
    }
  }
  // One skippy step from a kept state under action a.
  auto skippy_step = [&](int s, int a) {
    SkipStep step;
    step.land_prob = Vec::Zero(kept_count);
    step.exp_reward = mdp.mean_reward(s, a);
    const int t = mdp.stage_of[s];
    if (t + 1 == horizon) {
      step.eo_prob = 1.0;
      return step;
    }
    const Vec& row = mdp.transitions[s][a];
    for (int i = 0; i < row.size(); ++i) {
      const int nxt = mdp.stages[t + 1][i];
      step.land_prob += row[i] * cont[nxt].land_prob;
      step.eo_prob += row[i] * cont[nxt].eo_prob;
      step.exp_reward += row[i] * cont[nxt].exp_reward;
    }
    return step;
  };

  // Converted state layout. Stage 1: (s1, 0). Stage h' >= 2: all kept copies
  // then the episode-over state.
  ConvertedMdp conv;
  conv.kept_states = kept_count;
  Mdp& cm = conv.mdp;
  cm.horizon = horizon;
  cm.num_actions = mdp.num_actions;
  cm.stages.resize(horizon);
  conv.episode_over.assign(horizon, -1);

  auto add_state = [&](int stage, int orig) {
    const int id = static_cast<int>(conv.orig_state.size());
    conv.orig_state.push_back(orig);
    cm.stage_of.push_back(stage);
    cm.stages[stage].push_back(id);
    return id;
  };
  std::vector<std::vector<int>> copy_id(horizon, std::vector<int>(kept_count, -1));
  copy_id[0][kept_index[mdp.initial_state()]] = add_state(0, mdp.initial_state());
  for (int hp = 1; hp < horizon; ++hp) {
    for (int ki = 0; ki < kept_count; ++ki) copy_id[hp][ki] = add_state(hp, kept_list[ki]);
    conv.episode_over[hp] = add_state(hp, -1);
  }

  const int n_conv = static_cast<int>(conv.orig_state.size());
  cm.transitions.resize(n_conv);
  cm.rewards.resize(n_conv);
  for (int cs = 0; cs < n_conv; ++cs) {
    const int hp = cm.stage_of[cs];
    const int orig = conv.orig_state[cs];
    const int next_size = (hp + 1 < horizon) ? static_cast<int>(cm.stages[hp + 1].size()) : 0;
    for (int a = 0; a < cm.num_actions; ++a) {
      if (orig < 0) {
        cm.rewards[cs].push_back(RewardDist::point(0.0));
        if (hp + 1 < horizon) {
          Vec row = Vec::Zero(next_size);
          row[cm.stages[hp + 1].size() - 1] = 1.0;  // episode-over is last in stage
          cm.transitions[cs].push_back(row);
        }
        continue;
      }
      SkipStep step = skippy_step(orig, a);
      cm.rewards[cs].push_back(RewardDist::point(step.exp_reward));
      if (hp + 1 < horizon) {
        Vec row = Vec::Zero(next_size);
        for (int ki = 0; ki < kept_count; ++ki) {
          row[copy_id[hp + 1][ki] - cm.stages[hp + 1][0]] = step.land_prob[ki];
        }
        row[next_size - 1] = step.eo_prob;
        cm.transitions[cs].push_back(row);
      }
    }
  }

  // Block-lifted features: chunk by original stage, then a constant-1
  // coordinate and an episode-over indicator.
  const int lifted = ft.dim * horizon + 2;
  conv.features.dim = lifted;
  conv.features.l1_bound = std::sqrt(ft.l1_bound * ft.l1_bound + 1.0);
  // Parameter bound scaling inversely with alpha, as the no-low-range
  // linearity argument prescribes (d0 = 16 at the smallest design size).
  conv.features.l2_bound =
      ft.l2_bound * (4.0 * horizon * 16.0 * std::sqrt(2.0 * ft.dim) / alpha + 1.0);
  conv.features.phi.resize(n_conv);
  for (int cs = 0; cs < n_conv; ++cs) {
    Mat block = Mat::Zero(cm.num_actions, lifted);
    const int orig = conv.orig_state[cs];
    if (orig >= 0) {
      const int chunk = mdp.stage_of[orig];
      for (int a = 0; a < cm.num_actions; ++a) {
        block.block(a, chunk * ft.dim, 1, ft.dim) = ft.phi[orig].row(a);
        block(a, lifted - 2) = 1.0;
      }
    } else {
      for (int a = 0; a < cm.num_actions; ++a) {
        block(a, lifted - 2) = 1.0;
        block(a, lifted - 1) = 1.0;
      }
    }
    conv.features.phi[cs] = block;
  }

  // Certificate. Reward residual per converted stage, then transition
  // functionals over the battery.
  LinearityCertificate cert;
  auto stage_fit_residual = [&](int hp, const Vec& targets) {
    const auto& st = cm.stages[hp];
    Mat a(static_cast<int>(st.size()) * cm.num_actions, lifted);
    Vec b(a.rows());
    int r = 0;
    for (size_t si = 0; si < st.size(); ++si) {
      for (int act = 0; act < cm.num_actions; ++act, ++r) {
        a.row(r) = conv.features.phi[st[si]].row(act);
        b[r] = targets[si * cm.num_actions + act];
      }
    }
    Vec theta = solve_min_norm(a, b);
    return (a * theta - b).cwiseAbs().maxCoeff();
  };

  for (int hp = 0; hp < horizon; ++hp) {
    Vec targets(cm.stages[hp].size() * cm.num_actions);
    int r = 0;
    for (int cs : cm.stages[hp]) {
      for (int a = 0; a < cm.num_actions; ++a, ++r) targets[r] = cm.mean_reward(cs, a);
    }
    cert.reward_residual = std::max(cert.reward_residual, stage_fit_residual(hp, targets));
  }

  Rng rng(seed);
  std::vector<Vec> battery;  // f over converted states, range [0, H]
  for (int p = 0; p < battery_policies; ++p) {
    MemorylessPolicy pi = MemorylessPolicy::uniform(cm);
    for (int cs = 0; cs < n_conv; ++cs) {
      Vec row(cm.num_actions);
      for (int a = 0; a < cm.num_actions; ++a) row[a] = -std::log(1.0 - rng.uniform());
      pi.action_probs.row(cs) = (row / row.sum()).transpose();
    }
    battery.push_back(evaluate_policy_exact(cm, pi).v);
  }
  for (int p = 0; p < battery_random; ++p) {
    Vec f(n_conv);
    for (int cs = 0; cs < n_conv; ++cs) f[cs] = horizon * rng.uniform();
    battery.push_back(f);
  }
  cert.battery_size = static_cast<int>(battery.size());

  for (const Vec& f : battery) {
    for (int hp = 0; hp + 1 < horizon; ++hp) {
      Vec targets(cm.stages[hp].size() * cm.num_actions);
      int r = 0;
      for (int cs : cm.stages[hp]) {
        for (int a = 0; a < cm.num_actions; ++a, ++r) {
          const Vec& row = cm.transitions[cs][a];
          double e = 0.0;
          for (int i = 0; i < row.size(); ++i) e += row[i] * f[cm.stages[hp + 1][i]];
          targets[r] = e;
        }
      }
      cert.transition_residual =
          std::max(cert.transition_residual, stage_fit_residual(hp, targets));
    }
  }
  cert.kappa_hat = std::max(cert.reward_residual, cert.transition_residual);
  return {std::move(conv), cert};
}

double converted_policy_value_on_original(const Mdp& mdp, const ConvertedMdp& conv,
                                          const MemorylessPolicy& conv_policy) {
  const int horizon = mdp.horizon;
  std::vector<bool> kept(mdp.num_states(), false);
  std::vector<int> kept_to_copy_base(mdp.num_states(), -1);
  for (int cs = 0; cs < conv.mdp.num_states(); ++cs) {
    if (conv.orig_state[cs] >= 0) kept[conv.orig_state[cs]] = true;
  }
  // copy lookup: converted state for (orig, stage counter)
  std::map<std::pair<int, int>, int> copy_of;
  for (int cs = 0; cs < conv.mdp.num_states(); ++cs) {
    if (conv.orig_state[cs] >= 0) {
      copy_of[{conv.orig_state[cs], conv.mdp.stage_of[cs]}] = cs;
    }
  }

  // value[s][c]: expected reward-to-go from original state s with skippy-step
  // counter c (number of kept states visited so far).
  std::vector<std::vector<double>> value(mdp.num_states(),
                                         std::vector<double>(horizon + 1, 0.0));
  for (int t = horizon - 1; t >= 0; --t) {
    for (int s : mdp.stages[t]) {
      for (int c = horizon - 1; c >= 0; --c) {
        double acc = 0.0;
        if (kept[s]) {
          auto it = copy_of.find({s, std::min(c, horizon - 1)});
          if (it == copy_of.end()) {
            // Counter combinations with no copy (a kept non-initial state at
            // counter 0) are unreachable from (s1, 0); their value is unused.
            value[s][c] = 0.0;
            continue;
          }
          const int cs = it->second;
          for (int a = 0; a < mdp.num_actions; ++a) {
            const double pa = conv_policy.action_probs(cs, a);
            if (pa == 0.0) continue;
            double q = mdp.mean_reward(s, a);
            if (t + 1 < horizon) {
              const Vec& row = mdp.transitions[s][a];
              for (int i = 0; i < row.size(); ++i) {
                q += row[i] * value[mdp.stages[t + 1][i]][std::min(c + 1, horizon - 1)];
              }
            }
            acc += pa * q;
          }
        } else {
          acc = mdp.mean_reward(s, 0);
          if (t + 1 < horizon) {
            const Vec& row = mdp.transitions[s][0];
            for (int i = 0; i < row.size(); ++i) {
              acc += row[i] * value[mdp.stages[t + 1][i]][c];
            }
          }
        }
        value[s][c] = acc;
      }
    }
  }
  return value[mdp.initial_state()][0];
}

CoverageResult lse_confidence_check(double sigma, double xi, double lambda, int d,
                                    int trials, double zeta, uint64_t seed,
                                    int k_max) {
  if (trials < 1) throw std::invalid_argument("lse_confidence_check: trials >= 1");
  CoverageResult res;
  res.trials = trials;
  int hits = 0;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(mix_seed(seed, trial));
    Vec theta_star = rng.unit_vector(d) * rng.uniform();
    Mat v = lambda * Mat::Identity(d, d);
    Vec bvec = Vec::Zero(d);
    Vec misspec_sum = Vec::Zero(d);
    bool ok = true;
    double logdet_lambda = d * std::log(lambda);
    double logdet = logdet_lambda;
    for (int k = 1; k <= k_max; ++k) {
      Vec a = rng.unit_vector(d) * std::sqrt(rng.uniform());
      const double noise = sigma * rng.normal();
      const double delta = xi;  // constant misspecification, |delta| <= xi
      const double x = a.dot(theta_star) + noise + delta;
      v.noalias() += a * a.transpose();
      bvec.noalias() += x * a;
      misspec_sum.noalias() += delta * a;

      Eigen::LDLT<Mat> fact(v);
      Vec theta_hat = fact.solve(bvec);
      logdet = fact.vectorD().array().log().sum();
      const double lhs = quad_norm(theta_hat - theta_star, v);
      const double bound = std::sqrt(lambda) * theta_star.norm() +
                           xi * std::sqrt(static_cast<double>(k)) +
                           sigma * std::sqrt(2.0 * std::log(1.0 / zeta) +
                                             (logdet - logdet_lambda));
      if (lhs >= bound) ok = false;

      const double j2 =
          misspec_sum.dot(fact.solve(misspec_sum)) - k * xi * xi;
      res.j2_max_violation = std::max(res.j2_max_violation, j2);
    }
    if (ok) ++hits;
  }
  res.coverage = static_cast<double>(hits) / trials;
  return res;
}

OptimismReport optimism_check(const Mdp& mdp, const FeatureTable& ft,
                              const DataStore& data, const LsState& ls,
                              const Preconditioning& pc,
                              const std::vector<DesignSet>& designs,
                              const PolicyEnumeration& enumeration,
                              const ConstantSet& cs, double eps) {
  OptimismReport rep;
  const int horizon = mdp.horizon;
  const int d0 = static_cast<int>(cs.d0);
  Guess guess = Guess::correct_from_designs(designs, cs.guess_radius(), d0, ft.dim);
  OptimisticParams theta_bar = OptimisticParams::zero(ft.dim, horizon, cs.theta_bar_radius());
  SkippyContext ctx{mdp, ft, guess, theta_bar, pc, eps};

  const ValueTables pi0_vt =
      evaluate_policy_exact(mdp, MemorylessPolicy::always_first_action(mdp));

  // Backward construction: theta_bar_h is the exact fit of
  // q^{pi0}(s,a) + E_{pi0,s,a} E->(traj_{h+1}), which only involves
  // theta_bar at stages > h through the E-> recursion.
  for (int h = horizon - 1; h >= 0; --h) {
    const Vec bar_eto = bar_e_to_all_states(ctx);
    const auto& st = mdp.stages[h];
    Mat a(static_cast<int>(st.size()) * mdp.num_actions, ft.dim);
    Vec b(a.rows());
    int r = 0;
    for (int s : st) {
      for (int act = 0; act < mdp.num_actions; ++act, ++r) {
        a.row(r) = ft.phi[s].row(act);
        double target = pi0_vt.q(s, act);
        if (h + 1 < horizon) {
          const Vec& row = mdp.transitions[s][act];
          for (int i = 0; i < row.size(); ++i) {
            target += row[i] * bar_eto[mdp.stages[h + 1][i]];
          }
        }
        b[r] = target;
      }
    }
    theta_bar.theta_bar[h] = solve_min_norm(a, b);
  }

  // Feasibility against the current data.
  std::vector<Vec> theta_hat = scalar_lse(ctx, data, ls);
  rep.feasibility_slack = -1e300;
  for (int t = 0; t < horizon; ++t) {
    const double nrm = quad_norm(theta_bar.theta_bar[t] - theta_hat[t], ls.x[t]);
    rep.feasibility_slack = std::max(rep.feasibility_slack, nrm - cs.beta * horizon);
  }
  rep.feasible = rep.feasibility_slack <= 0.0;

  rep.c_value = pi_plus_and_c(ctx, mdp.initial_state()).second;
  rep.v_star = optimal_values(mdp).first.v[mdp.initial_state()];
  rep.optimistic = rep.c_value >= rep.v_star - 2.0 * eps;

  // Exact value of the tau-mixture policy induced by the construction.
  Vec val = Vec::Zero(mdp.num_states());
  for (int t = horizon - 1; t >= 0; --t) {
    for (int s : mdp.stages[t]) {
      const double tau_s = tau(ctx, s);
      const auto [a_plus, c] = pi_plus_and_c(ctx, s);
      (void)c;
      double land = mdp.mean_reward(s, a_plus);
      double skip = mdp.mean_reward(s, 0);
      if (t + 1 < horizon) {
        const Vec& row_p = mdp.transitions[s][a_plus];
        const Vec& row_0 = mdp.transitions[s][0];
        for (int i = 0; i < row_p.size(); ++i) {
          land += row_p[i] * val[mdp.stages[t + 1][i]];
          skip += row_0[i] * val[mdp.stages[t + 1][i]];
        }
      }
      val[s] = tau_s * land + (1.0 - tau_s) * skip;
    }
  }
  rep.policy_value = val[mdp.initial_state()];
  return rep;
}

PotentialSlack elliptical_potential_slack(const std::vector<Vec>& seq, const Mat& v0,
                                          double norm_bound) {
  PotentialSlack slack;
  const int d = static_cast<int>(v0.rows());
  const int n = static_cast<int>(seq.size());
  auto logdet = [](const Mat& m) {
    return m.ldlt().vectorD().array().log().sum();
  };
  Mat v = v0;
  double lhs = 0.0;
  double infrequent_lhs = 0.0;
  const Mat v0_inv = v0.ldlt().solve(Mat::Identity(d, d));
  double base_sum = 0.0;
  for (const Vec& a : seq) {
    lhs += std::min(1.0, a.dot(v.ldlt().solve(a)));
    v.noalias() += a * a.transpose();
    infrequent_lhs += a.dot(v.ldlt().solve(a));
    base_sum += a.dot(v0_inv * a);
  }
  const double logdet_v0 = logdet(v0);
  const double mid = 2.0 * (logdet(v) - logdet_v0);
  const double rhs = 2.0 * d *
                     std::log((v0.trace() + n * norm_bound * norm_bound) /
                              (d * std::exp(logdet_v0 / d)));
  slack.potential_vs_logdet = mid - lhs;
  slack.logdet_vs_trace = rhs - mid;
  slack.infrequent_update = infrequent_lhs - std::min(1.0, 0.5 * base_sum);
  return slack;
}

}  // namespace skippy
