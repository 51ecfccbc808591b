#include <doctest.h>

#include "skippy/harness.hpp"

using namespace skippy;

namespace {

struct LearnerFixture {
  Instance inst;
  ConstantSet cs;
  Preconditioning pc;
  PolicyEnumeration en;
  std::vector<DesignSet> designs;
  Guess guess;
  OptimisticParams theta_bar;
  double eps;

  LearnerFixture(const InstanceSpec& spec, double eps_in = 0.1,
                 PracticalOverrides ov = {})
      : inst(generate_instance(spec)),
        cs(compute_constants(inst.features.dim, inst.mdp.horizon, eps_in, 0.1,
                             inst.features.l1_bound, inst.features.l2_bound,
                             ConstantMode::kPractical, ov)),
        pc(Preconditioning::initial(inst.features.dim, inst.mdp.horizon,
                                    inst.features.l2_bound, cs.l3)),
        en(enumerate_policies(inst.mdp, inst.features)),
        designs(designs_for_preconditioning(pc, en.thetas, static_cast<int>(cs.d0),
                                            cs.gamma)),
        guess(Guess::correct_from_designs(designs, cs.guess_radius(),
                                          static_cast<int>(cs.d0), inst.features.dim)),
        theta_bar(OptimisticParams::zero(inst.features.dim, inst.mdp.horizon,
                                         cs.theta_bar_radius())),
        eps(eps_in) {}

  SkippyContext ctx() { return {inst.mdp, inst.features, guess, theta_bar, pc, eps}; }

  LearnerConfig config(Opt1Mode mode, uint64_t seed) const {
    LearnerConfig lc;
    lc.eps = eps;
    lc.zeta = 0.1;
    lc.constants = cs;
    lc.opt1_mode = mode;
    lc.seed = seed;
    const PolicyEnumeration* en_ptr = &en;
    const ConstantSet* cs_ptr = &cs;
    const int dim = inst.features.dim;
    lc.guess_provider = [en_ptr, cs_ptr, dim](const Preconditioning& p) {
      auto ds = designs_for_preconditioning(p, en_ptr->thetas,
                                            static_cast<int>(cs_ptr->d0), cs_ptr->gamma);
      return Guess::correct_from_designs(ds, cs_ptr->guess_radius(),
                                         static_cast<int>(cs_ptr->d0), dim);
    };
    return lc;
  }

  DataStore collect(int m, int n, uint64_t seed) {
    DataStore data;
    auto c = ctx();
    uint64_t ep = 0;
    for (int l = 1; l <= m; ++l) {
      for (int k = 1; k <= inst.mdp.horizon; ++k) {
        for (int j = 0; j < n; ++j) {
          EpisodeRecord rec;
          rec.l = l;
          rec.k = k;
          rec.j = j;
          rec.st = run_skippy_policy(c, k, episode_seed(seed, ep++));
          data.records.push_back(std::move(rec));
        }
      }
    }
    return data;
  }
};

}  // namespace

TEST_CASE("collect_iteration appends exactly n*H trajectories") {
  LearnerFixture fx({.name = "fig1"});
  DataStore data = fx.collect(1, 1, 3);
  CHECK(data.records.size() == 3);  // H = 3, n = 1
  DataStore more = fx.collect(1, 2, 3);
  CHECK(more.records.size() == 6);
}

TEST_CASE("zero-range instances saturate all stage maps beyond the first landing") {
  LearnerFixture fx({.name = "fig1"});
  DataStore data = fx.collect(2, 4, 9);
  for (const auto& rec : data.records) {
    CHECK(rec.st.stage_map[0] == 0);
    for (size_t j = 1; j < rec.st.stage_map.size(); ++j) {
      CHECK(rec.st.stage_map[j] == fx.inst.mdp.horizon);
    }
  }
}

TEST_CASE("seeded collection is deterministic") {
  LearnerFixture fx({.name = "padded_linear", .d = 2, .horizon = 4, .chain = 1, .seed = 4});
  DataStore a = fx.collect(2, 3, 17);
  DataStore b = fx.collect(2, 3, 17);
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].st.traj.states == b.records[i].st.traj.states);
    CHECK(a.records[i].st.traj.rewards == b.records[i].st.traj.rewards);
    CHECK(a.records[i].st.stage_map == b.records[i].st.stage_map);
  }
}

TEST_CASE("lsq_target special cases and range") {
  LearnerFixture fx({.name = "padded_linear", .d = 2, .horizon = 4, .chain = 1, .seed = 6});
  auto ctx = fx.ctx();
  Rng rng(2);
  OptimisticParams tb = fx.theta_bar;
  for (int t = 0; t < 4; ++t) tb.theta_bar[t] = rng.gaussian_vector(2);
  SkippyContext ctx2{fx.inst.mdp, fx.inst.features, fx.guess, tb, fx.pc, fx.eps};

  for (int trial = 0; trial < 300; ++trial) {
    SkippyTrajectory st = run_skippy_policy(ctx2, 2, rng.next_u64());
    for (int t = 0; t < 4; ++t) {
      const double target = lsq_target(ctx2, st.traj, t);
      CHECK(target >= -1e-10);
      CHECK(target <= 2.0 * 4 + 1e-10);
      if (t + 1 < 4) {
        // tau(next) = 1 collapses the target to R_t + C(S_{t+1}).
        if (tau(ctx2, st.traj.states[t + 1]) == 1.0) {
          const double c_next = pi_plus_and_c(ctx2, st.traj.states[t + 1]).second;
          CHECK(target == doctest::Approx(st.traj.rewards[t] + c_next).epsilon(1e-10));
        }
      } else {
        CHECK(target == doctest::Approx(st.traj.reward_tail(t)));
      }
    }
  }
}

TEST_CASE("empty datastore: X = lambda I, theta_hat = 0, origin feasible") {
  LearnerFixture fx({.name = "fig1"});
  DataStore data;
  LsState ls = LsState::build(data, fx.inst.features, 1, 3, fx.cs.lambda);
  for (int t = 0; t < 3; ++t) {
    CHECK((ls.x[t] - fx.cs.lambda * Mat::Identity(1, 1)).norm() <= 1e-15);
  }
  auto ctx = fx.ctx();
  std::vector<Vec> theta_hat = scalar_lse(ctx, data, ls);
  for (const Vec& th : theta_hat) CHECK(th.norm() == 0.0);

  LearnerConfig lc = fx.config(Opt1Mode::kOracleAssisted, 5);
  Rng rng(5);
  OptimisticSolution sol =
      solve_optimistic(fx.inst.mdp, fx.inst.features, fx.pc, data, ls, lc, rng);
  CHECK(sol.c_value >= 0.0);
  for (int t = 0; t < 3; ++t) {
    CHECK(quad_norm(sol.theta_bar.theta_bar[t] - sol.theta_hat[t], ls.x[t]) <=
          fx.cs.beta * 3 + 1e-9);
  }
}

TEST_CASE("scalar ridge matches the closed-form normal equations") {
  LearnerFixture fx({.name = "padded_linear", .d = 2, .horizon = 4, .chain = 1, .seed = 8});
  DataStore data = fx.collect(2, 20, 21);
  LsState ls = LsState::build(data, fx.inst.features, 3, 4, fx.cs.lambda);
  auto ctx = fx.ctx();
  std::vector<Vec> theta_hat = scalar_lse(ctx, data, ls);

  for (int t = 0; t < 4; ++t) {
    Mat x = fx.cs.lambda * Mat::Identity(2, 2);
    Vec rhs = Vec::Zero(2);
    for (int r : ls.idx[t]) {
      const EpisodeRecord& rec = data.records[r];
      const Vec phi = rec.landing_feature(fx.inst.features);
      x += phi * phi.transpose();
      rhs += phi * lsq_target(ctx, rec.st.traj, t);
    }
    Vec direct = x.ldlt().solve(rhs);
    CHECK((theta_hat[t] - direct).norm() <= 1e-8 * std::max(1.0, direct.norm()));
  }
}

TEST_CASE("matrix ridge: no data gives zero, single point interpolates") {
  LearnerFixture fx({.name = "padded_linear", .d = 2, .horizon = 4, .chain = 1, .seed = 10});
  auto ctx = fx.ctx();
  SUBCASE("no data") {
    DataStore data;
    LsState ls = LsState::build(data, fx.inst.features, 1, 4, fx.cs.lambda);
    Mat coef = matrix_lse(ctx, data, ls, 0, 2);
    CHECK(coef.norm() == 0.0);
  }
  SUBCASE("single point interpolation at lambda -> 0") {
    DataStore data = fx.collect(1, 1, 33);
    // Keep only a record landing at stage 0 (k = 1 lands at the initial state).
    DataStore single;
    for (auto& rec : data.records) {
      if (rec.k == 1) single.records.push_back(rec);
    }
    REQUIRE(single.records.size() == 1);
    LsState ls = LsState::build(single, fx.inst.features, 2, 4, 1e-8);
    const EpisodeRecord& rec = single.records[0];
    const Vec phi = rec.landing_feature(fx.inst.features);
    for (int i = 1; i < 4; ++i) {
      Mat coef = matrix_lse(ctx, single, ls, 0, i);
      Mat pred = matrix_lse_predict(coef, phi);
      Mat target = f_value(ctx, rec.st.traj, i);
      CHECK((pred - target).norm() <= 1e-6 * std::max(1.0, target.norm()) + 1e-6);
    }
  }
}

TEST_CASE("matrix ridge prediction equals the coefficient-sum route") {
  LearnerFixture fx({.name = "padded_linear", .d = 2, .horizon = 4, .chain = 1, .seed = 11});
  DataStore data = fx.collect(2, 10, 41);
  LsState ls = LsState::build(data, fx.inst.features, 3, 4, fx.cs.lambda);
  auto ctx = fx.ctx();
  Rng rng(12);
  for (int t = 0; t < 3; ++t) {
    for (int i = t + 1; i < 4; ++i) {
      Mat coef = matrix_lse(ctx, data, ls, t, i);
      Vec probe = rng.gaussian_vector(2);
      Mat pred = matrix_lse_predict(coef, probe);
      // Independent route: sum of (probe^T X^-1 phi_l) F_l.
      Mat direct = Mat::Zero(2, 2);
      for (int r : ls.idx[t]) {
        const EpisodeRecord& rec = data.records[r];
        const Vec phi = rec.landing_feature(fx.inst.features);
        direct += probe.dot(ls.fact[t].solve(phi)) * f_value(ctx, rec.st.traj, i);
      }
      CHECK((pred - direct).norm() <= 1e-9 * std::max(1.0, direct.norm()) + 1e-9);
      // Predictions of symmetric targets stay symmetric.
      CHECK((pred - pred.transpose()).norm() <= 1e-10);
    }
  }
}

TEST_CASE("consistency stats: saturated maps give zero stats") {
  LearnerFixture fx({.name = "fig1"});
  DataStore data = fx.collect(1, 5, 51);
  LsState ls = LsState::build(data, fx.inst.features, 1, 3, fx.cs.lambda);
  auto ctx = fx.ctx();
  ConsistencyStats stats = consistency_stats(ctx, data, ls, 1, 5, fx.cs);
  // fig1: p(k) saturates for k >= 2, so sigma_bar vanishes there.
  CHECK(stats.sigma_bar[1] == 0.0);
  CHECK(stats.sigma_bar[2] == 0.0);
  CHECK(stats.sigma_bar[0] <= fx.cs.uncertainty_cap() + 1e-15);
  for (int k = 1; k <= 2; ++k) {
    for (const Mat& y : stats.y[k - 1]) CHECK(y.norm() == 0.0);
  }
}

TEST_CASE("sigma_bar respects its cap") {
  LearnerFixture fx({.name = "padded_linear", .d = 2, .horizon = 4, .chain = 1, .seed = 13});
  DataStore data = fx.collect(3, 10, 61);
  LsState ls = LsState::build(data, fx.inst.features, 3, 4, fx.cs.lambda);
  auto ctx = fx.ctx();
  ConsistencyStats stats = consistency_stats(ctx, data, ls, 3, 10, fx.cs);
  for (int k = 0; k < 4; ++k) {
    CHECK(stats.sigma_bar[k] <= fx.cs.uncertainty_cap() + 1e-15);
  }
}

TEST_CASE("solve_consistency edge cases") {
  Preconditioning pc = Preconditioning::initial(2, 4, 1.0, 100.0);
  SUBCASE("all-zero matrices") {
    ConsistencyStats stats;
    stats.sigma_bar = Vec::Zero(4);
    stats.y.assign(3, {});
    stats.f_hat.assign(3, {});
    for (int k = 0; k < 3; ++k) {
      stats.y[k].assign(3 - k, Mat::Zero(2, 2));
      stats.f_hat[k].assign(3 - k, Mat::Zero(2, 2));
    }
    ConsistencyResult res = solve_consistency(stats, pc);
    CHECK(res.x == doctest::Approx(0.0));
    CHECK(res.v.norm() == doctest::Approx(1.0));
  }
  SUBCASE("planted eigen case") {
    ConsistencyStats stats;
    stats.sigma_bar = Vec::Zero(4);
    stats.y.assign(3, {});
    stats.f_hat.assign(3, {});
    for (int k = 0; k < 3; ++k) {
      stats.y[k].assign(3 - k, Mat::Zero(2, 2));
      stats.f_hat[k].assign(3 - k, Mat::Zero(2, 2));
    }
    Mat planted = Mat::Zero(2, 2);
    planted.diagonal() << 0.5, -0.1;
    stats.y[1][0] = planted;
    ConsistencyResult res = solve_consistency(stats, pc);
    CHECK(res.x == doctest::Approx(0.5));
    CHECK(res.k == 2);
    CHECK(res.i == 3);
    CHECK(std::abs(res.v[0]) == doctest::Approx(1.0));
  }
  SUBCASE("random ensemble matches a random-direction search") {
    Rng rng(3);
    ConsistencyStats stats;
    stats.sigma_bar = Vec::Zero(4);
    stats.y.assign(3, {});
    stats.f_hat.assign(3, {});
    double best_direct = -1e300;
    for (int k = 0; k < 3; ++k) {
      stats.y[k].assign(3 - k, Mat::Zero(2, 2));
      stats.f_hat[k].assign(3 - k, Mat::Zero(2, 2));
      for (auto& m : stats.y[k]) {
        Mat g = Mat::Zero(2, 2);
        g << rng.normal(), rng.normal(), rng.normal(), rng.normal();
        m = 0.5 * (g + g.transpose());
        for (int probe = 0; probe < 10000; ++probe) {
          Vec v = rng.unit_vector(2);
          best_direct = std::max(best_direct, v.dot(m * v));
        }
      }
    }
    ConsistencyResult res = solve_consistency(stats, pc);
    CHECK(res.x >= best_direct - 1e-6);
    CHECK(res.x <= best_direct + 1e-3);
  }
}

TEST_CASE("fixed-candidate theta_hat matches inside solve_optimistic") {
  // The returned theta_hat must be the ridge solution for the returned
  // (guess, theta_bar); recompute it directly.
  LearnerFixture fx({.name = "padded_linear", .d = 2, .horizon = 4, .chain = 1, .seed = 14});
  DataStore data = fx.collect(2, 10, 71);
  LsState ls = LsState::build(data, fx.inst.features, 3, 4, fx.cs.lambda);
  LearnerConfig lc = fx.config(Opt1Mode::kOracleAssisted, 7);
  Rng rng(7);
  OptimisticSolution sol =
      solve_optimistic(fx.inst.mdp, fx.inst.features, fx.pc, data, ls, lc, rng);
  SkippyContext ctx{fx.inst.mdp, fx.inst.features, sol.guess, sol.theta_bar, fx.pc, fx.eps};
  std::vector<Vec> direct = scalar_lse(ctx, data, ls);
  for (int t = 0; t < 4; ++t) {
    CHECK((sol.theta_hat[t] - direct[t]).norm() <=
          1e-8 * std::max(1.0, direct[t].norm()));
    CHECK(quad_norm(sol.theta_bar.theta_bar[t] - sol.theta_hat[t], ls.x[t]) <=
          fx.cs.beta * 4 + 1e-9);
  }
}

TEST_CASE("search mode returns a feasible flagged solution") {
  LearnerFixture fx({.name = "padded_linear", .d = 2, .horizon = 4, .chain = 1, .seed = 15});
  DataStore data = fx.collect(2, 10, 81);
  LsState ls = LsState::build(data, fx.inst.features, 3, 4, fx.cs.lambda);
  LearnerConfig lc = fx.config(Opt1Mode::kSearch, 9);
  lc.opt1_restarts = 8;
  lc.opt1_ascent_rounds = 3;
  Rng rng(9);
  OptimisticSolution sol =
      solve_optimistic(fx.inst.mdp, fx.inst.features, fx.pc, data, ls, lc, rng);
  CHECK(sol.search_optimum_only);
  CHECK(sol.guess.validate().empty());
}

TEST_CASE("skippy policy value DP matches Monte-Carlo") {
  LearnerFixture fx({.name = "padded_linear", .d = 2, .horizon = 4, .chain = 1, .seed = 16});
  Rng rng(10);
  OptimisticParams tb = fx.theta_bar;
  for (int t = 0; t < 4; ++t) tb.theta_bar[t] = rng.gaussian_vector(2);
  SkippyContext ctx{fx.inst.mdp, fx.inst.features, fx.guess, tb, fx.pc, fx.eps};
  for (int k = 1; k <= 4; ++k) {
    const double exact = skippy_policy_value_exact(ctx, k);
    double mc = 0.0;
    const int episodes = 200000;
    for (int ep = 0; ep < episodes; ++ep) {
      mc += run_skippy_policy(ctx, k, episode_seed(1234 + k, ep)).traj.total_reward();
    }
    mc /= episodes;
    CHECK(std::abs(exact - mc) <= 0.02);
  }
}

TEST_CASE("end-to-end on fig1 returns the optimal policy") {
  LearnerFixture fx({.name = "fig1"});
  LearnerConfig lc = fx.config(Opt1Mode::kOracleAssisted, 42);
  LearnerResult result = run_skippy_eleanor(fx.inst.mdp, fx.inst.features, lc);
  CHECK(result.log.terminated_by == "uncertainty_threshold");
  SkippyContext ctx{fx.inst.mdp, fx.inst.features, result.policy.guess,
                    result.policy.theta_bar, result.policy.precond, fx.eps};
  const double v_pi = skippy_policy_value_exact(ctx, result.policy.k);
  CHECK(v_pi == doctest::Approx(1.0).epsilon(1e-9));
  // Iteration counters within the hard bounds.
  for (const auto& il : result.log.iterations) {
    CHECK(il.m <= static_cast<int>(fx.cs.m_max));
    CHECK(il.mprime <= static_cast<int>(fx.cs.mprime_max));
    CHECK(il.feasibility_slack <= 1e-6);
  }
}

TEST_CASE("zero-reward instance learns value zero") {
  LearnerFixture fx({.name = "fig1"});
  for (auto& rs : fx.inst.mdp.rewards) {
    for (auto& r : rs) r = RewardDist::point(0.0);
  }
  // Re-enumerate: the parameters changed with the rewards.
  fx.en = enumerate_policies(fx.inst.mdp, fx.inst.features);
  LearnerConfig lc = fx.config(Opt1Mode::kOracleAssisted, 7);
  LearnerResult result = run_skippy_eleanor(fx.inst.mdp, fx.inst.features, lc);
  SkippyContext ctx{fx.inst.mdp, fx.inst.features, result.policy.guess,
                    result.policy.theta_bar, result.policy.precond, fx.eps};
  CHECK(skippy_policy_value_exact(ctx, result.policy.k) == doctest::Approx(0.0));
  CHECK(optimal_values(fx.inst.mdp).first.v[0] == doctest::Approx(0.0));
}
