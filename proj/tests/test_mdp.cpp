#include <doctest.h>
#include <nlohmann/json.hpp>

#include "skippy/harness.hpp"

using namespace skippy;

namespace {
Instance fig1() { return generate_instance({.name = "fig1"}); }
}  // namespace

TEST_CASE("fig1 instance passes validation") {
  Instance inst = fig1();
  CHECK(validate_mdp(inst.mdp).empty());
  CHECK(validate_features(inst.mdp, inst.features).empty());
}

TEST_CASE("validation reports a broken transition row") {
  Instance inst = fig1();
  inst.mdp.transitions[0][0][0] = 0.9;
  auto report = validate_mdp(inst.mdp);
  REQUIRE(!report.empty());
  bool found = false;
  for (const auto& r : report) {
    if (r.find("state 0") != std::string::npos && r.find("sums to") != std::string::npos) {
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("validation reports an out-of-range reward") {
  Instance inst = fig1();
  inst.mdp.rewards[1][0] = RewardDist::point(1.5);
  auto report = validate_mdp(inst.mdp);
  REQUIRE(!report.empty());
  bool found = false;
  for (const auto& r : report) {
    if (r.find("reward support outside [0,1]") != std::string::npos) found = true;
  }
  CHECK(found);
}

TEST_CASE("step follows the fig1 edges") {
  Instance inst = fig1();
  Rng rng(7);
  auto [next1, r1] = step(inst.mdp, 0, 0, rng);
  CHECK(next1 == 1);
  CHECK(r1 == doctest::Approx(1.0));
  auto [next2, r2] = step(inst.mdp, 2, 1, rng);  // paper's s3, action 2
  CHECK(next2 == 3);
  CHECK(r2 == doctest::Approx(0.5));
}

TEST_CASE("step rejects invalid inputs") {
  Instance inst = fig1();
  Rng rng(7);
  CHECK_THROWS(step(inst.mdp, 0, 5, rng));
  CHECK_THROWS(step(inst.mdp, 99, 0, rng));
}

TEST_CASE("step is reproducible under an identical seed") {
  InstanceSpec spec{.name = "tabular", .horizon = 4, .seed = 3};
  Instance inst = generate_instance(spec);
  Rng a(123), b(123);
  for (int i = 0; i < 20; ++i) {
    auto ra = step(inst.mdp, 0, 0, a);
    auto rb = step(inst.mdp, 0, 0, b);
    CHECK(ra == rb);
  }
}

TEST_CASE("pi0 rollout on fig1 collects total reward 1") {
  Instance inst = fig1();
  Trajectory tr = rollout(inst.mdp, MemorylessPolicy::always_first_action(inst.mdp), 42);
  REQUIRE(tr.length() == 3);
  CHECK(tr.states == std::vector<int>{0, 1, 3});
  CHECK(tr.actions == std::vector<int>{0, 0, 0});
  CHECK(tr.total_reward() == doctest::Approx(1.0));
}

TEST_CASE("rollouts are bitwise identical under the same seed") {
  Instance inst = generate_instance({.name = "random_linear", .d = 2, .horizon = 4, .seed = 5});
  MemorylessPolicy pi = MemorylessPolicy::uniform(inst.mdp);
  Trajectory a = rollout(inst.mdp, pi, 99);
  Trajectory b = rollout(inst.mdp, pi, 99);
  CHECK(a.states == b.states);
  CHECK(a.actions == b.actions);
  CHECK(a.rewards == b.rewards);
}

TEST_CASE("uniform-policy rollouts on fig1 average to return 1") {
  // Both action paths of fig1 yield exactly 1.0.
  Instance inst = fig1();
  MemorylessPolicy pi = MemorylessPolicy::uniform(inst.mdp);
  double total = 0.0;
  const int episodes = 100000;
  for (int ep = 0; ep < episodes; ++ep) {
    total += rollout(inst.mdp, pi, episode_seed(11, ep)).total_reward();
  }
  CHECK(total / episodes == doctest::Approx(1.0).epsilon(3e-3));
}

TEST_CASE("exact evaluation matches the fig1 hand computation") {
  Instance inst = fig1();
  ValueTables vt = evaluate_policy_exact(inst.mdp, MemorylessPolicy::always_first_action(inst.mdp));
  CHECK(vt.v[0] == doctest::Approx(1.0));
  CHECK(vt.q(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("q at the last stage equals the expected immediate reward") {
  Instance inst = generate_instance({.name = "tabular", .horizon = 3, .seed = 9});
  MemorylessPolicy pi = MemorylessPolicy::uniform(inst.mdp);
  ValueTables vt = evaluate_policy_exact(inst.mdp, pi);
  for (int s : inst.mdp.stages[2]) {
    for (int a = 0; a < inst.mdp.num_actions; ++a) {
      CHECK(vt.q(s, a) == doctest::Approx(inst.mdp.mean_reward(s, a)));
    }
  }
}

TEST_CASE("exact evaluation agrees with Monte-Carlo") {
  InstanceSpec spec{.name = "tabular", .horizon = 3, .states_per_stage = 3, .seed = 17};
  Instance inst = generate_instance(spec);
  MemorylessPolicy pi = MemorylessPolicy::uniform(inst.mdp);
  ValueTables vt = evaluate_policy_exact(inst.mdp, pi);

  const int episodes = 1000000;
  double total = 0.0, total_sq = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    const double r = rollout(inst.mdp, pi, episode_seed(23, ep)).total_reward();
    total += r;
    total_sq += r * r;
  }
  const double mean = total / episodes;
  const double var = total_sq / episodes - mean * mean;
  const double se = std::sqrt(var / episodes);
  CHECK(std::abs(mean - vt.v[inst.mdp.initial_state()]) <= 4.0 * se + 1e-12);
}

TEST_CASE("optimal values dominate policy values") {
  Instance inst = generate_instance({.name = "tabular", .horizon = 3, .seed = 31});
  auto [vt, greedy] = optimal_values(inst.mdp);
  CHECK(vt.v[0] == evaluate_policy_exact(inst.mdp, greedy).v[0]);

  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    MemorylessPolicy pi = MemorylessPolicy::uniform(inst.mdp);
    for (int s = 0; s < inst.mdp.num_states(); ++s) {
      Vec row(inst.mdp.num_actions);
      for (int a = 0; a < inst.mdp.num_actions; ++a) row[a] = -std::log(1.0 - rng.uniform());
      pi.action_probs.row(s) = (row / row.sum()).transpose();
    }
    ValueTables pv = evaluate_policy_exact(inst.mdp, pi);
    for (int s = 0; s < inst.mdp.num_states(); ++s) {
      CHECK(pv.v[s] <= vt.v[s] + 1e-10);
    }
  }
}

TEST_CASE("fig1 optimal value is 1") {
  Instance inst = fig1();
  auto [vt, greedy] = optimal_values(inst.mdp);
  CHECK(vt.v[0] == doctest::Approx(1.0));
}

TEST_CASE("single-stage optimum is the best mean reward") {
  InstanceSpec spec{.name = "tabular", .horizon = 1, .seed = 13};
  Instance inst = generate_instance(spec);
  auto [vt, greedy] = optimal_values(inst.mdp);
  double best = 0.0;
  for (int a = 0; a < inst.mdp.num_actions; ++a) {
    best = std::max(best, inst.mdp.mean_reward(0, a));
  }
  CHECK(vt.v[0] == doctest::Approx(best));
}

TEST_CASE("instance json round-trips") {
  Instance inst = generate_instance({.name = "padded_linear", .d = 2, .horizon = 5, .chain = 2, .seed = 21});
  Json j = instance_to_json(inst);
  Instance back = instance_from_json(j);
  CHECK(back.mdp.horizon == inst.mdp.horizon);
  CHECK(back.mdp.num_states() == inst.mdp.num_states());
  CHECK(instance_to_json(back) == j);
}
