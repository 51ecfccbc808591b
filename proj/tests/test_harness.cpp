#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

#include "skippy/harness.hpp"

using namespace skippy;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("skippy_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}
}  // namespace

TEST_CASE("generators produce valid instances with eta certificates") {
  struct Case {
    InstanceSpec spec;
    bool expect_eta_zero;
  };
  const std::vector<Case> cases = {
      {{.name = "fig1"}, true},
      {{.name = "random_linear", .d = 2, .horizon = 3, .seed = 3}, true},
      {{.name = "padded_linear", .d = 2, .horizon = 5, .chain = 2, .seed = 4}, true},
      {{.name = "zero_range", .d = 2, .horizon = 3, .seed = 5}, true},
      {{.name = "tabular", .horizon = 3, .seed = 6}, true},
  };
  for (const auto& c : cases) {
    CAPTURE(c.spec.name);
    Instance inst = generate_instance(c.spec);
    CHECK(validate_mdp(inst.mdp).empty());
    CHECK(validate_features(inst.mdp, inst.features).empty());
    Json meta = instance_metadata(inst);
    REQUIRE(!meta["eta_hat"].is_null());
    if (c.expect_eta_zero) {
      CHECK(meta["eta_hat"].get<double>() <= 1e-8);
    }
    CHECK(meta["range_table"].size() == static_cast<size_t>(inst.mdp.num_states()));
  }
  CHECK_THROWS(generate_instance({.name = "nope"}));
}

TEST_CASE("fig1 metadata has all-zero ranges") {
  Instance inst = generate_instance({.name = "fig1"});
  Json meta = instance_metadata(inst);
  CHECK(meta["eta_hat"].get<double>() == 0.0);
  for (const auto& r : meta["range_table"]) {
    CHECK(r.get<double>() == 0.0);
  }
}

TEST_CASE("padded_linear pads have zero range and the conversion certifies") {
  Instance inst =
      generate_instance({.name = "padded_linear", .d = 2, .horizon = 5, .chain = 2, .seed = 21});
  PolicyEnumeration en = enumerate_policies(inst.mdp, inst.features);
  CHECK(en.eta_hat <= 1e-9);
  for (int s = 0; s < inst.mdp.num_states(); ++s) {
    const int t = inst.mdp.stage_of[s];
    if (t % 3 != 0) {  // pad stages for chain = 2
      CHECK(range_exact(inst.mdp, inst.features, s, en.thetas) <= 1e-10);
    }
  }
  auto [conv, cert] = skip_convert_to_linear(inst.mdp, inst.features, 0.01, en.thetas);
  CHECK(cert.kappa_hat <= 1e-6);
}

TEST_CASE("run config parsing is strict") {
  Json good = {
      {"schema", "skippy-run-config/1"},
      {"instance", {{"name", "fig1"}}},
      {"eps", 0.2},
      {"mode", "practical"},
      {"opt1", "oracle"},
      {"seed", 9},
      {"repeats", 2},
  };
  RunConfig cfg = run_config_from_json(good);
  CHECK(cfg.instance.name == "fig1");
  CHECK(cfg.eps == doctest::Approx(0.2));
  CHECK(cfg.repeats == 2);

  Json bad = good;
  bad["unknown_key"] = 1;
  CHECK_THROWS(run_config_from_json(bad));

  Json bad_mode = good;
  bad_mode["mode"] = "fast";
  CHECK_THROWS(run_config_from_json(bad_mode));

  Json bad_schema = good;
  bad_schema["schema"] = "skippy-run-config/999";
  CHECK_THROWS(run_config_from_json(bad_schema));
}

TEST_CASE("run_experiment on fig1 writes summary and logs") {
  const fs::path out = temp_dir("fig1_experiment");
  RunConfig cfg;
  cfg.instance = {.name = "fig1"};
  cfg.repeats = 3;
  cfg.seed = 11;
  cfg.out_dir = out.string();
  ExperimentResult res = run_experiment(cfg);
  REQUIRE(res.rows.size() == 3);
  for (const auto& row : res.rows) {
    CHECK(row.v_pi == doctest::Approx(1.0));
    CHECK(row.v_star == doctest::Approx(1.0));
    CHECK(row.terminated_by == "uncertainty_threshold");
  }
  // Summary file matches the documented schema.
  std::ifstream in(res.summary_path);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "seed,instance,v_star,v_pi,episodes,q_updates,terminated_by");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 3);
  CHECK(fs::exists(out / "run_0" / "run_log.jsonl"));
  CHECK(fs::exists(out / "run_0" / "instance.json"));
  CHECK(fs::exists(out / "run_0" / "metadata.json"));
}

TEST_CASE("experiments are deterministic given the root seed") {
  const fs::path out_a = temp_dir("det_a");
  const fs::path out_b = temp_dir("det_b");
  RunConfig cfg;
  cfg.instance = {.name = "fig1"};
  cfg.repeats = 2;
  cfg.seed = 77;
  cfg.out_dir = out_a.string();
  run_experiment(cfg);
  cfg.out_dir = out_b.string();
  run_experiment(cfg);
  for (const auto& name : {"summary.csv", "run_0/run_log.jsonl", "run_1/run_log.jsonl"}) {
    std::ifstream fa(out_a / name), fb(out_b / name);
    std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ca == cb);
  }
}

TEST_CASE("emit_metrics produces the documented series") {
  const fs::path out = temp_dir("metrics");
  RunConfig cfg;
  cfg.instance = {.name = "fig1"};
  cfg.repeats = 1;
  cfg.seed = 3;
  cfg.out_dir = out.string();
  run_experiment(cfg);

  SUBCASE("empty input") {
    const std::string table = emit_metrics({});
    CHECK(table.find("run\tm\tmprime\tsigma_sum\tx\tc") == 0);
  }
  SUBCASE("single run") {
    const std::string table = emit_metrics({out / "run_0" / "run_log.jsonl"});
    CHECK(table.find("run\tm\tmprime") == 0);
    CHECK(table.find("suboptimality") != std::string::npos);
    // one iteration row at least
    CHECK(std::count(table.begin(), table.end(), '\n') >= 4);
  }
}

TEST_CASE("instance save and load round-trip through files") {
  const fs::path out = temp_dir("io");
  Instance inst = generate_instance({.name = "tabular", .horizon = 3, .seed = 8});
  save_instance(inst, out / "inst.json");
  Instance back = load_instance(out / "inst.json");
  CHECK(instance_to_json(back) == instance_to_json(inst));
  CHECK_THROWS(load_instance(out / "missing.json"));
}
