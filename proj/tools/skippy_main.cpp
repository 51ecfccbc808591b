#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "skippy/harness.hpp"

namespace {

using namespace skippy;

int cmd_generate(const std::string& name, int d, int horizon, int actions, int states,
                 int chain, uint64_t seed, const std::string& out) {
  InstanceSpec spec;
  spec.name = name;
  spec.d = d;
  spec.horizon = horizon;
  spec.num_actions = actions;
  spec.states_per_stage = states;
  spec.chain = chain;
  spec.seed = seed;
  Instance inst = generate_instance(spec);
  auto report = validate_mdp(inst.mdp);
  auto freport = validate_features(inst.mdp, inst.features);
  report.insert(report.end(), freport.begin(), freport.end());
  if (!report.empty()) {
    for (const auto& r : report) std::cerr << "invalid instance: " << r << "\n";
    return 1;
  }
  std::filesystem::create_directories(out);
  save_instance(inst, std::filesystem::path(out) / "instance.json");
  std::ofstream meta(std::filesystem::path(out) / "metadata.json");
  meta << instance_metadata(inst).dump(2) << "\n";
  std::cout << "wrote " << (std::filesystem::path(out) / "instance.json").string() << "\n";
  return 0;
}

int cmd_constants(int d, int horizon, double eps, double zeta, double l1, double l2,
                  const std::string& mode) {
  ConstantSet cs = compute_constants(
      d, horizon, eps, zeta, l1, l2,
      mode == "theory" ? ConstantMode::kTheory : ConstantMode::kPractical);
  std::cout << cs.report();
  return 0;
}

int cmd_run(const std::string& config_path, std::optional<uint64_t> seed,
            std::optional<std::string> out, std::optional<std::string> mode,
            std::optional<std::string> opt1) {
  RunConfig cfg = load_run_config(config_path);
  if (seed) cfg.seed = *seed;
  if (out) cfg.out_dir = *out;
  if (mode) cfg.mode = (*mode == "theory") ? ConstantMode::kTheory : ConstantMode::kPractical;
  if (opt1) cfg.opt1 = (*opt1 == "search") ? Opt1Mode::kSearch : Opt1Mode::kOracleAssisted;
  ExperimentResult res = run_experiment(cfg);
  std::cout << summary_header() << "\n";
  for (const auto& row : res.rows) std::cout << summary_row_csv(row) << "\n";
  std::cout << "summary: " << res.summary_path.string() << "\n";
  return 0;
}

bool report_check(const std::string& name, bool ok, const std::string& detail = "") {
  std::cout << (ok ? "PASS" : "FAIL") << " " << name;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << "\n";
  return ok;
}

int cmd_verify(const std::string& suite, uint64_t seed) {
  bool all_ok = true;
  const bool run_all = suite == "all";

  if (run_all || suite == "fig1") {
    Instance inst = generate_instance({.name = "fig1"});
    PolicyEnumeration en = enumerate_policies(inst.mdp, inst.features);
    all_ok &= report_check("fig1.eta_hat_zero", en.eta_hat <= 1e-9,
                           "eta_hat=" + std::to_string(en.eta_hat));
    auto [conv, cert] = skip_convert_to_linear(inst.mdp, inst.features, 0.01, en.thetas);
    all_ok &= report_check("fig1.conversion_kappa", cert.kappa_hat <= 1e-9,
                           "kappa_hat=" + std::to_string(cert.kappa_hat));
    all_ok &= report_check("fig1.conversion_structure", conv.kept_states == 1);
  }

  if (run_all || suite == "potentials") {
    Rng rng(seed);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const int d = 1 + static_cast<int>(rng.uniform() * 8);
      const int n = 10 + static_cast<int>(rng.uniform() * 490);
      const double bound = 0.5 + rng.uniform();
      std::vector<Vec> seq;
      for (int i = 0; i < n; ++i) seq.push_back(bound * rng.uniform() * rng.unit_vector(d));
      Mat v0 = Mat::Identity(d, d) * (0.1 + rng.uniform());
      PotentialSlack slack = elliptical_potential_slack(seq, v0, bound);
      worst = std::min({worst, slack.potential_vs_logdet, slack.logdet_vs_trace,
                        slack.infrequent_update});
    }
    all_ok &= report_check("potentials.slack", worst >= -1e-9,
                           "worst slack=" + std::to_string(worst));
  }

  if (run_all || suite == "confidence") {
    for (double sigma : {0.5, 1.0, 2.0}) {
      for (double xi : {0.0, 0.05}) {
        CoverageResult cov = lse_confidence_check(sigma, xi, 1.0, 3, 400, 0.1,
                                                  mix_seed(seed, sigma * 100 + xi * 1000));
        all_ok &= report_check(
            "confidence.sigma" + std::to_string(sigma) + ".xi" + std::to_string(xi),
            cov.coverage >= 0.88 && cov.j2_max_violation <= 1e-9,
            "coverage=" + std::to_string(cov.coverage));
      }
    }
  }

  if (run_all || suite == "learning") {
    RunConfig cfg;
    cfg.instance = {.name = "fig1"};
    cfg.repeats = 1;
    cfg.seed = seed;
    cfg.out_dir = "verify_runs";
    ExperimentResult res = run_experiment(cfg);
    all_ok &= report_check("learning.fig1",
                           std::abs(res.rows[0].v_pi - res.rows[0].v_star) <= 1e-9,
                           "v_pi=" + std::to_string(res.rows[0].v_pi));
  }

  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale laboratory for online RL under linear q^pi-realizability"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Generate a builtin instance");
  std::string g_name = "fig1", g_out = "instances";
  int g_d = 2, g_h = 3, g_a = 2, g_states = 3, g_chain = 1;
  uint64_t g_seed = 1;
  gen->add_option("--instance", g_name, "fig1|random_linear|padded_linear|zero_range|tabular");
  gen->add_option("--d", g_d, "feature dimension");
  gen->add_option("--H", g_h, "horizon");
  gen->add_option("--A", g_a, "action count");
  gen->add_option("--states", g_states, "states per stage");
  gen->add_option("--chain", g_chain, "pad stages between decision stages");
  gen->add_option("--seed", g_seed, "generator seed");
  gen->add_option("--out", g_out, "output directory");

  auto* run = app.add_subcommand("run", "Run SkippyEleanor from a config file");
  std::string r_config;
  std::optional<uint64_t> r_seed;
  std::optional<std::string> r_out, r_mode, r_opt1;
  run->add_option("--config", r_config, "run config path")->required();
  run->add_option("--seed", r_seed, "root seed override");
  run->add_option("--out", r_out, "output directory override");
  run->add_option("--mode", r_mode, "theory|practical")
      ->check(CLI::IsMember({"theory", "practical"}));
  run->add_option("--opt1", r_opt1, "search|oracle")
      ->check(CLI::IsMember({"search", "oracle"}));

  auto* verify = app.add_subcommand("verify", "Run the verification oracle suites");
  std::string v_suite = "all";
  uint64_t v_seed = 1;
  verify->add_option("--suite", v_suite, "all|fig1|potentials|confidence|learning");
  verify->add_option("--seed", v_seed, "suite seed");

  auto* constants = app.add_subcommand("constants", "Print the derived constant set");
  int c_d = 2, c_h = 3;
  double c_eps = 0.1, c_zeta = 0.1, c_l1 = 1.0, c_l2 = 1.0;
  std::string c_mode = "theory";
  constants->add_option("--d", c_d, "feature dimension");
  constants->add_option("--H", c_h, "horizon");
  constants->add_option("--eps", c_eps, "accuracy");
  constants->add_option("--zeta", c_zeta, "failure probability");
  constants->add_option("--L1", c_l1, "feature norm bound");
  constants->add_option("--L2", c_l2, "parameter norm bound");
  constants->add_option("--mode", c_mode, "theory|practical")
      ->check(CLI::IsMember({"theory", "practical"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_generate(g_name, g_d, g_h, g_a, g_states, g_chain, g_seed, g_out);
    }
    if (run->parsed()) return cmd_run(r_config, r_seed, r_out, r_mode, r_opt1);
    if (verify->parsed()) return cmd_verify(v_suite, v_seed);
    if (constants->parsed()) return cmd_constants(c_d, c_h, c_eps, c_zeta, c_l1, c_l2, c_mode);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
