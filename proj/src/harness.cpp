#include "skippy/harness.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace skippy {

namespace {

Vec random_prob_vector(Rng& rng, int dim) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = -std::log(1.0 - rng.uniform());
  return v / v.sum();
}

RewardDist reward_from_mean(double mean, bool bernoulli) {
  if (!bernoulli) return RewardDist::point(mean);
  RewardDist r;
  r.support = Vec::Zero(2);
  r.support << 0.0, 1.0;
  r.probs = Vec::Zero(2);
  r.probs << 1.0 - mean, mean;
  return r;
}

Instance make_fig1() {
  Instance inst;
  inst.name = "fig1";
  Mdp& m = inst.mdp;
  m.horizon = 3;
  m.num_actions = 2;
  m.stages = {{0}, {1, 2}, {3}};
  m.stage_of = {0, 1, 1, 2};
  m.transitions.resize(4);
  m.rewards.resize(4);
  // s1: action 1 -> s2 with reward 1, action 2 -> s3 with reward 0.5
  m.transitions[0] = {Vec::Zero(2), Vec::Zero(2)};
  m.transitions[0][0] << 1.0, 0.0;
  m.transitions[0][1] << 0.0, 1.0;
  m.rewards[0] = {RewardDist::point(1.0), RewardDist::point(0.5)};
  // s2: both actions -> s4 with reward 0
  m.transitions[1] = {Vec::Constant(1, 1.0), Vec::Constant(1, 1.0)};
  m.rewards[1] = {RewardDist::point(0.0), RewardDist::point(0.0)};
  // s3: both actions -> s4 with reward 0.5
  m.transitions[2] = {Vec::Constant(1, 1.0), Vec::Constant(1, 1.0)};
  m.rewards[2] = {RewardDist::point(0.5), RewardDist::point(0.5)};
  // s4: terminal stage, zero rewards
  m.rewards[3] = {RewardDist::point(0.0), RewardDist::point(0.0)};

  FeatureTable& ft = inst.features;
  ft.dim = 1;
  ft.l1_bound = 1.0;
  ft.l2_bound = 1.0;
  ft.phi = {Mat::Constant(2, 1, 1.0), Mat::Zero(2, 1), Mat::Constant(2, 1, 0.5),
            Mat::Zero(2, 1)};
  return inst;
}

// Latent-factor linear MDP: phi(s,a) is a distribution over d topics, each
// topic carries a next-state distribution, expected rewards are <phi, r_t>.
// Every policy's q is then exactly linear with parameters bounded by
// sqrt(d) (H+1).
Instance make_random_linear(const InstanceSpec& spec, const std::set<int>& pad_stages) {
  Instance inst;
  inst.name = pad_stages.empty() ? "random_linear" : "padded_linear";
  inst.seed = spec.seed;
  Rng rng(mix_seed(spec.seed, 0xfacade));
  Mdp& m = inst.mdp;
  m.horizon = spec.horizon;
  m.num_actions = spec.num_actions;

  int next_id = 0;
  m.stages.resize(spec.horizon);
  for (int t = 0; t < spec.horizon; ++t) {
    const int count = (t == 0) ? 1 : spec.states_per_stage;
    for (int i = 0; i < count; ++i) {
      m.stages[t].push_back(next_id++);
      m.stage_of.push_back(t);
    }
  }
  m.transitions.resize(next_id);
  m.rewards.resize(next_id);

  FeatureTable& ft = inst.features;
  ft.dim = spec.d;
  ft.l1_bound = 1.0;
  ft.l2_bound = std::sqrt(static_cast<double>(spec.d)) * (spec.horizon + 1.0);
  ft.phi.resize(next_id);

  for (int t = 0; t < spec.horizon; ++t) {
    const bool pad = pad_stages.count(t) > 0;
    // Topic reward vector; pads are reward-free so that skippy-step rewards
    // stay within [0,1] after conversion.
    Vec reward_vec(spec.d);
    for (int i = 0; i < spec.d; ++i) reward_vec[i] = pad ? 0.0 : rng.uniform();
    // Topic-to-next-state rows.
    Mat topic_next;
    if (t + 1 < spec.horizon) {
      topic_next.resize(spec.d, static_cast<int>(m.stages[t + 1].size()));
      for (int i = 0; i < spec.d; ++i) {
        topic_next.row(i) = random_prob_vector(rng, topic_next.cols()).transpose();
      }
    }
    for (int s : m.stages[t]) {
      Mat phi(m.num_actions, spec.d);
      if (pad) {
        const Vec psi = random_prob_vector(rng, spec.d);
        for (int a = 0; a < m.num_actions; ++a) phi.row(a) = psi.transpose();
      } else {
        for (int a = 0; a < m.num_actions; ++a) {
          phi.row(a) = random_prob_vector(rng, spec.d).transpose();
        }
      }
      ft.phi[s] = phi;
      for (int a = 0; a < m.num_actions; ++a) {
        const double mean = phi.row(a).dot(reward_vec);
        m.rewards[s].push_back(reward_from_mean(mean, spec.bernoulli_rewards && !pad));
        if (t + 1 < spec.horizon) {
          m.transitions[s].push_back((phi.row(a) * topic_next).transpose());
        }
      }
    }
  }
  return inst;
}

Instance make_zero_range(const InstanceSpec& spec) {
  InstanceSpec padded = spec;
  Instance inst;
  Rng rng(mix_seed(spec.seed, 0x2e60));
  // Pads everywhere: all stages action-degenerate.
  std::set<int> pads;
  for (int t = 1; t < spec.horizon; ++t) pads.insert(t);
  padded.bernoulli_rewards = false;
  inst = make_random_linear(padded, pads);
  inst.name = "zero_range";
  // The initial stage also collapses to a single shared feature row and
  // action-independent dynamics; rewards are scaled to keep conversion sums
  // within [0,1].
  Mdp& m = inst.mdp;
  FeatureTable& ft = inst.features;
  const int s0 = m.initial_state();
  for (int a = 1; a < m.num_actions; ++a) {
    ft.phi[s0].row(a) = ft.phi[s0].row(0);
    if (!m.transitions[s0].empty()) m.transitions[s0][a] = m.transitions[s0][0];
    m.rewards[s0][a] = m.rewards[s0][0];
  }
  const double scale = 1.0 / (2.0 * m.horizon);
  for (int s = 0; s < m.num_states(); ++s) {
    for (auto& r : m.rewards[s]) {
      const double mean = r.mean() * scale;
      r = RewardDist::point(rng.uniform() < 0.5 ? mean : 0.0);
    }
  }
  return inst;
}

Instance make_tabular(const InstanceSpec& spec) {
  Instance inst;
  inst.name = "tabular";
  inst.seed = spec.seed;
  Rng rng(mix_seed(spec.seed, 0x7ab));
  Mdp& m = inst.mdp;
  m.horizon = spec.horizon;
  m.num_actions = spec.num_actions;
  int next_id = 0;
  int max_stage = 1;
  m.stages.resize(spec.horizon);
  for (int t = 0; t < spec.horizon; ++t) {
    const int count = (t == 0) ? 1 : spec.states_per_stage;
    max_stage = std::max(max_stage, count);
    for (int i = 0; i < count; ++i) {
      m.stages[t].push_back(next_id++);
      m.stage_of.push_back(t);
    }
  }
  m.transitions.resize(next_id);
  m.rewards.resize(next_id);

  FeatureTable& ft = inst.features;
  ft.dim = max_stage * spec.num_actions;
  ft.l1_bound = 1.0;
  ft.l2_bound = std::sqrt(static_cast<double>(ft.dim)) * spec.horizon;
  ft.phi.resize(next_id);

  for (int t = 0; t < spec.horizon; ++t) {
    for (int s : m.stages[t]) {
      Mat phi = Mat::Zero(m.num_actions, ft.dim);
      const int base = m.index_in_stage(s) * spec.num_actions;
      for (int a = 0; a < m.num_actions; ++a) {
        phi(a, base + a) = 1.0;
        m.rewards[s].push_back(reward_from_mean(rng.uniform(), spec.bernoulli_rewards));
        if (t + 1 < spec.horizon) {
          m.transitions[s].push_back(
              random_prob_vector(rng, static_cast<int>(m.stages[t + 1].size())));
        }
      }
      ft.phi[s] = phi;
    }
  }
  return inst;
}

}  // namespace

Instance generate_instance(const InstanceSpec& spec) {
  if (spec.name == "fig1") return make_fig1();
  if (spec.name == "random_linear") return make_random_linear(spec, {});
  if (spec.name == "padded_linear") {
    // Decision stages every chain+1 stages, pads in between.
    std::set<int> pads;
    for (int t = 0; t < spec.horizon; ++t) {
      if (t % (spec.chain + 1) != 0) pads.insert(t);
    }
    return make_random_linear(spec, pads);
  }
  if (spec.name == "zero_range") return make_zero_range(spec);
  if (spec.name == "tabular") return make_tabular(spec);
  throw std::invalid_argument("generate_instance: unknown generator " + spec.name);
}

Json instance_metadata(const Instance& inst, uint64_t enumeration_cap) {
  Json meta;
  meta["name"] = inst.name;
  meta["seed"] = inst.seed;
  meta["states"] = inst.mdp.num_states();
  meta["horizon"] = inst.mdp.horizon;
  meta["feature_dim"] = inst.features.dim;
  const double policies =
      std::pow(static_cast<double>(inst.mdp.num_actions), inst.mdp.num_states());
  if (policies <= static_cast<double>(enumeration_cap)) {
    PolicyEnumeration en = enumerate_policies(inst.mdp, inst.features, enumeration_cap);
    meta["eta_hat"] = en.eta_hat;
    meta["eta_hat_policies"] = en.policies.size();
    Json ranges = Json::array();
    for (int s = 0; s < inst.mdp.num_states(); ++s) {
      ranges.push_back(range_exact(inst.mdp, inst.features, s, en.thetas));
    }
    meta["range_table"] = ranges;
  } else {
    meta["eta_hat"] = nullptr;
    meta["note"] = "policy count above enumeration cap; eta certificate skipped";
  }
  return meta;
}

namespace {
Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}
Vec vec_from_json(const Json& j) {
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}
}  // namespace

Json instance_to_json(const Instance& inst) {
  Json j;
  j["schema"] = "skippy-instance/1";
  j["name"] = inst.name;
  j["seed"] = inst.seed;
  j["horizon"] = inst.mdp.horizon;
  j["num_actions"] = inst.mdp.num_actions;
  j["feature_dim"] = inst.features.dim;
  j["l1_bound"] = inst.features.l1_bound;
  j["l2_bound"] = inst.features.l2_bound;
  Json states = Json::array();
  for (int s = 0; s < inst.mdp.num_states(); ++s) {
    Json js;
    js["id"] = s;
    js["stage"] = inst.mdp.stage_of[s] + 1;
    Json trans = Json::array();
    for (const Vec& row : inst.mdp.transitions[s]) trans.push_back(vec_to_json(row));
    js["transitions"] = trans;
    Json rew = Json::array();
    for (const RewardDist& r : inst.mdp.rewards[s]) {
      rew.push_back({{"support", vec_to_json(r.support)}, {"probs", vec_to_json(r.probs)}});
    }
    js["rewards"] = rew;
    Json feats = Json::array();
    for (int a = 0; a < inst.mdp.num_actions; ++a) {
      feats.push_back(vec_to_json(inst.features.phi[s].row(a).transpose()));
    }
    js["features"] = feats;
    states.push_back(js);
  }
  j["states"] = states;
  return j;
}

Instance instance_from_json(const Json& j) {
  if (j.at("schema").get<std::string>() != "skippy-instance/1") {
    throw std::invalid_argument("instance_from_json: unsupported schema");
  }
  Instance inst;
  inst.name = j.at("name").get<std::string>();
  inst.seed = j.value("seed", uint64_t{0});
  Mdp& m = inst.mdp;
  m.horizon = j.at("horizon").get<int>();
  m.num_actions = j.at("num_actions").get<int>();
  const auto& states = j.at("states");
  m.stages.resize(m.horizon);
  m.stage_of.resize(states.size());
  m.transitions.resize(states.size());
  m.rewards.resize(states.size());
  FeatureTable& ft = inst.features;
  ft.dim = j.at("feature_dim").get<int>();
  ft.l1_bound = j.at("l1_bound").get<double>();
  ft.l2_bound = j.at("l2_bound").get<double>();
  ft.phi.resize(states.size());
  for (const auto& js : states) {
    const int s = js.at("id").get<int>();
    const int stage = js.at("stage").get<int>() - 1;
    m.stage_of[s] = stage;
    m.stages[stage].push_back(s);
    for (const auto& row : js.at("transitions")) m.transitions[s].push_back(vec_from_json(row));
    for (const auto& r : js.at("rewards")) {
      RewardDist rd;
      rd.support = vec_from_json(r.at("support"));
      rd.probs = vec_from_json(r.at("probs"));
      m.rewards[s].push_back(rd);
    }
    Mat phi(m.num_actions, ft.dim);
    int a = 0;
    for (const auto& row : js.at("features")) phi.row(a++) = vec_from_json(row).transpose();
    ft.phi[s] = phi;
  }
  return inst;
}

void save_instance(const Instance& inst, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_instance: cannot open " + path.string());
  out << instance_to_json(inst).dump(2) << "\n";
}

Instance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_instance: cannot open " + path.string());
  Json j;
  in >> j;
  return instance_from_json(j);
}

RunConfig run_config_from_json(const Json& j) {
  static const std::set<std::string> known = {
      "schema", "instance", "instance_path", "eps",     "zeta",    "mode",
      "opt1",   "seed",     "repeats",       "out",     "episode_cap",
      "overrides", "opt1_restarts"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      throw std::invalid_argument("run config: unknown key '" + it.key() + "'");
    }
  }
  if (j.at("schema").get<std::string>() != "skippy-run-config/1") {
    throw std::invalid_argument("run config: unsupported schema");
  }
  RunConfig cfg;
  if (j.contains("instance")) {
    const auto& ji = j["instance"];
    static const std::set<std::string> known_inst = {
        "name", "d", "H", "A", "states_per_stage", "chain", "bernoulli_rewards", "seed"};
    for (auto it = ji.begin(); it != ji.end(); ++it) {
      if (!known_inst.count(it.key())) {
        throw std::invalid_argument("run config instance: unknown key '" + it.key() + "'");
      }
    }
    cfg.instance.name = ji.at("name").get<std::string>();
    cfg.instance.d = ji.value("d", cfg.instance.d);
    cfg.instance.horizon = ji.value("H", cfg.instance.horizon);
    cfg.instance.num_actions = ji.value("A", cfg.instance.num_actions);
    cfg.instance.states_per_stage = ji.value("states_per_stage", cfg.instance.states_per_stage);
    cfg.instance.chain = ji.value("chain", cfg.instance.chain);
    cfg.instance.bernoulli_rewards = ji.value("bernoulli_rewards", cfg.instance.bernoulli_rewards);
    cfg.instance.seed = ji.value("seed", cfg.instance.seed);
  }
  cfg.instance_path = j.value("instance_path", std::string{});
  cfg.eps = j.value("eps", cfg.eps);
  cfg.zeta = j.value("zeta", cfg.zeta);
  if (j.contains("mode")) {
    const std::string mode = j["mode"].get<std::string>();
    if (mode == "theory") {
      cfg.mode = ConstantMode::kTheory;
    } else if (mode == "practical") {
      cfg.mode = ConstantMode::kPractical;
    } else {
      throw std::invalid_argument("run config: mode must be theory|practical");
    }
  }
  if (j.contains("opt1")) {
    const std::string opt1 = j["opt1"].get<std::string>();
    if (opt1 == "search") {
      cfg.opt1 = Opt1Mode::kSearch;
    } else if (opt1 == "oracle") {
      cfg.opt1 = Opt1Mode::kOracleAssisted;
    } else {
      throw std::invalid_argument("run config: opt1 must be search|oracle");
    }
  }
  cfg.seed = j.value("seed", cfg.seed);
  cfg.repeats = j.value("repeats", cfg.repeats);
  cfg.episode_cap = j.value("episode_cap", cfg.episode_cap);
  cfg.opt1_restarts = j.value("opt1_restarts", cfg.opt1_restarts);
  cfg.out_dir = j.value("out", cfg.out_dir);
  if (j.contains("overrides")) {
    const auto& jo = j["overrides"];
    static const std::set<std::string> known_ov = {
        "n", "beta", "omega", "lambda", "m_max", "uncertainty_threshold_scale",
        "discrepancy_threshold_scale"};
    for (auto it = jo.begin(); it != jo.end(); ++it) {
      if (!known_ov.count(it.key())) {
        throw std::invalid_argument("run config overrides: unknown key '" + it.key() + "'");
      }
    }
    cfg.overrides.n = jo.value("n", cfg.overrides.n);
    cfg.overrides.beta = jo.value("beta", cfg.overrides.beta);
    cfg.overrides.omega = jo.value("omega", cfg.overrides.omega);
    cfg.overrides.lambda = jo.value("lambda", cfg.overrides.lambda);
    cfg.overrides.m_max = jo.value("m_max", cfg.overrides.m_max);
    cfg.overrides.uncertainty_threshold_scale =
        jo.value("uncertainty_threshold_scale", cfg.overrides.uncertainty_threshold_scale);
    cfg.overrides.discrepancy_threshold_scale =
        jo.value("discrepancy_threshold_scale", cfg.overrides.discrepancy_threshold_scale);
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_run_config: cannot open " + path.string());
  Json j;
  in >> j;
  return run_config_from_json(j);
}

SingleRunResult run_single(const Instance& inst, const RunConfig& config,
                           uint64_t run_seed) {
  LearnerConfig lc;
  lc.eps = config.eps;
  lc.zeta = config.zeta;
  lc.constants = compute_constants(inst.features.dim, inst.mdp.horizon, config.eps,
                                   config.zeta, inst.features.l1_bound,
                                   inst.features.l2_bound, config.mode, config.overrides);
  lc.opt1_mode = config.opt1;
  lc.opt1_restarts = config.opt1_restarts;
  lc.seed = run_seed;
  lc.episode_cap = config.episode_cap;

  std::shared_ptr<PolicyEnumeration> enumeration;
  if (config.opt1 == Opt1Mode::kOracleAssisted) {
    enumeration = std::make_shared<PolicyEnumeration>(
        enumerate_policies(inst.mdp, inst.features));
    const ConstantSet cs = lc.constants;
    const Mdp* mdp = &inst.mdp;
    const FeatureTable* ft = &inst.features;
    lc.guess_provider = [enumeration, cs, mdp, ft](const Preconditioning& pc) {
      auto designs = designs_for_preconditioning(pc, enumeration->thetas,
                                                 static_cast<int>(cs.d0), cs.gamma);
      return Guess::correct_from_designs(designs, cs.guess_radius(),
                                         static_cast<int>(cs.d0), ft->dim);
    };
  }

  SingleRunResult out;
  LearnerResult lr = run_skippy_eleanor(inst.mdp, inst.features, lc);
  SkippyContext ctx{inst.mdp, inst.features, lr.policy.guess, lr.policy.theta_bar,
                    lr.policy.precond, config.eps};
  out.row.seed = run_seed;
  out.row.instance = inst.name;
  out.row.v_pi = skippy_policy_value_exact(ctx, lr.policy.k);
  out.row.v_star = optimal_values(inst.mdp).first.v[inst.mdp.initial_state()];
  out.row.episodes = lr.log.episodes_total;
  out.row.q_updates = static_cast<int>(lr.log.q_updates.size());
  out.row.terminated_by = lr.log.terminated_by;
  out.log = std::move(lr.log);
  out.policy = std::move(lr.policy);
  return out;
}

namespace {

Json iteration_to_json(const IterationLog& il) {
  Json j;
  j["m"] = il.m;
  j["mprime"] = il.mprime;
  j["c"] = il.c_value;
  j["x"] = il.x;
  j["w_quad"] = il.w_quad;
  j["sigma"] = Json::array();
  for (int i = 0; i < il.sigma_bar.size(); ++i) j["sigma"].push_back(il.sigma_bar[i]);
  j["sigma_sum"] = il.sigma_bar_sum;
  j["feas_slack"] = il.feasibility_slack;
  if (il.q_updated) {
    j["q_update"] = {{"stage", il.update_stage}, {"w_norm", il.update_w_norm}};
  } else {
    j["q_update"] = nullptr;
  }
  j["episodes"] = il.episodes_total;
  j["wall_s"] = il.wall_seconds;
  return j;
}

Json policy_to_json(const PolicyDescriptor& pd) {
  Json j;
  j["k"] = pd.k;
  Json tb = Json::array();
  for (const Vec& v : pd.theta_bar.theta_bar) tb.push_back(vec_to_json(v));
  j["theta_bar"] = tb;
  Json g = Json::array();
  for (const auto& stage : pd.guess.vartheta) {
    Json gs = Json::array();
    for (const Vec& v : stage) gs.push_back(vec_to_json(v));
    g.push_back(gs);
  }
  j["guess"] = g;
  Json q = Json::array();
  for (const Mat& qh : pd.precond.q) {
    Json rows = Json::array();
    for (int r = 0; r < qh.rows(); ++r) rows.push_back(vec_to_json(qh.row(r).transpose()));
    q.push_back(rows);
  }
  j["q"] = q;
  return j;
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& config) {
  namespace fs = std::filesystem;
  ExperimentResult result;
  fs::create_directories(config.out_dir);

  std::ofstream summary(fs::path(config.out_dir) / "summary.csv");
  summary << summary_header() << "\n";

  for (int rep = 0; rep < config.repeats; ++rep) {
    const uint64_t run_seed = mix_seed(config.seed, rep);
    Instance inst;
    if (!config.instance_path.empty()) {
      inst = load_instance(config.instance_path);
    } else {
      InstanceSpec spec = config.instance;
      if (config.repeats > 1) spec.seed = mix_seed(config.instance.seed, rep);
      inst = generate_instance(spec);
    }

    const fs::path run_dir = fs::path(config.out_dir) / ("run_" + std::to_string(rep));
    fs::create_directories(run_dir);
    save_instance(inst, run_dir / "instance.json");
    {
      std::ofstream meta(run_dir / "metadata.json");
      meta << instance_metadata(inst).dump(2) << "\n";
    }

    SingleRunResult sr = run_single(inst, config, run_seed);

    std::ofstream log(run_dir / "run_log.jsonl");
    {
      Json head;
      head["config"] = {{"seed", run_seed},
                        {"eps", config.eps},
                        {"zeta", config.zeta},
                        {"mode", config.mode == ConstantMode::kTheory ? "theory" : "practical"},
                        {"opt1", config.opt1 == Opt1Mode::kSearch ? "search" : "oracle"}};
      head["constants"] = Json::parse("{}");
      ConstantSet cs = compute_constants(inst.features.dim, inst.mdp.horizon, config.eps,
                                         config.zeta, inst.features.l1_bound,
                                         inst.features.l2_bound, config.mode,
                                         config.overrides);
      std::istringstream rep_lines(cs.report());
      std::string line;
      while (std::getline(rep_lines, line)) {
        const auto pos = line.find(' ');
        if (pos != std::string::npos) {
          head["constants"][line.substr(0, pos)] = line.substr(pos + 1);
        }
      }
      log << head.dump() << "\n";
    }
    for (const IterationLog& il : sr.log.iterations) log << iteration_to_json(il).dump() << "\n";
    {
      Json tail;
      tail["final"] = true;
      tail["terminated_by"] = sr.row.terminated_by;
      tail["v_pi"] = sr.row.v_pi;
      tail["v_star"] = sr.row.v_star;
      tail["episodes"] = sr.row.episodes;
      tail["policy"] = policy_to_json(sr.policy);
      log << tail.dump() << "\n";
    }

    summary << summary_row_csv(sr.row) << "\n";
    result.rows.push_back(sr.row);
  }
  result.summary_path = fs::path(config.out_dir) / "summary.csv";
  return result;
}

std::string summary_header() {
  return "seed,instance,v_star,v_pi,episodes,q_updates,terminated_by";
}

std::string summary_row_csv(const RunSummaryRow& row) {
  std::ostringstream os;
  os.precision(12);
  os << row.seed << "," << row.instance << "," << row.v_star << "," << row.v_pi << ","
     << row.episodes << "," << row.q_updates << "," << row.terminated_by;
  return os.str();
}

std::string emit_metrics(const std::vector<std::filesystem::path>& run_logs) {
  std::ostringstream os;
  os.precision(12);
  os << "run\tm\tmprime\tsigma_sum\tx\tc\n";
  std::vector<std::pair<std::string, std::pair<double, double>>> finals;
  for (const auto& path : run_logs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("emit_metrics: cannot open " + path.string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      Json j = Json::parse(line);
      if (j.contains("final")) {
        finals.push_back({path.string(),
                          {j.at("v_star").get<double>(), j.at("v_pi").get<double>()}});
      } else if (j.contains("m")) {
        os << path.string() << "\t" << j["m"].get<int>() << "\t" << j["mprime"].get<int>()
           << "\t" << j["sigma_sum"].get<double>() << "\t" << j["x"].get<double>() << "\t"
           << j["c"].get<double>() << "\n";
      }
    }
  }
  os << "\nrun\tv_star\tv_pi\tsuboptimality\n";
  for (const auto& [name, vv] : finals) {
    os << name << "\t" << vv.first << "\t" << vv.second << "\t" << vv.first - vv.second
       << "\n";
  }
  return os.str();
}

}  // namespace skippy
