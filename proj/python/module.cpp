#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "skippy/harness.hpp"

namespace py = pybind11;
using namespace skippy;

PYBIND11_MODULE(_skippy, m) {
  m.doc() = "Online RL under linear q^pi-realizability: SkippyEleanor and its oracles";

  py::class_<RewardDist>(m, "RewardDist")
      .def_static("point", &RewardDist::point)
      .def_readonly("support", &RewardDist::support)
      .def_readonly("probs", &RewardDist::probs)
      .def("mean", &RewardDist::mean);

  py::class_<Mdp>(m, "Mdp")
      .def_readonly("horizon", &Mdp::horizon)
      .def_readonly("num_actions", &Mdp::num_actions)
      .def_readonly("stages", &Mdp::stages)
      .def_readonly("stage_of", &Mdp::stage_of)
      .def("num_states", &Mdp::num_states)
      .def("initial_state", &Mdp::initial_state)
      .def("mean_reward", &Mdp::mean_reward);

  py::class_<MemorylessPolicy>(m, "MemorylessPolicy")
      .def_static("uniform", &MemorylessPolicy::uniform)
      .def_static("always_first_action", &MemorylessPolicy::always_first_action)
      .def_static("deterministic", &MemorylessPolicy::deterministic)
      .def_readwrite("action_probs", &MemorylessPolicy::action_probs);

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("states", &Trajectory::states)
      .def_readonly("actions", &Trajectory::actions)
      .def_readonly("rewards", &Trajectory::rewards)
      .def_readonly("seed", &Trajectory::seed)
      .def("total_reward", &Trajectory::total_reward);

  py::class_<ValueTables>(m, "ValueTables")
      .def_readonly("v", &ValueTables::v)
      .def_readonly("q", &ValueTables::q);

  py::class_<FeatureTable>(m, "FeatureTable")
      .def_readonly("dim", &FeatureTable::dim)
      .def_readonly("l1_bound", &FeatureTable::l1_bound)
      .def_readonly("l2_bound", &FeatureTable::l2_bound)
      .def("at", &FeatureTable::at)
      .def("diff", &FeatureTable::diff);

  py::class_<Instance>(m, "Instance")
      .def_readonly("mdp", &Instance::mdp)
      .def_readonly("features", &Instance::features)
      .def_readonly("name", &Instance::name);

  py::class_<InstanceSpec>(m, "InstanceSpec")
      .def(py::init<>())
      .def_readwrite("name", &InstanceSpec::name)
      .def_readwrite("d", &InstanceSpec::d)
      .def_readwrite("horizon", &InstanceSpec::horizon)
      .def_readwrite("num_actions", &InstanceSpec::num_actions)
      .def_readwrite("states_per_stage", &InstanceSpec::states_per_stage)
      .def_readwrite("chain", &InstanceSpec::chain)
      .def_readwrite("bernoulli_rewards", &InstanceSpec::bernoulli_rewards)
      .def_readwrite("seed", &InstanceSpec::seed);

  py::enum_<ConstantMode>(m, "ConstantMode")
      .value("theory", ConstantMode::kTheory)
      .value("practical", ConstantMode::kPractical);

  py::enum_<Opt1Mode>(m, "Opt1Mode")
      .value("search", Opt1Mode::kSearch)
      .value("oracle", Opt1Mode::kOracleAssisted);

  py::class_<PracticalOverrides>(m, "PracticalOverrides")
      .def(py::init<>())
      .def_readwrite("n", &PracticalOverrides::n)
      .def_readwrite("beta", &PracticalOverrides::beta)
      .def_readwrite("omega", &PracticalOverrides::omega)
      .def_readwrite("lambda_", &PracticalOverrides::lambda)
      .def_readwrite("m_max", &PracticalOverrides::m_max)
      .def_readwrite("uncertainty_threshold_scale",
                     &PracticalOverrides::uncertainty_threshold_scale)
      .def_readwrite("discrepancy_threshold_scale",
                     &PracticalOverrides::discrepancy_threshold_scale);

  py::class_<ConstantSet>(m, "ConstantSet")
      .def_readonly("d0", &ConstantSet::d0)
      .def_readonly("d1", &ConstantSet::d1)
      .def_readonly("omega", &ConstantSet::omega)
      .def_readonly("gamma", &ConstantSet::gamma)
      .def_readonly("beta", &ConstantSet::beta)
      .def_readonly("alpha", &ConstantSet::alpha)
      .def_readonly("lambda_", &ConstantSet::lambda)
      .def_readonly("n", &ConstantSet::n)
      .def_readonly("m_max", &ConstantSet::m_max)
      .def_readonly("mprime_max", &ConstantSet::mprime_max)
      .def_readonly("l3", &ConstantSet::l3)
      .def_readonly("uncertainty_threshold", &ConstantSet::uncertainty_threshold)
      .def("report", &ConstantSet::report);

  py::class_<RunSummaryRow>(m, "RunSummaryRow")
      .def_readonly("seed", &RunSummaryRow::seed)
      .def_readonly("instance", &RunSummaryRow::instance)
      .def_readonly("v_star", &RunSummaryRow::v_star)
      .def_readonly("v_pi", &RunSummaryRow::v_pi)
      .def_readonly("episodes", &RunSummaryRow::episodes)
      .def_readonly("q_updates", &RunSummaryRow::q_updates)
      .def_readonly("terminated_by", &RunSummaryRow::terminated_by);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("instance", &RunConfig::instance)
      .def_readwrite("eps", &RunConfig::eps)
      .def_readwrite("zeta", &RunConfig::zeta)
      .def_readwrite("mode", &RunConfig::mode)
      .def_readwrite("opt1", &RunConfig::opt1)
      .def_readwrite("overrides", &RunConfig::overrides)
      .def_readwrite("repeats", &RunConfig::repeats)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("episode_cap", &RunConfig::episode_cap)
      .def_readwrite("out_dir", &RunConfig::out_dir);

  m.def("generate_instance", &generate_instance, py::arg("spec"));
  m.def("validate_mdp", &validate_mdp);
  m.def("validate_features", &validate_features);
  m.def(
      "rollout",
      [](const Mdp& mdp, const MemorylessPolicy& pi, uint64_t seed) {
        return rollout(mdp, pi, seed);
      },
      py::arg("mdp"), py::arg("policy"), py::arg("seed"));
  m.def("evaluate_policy_exact", &evaluate_policy_exact);
  m.def("optimal_values", &optimal_values);
  m.def(
      "measure_misspecification",
      [](const Instance& inst, const std::vector<MemorylessPolicy>& sample) {
        return measure_misspecification(inst.mdp, inst.features, sample).eta_hat;
      },
      "eta-hat over a finite policy sample");
  m.def(
      "enumeration_eta_hat",
      [](const Instance& inst) {
        return enumerate_policies(inst.mdp, inst.features).eta_hat;
      },
      "eta-hat over all deterministic policies");
  m.def("compute_constants", &compute_constants, py::arg("d"), py::arg("horizon"),
        py::arg("eps"), py::arg("zeta"), py::arg("l1"), py::arg("l2"),
        py::arg("mode") = ConstantMode::kTheory,
        py::arg("overrides") = PracticalOverrides{});
  m.def(
      "run_single",
      [](const Instance& inst, const RunConfig& cfg, uint64_t seed) {
        return run_single(inst, cfg, seed).row;
      },
      py::arg("instance"), py::arg("config"), py::arg("seed"));
  m.def(
      "skip_conversion_kappa",
      [](const Instance& inst, double alpha) {
        PolicyEnumeration en = enumerate_policies(inst.mdp, inst.features);
        auto [conv, cert] = skip_convert_to_linear(inst.mdp, inst.features, alpha, en.thetas);
        return cert.kappa_hat;
      },
      py::arg("instance"), py::arg("alpha"));
  m.def("save_instance", &save_instance);
  m.def("load_instance", &load_instance);
}
