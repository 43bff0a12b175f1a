#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "gridrl/checkpoint.hpp"
#include "gridrl/config.hpp"
#include "gridrl/demo_io.hpp"
#include "gridrl/envsim.hpp"
#include "gridrl/errors.hpp"
#include "gridrl/grpo.hpp"
#include "gridrl/harness.hpp"
#include "gridrl/metrics.hpp"
#include "gridrl/policy.hpp"
#include "gridrl/rollout.hpp"
#include "gridrl/sft.hpp"
#include "gridrl/trajectory.hpp"

namespace py = pybind11;
using namespace gridrl;

namespace {

RunConfig config_from_dict(const py::dict& overrides) {
  RunConfig cfg;
  for (const auto& item : overrides) {
    const std::string key = py::cast<std::string>(item.first);
    const std::string value = py::cast<std::string>(py::str(item.second));
    apply_override(cfg, key + " = " + value);
  }
  validate_config(cfg);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gridworld token-action policies: expert demos, SFT, and "
            "group-relative RL with binary outcome rewards.";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<ZeroSignalError>(m, "ZeroSignalError");
  py::register_exception<GenerationError>(m, "GenerationError");
  py::register_exception<DegenerateGroupError>(m, "DegenerateGroupError");

  py::class_<Cell>(m, "Cell")
      .def_readonly("x", &Cell::x)
      .def_readonly("y", &Cell::y)
      .def("__repr__", [](const Cell& c) {
        return "Cell(" + std::to_string(c.x) + ", " + std::to_string(c.y) + ")";
      });

  py::class_<GridState>(m, "GridState")
      .def_readonly("grid_size", &GridState::grid_size)
      .def_readonly("gripper", &GridState::gripper)
      .def_readonly("objects", &GridState::objects)
      .def_readonly("step_count", &GridState::step_count)
      .def_readonly("done", &GridState::done)
      .def_readonly("success", &GridState::success)
      .def_property_readonly("holding", [](const GridState& s) {
        return s.holding ? py::cast(*s.holding) : py::none().cast<py::object>();
      });

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("seed", &Scenario::seed)
      .def_readonly("task_id", &Scenario::task_id)
      .def_readonly("initial", &Scenario::initial);

  py::class_<Env>(m, "Env")
      .def(py::init<Scenario>())
      .def_property_readonly("state", &Env::state)
      .def("apply", &Env::apply, py::arg("token"));

  py::class_<EnvConfig>(m, "EnvConfig")
      .def(py::init<>())
      .def_readwrite("grid_size", &EnvConfig::grid_size)
      .def_readwrite("num_objects", &EnvConfig::num_objects)
      .def_readwrite("step_budget", &EnvConfig::step_budget);

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("executed_token_count", &Trajectory::executed_token_count)
      .def_readonly("success", &Trajectory::success)
      .def_property_readonly(
          "strategy",
          [](const Trajectory& t) {
            return std::string(strategy_name(t.strategy));
          })
      .def("tokens", &Trajectory::flat_tokens);

  py::class_<PolicyMeta>(m, "PolicyMeta")
      .def_readonly("input_dim", &PolicyMeta::input_dim)
      .def_readonly("hidden_dim", &PolicyMeta::hidden_dim)
      .def_readonly("chunk_size", &PolicyMeta::chunk_size)
      .def_readonly("vocab_size", &PolicyMeta::vocab_size);

  py::class_<PolicyParams>(m, "Policy")
      .def_property_readonly("meta",
                             [](const PolicyParams& p) { return p.meta; });

  py::class_<SuccessReport>(m, "SuccessReport")
      .def_readonly("episodes", &SuccessReport::episodes)
      .def_readonly("successes", &SuccessReport::successes)
      .def_readonly("success_rate", &SuccessReport::success_rate)
      .def_readonly("grasp_fraction", &SuccessReport::grasp_fraction)
      .def_readonly("push_fraction", &SuccessReport::push_fraction);

  m.attr("VOCAB_SIZE") = kVocabSize;
  m.attr("TOKEN_GRASP") = kTokenGrasp;
  m.attr("TOKEN_RELEASE") = kTokenRelease;
  m.attr("TOKEN_NOOP") = kTokenNoop;

  m.def("task_names", [] {
    std::vector<std::string> names;
    for (const TaskSpec& task : task_registry()) names.push_back(task.name);
    return names;
  });

  m.def(
      "make_scenario",
      [](const std::string& task, std::uint64_t seed, const EnvConfig& env) {
        return make_scenario(task_by_name(task), seed, env);
      },
      py::arg("task"), py::arg("seed"), py::arg("env") = EnvConfig{});

  m.def(
      "expert_demo",
      [](const Scenario& scenario, int chunk_size) {
        return expert_demo(scenario, chunk_size);
      },
      py::arg("scenario"), py::arg("chunk_size") = 8);

  m.def("compute_advantages", &compute_advantages, py::arg("rewards"),
        py::arg("std_epsilon") = 1e-8);

  m.def(
      "clipped_surrogate",
      [](double ratio, double advantage, double eps_low, double eps_high) {
        const SurrogateResult r =
            clipped_surrogate(ratio, advantage, eps_low, eps_high);
        return py::make_tuple(r.value, r.clip_active);
      },
      py::arg("ratio"), py::arg("advantage"), py::arg("eps_low") = 0.2,
      py::arg("eps_high") = 0.28);

  m.def(
      "init_policy",
      [](const py::dict& overrides, std::uint64_t seed) {
        const RunConfig cfg = config_from_dict(overrides);
        return init_policy(policy_meta_for(cfg), seed);
      },
      py::arg("config") = py::dict(), py::arg("seed") = 1);

  m.def(
      "forward_logits",
      [](const PolicyParams& policy, const std::vector<double>& obs) {
        const ChunkDistribution dist = forward(policy, obs, 1.0);
        std::vector<std::vector<double>> rows;
        for (int r = 0; r < dist.chunk_size; ++r) {
          rows.emplace_back(
              dist.logits.begin() + static_cast<std::ptrdiff_t>(r) * dist.vocab_size,
              dist.logits.begin() +
                  static_cast<std::ptrdiff_t>(r + 1) * dist.vocab_size);
        }
        return rows;
      },
      py::arg("policy"), py::arg("observation"));

  m.def(
      "observe",
      [](const GridState& state, int task_id, const EnvConfig& env) {
        return observe(state, task_id, env);
      },
      py::arg("state"), py::arg("task_id"), py::arg("env") = EnvConfig{});

  m.def(
      "greedy_rollout",
      [](const PolicyParams& policy, const Scenario& scenario) {
        return greedy_trajectory(policy, scenario);
      },
      py::arg("policy"), py::arg("scenario"));

  m.def("save_checkpoint",
        [](const std::string& path, const PolicyParams& policy) {
          save_checkpoint(path, policy, nullptr);
        });
  m.def("load_checkpoint", [](const std::string& path) {
    return load_checkpoint(path).params;
  });

  m.def(
      "train_sft",
      [](PolicyParams& policy, const std::string& demos_path,
         const py::dict& overrides) {
        const RunConfig cfg = config_from_dict(overrides);
        DemoDataset dataset;
        dataset.demos = load_demos(demos_path);
        AdamState opt = init_adam(policy.meta);
        const SftRunResult r = train_sft(policy, opt, dataset, cfg, nullptr);
        return r.final_loss;
      },
      py::arg("policy"), py::arg("demos_path"), py::arg("config") = py::dict());

  m.def(
      "train_rl",
      [](PolicyParams& policy, const py::dict& overrides,
         const std::string& log_path) {
        const RunConfig cfg = config_from_dict(overrides);
        AdamState opt = init_adam(policy.meta);
        MetricsWriter metrics(log_path);
        WorkerPool pool(cfg.workers);
        const RlRunResult r = run_rl(policy, opt, cfg, &metrics, pool);
        py::dict out;
        out["iterations"] = r.iterations_run;
        out["updates"] = r.updates;
        out["zero_signal_stop"] = r.zero_signal_stop;
        return out;
      },
      py::arg("policy"), py::arg("config") = py::dict(),
      py::arg("log_path") = std::string());

  m.def(
      "generate_demos",
      [](const std::string& task, const std::string& out_path, int count,
         std::uint64_t seed_lo, std::uint64_t seed_hi,
         const py::dict& overrides) {
        const RunConfig cfg = config_from_dict(overrides);
        const DemoDataset ds =
            generate_demos(task_by_name(task), cfg.env_config(),
                           cfg.chunk_size, seed_lo, seed_hi, count);
        save_demos(out_path, ds.demos);
        return ds.demos.size();
      },
      py::arg("task"), py::arg("out_path"), py::arg("count") = 50,
      py::arg("seed_lo") = 0, py::arg("seed_hi") = 1000,
      py::arg("config") = py::dict());

  m.def(
      "evaluate",
      [](const PolicyParams& policy, const std::string& task,
         std::uint64_t seed_lo, std::uint64_t seed_hi, int episodes,
         const py::dict& overrides) {
        const RunConfig cfg = config_from_dict(overrides);
        WorkerPool pool(cfg.workers);
        const auto scenarios = make_eval_scenarios(
            {task_by_name(task).id}, seed_lo, seed_hi, cfg.env_config());
        return evaluate(policy, scenarios, episodes, pool);
      },
      py::arg("policy"), py::arg("task"), py::arg("seed_lo") = 10000,
      py::arg("seed_hi") = 10100, py::arg("episodes") = 1,
      py::arg("config") = py::dict());
}
