#include "gridrl/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gridrl/errors.hpp"
#include "gridrl/trajectory.hpp"

namespace gridrl {

namespace {

// Recipe constants. Calibrated on the default 8x8 setup; every report
// header echoes them so a run can be regenerated exactly.
constexpr int kOneDemoCount = 1;
constexpr int kFullDemoCount = 50;
constexpr int kOneDemoSftEpochs = 400;
constexpr int kFullDemoSftEpochs = 60;
constexpr int kPushcutDemoCount = 2;
constexpr int kPushcutSftEpochs = 150;

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

class CsvWriter {
 public:
  CsvWriter(const std::string& dir, const std::string& name,
            const ExperimentSpec& spec,
            const std::vector<std::pair<std::string, std::string>>& extras) {
    std::filesystem::create_directories(dir);
    path_ = dir + "/" + name;
    out_.open(path_, std::ios::trunc);
    if (!out_) throw IoError("cannot open report file '" + path_ + "'");
    out_ << "# experiment = " << spec.name << "\n";
    std::string seeds;
    for (std::uint64_t s : spec.seeds) {
      if (!seeds.empty()) seeds += ",";
      seeds += std::to_string(s);
    }
    out_ << "# seeds = " << seeds << "\n";
    for (const auto& [k, v] : extras) out_ << "# " << k << " = " << v << "\n";
    std::istringstream cfg(dump_config(spec.config));
    std::string line;
    while (std::getline(cfg, line)) out_ << "# " << line << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ",";
      out_ << cells[i];
    }
    out_ << "\n";
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

RunConfig with_seed(RunConfig cfg, std::uint64_t seed) {
  cfg.master_seed = seed;
  return cfg;
}

SuccessReport eval_heldout(const PolicyParams& policy, const RunConfig& cfg,
                           const std::vector<int>& task_ids,
                           WorkerPool& pool) {
  const auto scenarios = make_eval_scenarios(
      task_ids, cfg.eval_seed_lo, cfg.eval_seed_hi, cfg.env_config());
  return evaluate(policy, scenarios, 1, pool);
}

}  // namespace

PolicyMeta policy_meta_for(const RunConfig& cfg) {
  PolicyMeta meta;
  meta.input_dim = observation_dim(cfg.env_config());
  meta.hidden_dim = cfg.hidden_dim;
  meta.chunk_size = cfg.chunk_size;
  meta.vocab_size = cfg.vocab_size;
  return meta;
}

void validate_experiment(const ExperimentSpec& spec) {
  validate_config(spec.config);
  if (spec.seeds.empty()) {
    throw ConfigError("seeds", "experiment needs at least one seed");
  }
  if (spec.output_dir.empty()) {
    throw ConfigError("output_dir", "experiment needs an output directory");
  }
  // Unseen tasks must not appear in the training task list; eval/train seed
  // ranges are already checked by validate_config.
  const std::vector<int> train_tasks = spec.config.task_ids();
  for (int unseen : spec.unseen_task_ids) {
    const TaskSpec& task = task_by_id(unseen);
    if (std::find(train_tasks.begin(), train_tasks.end(), unseen) !=
        train_tasks.end()) {
      throw ConfigError("unseen_tasks",
                        "task '" + task.name +
                            "' is both trained and marked unseen");
    }
    if (spec.config.num_objects < task.min_objects) {
      throw ConfigError("num_objects",
                        "unseen task '" + task.name + "' needs at least " +
                            std::to_string(task.min_objects) + " objects");
    }
  }
}

DemoDataset generate_demos(const TaskSpec& task, const EnvConfig& env,
                           int chunk_size, std::uint64_t seed_lo,
                           std::uint64_t seed_hi, int count, int skip) {
  DemoDataset dataset;
  for (std::uint64_t seed = seed_lo;
       seed < seed_hi && static_cast<int>(dataset.demos.size()) < count;
       ++seed) {
    try {
      const Trajectory demo =
          expert_demo(make_scenario(task, seed, env), chunk_size);
      if (skip > 0) {
        --skip;
        continue;
      }
      dataset.demos.push_back(
          {seed, task.id, demo.flat_tokens(), demo.success});
    } catch (const GenerationError&) {
      // Unsolvable within budget: resample the next seed.
    }
  }
  if (static_cast<int>(dataset.demos.size()) < count) {
    throw GenerationError("seed range exhausted after " +
                          std::to_string(dataset.demos.size()) + " of " +
                          std::to_string(count) + " demos");
  }
  return dataset;
}

RlStageResult run_rl_stage(PolicyParams& policy, AdamState& opt,
                           const RunConfig& cfg, MetricsWriter* metrics,
                           WorkerPool& pool) {
  RlStageResult result;
  try {
    result.run = run_rl(policy, opt, cfg, metrics, pool);
    if (result.run.zero_signal_stop) {
      result.message = result.run.zero_signal_message;
    }
  } catch (const ZeroSignalError& err) {
    result.zero_signal_abort = true;
    result.message = err.what();
  }
  return result;
}

// ---------------------------------------------------------------------------
// Data scarcity: {one demo, full demos} x {SFT, SFT+RL}
// ---------------------------------------------------------------------------

DataScarcityReport run_data_scarcity(const ExperimentSpec& spec) {
  validate_experiment(spec);
  const RunConfig& base = spec.config;
  const EnvConfig env = base.env_config();
  const std::vector<int> tasks = base.task_ids();
  const TaskSpec& task = task_by_id(tasks.front());
  WorkerPool pool(base.workers);

  CsvWriter csv(spec.output_dir, "data_scarcity.csv", spec,
                {{"one_demo_count", std::to_string(kOneDemoCount)},
                 {"full_demo_count", std::to_string(kFullDemoCount)},
                 {"one_demo_sft_epochs", std::to_string(kOneDemoSftEpochs)},
                 {"full_demo_sft_epochs", std::to_string(kFullDemoSftEpochs)}});
  csv.row({"condition", "seed", "heldout_success", "push_fraction",
           "rl_iterations", "zero_signal"});

  DataScarcityReport report;
  const DemoDataset full_demos =
      generate_demos(task, env, base.chunk_size, base.train_seed_lo,
                     base.train_seed_hi, kFullDemoCount);

  for (std::size_t rep = 0; rep < spec.seeds.size(); ++rep) {
    const std::uint64_t seed = spec.seeds[rep];
    // Each replicate imitates a different single demonstration.
    const DemoDataset one_demo =
        generate_demos(task, env, base.chunk_size, base.train_seed_lo,
                       base.train_seed_hi, kOneDemoCount,
                       static_cast<int>(rep));

    for (const bool full : {false, true}) {
      RunConfig cfg = with_seed(base, seed);
      cfg.sft_epochs = full ? kFullDemoSftEpochs : kOneDemoSftEpochs;
      const DemoDataset& demos = full ? full_demos : one_demo;
      PolicyParams policy = init_policy(policy_meta_for(cfg), cfg.master_seed);
      AdamState opt = init_adam(policy.meta);
      train_sft(policy, opt, demos, cfg, nullptr);

      // Held-out evaluation on the training task, plus any configured
      // unseen-task variants (never part of the training stream).
      const auto emit_evals = [&](const std::string& name, bool zero_signal,
                                  int rl_iterations) {
        const SuccessReport seen = eval_heldout(policy, cfg, tasks, pool);
        report.cells.push_back({name, seed, seen.success_rate,
                                seen.push_fraction, zero_signal,
                                rl_iterations});
        csv.row({name, std::to_string(seed), fmt(seen.success_rate),
                 fmt(seen.push_fraction), std::to_string(rl_iterations),
                 zero_signal ? "1" : "0"});
        for (int unseen : spec.unseen_task_ids) {
          const SuccessReport out =
              eval_heldout(policy, cfg, {unseen}, pool);
          const std::string tag =
              name + "+unseen:" + std::string(task_by_id(unseen).name);
          report.cells.push_back({tag, seed, out.success_rate,
                                  out.push_fraction, zero_signal,
                                  rl_iterations});
          csv.row({tag, std::to_string(seed), fmt(out.success_rate),
                   fmt(out.push_fraction), std::to_string(rl_iterations),
                   zero_signal ? "1" : "0"});
        }
      };

      emit_evals(full ? "sft-full" : "sft-1", false, 0);

      const std::string sft_name = full ? "sft-full" : "sft-1";
      MetricsWriter metrics(spec.output_dir + "/" + sft_name + "_rl_seed" +
                            std::to_string(seed) + ".jsonl");
      AdamState rl_opt = init_adam(policy.meta);
      const RlStageResult rl = run_rl_stage(policy, rl_opt, cfg, &metrics, pool);
      emit_evals(sft_name + "+rl", rl.zero_signal_abort,
                 rl.run.iterations_run);
    }
  }

  const auto collect = [&](const std::string& name) {
    std::vector<double> values;
    for (const ConditionResult& cell : report.cells) {
      if (cell.condition == name) values.push_back(cell.heldout_success);
    }
    return median(values);
  };
  report.median_sft_one = collect("sft-1");
  report.median_sft_full = collect("sft-full");
  report.median_rl_one = collect("sft-1+rl");
  report.median_rl_full = collect("sft-full+rl");
  report.csv_path = csv.path();
  return report;
}

// ---------------------------------------------------------------------------
// Exploration ablation: six paired curves
// ---------------------------------------------------------------------------

AblationReport run_exploration_ablation(const ExperimentSpec& spec) {
  validate_experiment(spec);
  const RunConfig& base = spec.config;
  const EnvConfig env = base.env_config();
  const std::vector<int> tasks = base.task_ids();
  const TaskSpec& task = task_by_id(tasks.front());
  WorkerPool pool(base.workers);

  CsvWriter csv(spec.output_dir, "exploration_ablation.csv", spec,
                {{"base_demo_count", std::to_string(kOneDemoCount)},
                 {"base_sft_epochs", std::to_string(kOneDemoSftEpochs)},
                 {"note", "enhanced arms share the all-default run"}});
  csv.row({"condition", "seed", "iter", "rollout_success_rate",
           "clip_fraction", "push_fraction", "zero_adv_groups",
           "rejected_all_success", "rejected_all_fail", "mean_entropy"});

  AblationReport report;
  // Unique configurations; the three enhanced settings are the defaults, so
  // one default run per seed backs all three of their curves.
  struct Arm {
    std::string condition;
    bool is_default;
    void (*tweak)(RunConfig&);
  };
  const std::vector<Arm> arms = {
      {"dynamic-sampling=on", true, nullptr},
      {"dynamic-sampling=off", false,
       [](RunConfig& c) { c.dynamic_sampling = false; }},
      {"temperature=1.6", true, nullptr},
      {"temperature=1.0", false,
       [](RunConfig& c) { c.rollout_temperature = 1.0; }},
      {"clip-high=0.28", true, nullptr},
      {"clip-high=0.2", false, [](RunConfig& c) { c.eps_high = 0.2; }},
  };

  for (const std::uint64_t seed : spec.seeds) {
    // Shared base checkpoint per seed.
    RunConfig sft_cfg = with_seed(base, seed);
    sft_cfg.sft_epochs = kOneDemoSftEpochs;
    const DemoDataset demos =
        generate_demos(task, env, base.chunk_size, base.train_seed_lo,
                       base.train_seed_hi, kOneDemoCount, 0);
    PolicyParams checkpoint =
        init_policy(policy_meta_for(sft_cfg), sft_cfg.master_seed);
    AdamState sft_opt = init_adam(checkpoint.meta);
    train_sft(checkpoint, sft_opt, demos, sft_cfg, nullptr);

    std::vector<AblationPoint> default_curve;
    bool have_default = false;
    for (const Arm& arm : arms) {
      std::vector<AblationPoint> curve;
      if (arm.is_default && have_default) {
        curve = default_curve;
        for (AblationPoint& p : curve) p.condition = arm.condition;
      } else {
        RunConfig cfg = with_seed(base, seed);
        if (arm.tweak != nullptr) arm.tweak(cfg);
        PolicyParams policy = checkpoint;
        AdamState opt = init_adam(policy.meta);
        try {
          run_rl(policy, opt, cfg, nullptr, pool,
                 [&](int, const IterationStats& st) {
                   curve.push_back({arm.condition, seed, st});
                 });
        } catch (const ZeroSignalError&) {
          // A run that never updates leaves an empty curve.
        }
        if (arm.is_default) {
          default_curve = curve;
          have_default = true;
        }
      }
      int reach = -1;
      for (const AblationPoint& p : curve) {
        if (p.stats.rollout_success_rate >= 0.90 && reach < 0) {
          reach = p.stats.iter;
        }
        csv.row({arm.condition, std::to_string(seed),
                 std::to_string(p.stats.iter),
                 fmt(p.stats.rollout_success_rate), fmt(p.stats.clip_fraction),
                 fmt(p.stats.push_fraction),
                 std::to_string(p.stats.zero_adv_groups),
                 std::to_string(p.stats.rejected_all_success),
                 std::to_string(p.stats.rejected_all_fail),
                 fmt(p.stats.mean_entropy)});
        if (arm.condition == "dynamic-sampling=off") {
          report.zero_adv_groups_off += p.stats.zero_adv_groups;
        } else if (arm.condition == "dynamic-sampling=on") {
          report.zero_adv_groups_on += p.stats.zero_adv_groups;
        }
        report.points.push_back(p);
      }
      report.time_to_090.emplace_back(arm.condition, seed, reach);
    }
  }
  report.csv_path = csv.path();
  return report;
}

// ---------------------------------------------------------------------------
// Failure modes: 0 / small / large demonstration priors
// ---------------------------------------------------------------------------

FailureModeReport run_failure_modes(const ExperimentSpec& spec) {
  validate_experiment(spec);
  const RunConfig& base = spec.config;
  const EnvConfig env = base.env_config();
  const std::vector<int> tasks = base.task_ids();
  const TaskSpec& task = task_by_id(tasks.front());
  WorkerPool pool(base.workers);

  CsvWriter csv(spec.output_dir, "failure_modes.csv", spec,
                {{"priors", "0,1," + std::to_string(kFullDemoCount)}});
  csv.row({"prior", "demo_count", "seed", "pre_success", "post_success",
           "delta", "zero_signal"});

  FailureModeReport report;
  const struct {
    const char* name;
    int demos;
    int epochs;
  } priors[] = {{"none", 0, 0},
                {"small", kOneDemoCount, kOneDemoSftEpochs},
                {"large", kFullDemoCount, kFullDemoSftEpochs}};

  for (const auto& prior : priors) {
    for (const std::uint64_t seed : spec.seeds) {
      RunConfig cfg = with_seed(base, seed);
      PolicyParams policy = init_policy(policy_meta_for(cfg), cfg.master_seed);
      AdamState opt = init_adam(policy.meta);
      if (prior.demos > 0) {
        cfg.sft_epochs = prior.epochs;
        const DemoDataset demos =
            generate_demos(task, env, base.chunk_size, base.train_seed_lo,
                           base.train_seed_hi, prior.demos, 0);
        train_sft(policy, opt, demos, cfg, nullptr);
      }
      const SuccessReport pre = eval_heldout(policy, cfg, tasks, pool);
      AdamState rl_opt = init_adam(policy.meta);
      const RlStageResult rl = run_rl_stage(policy, rl_opt, cfg, nullptr, pool);
      const SuccessReport post = eval_heldout(policy, cfg, tasks, pool);

      FailureModeRow row;
      row.prior = prior.name;
      row.demo_count = prior.demos;
      row.seed = seed;
      row.pre_success = pre.success_rate;
      row.post_success = post.success_rate;
      row.zero_signal = rl.zero_signal_abort;
      report.rows.push_back(row);
      csv.row({prior.name, std::to_string(prior.demos), std::to_string(seed),
               fmt(pre.success_rate), fmt(post.success_rate),
               fmt(post.success_rate - pre.success_rate),
               rl.zero_signal_abort ? "1" : "0"});
    }
  }
  report.csv_path = csv.path();
  return report;
}

// ---------------------------------------------------------------------------
// Pushcut: emergent pushing from grasp-only demonstrations
// ---------------------------------------------------------------------------

PushcutReport run_pushcut(const ExperimentSpec& spec) {
  validate_experiment(spec);
  RunConfig base = spec.config;
  base.scenario_dist = "push-favorable";
  validate_config(base);
  const EnvConfig env = base.env_config();
  const std::vector<int> tasks = base.task_ids();
  const TaskSpec& task = task_by_id(tasks.front());
  WorkerPool pool(base.workers);

  CsvWriter csv(spec.output_dir, "pushcut.csv", spec,
                {{"demo_count", std::to_string(kPushcutDemoCount)},
                 {"sft_epochs", std::to_string(kPushcutSftEpochs)},
                 {"scenario_dist", "push-favorable"}});
  csv.row({"seed", "pre_success", "pre_push_fraction", "post_success",
           "post_push_fraction", "push_replays_ok"});

  PushcutReport report;
  const DemoDataset demos =
      generate_demos(task, env, base.chunk_size, base.train_seed_lo,
                     base.train_seed_hi, kPushcutDemoCount);
  for (const DemoRecord& demo : demos.demos) {
    for (int token : demo.tokens) {
      if (token >= kTokenPushN && token <= kTokenPushW) {
        throw DataError("demonstrator emitted a PUSH token");
      }
    }
  }

  for (const std::uint64_t seed : spec.seeds) {
    RunConfig cfg = with_seed(base, seed);
    cfg.sft_epochs = kPushcutSftEpochs;
    PolicyParams policy = init_policy(policy_meta_for(cfg), cfg.master_seed);
    AdamState opt = init_adam(policy.meta);
    train_sft(policy, opt, demos, cfg, nullptr);

    const auto eval_scenarios = make_eval_scenarios(
        tasks, cfg.eval_seed_lo, cfg.eval_seed_hi, env);
    const SuccessReport pre = evaluate(policy, eval_scenarios, 1, pool);

    MetricsWriter metrics(spec.output_dir + "/pushcut_seed" +
                          std::to_string(seed) + ".jsonl");
    AdamState rl_opt = init_adam(policy.meta);
    run_rl_stage(policy, rl_opt, cfg, &metrics, pool);
    const SuccessReport post = evaluate(policy, eval_scenarios, 1, pool);

    // Re-verify every Push-classified greedy trajectory by replay.
    bool replays_ok = true;
    for (const Scenario& scenario : eval_scenarios) {
      const Trajectory traj = greedy_trajectory(policy, scenario);
      if (traj.strategy != Strategy::kPush) continue;
      const ReplayResult replay = replay_tokens(scenario, traj.flat_tokens());
      if (!replay.final_state.success || replay.grasped_moved_object) {
        replays_ok = false;
      }
    }

    PushcutRow row;
    row.seed = seed;
    row.pre_success = pre.success_rate;
    row.pre_push_fraction = pre.push_fraction;
    row.post_success = post.success_rate;
    row.post_push_fraction = post.push_fraction;
    row.push_replays_ok = replays_ok;
    report.rows.push_back(row);
    csv.row({std::to_string(seed), fmt(pre.success_rate),
             fmt(pre.push_fraction), fmt(post.success_rate),
             fmt(post.push_fraction), replays_ok ? "1" : "0"});
  }
  report.csv_path = csv.path();
  return report;
}

void convert_log_to_csv(const std::string& log_path,
                        const std::string& csv_path) {
  std::ifstream in(log_path);
  if (!in) throw IoError("cannot open metrics log '" + log_path + "'");
  std::ofstream out(csv_path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + csv_path + "'");
  out << "iteration,success,push_fraction,clip_fraction\n";
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& err) {
      throw DataError("malformed metrics line: " + std::string(err.what()));
    }
    if (!record.contains("iter")) continue;  // skip non-iteration records
    out << record["iter"].get<long>() << ","
        << fmt(record.value("rollout_success_rate", 0.0)) << ","
        << fmt(record.value("push_fraction", 0.0)) << ","
        << fmt(record.value("clip_fraction", 0.0)) << "\n";
  }
}

}  // namespace gridrl
