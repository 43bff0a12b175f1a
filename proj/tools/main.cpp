#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

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

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitZeroSignal = 4;

struct CliState {
  std::vector<std::string> config_files;
  std::vector<std::string> overrides;
  int workers = 0;  // 0 = leave config value
  bool dump_config = false;
};

std::string config_key_help() {
  std::string out = "Configuration keys (key = default):\n";
  for (const gridrl::ConfigKey& key : gridrl::config_keys()) {
    out += "  " + key.name + " = " + key.default_value + "\n      " +
           key.description + "\n";
  }
  return out;
}

void add_config_options(CLI::App* cmd, CliState& state) {
  cmd->add_option("--config", state.config_files,
                  "config file(s) with 'key = value' lines, applied in order");
  cmd->add_option("--set", state.overrides,
                  "override a config key, e.g. --set learning_rate=1e-3");
  cmd->add_option("--workers", state.workers,
                  "rollout worker threads (results never depend on this)");
  cmd->add_flag("--dump-config", state.dump_config,
                "print the fully resolved config before running");
  cmd->footer(config_key_help());
}

gridrl::RunConfig resolve_config(const CliState& state) {
  gridrl::RunConfig cfg;
  for (const std::string& path : state.config_files) {
    gridrl::apply_config_file(cfg, path);
  }
  for (const std::string& kv : state.overrides) {
    gridrl::apply_override(cfg, kv);
  }
  if (state.workers > 0) cfg.workers = state.workers;
  gridrl::validate_config(cfg);
  if (state.dump_config) {
    std::cout << gridrl::dump_config(cfg);
  }
  return cfg;
}

struct SeedRange {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
};

SeedRange parse_seed_range(const std::string& text) {
  const auto sep = text.find("..");
  if (sep == std::string::npos) {
    throw gridrl::ConfigError("seeds",
                              "expected a range like 0..1000, got '" + text +
                                  "'");
  }
  try {
    SeedRange range;
    range.lo = std::stoull(text.substr(0, sep));
    range.hi = std::stoull(text.substr(sep + 2));
    if (range.lo >= range.hi) {
      throw gridrl::ConfigError("seeds", "seed range is empty: " + text);
    }
    return range;
  } catch (const std::invalid_argument&) {
    throw gridrl::ConfigError("seeds", "malformed seed range '" + text + "'");
  }
}

std::vector<int> parse_task_list(const gridrl::RunConfig& cfg,
                                 const std::string& tasks_flag) {
  if (tasks_flag.empty()) return cfg.task_ids();
  gridrl::RunConfig tmp = cfg;
  tmp.tasks = tasks_flag;
  return tmp.task_ids();
}

int cmd_gen_demos(const CliState& state, const std::string& task_name,
                  int count, const std::string& seeds, const std::string& out) {
  gridrl::RunConfig cfg = resolve_config(state);
  const gridrl::TaskSpec& task = gridrl::task_by_name(task_name);
  SeedRange range{cfg.train_seed_lo, cfg.train_seed_hi};
  if (!seeds.empty()) range = parse_seed_range(seeds);

  const gridrl::DemoDataset dataset = gridrl::generate_demos(
      task, cfg.env_config(), cfg.chunk_size, range.lo, range.hi, count);
  gridrl::validate_dataset(dataset, cfg.env_config());
  gridrl::save_demos(out, dataset.demos);
  std::cout << "wrote " << dataset.demos.size() << " demos for task '"
            << task.name << "' to " << out << "\n";
  return kExitOk;
}

void log_config_record(gridrl::MetricsWriter& metrics,
                       const gridrl::RunConfig& cfg) {
  nlohmann::ordered_json record;
  nlohmann::ordered_json body;
  for (const auto& [key, value] : gridrl::config_items(cfg)) {
    body[key] = value;
  }
  record["config"] = body;
  metrics.write_line(record.dump());
}

int cmd_train_sft(const CliState& state, const std::string& demos_path,
                  const std::string& out, const std::string& log_path) {
  gridrl::RunConfig cfg = resolve_config(state);
  gridrl::DemoDataset dataset;
  dataset.demos = gridrl::load_demos(demos_path);

  gridrl::PolicyParams policy =
      gridrl::init_policy(gridrl::policy_meta_for(cfg), cfg.master_seed);
  gridrl::AdamState opt = gridrl::init_adam(policy.meta);
  gridrl::MetricsWriter metrics(log_path);
  if (state.dump_config) log_config_record(metrics, cfg);
  const gridrl::SftRunResult result =
      gridrl::train_sft(policy, opt, dataset, cfg, &metrics);
  gridrl::save_checkpoint(out, policy, &opt);

  // Greedy success on the training scenarios themselves.
  std::vector<gridrl::Scenario> train_scenarios;
  for (const gridrl::DemoRecord& demo : dataset.demos) {
    train_scenarios.push_back(gridrl::make_scenario(
        gridrl::task_by_id(demo.task_id), demo.scenario_seed,
        cfg.env_config()));
  }
  gridrl::WorkerPool pool(cfg.workers);
  const gridrl::SuccessReport train_eval =
      gridrl::evaluate(policy, train_scenarios, 1, pool);
  std::cout << "sft done: epochs=" << result.epochs_run
            << " final_loss=" << result.final_loss
            << " train_greedy_success=" << train_eval.success_rate
            << " checkpoint=" << out << "\n";
  return kExitOk;
}

int cmd_train_rl(const CliState& state, const std::string& init_path,
                 const std::string& out, const std::string& log_path) {
  gridrl::RunConfig cfg = resolve_config(state);
  gridrl::Checkpoint ck = gridrl::load_checkpoint(init_path);
  const gridrl::PolicyMeta expect = gridrl::policy_meta_for(cfg);
  if (!(ck.params.meta == expect)) {
    throw gridrl::ConfigError(
        "checkpoint", "checkpoint dimensions do not match the config");
  }
  gridrl::AdamState opt = gridrl::init_adam(ck.params.meta);
  gridrl::MetricsWriter metrics(log_path);
  if (state.dump_config) log_config_record(metrics, cfg);
  gridrl::WorkerPool pool(cfg.workers);

  // ZeroSignal before any update: surface it, write nothing.
  const gridrl::RlRunResult result =
      gridrl::run_rl(ck.params, opt, cfg, &metrics, pool);
  if (!out.empty()) gridrl::save_checkpoint(out, ck.params, &opt);
  std::cout << "rl done: iterations=" << result.iterations_run
            << " updates=" << result.updates;
  if (result.zero_signal_stop) {
    std::cout << " stopped_early=zero_signal";
  }
  if (!out.empty()) std::cout << " checkpoint=" << out;
  std::cout << "\n";
  return kExitOk;
}

int cmd_eval(const CliState& state, const std::string& ckpt_path,
             const std::string& tasks_flag, const std::string& seeds,
             int episodes, const std::string& out_csv) {
  gridrl::RunConfig cfg = resolve_config(state);
  const gridrl::Checkpoint ck = gridrl::load_checkpoint(ckpt_path);
  const std::vector<int> task_ids = parse_task_list(cfg, tasks_flag);
  SeedRange range{cfg.eval_seed_lo, cfg.eval_seed_hi};
  if (!seeds.empty()) range = parse_seed_range(seeds);

  const auto scenarios = gridrl::make_eval_scenarios(
      task_ids, range.lo, range.hi, cfg.env_config());
  gridrl::WorkerPool pool(cfg.workers);
  const gridrl::SuccessReport report =
      gridrl::evaluate(ck.params, scenarios, episodes, pool);

  for (const gridrl::TaskEval& te : report.per_task) {
    std::cout << "task " << gridrl::task_by_id(te.task_id).name << ": "
              << te.successes << "/" << te.episodes
              << " success, strategies grasp=" << te.grasp
              << " push=" << te.push << " other=" << te.other << "\n";
  }
  std::cout << "mean_success=" << report.success_rate
            << " push_fraction=" << report.push_fraction << "\n";

  if (!out_csv.empty()) {
    std::ofstream csv(out_csv, std::ios::trunc);
    if (!csv) throw gridrl::IoError("cannot open '" + out_csv + "'");
    csv << "task,episodes,successes,success_rate,grasp,push,other\n";
    for (const gridrl::TaskEval& te : report.per_task) {
      csv << gridrl::task_by_id(te.task_id).name << "," << te.episodes << ","
          << te.successes << ","
          << (te.episodes > 0
                  ? static_cast<double>(te.successes) / te.episodes
                  : 0.0)
          << "," << te.grasp << "," << te.push << "," << te.other << "\n";
    }
  }
  return kExitOk;
}

int cmd_experiment(const CliState& state, const std::string& recipe,
                   const std::string& outdir, const std::string& seeds_flag,
                   const std::string& unseen_flag) {
  gridrl::ExperimentSpec spec;
  spec.name = recipe;
  spec.output_dir = outdir;
  spec.config = resolve_config(state);
  if (!seeds_flag.empty()) {
    spec.seeds.clear();
    std::stringstream stream(seeds_flag);
    std::string item;
    while (std::getline(stream, item, ',')) {
      if (!item.empty()) spec.seeds.push_back(std::stoull(item));
    }
  }
  if (!unseen_flag.empty()) {
    std::stringstream stream(unseen_flag);
    std::string item;
    while (std::getline(stream, item, ',')) {
      if (!item.empty()) {
        spec.unseen_task_ids.push_back(gridrl::task_by_name(item).id);
      }
    }
  }

  if (recipe == "data-scarcity") {
    const gridrl::DataScarcityReport report = gridrl::run_data_scarcity(spec);
    std::cout << "medians: sft-1=" << report.median_sft_one
              << " sft-full=" << report.median_sft_full
              << " sft-1+rl=" << report.median_rl_one
              << " sft-full+rl=" << report.median_rl_full << "\n"
              << "report: " << report.csv_path << "\n";
  } else if (recipe == "exploration-ablation") {
    const gridrl::AblationReport report =
        gridrl::run_exploration_ablation(spec);
    std::cout << "zero-advantage groups: dynamic-sampling-on="
              << report.zero_adv_groups_on
              << " dynamic-sampling-off=" << report.zero_adv_groups_off << "\n";
    for (const auto& [condition, seed, iter] : report.time_to_090) {
      std::cout << "time-to-0.90 " << condition << " seed " << seed << ": "
                << (iter < 0 ? std::string("never")
                             : std::to_string(iter))
                << "\n";
    }
    std::cout << "report: " << report.csv_path << "\n";
  } else if (recipe == "failure-modes") {
    const gridrl::FailureModeReport report = gridrl::run_failure_modes(spec);
    for (const gridrl::FailureModeRow& row : report.rows) {
      std::cout << "prior=" << row.prior << " seed=" << row.seed
                << " pre=" << row.pre_success << " post=" << row.post_success
                << (row.zero_signal ? " zero_signal" : "") << "\n";
    }
    std::cout << "report: " << report.csv_path << "\n";
  } else if (recipe == "pushcut") {
    const gridrl::PushcutReport report = gridrl::run_pushcut(spec);
    for (const gridrl::PushcutRow& row : report.rows) {
      std::cout << "seed=" << row.seed << " pre_push="
                << row.pre_push_fraction
                << " post_push=" << row.post_push_fraction
                << " post_success=" << row.post_success
                << (row.push_replays_ok ? "" : " REPLAY-MISMATCH") << "\n";
    }
    std::cout << "report: " << report.csv_path << "\n";
  } else {
    throw gridrl::ConfigError("recipe", "unknown recipe '" + recipe + "'");
  }
  return kExitOk;
}

int cmd_report(const std::string& log_path, const std::string& out_csv) {
  gridrl::convert_log_to_csv(log_path, out_csv);
  std::cout << "wrote " << out_csv << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Token-action policy training on gridworld manipulation tasks:\n"
      "expert demonstrations, supervised imitation, and group-relative\n"
      "reinforcement learning with binary outcome rewards."};
  app.require_subcommand(1);

  CliState state;

  auto* gen = app.add_subcommand("gen-demos",
                                 "generate verified expert demonstrations");
  std::string gen_task = "move-adjacent";
  int gen_count = 50;
  std::string gen_seeds;
  std::string gen_out;
  gen->add_option("--task", gen_task, "task name")->capture_default_str();
  gen->add_option("--count", gen_count, "number of demos")
      ->capture_default_str();
  gen->add_option("--seeds", gen_seeds,
                  "scenario seed range lo..hi (default: train range)");
  gen->add_option("--out", gen_out, "output .svrd file")->required();
  add_config_options(gen, state);

  auto* sft = app.add_subcommand("train-sft",
                                 "supervised fine-tuning on demonstrations");
  std::string sft_demos;
  std::string sft_out;
  std::string sft_log;
  sft->add_option("--demos", sft_demos, "input .svrd file")->required();
  sft->add_option("--out", sft_out, "output checkpoint (.svrl)")->required();
  sft->add_option("--log", sft_log, "JSON-lines training log");
  add_config_options(sft, state);

  auto* rl = app.add_subcommand("train-rl",
                                "online RL from a checkpoint");
  std::string rl_init;
  std::string rl_out;
  std::string rl_log;
  rl->add_option("--init", rl_init, "initial checkpoint (.svrl)")->required();
  rl->add_option("--out", rl_out, "output checkpoint (.svrl)");
  rl->add_option("--log", rl_log, "JSON-lines metrics log");
  add_config_options(rl, state);

  auto* ev = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  std::string ev_ckpt;
  std::string ev_tasks;
  std::string ev_seeds;
  int ev_episodes = 1;
  std::string ev_out;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint (.svrl)")->required();
  ev->add_option("--tasks", ev_tasks,
                 "comma-separated tasks (default: config tasks)");
  ev->add_option("--seeds", ev_seeds,
                 "scenario seed range lo..hi (default: eval range)");
  ev->add_option("--episodes", ev_episodes, "episodes per scenario")
      ->capture_default_str();
  ev->add_option("--out", ev_out, "write a CSV report");
  add_config_options(ev, state);

  auto* ex = app.add_subcommand("experiment", "run a study recipe");
  std::string ex_recipe;
  std::string ex_outdir;
  std::string ex_seeds;
  std::string ex_unseen;
  ex->add_option("--recipe", ex_recipe,
                 "data-scarcity | exploration-ablation | failure-modes | "
                 "pushcut")
      ->required();
  ex->add_option("--outdir", ex_outdir, "report output directory")->required();
  ex->add_option("--seeds", ex_seeds, "comma-separated replicate seeds");
  ex->add_option("--unseen", ex_unseen,
                 "comma-separated task names held out of training");
  add_config_options(ex, state);

  auto* rep = app.add_subcommand("report",
                                 "convert a metrics log to curve CSVs");
  std::string rep_log;
  std::string rep_out;
  rep->add_option("--log", rep_log, "metrics .jsonl file")->required();
  rep->add_option("--out", rep_out, "output .csv file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) {
      return cmd_gen_demos(state, gen_task, gen_count, gen_seeds, gen_out);
    }
    if (sft->parsed()) return cmd_train_sft(state, sft_demos, sft_out, sft_log);
    if (rl->parsed()) return cmd_train_rl(state, rl_init, rl_out, rl_log);
    if (ev->parsed()) {
      return cmd_eval(state, ev_ckpt, ev_tasks, ev_seeds, ev_episodes, ev_out);
    }
    if (ex->parsed()) {
      return cmd_experiment(state, ex_recipe, ex_outdir, ex_seeds, ex_unseen);
    }
    if (rep->parsed()) return cmd_report(rep_log, rep_out);
  } catch (const gridrl::ZeroSignalError& e) {
    std::cerr << "error: type=zero-signal message=\"" << e.what() << "\"\n";
    return kExitZeroSignal;
  } catch (const gridrl::ConfigError& e) {
    std::cerr << "error: type=config field=" << e.field() << " message=\""
              << e.what() << "\"\n";
    return kExitUsage;
  } catch (const gridrl::UsageError& e) {
    std::cerr << "error: type=usage message=\"" << e.what() << "\"\n";
    return kExitUsage;
  } catch (const gridrl::IoError& e) {
    std::cerr << "error: type=io message=\"" << e.what() << "\"\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: type=runtime message=\"" << e.what() << "\"\n";
    return kExitError;
  }
  return kExitUsage;
}
