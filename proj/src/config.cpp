#include "gridrl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "gridrl/errors.hpp"

namespace gridrl {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

struct KeyHandler {
  ConfigKey info;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const std::string v = trim(value);
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      out = static_cast<T>(std::stod(v, &used));
      if (used != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw ConfigError(key, "expected a number for '" + key + "', got '" +
                                 value + "'");
    }
  } else {
    const auto* first = v.data();
    const auto* last = v.data() + v.size();
    const auto result = std::from_chars(first, last, out);
    if (result.ec != std::errc{} || result.ptr != last) {
      throw ConfigError(key, "expected an integer for '" + key + "', got '" +
                                 value + "'");
    }
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError(key, "expected true/false for '" + key + "'");
}

const std::vector<KeyHandler>& handlers() {
  static const std::vector<KeyHandler> table = [] {
    std::vector<KeyHandler> t;
    const auto add = [&t](const std::string& name, const std::string& def,
                          const std::string& desc, auto setter, auto getter) {
      t.push_back({{name, def, desc}, setter, getter});
    };
    const RunConfig d;

    add("master_seed", std::to_string(d.master_seed),
        "root seed for every random stream",
        [](RunConfig& c, const std::string& v) {
          c.master_seed = parse_number<std::uint64_t>("master_seed", v);
        },
        [](const RunConfig& c) { return std::to_string(c.master_seed); });
    add("grid_size", std::to_string(d.grid_size), "side length of the grid",
        [](RunConfig& c, const std::string& v) {
          c.grid_size = parse_number<int>("grid_size", v);
        },
        [](const RunConfig& c) { return std::to_string(c.grid_size); });
    add("num_objects", std::to_string(d.num_objects),
        "objects placed in every scenario",
        [](RunConfig& c, const std::string& v) {
          c.num_objects = parse_number<int>("num_objects", v);
        },
        [](const RunConfig& c) { return std::to_string(c.num_objects); });
    add("step_budget", std::to_string(d.step_budget),
        "primitive steps before an episode is cut off",
        [](RunConfig& c, const std::string& v) {
          c.step_budget = parse_number<int>("step_budget", v);
        },
        [](const RunConfig& c) { return std::to_string(c.step_budget); });
    add("chunk_size", std::to_string(d.chunk_size),
        "action tokens emitted per policy call",
        [](RunConfig& c, const std::string& v) {
          c.chunk_size = parse_number<int>("chunk_size", v);
        },
        [](const RunConfig& c) { return std::to_string(c.chunk_size); });
    add("vocab_size", std::to_string(d.vocab_size),
        "action-token vocabulary (fixed by the primitive set)",
        [](RunConfig& c, const std::string& v) {
          c.vocab_size = parse_number<int>("vocab_size", v);
        },
        [](const RunConfig& c) { return std::to_string(c.vocab_size); });
    add("tasks", d.tasks, "comma-separated training task names",
        [](RunConfig& c, const std::string& v) { c.tasks = trim(v); },
        [](const RunConfig& c) { return c.tasks; });
    add("scenario_dist", d.scenario_dist,
        "initial-layout distribution: uniform or push-favorable",
        [](RunConfig& c, const std::string& v) { c.scenario_dist = trim(v); },
        [](const RunConfig& c) { return c.scenario_dist; });
    add("train_seed_lo", std::to_string(d.train_seed_lo),
        "first training scenario seed",
        [](RunConfig& c, const std::string& v) {
          c.train_seed_lo = parse_number<std::uint64_t>("train_seed_lo", v);
        },
        [](const RunConfig& c) { return std::to_string(c.train_seed_lo); });
    add("train_seed_hi", std::to_string(d.train_seed_hi),
        "one past the last training scenario seed",
        [](RunConfig& c, const std::string& v) {
          c.train_seed_hi = parse_number<std::uint64_t>("train_seed_hi", v);
        },
        [](const RunConfig& c) { return std::to_string(c.train_seed_hi); });
    add("eval_seed_lo", std::to_string(d.eval_seed_lo),
        "first evaluation scenario seed",
        [](RunConfig& c, const std::string& v) {
          c.eval_seed_lo = parse_number<std::uint64_t>("eval_seed_lo", v);
        },
        [](const RunConfig& c) { return std::to_string(c.eval_seed_lo); });
    add("eval_seed_hi", std::to_string(d.eval_seed_hi),
        "one past the last evaluation scenario seed",
        [](RunConfig& c, const std::string& v) {
          c.eval_seed_hi = parse_number<std::uint64_t>("eval_seed_hi", v);
        },
        [](const RunConfig& c) { return std::to_string(c.eval_seed_hi); });
    add("hidden_dim", std::to_string(d.hidden_dim),
        "width of both policy hidden layers",
        [](RunConfig& c, const std::string& v) {
          c.hidden_dim = parse_number<int>("hidden_dim", v);
        },
        [](const RunConfig& c) { return std::to_string(c.hidden_dim); });
    add("group_size", std::to_string(d.group_size),
        "trajectories sampled per scenario (G)",
        [](RunConfig& c, const std::string& v) {
          c.group_size = parse_number<int>("group_size", v);
        },
        [](const RunConfig& c) { return std::to_string(c.group_size); });
    add("eps_low", format_double(d.eps_low), "lower clip bound offset",
        [](RunConfig& c, const std::string& v) {
          c.eps_low = parse_number<double>("eps_low", v);
        },
        [](const RunConfig& c) { return format_double(c.eps_low); });
    add("eps_high", format_double(d.eps_high), "upper clip bound offset",
        [](RunConfig& c, const std::string& v) {
          c.eps_high = parse_number<double>("eps_high", v);
        },
        [](const RunConfig& c) { return format_double(c.eps_high); });
    add("beta_kl", format_double(d.beta_kl),
        "KL regularization weight (0 disables the reference policy)",
        [](RunConfig& c, const std::string& v) {
          c.beta_kl = parse_number<double>("beta_kl", v);
        },
        [](const RunConfig& c) { return format_double(c.beta_kl); });
    add("rollout_temperature", format_double(d.rollout_temperature),
        "sampling temperature during rollout",
        [](RunConfig& c, const std::string& v) {
          c.rollout_temperature = parse_number<double>("rollout_temperature", v);
        },
        [](const RunConfig& c) { return format_double(c.rollout_temperature); });
    add("train_batch_scenarios", std::to_string(d.train_batch_scenarios),
        "accepted groups per training iteration",
        [](RunConfig& c, const std::string& v) {
          c.train_batch_scenarios =
              parse_number<int>("train_batch_scenarios", v);
        },
        [](const RunConfig& c) {
          return std::to_string(c.train_batch_scenarios);
        });
    add("mini_batch_trajectories", std::to_string(d.mini_batch_trajectories),
        "trajectories per optimizer step",
        [](RunConfig& c, const std::string& v) {
          c.mini_batch_trajectories =
              parse_number<int>("mini_batch_trajectories", v);
        },
        [](const RunConfig& c) {
          return std::to_string(c.mini_batch_trajectories);
        });
    add("learning_rate", format_double(d.learning_rate),
        "Adam learning rate for RL updates",
        [](RunConfig& c, const std::string& v) {
          c.learning_rate = parse_number<double>("learning_rate", v);
        },
        [](const RunConfig& c) { return format_double(c.learning_rate); });
    add("max_iterations", std::to_string(d.max_iterations),
        "RL training iterations",
        [](RunConfig& c, const std::string& v) {
          c.max_iterations = parse_number<int>("max_iterations", v);
        },
        [](const RunConfig& c) { return std::to_string(c.max_iterations); });
    add("advantage_std_epsilon", format_double(d.advantage_std_epsilon),
        "degeneracy threshold for the advantage denominator",
        [](RunConfig& c, const std::string& v) {
          c.advantage_std_epsilon =
              parse_number<double>("advantage_std_epsilon", v);
        },
        [](const RunConfig& c) {
          return format_double(c.advantage_std_epsilon);
        });
    add("dynamic_sampling", d.dynamic_sampling ? "true" : "false",
        "reject groups whose trajectories all succeed or all fail",
        [](RunConfig& c, const std::string& v) {
          c.dynamic_sampling = parse_bool("dynamic_sampling", v);
        },
        [](const RunConfig& c) {
          return std::string(c.dynamic_sampling ? "true" : "false");
        });
    add("max_resample_factor", std::to_string(d.max_resample_factor),
        "resample budget as a multiple of the batch size",
        [](RunConfig& c, const std::string& v) {
          c.max_resample_factor = parse_number<int>("max_resample_factor", v);
        },
        [](const RunConfig& c) {
          return std::to_string(c.max_resample_factor);
        });
    add("sft_epochs", std::to_string(d.sft_epochs), "SFT training epochs",
        [](RunConfig& c, const std::string& v) {
          c.sft_epochs = parse_number<int>("sft_epochs", v);
        },
        [](const RunConfig& c) { return std::to_string(c.sft_epochs); });
    add("sft_learning_rate", format_double(d.sft_learning_rate),
        "Adam learning rate for SFT",
        [](RunConfig& c, const std::string& v) {
          c.sft_learning_rate = parse_number<double>("sft_learning_rate", v);
        },
        [](const RunConfig& c) { return format_double(c.sft_learning_rate); });
    add("sft_symmetry_augment", d.sft_symmetry_augment ? "true" : "false",
        "supervise mirrored/rotated copies of each demonstration",
        [](RunConfig& c, const std::string& v) {
          c.sft_symmetry_augment = parse_bool("sft_symmetry_augment", v);
        },
        [](const RunConfig& c) {
          return std::string(c.sft_symmetry_augment ? "true" : "false");
        });
    add("sft_batch_chunks", std::to_string(d.sft_batch_chunks),
        "demonstration chunks per SFT optimizer step",
        [](RunConfig& c, const std::string& v) {
          c.sft_batch_chunks = parse_number<int>("sft_batch_chunks", v);
        },
        [](const RunConfig& c) { return std::to_string(c.sft_batch_chunks); });
    add("workers", std::to_string(d.workers),
        "rollout worker threads (never changes results)",
        [](RunConfig& c, const std::string& v) {
          c.workers = parse_number<int>("workers", v);
        },
        [](const RunConfig& c) { return std::to_string(c.workers); });
    add("timing", d.timing ? "true" : "false",
        "emit measured wall_ms in metrics (makes logs non-reproducible)",
        [](RunConfig& c, const std::string& v) {
          c.timing = parse_bool("timing", v);
        },
        [](const RunConfig& c) {
          return std::string(c.timing ? "true" : "false");
        });
    return t;
  }();
  return table;
}

const KeyHandler& find_handler(const std::string& key) {
  for (const KeyHandler& h : handlers()) {
    if (h.info.name == key) return h;
  }
  throw ConfigError(key, "unknown config key '" + key + "'");
}

}  // namespace

EnvConfig RunConfig::env_config() const {
  EnvConfig env;
  env.grid_size = grid_size;
  env.num_objects = num_objects;
  env.step_budget = step_budget;
  env.dist = scenario_dist_from_name(scenario_dist);
  return env;
}

std::vector<int> RunConfig::task_ids() const {
  std::vector<int> ids;
  std::stringstream stream(tasks);
  std::string name;
  while (std::getline(stream, name, ',')) {
    name = trim(name);
    if (name.empty()) continue;
    ids.push_back(task_by_name(name).id);
  }
  if (ids.empty()) throw ConfigError("tasks", "no tasks configured");
  return ids;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const KeyHandler& h : handlers()) out.push_back(h.info);
    return out;
  }();
  return keys;
}

void apply_config_line(RunConfig& cfg, const std::string& line,
                       const std::string& source) {
  const std::string stripped = trim(line.substr(0, line.find('#')));
  if (stripped.empty()) return;
  const auto eq = stripped.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("config",
                      "expected 'key = value' in " + source + ": " + line);
  }
  const std::string key = trim(stripped.substr(0, eq));
  const std::string value = trim(stripped.substr(eq + 1));
  find_handler(key).set(cfg, value);
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    apply_config_line(cfg, line, path + ":" + std::to_string(line_no));
  }
}

void apply_override(RunConfig& cfg, const std::string& key_equals_value) {
  apply_config_line(cfg, key_equals_value, "command line");
}

void validate_config(const RunConfig& cfg) {
  if (cfg.grid_size < 2) throw ConfigError("grid_size", "grid_size must be >= 2");
  if (cfg.num_objects < 1) {
    throw ConfigError("num_objects", "num_objects must be >= 1");
  }
  if (cfg.step_budget < 1) {
    throw ConfigError("step_budget", "step_budget must be >= 1");
  }
  if (cfg.chunk_size < 1) {
    throw ConfigError("chunk_size", "chunk_size must be >= 1");
  }
  if (cfg.vocab_size != kVocabSize) {
    throw ConfigError("vocab_size", "vocab_size is fixed at " +
                                        std::to_string(kVocabSize) +
                                        " by the primitive set");
  }
  if (cfg.hidden_dim < 1) {
    throw ConfigError("hidden_dim", "hidden_dim must be >= 1");
  }
  if (cfg.group_size < 2) {
    throw ConfigError("group_size", "group_size must be >= 2");
  }
  if (!(cfg.eps_low > 0.0 && cfg.eps_low < 1.0)) {
    throw ConfigError("eps_low", "eps_low must be in (0, 1)");
  }
  if (cfg.eps_high < cfg.eps_low) {
    throw ConfigError("eps_high", "eps_high must be >= eps_low");
  }
  if (cfg.beta_kl < 0.0) throw ConfigError("beta_kl", "beta_kl must be >= 0");
  if (!(cfg.rollout_temperature > 0.0)) {
    throw ConfigError("rollout_temperature",
                      "rollout_temperature must be > 0");
  }
  if (cfg.train_batch_scenarios < 1) {
    throw ConfigError("train_batch_scenarios",
                      "train_batch_scenarios must be >= 1");
  }
  if (cfg.mini_batch_trajectories < 1) {
    throw ConfigError("mini_batch_trajectories",
                      "mini_batch_trajectories must be >= 1");
  }
  if (!(cfg.learning_rate > 0.0)) {
    throw ConfigError("learning_rate", "learning_rate must be > 0");
  }
  if (cfg.max_iterations < 1) {
    throw ConfigError("max_iterations", "max_iterations must be >= 1");
  }
  if (!(cfg.advantage_std_epsilon > 0.0)) {
    throw ConfigError("advantage_std_epsilon",
                      "advantage_std_epsilon must be > 0");
  }
  if (cfg.max_resample_factor < 1) {
    throw ConfigError("max_resample_factor",
                      "max_resample_factor must be >= 1");
  }
  if (cfg.sft_epochs < 1) {
    throw ConfigError("sft_epochs", "sft_epochs must be >= 1");
  }
  if (!(cfg.sft_learning_rate > 0.0)) {
    throw ConfigError("sft_learning_rate", "sft_learning_rate must be > 0");
  }
  if (cfg.sft_batch_chunks < 1) {
    throw ConfigError("sft_batch_chunks", "sft_batch_chunks must be >= 1");
  }
  if (cfg.workers < 1) throw ConfigError("workers", "workers must be >= 1");
  if (cfg.train_seed_lo >= cfg.train_seed_hi) {
    throw ConfigError("train_seed_hi",
                      "train seed range must be non-empty");
  }
  if (cfg.eval_seed_lo >= cfg.eval_seed_hi) {
    throw ConfigError("eval_seed_hi", "eval seed range must be non-empty");
  }
  if (cfg.train_seed_hi > cfg.eval_seed_lo &&
      cfg.eval_seed_hi > cfg.train_seed_lo) {
    throw ConfigError("eval_seed_lo",
                      "train and eval seed ranges must be disjoint");
  }
  const EnvConfig env = cfg.env_config();
  for (int task_id : cfg.task_ids()) {
    const TaskSpec& task = task_by_id(task_id);
    if (env.num_objects < task.min_objects) {
      throw ConfigError("num_objects",
                        "task '" + task.name + "' needs at least " +
                            std::to_string(task.min_objects) + " objects");
    }
    if (env.dist == ScenarioDist::kPushFavorable &&
        task.kind != TaskSpec::Kind::kMoveAdjacent) {
      throw ConfigError("scenario_dist",
                        "push-favorable layouts require move-adjacent tasks");
    }
  }
}

std::vector<std::pair<std::string, std::string>> config_items(
    const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> items;
  for (const KeyHandler& h : handlers()) {
    items.emplace_back(h.info.name, h.get(cfg));
  }
  return items;
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  for (const KeyHandler& h : handlers()) {
    out += h.info.name;
    out += " = ";
    out += h.get(cfg);
    out += "\n";
  }
  return out;
}

}  // namespace gridrl
