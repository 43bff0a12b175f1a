#include "gridrl/envsim.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include "gridrl/errors.hpp"
#include "gridrl/rng.hpp"
#include "gridrl/trajectory.hpp"

namespace gridrl {

namespace {

bool pair_satisfied(const GridState& state, const std::pair<int, int>& pair) {
  const Cell& a = state.objects[static_cast<std::size_t>(pair.first)];
  const Cell& b = state.objects[static_cast<std::size_t>(pair.second)];
  const bool a_held = state.holding.has_value() && *state.holding == pair.first;
  return manhattan(a, b) == 1 && !a_held;
}

// Latches consecutive leading subgoals. Monotone: never decreases.
void advance_latch(GridState& state, const TaskSpec& task) {
  if (task.kind != TaskSpec::Kind::kStackSequence) return;
  while (state.subgoal_progress < static_cast<int>(task.pairs.size()) &&
         pair_satisfied(state, task.pairs[static_cast<std::size_t>(
                                   state.subgoal_progress)])) {
    ++state.subgoal_progress;
  }
}

}  // namespace

std::vector<int> TaskSpec::moved_objects() const {
  std::vector<int> ids;
  for (const auto& [a, b] : pairs) {
    if (std::find(ids.begin(), ids.end(), a) == ids.end()) ids.push_back(a);
  }
  return ids;
}

const std::vector<TaskSpec>& task_registry() {
  static const std::vector<TaskSpec> registry = [] {
    std::vector<TaskSpec> tasks;
    tasks.push_back({0, "move-adjacent", TaskSpec::Kind::kMoveAdjacent,
                     {{0, 1}}, 2});
    tasks.push_back({1, "move-adjacent-rev", TaskSpec::Kind::kMoveAdjacent,
                     {{1, 0}}, 2});
    tasks.push_back({2, "stack-two", TaskSpec::Kind::kStackSequence,
                     {{1, 0}, {2, 0}}, 3});
    return tasks;
  }();
  return registry;
}

const TaskSpec& task_by_id(int id) {
  const auto& reg = task_registry();
  if (id < 0 || id >= static_cast<int>(reg.size())) {
    throw ConfigError("task", "unknown task id " + std::to_string(id));
  }
  return reg[static_cast<std::size_t>(id)];
}

const TaskSpec& task_by_name(std::string_view name) {
  for (const auto& task : task_registry()) {
    if (task.name == name) return task;
  }
  throw ConfigError("task", "unknown task '" + std::string(name) + "'");
}

ScenarioDist scenario_dist_from_name(std::string_view name) {
  if (name == "uniform") return ScenarioDist::kUniform;
  if (name == "push-favorable") return ScenarioDist::kPushFavorable;
  throw ConfigError("scenario_dist",
                    "unknown scenario distribution '" + std::string(name) + "'");
}

std::string_view scenario_dist_name(ScenarioDist dist) {
  return dist == ScenarioDist::kUniform ? "uniform" : "push-favorable";
}

std::optional<int> GridState::object_at(const Cell& c) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i] == c) return static_cast<int>(i);
  }
  return std::nullopt;
}

bool check_success(const GridState& state, const TaskSpec& task) {
  if (task.kind == TaskSpec::Kind::kMoveAdjacent) {
    return pair_satisfied(state, task.pairs[0]);
  }
  return state.subgoal_progress == static_cast<int>(task.pairs.size());
}

namespace {

void validate_env(const TaskSpec& task, const EnvConfig& env) {
  if (env.grid_size < 2) {
    throw ConfigError("grid_size", "grid_size must be at least 2");
  }
  if (env.num_objects < task.min_objects) {
    throw ConfigError("num_objects",
                      "task '" + task.name + "' needs at least " +
                          std::to_string(task.min_objects) + " objects");
  }
  const int cells = env.grid_size * env.grid_size;
  if (cells < env.num_objects + 1) {
    throw ConfigError("grid_size", "grid too small to place gripper and " +
                                       std::to_string(env.num_objects) +
                                       " objects");
  }
}

Cell draw_free_cell(RngStream& rng, int grid, const std::vector<Cell>& taken) {
  while (true) {
    const int idx = static_cast<int>(
        rng.next_below(static_cast<std::uint64_t>(grid * grid)));
    const Cell c{idx % grid, idx / grid};
    if (std::find(taken.begin(), taken.end(), c) == taken.end()) return c;
  }
}

GridState place_uniform(RngStream& rng, const EnvConfig& env) {
  GridState state;
  state.grid_size = env.grid_size;
  std::vector<Cell> taken;
  state.gripper = draw_free_cell(rng, env.grid_size, taken);
  taken.push_back(state.gripper);
  for (int i = 0; i < env.num_objects; ++i) {
    const Cell c = draw_free_cell(rng, env.grid_size, taken);
    state.objects.push_back(c);
    taken.push_back(c);
  }
  return state;
}

// Layout with a straight push lane: task object A sits m cells from target
// B along one axis with the lane free, and the gripper starts somewhere
// strictly behind A's line. Walking behind A and pushing then beats
// grasp-carry-release by exactly three tokens, while the varied gripper
// placement keeps the scenario distribution rich.
GridState place_push_favorable(RngStream& rng, const TaskSpec& task,
                               const EnvConfig& env) {
  if (task.kind != TaskSpec::Kind::kMoveAdjacent) {
    throw ConfigError("scenario_dist",
                      "push-favorable layouts require a move-adjacent task");
  }
  const int grid = env.grid_size;
  if (grid < 7) {
    throw ConfigError("grid_size",
                      "push-favorable layouts need grid_size >= 7");
  }
  const auto [obj_a, obj_b] = task.pairs[0];

  GridState state;
  state.grid_size = grid;
  state.objects.assign(static_cast<std::size_t>(env.num_objects), Cell{});

  const int dir_idx = static_cast<int>(rng.next_below(4));
  const Cell dir = kDirections[dir_idx];
  const int max_m = std::min(5, grid - 3);
  const int m = 4 + static_cast<int>(rng.next_below(
                        static_cast<std::uint64_t>(max_m - 3)));

  // A leaves room for one cell behind it and B m cells ahead.
  const int lo_x = dir.x < 0 ? m : (dir.x > 0 ? 1 : 0);
  const int hi_x = dir.x > 0 ? grid - 1 - m : (dir.x < 0 ? grid - 2 : grid - 1);
  const int lo_y = dir.y < 0 ? m : (dir.y > 0 ? 1 : 0);
  const int hi_y = dir.y > 0 ? grid - 1 - m : (dir.y < 0 ? grid - 2 : grid - 1);
  const Cell a{lo_x + static_cast<int>(rng.next_below(
                          static_cast<std::uint64_t>(hi_x - lo_x + 1))),
               lo_y + static_cast<int>(rng.next_below(
                          static_cast<std::uint64_t>(hi_y - lo_y + 1)))};
  const Cell b{a.x + m * dir.x, a.y + m * dir.y};
  state.objects[static_cast<std::size_t>(obj_a)] = a;
  state.objects[static_cast<std::size_t>(obj_b)] = b;

  // Gripper: uniform over the cells strictly behind A's line (projection
  // onto the push direction at most A's minus one), excluding A and B.
  const auto proj = [&dir](const Cell& c) {
    return c.x * dir.x + c.y * dir.y;
  };
  while (true) {
    const int idx =
        static_cast<int>(rng.next_below(static_cast<std::uint64_t>(grid * grid)));
    const Cell g{idx % grid, idx / grid};
    if (proj(g) > proj(a) - 1) continue;
    if (g == a || g == b) continue;
    state.gripper = g;
    break;
  }

  // Distractors stay off the lane and the half-plane boundary cells that the
  // push route uses.
  std::vector<Cell> taken{state.gripper};
  for (int t = -1; t <= m; ++t) {
    taken.push_back(Cell{a.x + t * dir.x, a.y + t * dir.y});
  }
  for (int i = 0; i < env.num_objects; ++i) {
    if (i == obj_a || i == obj_b) continue;
    const Cell c = draw_free_cell(rng, grid, taken);
    state.objects[static_cast<std::size_t>(i)] = c;
    taken.push_back(c);
  }
  return state;
}

}  // namespace

Scenario make_scenario(const TaskSpec& task, std::uint64_t seed,
                       const EnvConfig& env) {
  validate_env(task, env);
  RngStream rng(StreamId::scenario, seed, static_cast<std::uint64_t>(task.id));
  for (int attempt = 0; attempt < 10000; ++attempt) {
    GridState state = env.dist == ScenarioDist::kUniform
                          ? place_uniform(rng, env)
                          : place_push_favorable(rng, task, env);
    // Every task pair starts at least 4 cells from completion, so episodes
    // always require deliberate relocation and lucky flailing stays rare.
    bool too_close = false;
    for (const auto& [a, b] : task.pairs) {
      if (manhattan(state.objects[static_cast<std::size_t>(a)],
                    state.objects[static_cast<std::size_t>(b)]) < 4) {
        too_close = true;
        break;
      }
    }
    if (too_close) continue;
    advance_latch(state, task);
    if (check_success(state, task)) continue;  // redraw, stream continues
    Scenario scenario;
    scenario.seed = seed;
    scenario.task_id = task.id;
    scenario.env = env;
    scenario.initial = std::move(state);
    return scenario;
  }
  throw ConfigError("grid_size",
                    "could not place a non-successful initial layout");
}

GridState step_token(const GridState& state, int token, const TaskSpec& task,
                     int step_budget) {
  if (state.done) {
    throw UsageError("step on a finished episode");
  }
  if (token < 0 || token >= kVocabSize) {
    throw UsageError("action token " + std::to_string(token) +
                     " outside vocabulary");
  }

  GridState next = state;
  if (token >= kTokenMoveN && token <= kTokenMoveW) {
    const Cell d = kDirections[token - kTokenMoveN];
    const Cell target{state.gripper.x + d.x, state.gripper.y + d.y};
    bool blocked = !state.in_bounds(target);
    if (!blocked && state.holding) {
      // Carrying into an occupied cell would stack two objects; refuse.
      const auto occupant = state.object_at(target);
      blocked = occupant.has_value() && *occupant != *state.holding;
    }
    if (!blocked) {
      next.gripper = target;
      if (next.holding) {
        next.objects[static_cast<std::size_t>(*next.holding)] = target;
      }
    }
  } else if (token == kTokenGrasp) {
    if (!state.holding) {
      if (auto obj = state.object_at(state.gripper)) next.holding = obj;
    }
  } else if (token == kTokenRelease) {
    if (state.holding) {
      const auto other = [&] {
        for (std::size_t i = 0; i < state.objects.size(); ++i) {
          if (static_cast<int>(i) != *state.holding &&
              state.objects[i] == state.gripper) {
            return true;
          }
        }
        return false;
      }();
      if (!other) next.holding.reset();
    }
  } else if (token >= kTokenPushN && token <= kTokenPushW) {
    const Cell d = kDirections[token - kTokenPushN];
    const Cell src{state.gripper.x + d.x, state.gripper.y + d.y};
    const Cell dst{src.x + d.x, src.y + d.y};
    const auto pushee =
        state.in_bounds(src) ? state.object_at(src) : std::optional<int>{};
    // The held object is co-located with the gripper, so it can never be
    // the pushee. Destination must be an empty in-bounds cell.
    if (pushee && state.in_bounds(dst) && !state.object_at(dst)) {
      next.objects[static_cast<std::size_t>(*pushee)] = dst;
      next.gripper = src;
      if (next.holding) {
        next.objects[static_cast<std::size_t>(*next.holding)] = src;
      }
    }
  }
  // NOOP falls through.

  next.step_count = state.step_count + 1;
  advance_latch(next, task);
  if (check_success(next, task)) {
    next.success = true;
    next.done = true;
  } else if (next.step_count >= step_budget) {
    next.done = true;
  }
  return next;
}

Env::Env(Scenario scenario)
    : scenario_(std::move(scenario)),
      task_(&task_by_id(scenario_.task_id)),
      state_(scenario_.initial) {}

void Env::apply(int token) {
  state_ = step_token(state_, token, *task_, scenario_.env.step_budget);
}

int observation_dim(const EnvConfig& env) {
  return 2 + 2 * env.num_objects + 1 +
         static_cast<int>(task_registry().size());
}

std::vector<double> observe(const GridState& state, int task_id,
                            const EnvConfig& env) {
  const double scale = 1.0 / static_cast<double>(env.grid_size - 1);
  std::vector<double> features;
  features.reserve(static_cast<std::size_t>(observation_dim(env)));
  features.push_back(state.gripper.x * scale);
  features.push_back(state.gripper.y * scale);
  // Object positions are gripper-relative, affinely packed into [0, 1] with
  // 0.5 meaning co-located. Relative coordinates are what make behavior
  // learned in one layout carry over to others.
  for (const Cell& obj : state.objects) {
    features.push_back((obj.x - state.gripper.x) * scale * 0.5 + 0.5);
    features.push_back((obj.y - state.gripper.y) * scale * 0.5 + 0.5);
  }
  features.push_back(state.holding ? 1.0 : 0.0);
  for (std::size_t i = 0; i < task_registry().size(); ++i) {
    features.push_back(static_cast<int>(i) == task_id ? 1.0 : 0.0);
  }
  return features;
}

ReplayResult replay_tokens(const Scenario& scenario,
                           const std::vector<int>& tokens) {
  const TaskSpec& task = task_by_id(scenario.task_id);
  const std::vector<int> moved = task.moved_objects();
  ReplayResult result;
  result.final_state = scenario.initial;
  for (const int token : tokens) {
    if (result.final_state.done) break;
    const bool was_empty = !result.final_state.holding.has_value();
    result.final_state = step_token(result.final_state, token, task,
                                    scenario.env.step_budget);
    ++result.executed_tokens;
    if (was_empty && result.final_state.holding &&
        std::find(moved.begin(), moved.end(), *result.final_state.holding) !=
            moved.end()) {
      result.grasped_moved_object = true;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Expert demonstrator
// ---------------------------------------------------------------------------

namespace {

constexpr int kUnreachable = std::numeric_limits<int>::max();

// Distance-to-target field over passable cells, 4-connected.
std::vector<int> bfs_dist(const Cell& target, int grid,
                          const std::vector<Cell>& blocked) {
  std::vector<int> dist(static_cast<std::size_t>(grid * grid), kUnreachable);
  std::vector<bool> pass(static_cast<std::size_t>(grid * grid), true);
  for (const Cell& c : blocked) {
    pass[static_cast<std::size_t>(c.y * grid + c.x)] = false;
  }
  const auto idx = [grid](const Cell& c) {
    return static_cast<std::size_t>(c.y * grid + c.x);
  };
  if (!pass[idx(target)]) return dist;
  std::deque<Cell> queue{target};
  dist[idx(target)] = 0;
  while (!queue.empty()) {
    const Cell cur = queue.front();
    queue.pop_front();
    for (const Cell& d : kDirections) {
      const Cell nb{cur.x + d.x, cur.y + d.y};
      if (nb.x < 0 || nb.x >= grid || nb.y < 0 || nb.y >= grid) continue;
      if (!pass[idx(nb)] || dist[idx(nb)] != kUnreachable) continue;
      dist[idx(nb)] = dist[idx(cur)] + 1;
      queue.push_back(nb);
    }
  }
  return dist;
}

// Shortest move-token path via greedy descent on the distance field. At each
// step the first direction (N, E, S, W) that decreases the distance wins, so
// equal-length paths resolve deterministically.
std::vector<int> path_tokens(const Cell& from, const std::vector<int>& dist,
                             int grid) {
  const auto idx = [grid](const Cell& c) {
    return static_cast<std::size_t>(c.y * grid + c.x);
  };
  std::vector<int> tokens;
  Cell cur = from;
  if (dist[idx(cur)] == kUnreachable) {
    throw GenerationError("no path to target cell");
  }
  while (dist[idx(cur)] > 0) {
    bool advanced = false;
    for (int d = 0; d < 4; ++d) {
      const Cell nb{cur.x + kDirections[d].x, cur.y + kDirections[d].y};
      if (nb.x < 0 || nb.x >= grid || nb.y < 0 || nb.y >= grid) continue;
      if (dist[idx(nb)] == dist[idx(cur)] - 1) {
        tokens.push_back(kTokenMoveN + d);
        cur = nb;
        advanced = true;
        break;
      }
    }
    if (!advanced) throw GenerationError("distance field descent stuck");
  }
  return tokens;
}

}  // namespace

Trajectory expert_demo(const Scenario& scenario, int chunk_size) {
  const TaskSpec& task = task_by_id(scenario.task_id);
  const int grid = scenario.env.grid_size;

  // Plan on a lightweight positional model; verify by replay below.
  Cell gripper = scenario.initial.gripper;
  std::vector<Cell> objects = scenario.initial.objects;
  std::vector<int> plan;
  const auto n_pairs = static_cast<int>(task.pairs.size());
  for (int p = scenario.initial.subgoal_progress; p < n_pairs; ++p) {
    const auto [obj_a, obj_b] = task.pairs[static_cast<std::size_t>(p)];
    const Cell a = objects[static_cast<std::size_t>(obj_a)];
    const Cell b = objects[static_cast<std::size_t>(obj_b)];

    // Reach A. Nothing blocks an empty gripper.
    const std::vector<int> reach = bfs_dist(a, grid, {});
    for (int t : path_tokens(gripper, reach, grid)) plan.push_back(t);
    gripper = a;
    plan.push_back(kTokenGrasp);

    // Carry to the nearest free cell adjacent to B; other objects block.
    std::vector<Cell> blocked;
    for (std::size_t i = 0; i < objects.size(); ++i) {
      if (static_cast<int>(i) != obj_a) blocked.push_back(objects[i]);
    }
    int best_dir = -1;
    int best_dist = kUnreachable;
    std::vector<int> best_field;
    for (int d = 0; d < 4; ++d) {
      const Cell cand{b.x + kDirections[d].x, b.y + kDirections[d].y};
      if (cand.x < 0 || cand.x >= grid || cand.y < 0 || cand.y >= grid) {
        continue;
      }
      bool occupied = false;
      for (std::size_t i = 0; i < objects.size(); ++i) {
        if (static_cast<int>(i) != obj_a && objects[i] == cand) {
          occupied = true;
          break;
        }
      }
      if (occupied) continue;
      std::vector<int> field = bfs_dist(cand, grid, blocked);
      const int dist =
          field[static_cast<std::size_t>(gripper.y * grid + gripper.x)];
      if (dist < best_dist) {
        best_dist = dist;
        best_dir = d;
        best_field = std::move(field);
      }
    }
    if (best_dir < 0 || best_dist == kUnreachable) {
      throw GenerationError("no reachable free cell adjacent to target");
    }
    for (int t : path_tokens(gripper, best_field, grid)) plan.push_back(t);
    gripper = Cell{b.x + kDirections[best_dir].x,
                   b.y + kDirections[best_dir].y};
    objects[static_cast<std::size_t>(obj_a)] = gripper;
    plan.push_back(kTokenRelease);
  }

  if (static_cast<int>(plan.size()) > scenario.env.step_budget) {
    throw GenerationError("expert plan exceeds the step budget");
  }
  while (plan.size() % static_cast<std::size_t>(chunk_size) != 0) {
    plan.push_back(kTokenNoop);
  }

  // Replay to record chunk-start observations and confirm success.
  Trajectory traj;
  traj.scenario = scenario;
  Env env(scenario);
  for (std::size_t start = 0; start < plan.size();
       start += static_cast<std::size_t>(chunk_size)) {
    ChunkRecord chunk;
    chunk.observation = observe(env.state(), scenario.task_id, scenario.env);
    for (int t = 0; t < chunk_size; ++t) {
      const int token = plan[start + static_cast<std::size_t>(t)];
      chunk.tokens.push_back(token);
      chunk.logprobs.push_back(0.0);
      if (!env.state().done) {
        env.apply(token);
        ++traj.executed_token_count;
      }
    }
    traj.chunks.push_back(std::move(chunk));
  }
  traj.success = env.state().success;
  if (!traj.success) {
    throw GenerationError("expert demonstration did not reach success");
  }
  traj.strategy = classify_strategy(traj);
  return traj;
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kGrasp:
      return "grasp";
    case Strategy::kPush:
      return "push";
    case Strategy::kOther:
      return "other";
  }
  return "other";
}

std::vector<int> Trajectory::flat_tokens() const {
  std::vector<int> tokens;
  for (const ChunkRecord& chunk : chunks) {
    tokens.insert(tokens.end(), chunk.tokens.begin(), chunk.tokens.end());
  }
  return tokens;
}

Strategy classify_strategy(const Trajectory& traj) {
  const ReplayResult replay = replay_tokens(traj.scenario, traj.flat_tokens());
  if (!replay.final_state.success) return Strategy::kOther;
  return replay.grasped_moved_object ? Strategy::kGrasp : Strategy::kPush;
}

}  // namespace gridrl
