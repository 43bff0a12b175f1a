#pragma once

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gridrl {

// Action-token vocabulary. Every token is legal in every state; primitives
// whose preconditions fail are silent no-ops that still consume a step.
inline constexpr int kTokenMoveN = 0;
inline constexpr int kTokenMoveE = 1;
inline constexpr int kTokenMoveS = 2;
inline constexpr int kTokenMoveW = 3;
inline constexpr int kTokenGrasp = 4;
inline constexpr int kTokenRelease = 5;
inline constexpr int kTokenPushN = 6;
inline constexpr int kTokenPushE = 7;
inline constexpr int kTokenPushS = 8;
inline constexpr int kTokenPushW = 9;
inline constexpr int kTokenNoop = 10;
inline constexpr int kVocabSize = 11;

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

inline int manhattan(const Cell& a, const Cell& b) {
  return std::abs(a.x - b.x) + std::abs(a.y - b.y);
}

// Direction order used everywhere ties must break deterministically.
// N = +y, E = +x, S = -y, W = -x.
inline constexpr Cell kDirections[4] = {{0, 1}, {1, 0}, {0, -1}, {-1, 0}};

struct TaskSpec {
  enum class Kind { kMoveAdjacent, kStackSequence };

  int id = 0;
  std::string name;
  Kind kind = Kind::kMoveAdjacent;
  // MoveAdjacent uses pairs[0] = (A, B): bring object A next to object B.
  // StackSequence latches each (A, B) adjacency subgoal in order.
  std::vector<std::pair<int, int>> pairs;
  int min_objects = 2;

  // Objects the policy must relocate; used by the strategy classifier.
  std::vector<int> moved_objects() const;
};

// Built-in tasks, fixed order. The observation one-hot spans this registry.
const std::vector<TaskSpec>& task_registry();
const TaskSpec& task_by_id(int id);
const TaskSpec& task_by_name(std::string_view name);

enum class ScenarioDist { kUniform, kPushFavorable };

ScenarioDist scenario_dist_from_name(std::string_view name);
std::string_view scenario_dist_name(ScenarioDist dist);

struct EnvConfig {
  int grid_size = 8;
  int num_objects = 2;
  int step_budget = 64;
  ScenarioDist dist = ScenarioDist::kUniform;

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

struct GridState {
  int grid_size = 8;
  Cell gripper;
  std::optional<int> holding;
  std::vector<Cell> objects;  // index = object id
  int step_count = 0;
  // Number of leading task pairs already achieved; monotone within an
  // episode. Only sequence tasks read it.
  int subgoal_progress = 0;
  bool done = false;
  bool success = false;

  bool in_bounds(const Cell& c) const {
    return c.x >= 0 && c.x < grid_size && c.y >= 0 && c.y < grid_size;
  }
  // Object occupying the cell, if any.
  std::optional<int> object_at(const Cell& c) const;
};

struct Scenario {
  std::uint64_t seed = 0;
  int task_id = 0;
  EnvConfig env;
  GridState initial;
};

// Deterministically derives an initial layout from (task, seed, env config).
// Layouts never collide entities and are never already successful.
Scenario make_scenario(const TaskSpec& task, std::uint64_t seed,
                       const EnvConfig& env);

// Applies one action token. Pure: the input state is not modified. The
// success predicate runs after the primitive; done latches on success or
// when step_count reaches the budget.
GridState step_token(const GridState& state, int token, const TaskSpec& task,
                     int step_budget);

bool check_success(const GridState& state, const TaskSpec& task);

// Convenience wrapper owning the evolving state of one episode.
class Env {
 public:
  explicit Env(Scenario scenario);

  const Scenario& scenario() const { return scenario_; }
  const GridState& state() const { return state_; }
  const TaskSpec& task() const { return *task_; }

  void apply(int token);

 private:
  Scenario scenario_;
  const TaskSpec* task_;
  GridState state_;
};

// Feature vector: gripper x/y, each object's x/y (all scaled to [0,1]),
// holding flag, one-hot task id over the registry.
int observation_dim(const EnvConfig& env);
std::vector<double> observe(const GridState& state, int task_id,
                            const EnvConfig& env);

struct ReplayResult {
  GridState final_state;
  int executed_tokens = 0;
  bool grasped_moved_object = false;  // GRASP ever attached a task object
};

// Replays a token sequence from the scenario's initial state, stopping at
// done or when tokens run out.
ReplayResult replay_tokens(const Scenario& scenario,
                           const std::vector<int>& tokens);

}  // namespace gridrl
