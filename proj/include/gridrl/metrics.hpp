#pragma once

#include <fstream>
#include <string>

namespace gridrl {

// Per-iteration training statistics, one JSON-lines record each.
struct IterationStats {
  int iter = 0;
  int accepted_groups = 0;
  int rejected_all_success = 0;
  int rejected_all_fail = 0;
  // Uniform-outcome groups trained with zero advantages; only possible when
  // dynamic sampling is off.
  int zero_adv_groups = 0;
  double mean_reward = 0.0;          // over accepted trajectories
  double rollout_success_rate = 0.0; // over all sampled trajectories
  double mean_entropy = 0.0;         // behavior entropy per sampled token row
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
  double push_fraction = 0.0;        // over all sampled trajectories
  double wall_ms = 0.0;

  std::string to_json() const;
};

// Appends one record per line. Pass an empty path to discard records.
class MetricsWriter {
 public:
  MetricsWriter() = default;
  explicit MetricsWriter(const std::string& path);

  void write(const IterationStats& stats);
  void write_line(const std::string& json_line);

 private:
  std::ofstream out_;
  bool enabled_ = false;
};

}  // namespace gridrl
