#include "gridrl/metrics.hpp"

#include <nlohmann/json.hpp>

#include "gridrl/errors.hpp"

namespace gridrl {

std::string IterationStats::to_json() const {
  nlohmann::ordered_json record;
  record["iter"] = iter;
  record["accepted_groups"] = accepted_groups;
  record["rejected_all_success"] = rejected_all_success;
  record["rejected_all_fail"] = rejected_all_fail;
  record["zero_adv_groups"] = zero_adv_groups;
  record["mean_reward"] = mean_reward;
  record["rollout_success_rate"] = rollout_success_rate;
  record["mean_entropy"] = mean_entropy;
  record["clip_fraction"] = clip_fraction;
  record["grad_norm"] = grad_norm;
  record["push_fraction"] = push_fraction;
  record["wall_ms"] = wall_ms;
  return record.dump();
}

MetricsWriter::MetricsWriter(const std::string& path) {
  if (path.empty()) return;
  out_.open(path, std::ios::trunc);
  if (!out_) throw IoError("cannot open metrics log '" + path + "'");
  enabled_ = true;
}

void MetricsWriter::write(const IterationStats& stats) {
  write_line(stats.to_json());
}

void MetricsWriter::write_line(const std::string& json_line) {
  if (!enabled_) return;
  out_ << json_line << '\n';
  out_.flush();
}

}  // namespace gridrl
