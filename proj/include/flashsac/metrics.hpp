#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace flashsac {

struct MetricsRow {
  long long env_step = 0;
  double wall_time_s = 0.0;
  long long episodes_done = 0;
  double train_return_mean = 0.0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  double policy_entropy = 0.0;
  double entropy_target = 0.0;
  double lr = 0.0;
  double param_norm_actor = 0.0;
  double param_norm_critic = 0.0;
  double grad_norm_critic = 0.0;
  double feature_norm_critic = 0.0;
  double reward_scale_denom = 0.0;
};

// Frozen CSV schema; tests pin this string.
const std::string& metrics_csv_header();

std::string metrics_row_to_csv(const MetricsRow& row);
MetricsRow metrics_row_from_csv(const std::string& line);

struct MetricsFile {
  std::vector<std::string> column_names;
  std::vector<MetricsRow> rows;
};

MetricsFile read_metrics_csv(const std::string& path);

}  // namespace flashsac
