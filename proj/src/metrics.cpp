#include "flashsac/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "flashsac/common.hpp"

namespace flashsac {

const std::string& metrics_csv_header() {
  static const std::string header =
      "env_step,wall_time_s,episodes_done,train_return_mean,eval_return_mean,"
      "eval_return_std,critic_loss,actor_loss,alpha,policy_entropy,"
      "entropy_target,lr,param_norm_actor,param_norm_critic,grad_norm_critic,"
      "feature_norm_critic,reward_scale_denom";
  return header;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string metrics_row_to_csv(const MetricsRow& r) {
  std::ostringstream os;
  os << r.env_step << ',' << fmt(r.wall_time_s) << ',' << r.episodes_done << ','
     << fmt(r.train_return_mean) << ',' << fmt(r.eval_return_mean) << ','
     << fmt(r.eval_return_std) << ',' << fmt(r.critic_loss) << ','
     << fmt(r.actor_loss) << ',' << fmt(r.alpha) << ',' << fmt(r.policy_entropy)
     << ',' << fmt(r.entropy_target) << ',' << fmt(r.lr) << ','
     << fmt(r.param_norm_actor) << ',' << fmt(r.param_norm_critic) << ','
     << fmt(r.grad_norm_critic) << ',' << fmt(r.feature_norm_critic) << ','
     << fmt(r.reward_scale_denom);
  return os.str();
}

MetricsRow metrics_row_from_csv(const std::string& line) {
  std::vector<double> vals;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
  if (vals.size() != 17)
    throw IoError("metrics row has " + std::to_string(vals.size()) +
                  " fields, expected 17");
  MetricsRow r;
  r.env_step = static_cast<long long>(vals[0]);
  r.wall_time_s = vals[1];
  r.episodes_done = static_cast<long long>(vals[2]);
  r.train_return_mean = vals[3];
  r.eval_return_mean = vals[4];
  r.eval_return_std = vals[5];
  r.critic_loss = vals[6];
  r.actor_loss = vals[7];
  r.alpha = vals[8];
  r.policy_entropy = vals[9];
  r.entropy_target = vals[10];
  r.lr = vals[11];
  r.param_norm_actor = vals[12];
  r.param_norm_critic = vals[13];
  r.grad_norm_critic = vals[14];
  r.feature_norm_critic = vals[15];
  r.reward_scale_denom = vals[16];
  return r;
}

MetricsFile read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open metrics csv '" + path + "'");
  MetricsFile f;
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty metrics csv '" + path + "'");
  if (line != metrics_csv_header())
    throw IoError("metrics csv '" + path + "' has an unexpected header");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.column_names.push_back(cell);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    f.rows.push_back(metrics_row_from_csv(line));
  }
  return f;
}

}  // namespace flashsac
