#include "flashsac/run.hpp"

#include <filesystem>
#include <fstream>

#include "flashsac/metrics.hpp"

namespace flashsac {

TrainResult run_training_to_dir(const FullConfig& cfg, const std::string& out_dir,
                                const TrainHooks* extra_hooks,
                                AgentState* out_agent) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream rf(out_dir + "/resolved.cfg", std::ios::trunc);
    if (!rf) throw IoError("cannot write '" + out_dir + "/resolved.cfg'");
    rf << render_config(cfg);
  }
  std::ofstream mf(out_dir + "/metrics.csv", std::ios::trunc);
  if (!mf) throw IoError("cannot write '" + out_dir + "/metrics.csv'");
  mf << metrics_csv_header() << "\n";

  long long next_checkpoint = cfg.run.checkpoint_interval;
  TrainHooks hooks;
  hooks.on_log = [&](const AgentState& agent, const MetricsRow& row) {
    mf << metrics_row_to_csv(row) << "\n";
    mf.flush();
    if (cfg.run.checkpoint_interval > 0 && row.env_step >= next_checkpoint) {
      save_agent(agent, out_dir + "/checkpoint_step" +
                            std::to_string(row.env_step) + ".fsac");
      next_checkpoint += cfg.run.checkpoint_interval;
    }
    if (extra_hooks && extra_hooks->on_log) extra_hooks->on_log(agent, row);
  };
  hooks.post_update = [&](const AgentState& agent, const UpdateMetrics& m,
                          bool is_actor) {
    if (extra_hooks && extra_hooks->post_update)
      extra_hooks->post_update(agent, m, is_actor);
  };
  hooks.on_eval = [&](const AgentState& agent, long long step, const EvalResult& ev) {
    if (extra_hooks && extra_hooks->on_eval) extra_hooks->on_eval(agent, step, ev);
  };

  TrainOptions opts{cfg.run.log_interval, cfg.run.eval_interval,
                    cfg.run.eval_episodes};
  AgentState agent;
  TrainResult result = train(cfg.trainer, opts, &hooks, &agent);
  save_agent(agent, out_dir + "/checkpoint.fsac");
  if (out_agent) *out_agent = std::move(agent);
  return result;
}

}  // namespace flashsac
