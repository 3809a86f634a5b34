#pragma once

#include <string>

#include "flashsac/config.hpp"
#include "flashsac/trainer.hpp"

namespace flashsac {

// Executes one training run and writes the standard artifacts into out_dir:
// resolved.cfg, metrics.csv, checkpoint.fsac (plus interval checkpoints when
// configured). extra_hooks, when given, are invoked alongside the writers.
TrainResult run_training_to_dir(const FullConfig& cfg, const std::string& out_dir,
                                const TrainHooks* extra_hooks = nullptr,
                                AgentState* out_agent = nullptr);

}  // namespace flashsac
