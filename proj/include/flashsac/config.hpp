#pragma once

#include <string>
#include <utility>
#include <vector>

#include "flashsac/trainer.hpp"

namespace flashsac {

struct RunOptions {
  long long log_interval = 1000;
  long long eval_interval = 5000;
  int eval_episodes = 10;
  long long checkpoint_interval = 0;  // 0: checkpoint only at exit
  std::string out_dir = "runs";
};

struct FullConfig {
  TrainerConfig trainer;
  RunOptions run;
};

FullConfig default_config();

// Parses `key = value` lines ('#' starts a comment). Unknown keys, bad values
// and invariant violations raise ConfigError naming the key and line.
FullConfig parse_config_text(const std::string& text);
FullConfig parse_config_file(const std::string& path);

// `--key value` command-line overrides applied on top of the file.
void apply_override(FullConfig& cfg, const std::string& key,
                    const std::string& value);

// Serializes the fully resolved configuration; parsing it back reproduces an
// identical config.
std::string render_config(const FullConfig& cfg);

}  // namespace flashsac
