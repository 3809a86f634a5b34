#include "flashsac/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace flashsac {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            int line, const std::string& why) {
  std::ostringstream os;
  os << "config key '" << key << "'";
  if (line > 0) os << " (line " << line << ")";
  os << ": cannot parse value '" << value << "' (" << why << ")";
  throw ConfigError(os.str());
}

double parse_double(const std::string& key, const std::string& v, int line) {
  try {
    size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) bad_value(key, v, line, "trailing characters");
    return d;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, v, line, "not a number");
  }
}

long long parse_int(const std::string& key, const std::string& v, int line) {
  try {
    size_t used = 0;
    long long i = std::stoll(v, &used);
    if (used != v.size()) bad_value(key, v, line, "trailing characters");
    return i;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, v, line, "not an integer");
  }
}

bool parse_bool(const std::string& key, const std::string& v, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, line, "expected true/false");
}

void set_key(FullConfig& c, const std::string& key, const std::string& value,
             int line) {
  TrainerConfig& t = c.trainer;
  RunOptions& r = c.run;
  if (key == "gamma") t.gamma = parse_double(key, value, line);
  else if (key == "n_envs") t.n_envs = static_cast<int>(parse_int(key, value, line));
  else if (key == "buffer_capacity") t.buffer_capacity = parse_int(key, value, line);
  else if (key == "batch_size") t.batch_size = static_cast<int>(parse_int(key, value, line));
  else if (key == "utd_updates") t.utd_updates = parse_int(key, value, line);
  else if (key == "utd_per_transitions") t.utd_per_transitions = parse_int(key, value, line);
  else if (key == "actor_update_delay") t.actor_update_delay = static_cast<int>(parse_int(key, value, line));
  else if (key == "tau") t.tau = parse_double(key, value, line);
  else if (key == "lr_init") t.lr_init = parse_double(key, value, line);
  else if (key == "lr_end") t.lr_end = parse_double(key, value, line);
  else if (key == "total_env_steps") t.total_env_steps = parse_int(key, value, line);
  else if (key == "warmup_transitions") t.warmup_transitions = parse_int(key, value, line);
  else if (key == "sigma_tgt") t.sigma_tgt = parse_double(key, value, line);
  else if (key == "zeta_s") t.zeta_s = parse_double(key, value, line);
  else if (key == "zeta_kmax") t.zeta_kmax = static_cast<int>(parse_int(key, value, line));
  else if (key == "g_min") t.g_min = parse_double(key, value, line);
  else if (key == "g_max") t.g_max = parse_double(key, value, line);
  else if (key == "n_atoms") t.n_atoms = static_cast<int>(parse_int(key, value, line));
  else if (key == "actor_width") t.actor_width = static_cast<int>(parse_int(key, value, line));
  else if (key == "actor_blocks") t.actor_blocks = static_cast<int>(parse_int(key, value, line));
  else if (key == "critic_width") t.critic_width = static_cast<int>(parse_int(key, value, line));
  else if (key == "critic_blocks") t.critic_blocks = static_cast<int>(parse_int(key, value, line));
  else if (key == "seed") t.seed = static_cast<std::uint64_t>(parse_int(key, value, line));
  else if (key == "use_weight_projection") t.use_weight_projection = parse_bool(key, value, line);
  else if (key == "use_batch_norm") t.use_batch_norm = parse_bool(key, value, line);
  else if (key == "reward_multiplier") t.reward_multiplier = parse_double(key, value, line);
  else if (key == "env") t.env = value;
  else if (key == "log_interval") r.log_interval = parse_int(key, value, line);
  else if (key == "eval_interval") r.eval_interval = parse_int(key, value, line);
  else if (key == "eval_episodes") r.eval_episodes = static_cast<int>(parse_int(key, value, line));
  else if (key == "checkpoint_interval") r.checkpoint_interval = parse_int(key, value, line);
  else if (key == "out_dir") r.out_dir = value;
  else {
    std::ostringstream os;
    os << "unknown config key '" << key << "'";
    if (line > 0) os << " at line " << line;
    throw ConfigError(os.str());
  }
}

void validate_run(const RunOptions& r) {
  if (r.log_interval <= 0) throw ConfigError("log_interval must be positive");
  if (r.eval_interval <= 0) throw ConfigError("eval_interval must be positive");
  if (r.eval_episodes <= 0) throw ConfigError("eval_episodes must be positive");
  if (r.checkpoint_interval < 0)
    throw ConfigError("checkpoint_interval must be >= 0");
  if (r.out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

}  // namespace

FullConfig default_config() { return FullConfig{}; }

FullConfig parse_config_text(const std::string& text) {
  FullConfig cfg = default_config();
  std::istringstream is(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + trim(raw) + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    set_key(cfg, key, value, line_no);
  }
  cfg.trainer.validate();
  validate_run(cfg.run);
  return cfg;
}

FullConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

void apply_override(FullConfig& cfg, const std::string& key,
                    const std::string& value) {
  set_key(cfg, key, value, 0);
  cfg.trainer.validate();
  validate_run(cfg.run);
}

namespace {
std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

std::string render_config(const FullConfig& c) {
  const TrainerConfig& t = c.trainer;
  const RunOptions& r = c.run;
  std::ostringstream os;
  os << "env = " << t.env << "\n";
  os << "seed = " << t.seed << "\n";
  os << "gamma = " << fmt_double(t.gamma) << "\n";
  os << "n_envs = " << t.n_envs << "\n";
  os << "buffer_capacity = " << t.buffer_capacity << "\n";
  os << "batch_size = " << t.batch_size << "\n";
  os << "utd_updates = " << t.utd_updates << "\n";
  os << "utd_per_transitions = " << t.utd_per_transitions << "\n";
  os << "actor_update_delay = " << t.actor_update_delay << "\n";
  os << "tau = " << fmt_double(t.tau) << "\n";
  os << "lr_init = " << fmt_double(t.lr_init) << "\n";
  os << "lr_end = " << fmt_double(t.lr_end) << "\n";
  os << "total_env_steps = " << t.total_env_steps << "\n";
  os << "warmup_transitions = " << t.resolved_warmup() << "\n";
  os << "sigma_tgt = " << fmt_double(t.sigma_tgt) << "\n";
  os << "zeta_s = " << fmt_double(t.zeta_s) << "\n";
  os << "zeta_kmax = " << t.zeta_kmax << "\n";
  os << "g_min = " << fmt_double(t.g_min) << "\n";
  os << "g_max = " << fmt_double(t.g_max) << "\n";
  os << "n_atoms = " << t.n_atoms << "\n";
  os << "actor_width = " << t.actor_width << "\n";
  os << "actor_blocks = " << t.actor_blocks << "\n";
  os << "critic_width = " << t.critic_width << "\n";
  os << "critic_blocks = " << t.critic_blocks << "\n";
  os << "use_weight_projection = " << (t.use_weight_projection ? "true" : "false") << "\n";
  os << "use_batch_norm = " << (t.use_batch_norm ? "true" : "false") << "\n";
  os << "reward_multiplier = " << fmt_double(t.reward_multiplier) << "\n";
  os << "log_interval = " << r.log_interval << "\n";
  os << "eval_interval = " << r.eval_interval << "\n";
  os << "eval_episodes = " << r.eval_episodes << "\n";
  os << "checkpoint_interval = " << r.checkpoint_interval << "\n";
  os << "out_dir = " << r.out_dir << "\n";
  return os.str();
}

}  // namespace flashsac
