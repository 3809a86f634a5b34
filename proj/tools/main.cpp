// flashsac command line: train / eval / plot.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "flashsac/config.hpp"
#include "flashsac/run.hpp"
#include "flashsac/metrics.hpp"
#include "flashsac/svg_plot.hpp"
#include "flashsac/trainer.hpp"

namespace fs = std::filesystem;
using namespace flashsac;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

void print_usage() {
  std::cout <<
      "usage:\n"
      "  flashsac train [--config <path>] [--key value]...\n"
      "  flashsac eval --checkpoint <path> --env <name> [--episodes N] [--seed S]\n"
      "  flashsac plot <metrics.csv>... --out <chart.svg>\n"
      "\n"
      "train writes metrics.csv, resolved.cfg and checkpoints into out_dir.\n"
      "Any config key can be overridden with --key value; FLASHSAC_SEED\n"
      "overrides the seed. Unknown keys are rejected.\n";
}

int cmd_train(const std::vector<std::string>& args) {
  FullConfig cfg = default_config();
  // first pass: locate --config
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a path");
      cfg = parse_config_file(args[i + 1]);
      break;
    }
  }
  // second pass: apply --key value overrides
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      ++i;
      continue;
    }
    if (args[i].rfind("--", 0) != 0)
      throw ConfigError("unexpected argument '" + args[i] + "'");
    if (i + 1 >= args.size())
      throw ConfigError("flag '" + args[i] + "' needs a value");
    apply_override(cfg, args[i].substr(2), args[i + 1]);
    ++i;
  }
  if (const char* env_seed = std::getenv("FLASHSAC_SEED")) {
    apply_override(cfg, "seed", env_seed);
  }

  auto start = std::chrono::steady_clock::now();
  TrainHooks hooks;
  hooks.on_eval = [&](const AgentState&, long long env_step, const EvalResult& ev) {
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[eval] step %lld  return %.2f +/- %.2f  (%.1fs elapsed)\n",
                env_step, ev.mean, ev.stddev, elapsed);
    std::fflush(stdout);
  };

  try {
    TrainResult result = run_training_to_dir(cfg, cfg.run.out_dir, &hooks);
    std::printf("done: %lld env steps, %lld critic updates, final eval %.2f +/- %.2f\n",
                cfg.trainer.total_env_steps, result.critic_updates,
                result.final_eval_mean, result.final_eval_std);
    return kExitOk;
  } catch (const NumericalError& e) {
    const std::string dump_path = cfg.run.out_dir + "/abort_diagnostics.txt";
    fs::create_directories(cfg.run.out_dir);
    std::ofstream dump(dump_path, std::ios::trunc);
    dump << e.what() << "\n";
    std::cerr << "numerical abort: " << e.what() << "\n"
              << "diagnostics written to " << dump_path << "\n";
    return kExitNumerical;
  }
}

int cmd_eval(const std::vector<std::string>& args) {
  std::string checkpoint, env_name;
  int episodes = 10;
  std::uint64_t seed = 1;
  for (size_t i = 0; i < args.size(); ++i) {
    auto need = [&](const char* flag) -> std::string {
      if (i + 1 >= args.size())
        throw ConfigError(std::string(flag) + " needs a value");
      return args[++i];
    };
    if (args[i] == "--checkpoint") checkpoint = need("--checkpoint");
    else if (args[i] == "--env") env_name = need("--env");
    else if (args[i] == "--episodes") episodes = std::stoi(need("--episodes"));
    else if (args[i] == "--seed") seed = std::stoull(need("--seed"));
    else throw ConfigError("unknown eval flag '" + args[i] + "'");
  }
  if (checkpoint.empty() || env_name.empty())
    throw ConfigError("eval requires --checkpoint and --env");
  if (!VecEnv::is_known_env(env_name))
    throw ConfigError("unknown environment '" + env_name + "'");
  AgentState agent = load_agent(checkpoint);
  VecEnv probe(env_name, 1);
  if (agent.state_dim != probe.state_dim() ||
      agent.action_dim != probe.action_dim()) {
    throw ConfigError(
        "checkpoint/environment mismatch: checkpoint encodes state_dim=" +
        std::to_string(agent.state_dim) + ", action_dim=" +
        std::to_string(agent.action_dim) + " but '" + env_name +
        "' has state_dim=" + std::to_string(probe.state_dim()) +
        ", action_dim=" + std::to_string(probe.action_dim()));
  }
  EvalResult res = evaluate(agent, env_name, episodes, seed);
  std::printf("%s: %.4f +/- %.4f over %d episodes (seed %llu)\n",
              env_name.c_str(), res.mean, res.stddev, episodes,
              static_cast<unsigned long long>(seed));
  return kExitOk;
}

int cmd_plot(const std::vector<std::string>& args) {
  std::vector<std::string> csvs;
  std::string out;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out") {
      if (i + 1 >= args.size()) throw ConfigError("--out needs a path");
      out = args[++i];
    } else {
      csvs.push_back(args[i]);
    }
  }
  if (csvs.empty()) throw ConfigError("plot needs at least one metrics csv");
  if (out.empty()) throw ConfigError("plot requires --out <chart.svg>");
  std::vector<PlotSeries> series;
  for (const auto& path : csvs) {
    MetricsFile f = read_metrics_csv(path);
    if (f.rows.empty()) throw ConfigError("metrics csv '" + path + "' has no rows");
    PlotSeries s;
    s.label = fs::path(path).stem().string();
    for (const auto& row : f.rows) {
      s.x.push_back(static_cast<double>(row.env_step));
      s.y.push_back(row.eval_return_mean);
    }
    series.push_back(std::move(s));
  }
  write_line_chart(out, series, "env_step", "eval_return_mean");
  std::printf("wrote %s\n", out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty() || args[0] == "--help" || args[0] == "-h") {
    print_usage();
    return args.empty() ? kExitUsage : kExitOk;
  }
  std::string cmd = args[0];
  std::vector<std::string> rest(args.begin() + 1, args.end());
  try {
    if (cmd == "train") return cmd_train(rest);
    if (cmd == "eval") return cmd_eval(rest);
    if (cmd == "plot") return cmd_plot(rest);
    std::cerr << "unknown command '" << cmd << "'\n";
    print_usage();
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
