#include "hipt/service/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <spdlog/spdlog.h>

#include "hipt/env/trajectory_log.hpp"
#include "hipt/eval/behavior_cloning.hpp"
#include "hipt/eval/evaluate.hpp"
#include "hipt/eval/report.hpp"
#include "hipt/hipt/trainer.hpp"
#include "hipt/population/crossplay.hpp"
#include "hipt/population/population.hpp"
#include "hipt/rl/metrics.hpp"
#include "hipt/service/agents.hpp"
#include "hipt/service/config.hpp"
#include "hipt/service/run_dir.hpp"
#include "hipt/service/server.hpp"
#include "hipt/util/error.hpp"

namespace hipt::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
};

// Shortcut flags become overrides so they share the file < flags precedence.
void shortcut(CLI::App* cmd, std::vector<std::string>& overrides, const std::string& flag, const std::string& key,
              const std::string& help, bool quote) {
  cmd->add_option_function<std::string>(
      flag,
      [&overrides, key, quote](const std::string& v) {
        overrides.push_back(key + "=" + (quote ? json(v).dump() : v));
      },
      help);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string required_path(const RunConfig& c, const char* key) {
  if (!c.contains(key) || !c[key].is_string() || c[key].get<std::string>().empty())
    throw ContractViolation(std::string("missing required setting '") + key + "'");
  return c[key].get<std::string>();
}

// Accepts a population archive or a run directory holding one.
population::PartnerPopulation load_population_path(const std::string& path) {
  if (fs::exists(fs::path(path) / "population" / "manifest.json")) {
    if (fs::exists(fs::path(path) / kManifestFile)) verify_run_dir(path);
    return population::load_population((fs::path(path) / "population").string());
  }
  return population::load_population(path);
}

fs::path start_run(const RunConfig& config) {
  const auto dir = create_run_dir(config.at("out").get<std::string>(), config.at("command").get<std::string>());
  save_run_config(dir, config);
  spdlog::info("run directory {}", dir.string());
  return dir;
}

void finish_run(const fs::path& dir) {
  write_manifest(dir);
  std::cout << dir.string() << '\n';
}

int train_population_cmd(const RunConfig& config) {
  const auto layout = env::load_layout(config.at("layout").get<std::string>());
  const auto pc = population_config(config);
  const auto dir = start_run(config);
  population::PartnerPopulation pop;
  {
    rl::MetricsLog metrics((dir / "metrics.jsonl").string());
    const auto t0 = std::chrono::steady_clock::now();
    long last = 0;
    pop = population::train_population(layout, pc, &metrics, [&](const population::PopulationProgress& p) {
      if (p.stats.env_steps - last < 100'000 && p.slot != 0) return;
      last = p.stats.env_steps;
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      spdlog::info("slot {} steps {} return {:.1f} ({:.0f}s)", p.slot, p.stats.env_steps, p.stats.mean_return, s);
    });
  }
  population::save_population(pop, (dir / "population").string());
  json summary = json::array();
  for (std::size_t i = 0; i < pop.slots.size(); ++i) {
    const auto& s = pop.slots[i];
    summary.push_back({{"slot", i}, {"seed", s.seed}, {"full_return", s.full_return}, {"mid_return", s.mid_return},
                       {"random_return", s.random_return}, {"mid_in_band", s.mid_in_band}, {"attempts", s.attempts}});
  }
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  finish_run(dir);
  return 0;
}

int train_hipt_cmd(const RunConfig& config) {
  const auto layout = env::load_layout(config.at("layout").get<std::string>());
  const auto hc = hipt_config(config);
  const auto pop = load_population_path(required_path(config, "partners"));
  if (pop.layout != layout.name) throw ContractViolation("partner population was trained on " + pop.layout);
  const auto dir = start_run(config);
  hierarchy::HiptTrainer trainer(layout, hc, hierarchy::flatten_population(pop), config.at("seed").get<std::uint64_t>());
  const int every = config.at("checkpoint_every").get<int>();
  {
    rl::MetricsLog metrics((dir / "metrics.jsonl").string());
    fs::create_directories(dir / "checkpoints");
    const auto t0 = std::chrono::steady_clock::now();
    while (!trainer.finished()) {
      const auto it = trainer.iterate();
      metrics.record(trainer.updates(), it.update, it.mean_return, "hipt");
      if (every > 0 && trainer.updates() % every == 0) {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        spdlog::info("steps {} return {:.1f} influence {:.3f} kappa {:.1f} ({:.0f}s)", it.env_steps, it.mean_return,
                     it.mean_influence, it.kappa, s);
        hierarchy::save_hipt_checkpoint((dir / "checkpoints" / ("update" + std::to_string(trainer.updates()))).string(),
                                        trainer.agent(), trainer.checkpoint_info());
      }
    }
  }
  hierarchy::save_hipt_checkpoint((dir / "agent").string(), trainer.agent(), trainer.checkpoint_info());
  finish_run(dir);
  return 0;
}

int eval_cmd(const RunConfig& config) {
  const auto layout = env::load_layout(config.at("layout").get<std::string>());
  const auto agent = load_agent(required_path(config, "agent"));
  std::string method = config.at("method").get<std::string>();
  if (method == "agent") method = agent.id.find('/') == std::string::npos ? agent.id : agent.kind;
  const int episodes = config.at("episodes").get<int>();
  const auto seed = config.at("seed").get<std::uint64_t>();
  std::vector<eval::EvalRow> rows;
  auto policy = agent.make_policy();
  if (config.contains("held_out") && !config["held_out"].is_null()) {
    eval::EvalSuite suite;
    suite.held_out = load_population_path(config["held_out"].get<std::string>());
    if (config.contains("training_population") && !config["training_population"].is_null())
      eval::check_disjoint(load_population_path(config["training_population"].get<std::string>()), suite.held_out);
    suite.tiers.clear();
    for (const auto& t : config.at("tiers")) suite.tiers.push_back(population::parse_tier(t.get<std::string>()));
    suite.episodes = episodes;
    suite.seed = seed;
    auto r = eval::evaluate_vs_population(*policy, method, layout, suite);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (config.contains("proxy") && !config["proxy"].is_null()) {
    const auto proxy = load_agent(config["proxy"].get<std::string>());
    auto partner = proxy.make_policy();
    rows.push_back(eval::evaluate_vs_partner(*policy, *partner, method, "proxy", layout, episodes, derive_seed(seed, 7)));
  }
  if (rows.empty()) throw ContractViolation("eval needs held_out and/or proxy");
  const auto dir = start_run(config);
  write_text(dir / "report.csv", eval::emit_report(rows, eval::ReportFormat::Csv));
  const auto text = eval::emit_report(rows, eval::ReportFormat::Text);
  write_text(dir / "report.txt", text);
  std::cout << text;
  finish_run(dir);
  return 0;
}

int crossplay_cmd(const RunConfig& config) {
  const auto pop = load_population_path(required_path(config, "population"));
  const auto layout = env::load_layout(pop.layout);
  std::vector<population::NamedPolicy> members;
  for (const auto& t : config.at("tiers")) {
    const auto tier = population::parse_tier(t.get<std::string>());
    for (std::size_t i = 0; i < pop.slots.size(); ++i)
      members.push_back({"slot" + std::to_string(i) + "_" + std::string(population::to_string(tier)),
                         pop.slots[i].tier(tier)});
  }
  const auto m = population::crossplay_matrix(members, layout, config.at("episodes").get<int>(),
                                              config.at("seat_balancing").get<bool>(),
                                              config.at("seed").get<std::uint64_t>());
  const auto labels = population::classify_play_styles(m, config.at("tolerance").get<double>());
  const auto dir = start_run(config);
  population::write_crossplay_csv(m, (dir / "crossplay.csv").string());
  population::write_crossplay_pgm(m, (dir / "crossplay.pgm").string());
  json styles = json::object();
  for (std::size_t i = 0; i < labels.size(); ++i) styles[m.names[i]] = labels[i];
  write_text(dir / "play_styles.json",
             json{{"classes", population::class_count(labels)}, {"members", styles}}.dump(2) + "\n");
  finish_run(dir);
  return 0;
}

int bc_train_cmd(const RunConfig& config) {
  const auto layout = env::load_layout(config.at("layout").get<std::string>());
  const auto train = env::read_jsonl_file(required_path(config, "train"));
  const auto held_out = env::read_jsonl_file(required_path(config, "held_out"));
  const auto model = eval::train_bc(train, held_out, layout, bc_config(config));
  const auto dir = start_run(config);
  eval::save_bc_model((dir / "bc").string(), model);
  spdlog::info("behavior cloning accuracy train {:.4f} held-out {:.4f}", model.train_accuracy,
               model.held_out_accuracy);
  finish_run(dir);
  return 0;
}

int record_cmd(const RunConfig& config) {
  const auto layout = env::load_layout(config.at("layout").get<std::string>());
  const auto a = load_agent(config.at("agent").get<std::string>());
  const auto b = load_agent(config.at("partner").get<std::string>());
  auto pa = a.make_policy();
  auto pb = b.make_policy();
  const int first = config.at("first_episode").get<int>();
  const auto seed = config.at("seed").get<std::uint64_t>();
  std::vector<env::EpisodeLog> logs;
  for (int i = 0; i < config.at("episodes").get<int>(); ++i) {
    const int id = first + i;
    const auto rec = env::run_episode(*pa, *pb, layout, env::kDefaultHorizon, env::no_shaping(), derive_seed(seed, id));
    logs.push_back(env::to_log(rec, "ep" + std::to_string(id), layout.name));
  }
  const auto dir = start_run(config);
  const std::string name = config["output"].is_string() ? config["output"].get<std::string>() : "trajectories.jsonl";
  env::write_jsonl_file((dir / name).string(), logs);
  finish_run(dir);
  return 0;
}

SessionServer* g_server = nullptr;
extern "C" void handle_signal(int) {
  if (g_server) g_server->stop();
}

int serve_cmd(const RunConfig& config) {
  ServerConfig sc;
  sc.port = config.at("port").get<unsigned short>();
  sc.data_dir = config.at("data_dir").get<std::string>();
  if (config["static_dir"].is_string()) sc.static_dir = config["static_dir"].get<std::string>();
  sc.layout = config.at("layout").get<std::string>();
  sc.tick_ms = config.at("tick_ms").get<int>();
  sc.horizon = config.at("horizon").get<int>();
  sc.rounds = config.at("rounds").get<int>();
  sc.park_timeout = std::chrono::seconds(config.at("park_timeout_s").get<int>());
  sc.seed = config.at("seed").get<std::uint64_t>();
  sc.apply_environment();
  std::vector<AgentHandle> agents;
  for (const auto& a : config.at("agents")) agents.push_back(load_agent(a.get<std::string>()));
  std::optional<AgentHandle> tutorial;
  if (config.contains("tutorial_episodes") && config["tutorial_episodes"].get<int>() > 0) {
    sc.tutorial_episodes = config["tutorial_episodes"].get<int>();
    tutorial = load_agent("tutorial=scripted");
  }
  SessionServer server(sc, std::move(agents), tutorial);
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  std::cout << "listening on port " << server.port() << std::endl;
  server.run();
  g_server = nullptr;
  return 0;
}

int replay_cmd(const std::string& path, const std::string& layout_override, int horizon) {
  const auto logs = env::read_jsonl_file(path);
  if (logs.empty()) throw ContractViolation("no episodes in " + path);
  int failures = 0;
  for (const auto& log : logs) {
    const auto layout = env::load_layout(layout_override.empty() ? log.layout : layout_override);
    const auto r = env::replay(log, layout, horizon);
    if (r.ok) {
      std::cout << log.episode_id << ": ok (" << r.steps_checked << " steps, score " << r.final_state.score << ")\n";
    } else {
      ++failures;
      std::cout << log.episode_id << ": MISMATCH at tick " << r.first_mismatch_tick.value_or(-1) << ": " << r.message
                << '\n';
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Hierarchical population training for two-player cooking coordination"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")->capture_default_str();

  CommonOptions opts;
  auto add_command = [&](const std::string& name, const std::string& help) {
    CLI::App* cmd = app.add_subcommand(name, help);
    cmd->add_option("--config", opts.config_path, "JSON config file; flags override it");
    cmd->add_option("--set", opts.overrides, "override a setting: key.path=value")->take_all();
    shortcut(cmd, opts.overrides, "--layout", "layout", "bundled layout name or layout file", true);
    shortcut(cmd, opts.overrides, "--seed", "seed", "base seed", false);
    shortcut(cmd, opts.overrides, "--out", "out", "root directory for run directories", true);
    return cmd;
  };

  auto* tp = add_command("train-population", "train a diverse partner population");
  shortcut(tp, opts.overrides, "--size", "population.size", "number of members N", false);
  shortcut(tp, opts.overrides, "--steps", "training.total_env_steps", "env steps per member", false);
  shortcut(tp, opts.overrides, "--jsd", "population.jsd_coef", "diversity coefficient", false);

  auto* th = add_command("train-hipt", "train a two-level agent against a partner population");
  shortcut(th, opts.overrides, "--partners", "partners", "population archive or run directory", true);
  shortcut(th, opts.overrides, "--priors", "hipt.num_priors", "number of low-level priors", false);
  shortcut(th, opts.overrides, "--steps", "training.total_env_steps", "env step budget", false);

  auto* ev = add_command("eval", "evaluate an agent against held-out partners");
  shortcut(ev, opts.overrides, "--agent", "agent", "agent to evaluate", true);
  shortcut(ev, opts.overrides, "--held-out", "held_out", "held-out population", true);
  shortcut(ev, opts.overrides, "--training-population", "training_population", "checked for overlap", true);
  shortcut(ev, opts.overrides, "--proxy", "proxy", "cloned human proxy model", true);
  shortcut(ev, opts.overrides, "--episodes", "episodes", "episodes per partner and seat", false);
  shortcut(ev, opts.overrides, "--method", "method", "method label in the report", true);

  auto* cp = add_command("crossplay", "cross-play matrix and play-style classes of a population");
  shortcut(cp, opts.overrides, "--population", "population", "population archive or run directory", true);
  shortcut(cp, opts.overrides, "--episodes", "episodes", "episodes per cell", false);

  auto* bc = add_command("bc-train", "behavior cloning from trajectory logs");
  shortcut(bc, opts.overrides, "--train", "train", "training trajectories (JSONL)", true);
  shortcut(bc, opts.overrides, "--held-out", "held_out", "held-out trajectories (JSONL)", true);

  auto* rec = add_command("record", "play two agents and log the episodes as JSONL");
  shortcut(rec, opts.overrides, "--agent", "agent", "seat 0 agent", true);
  shortcut(rec, opts.overrides, "--partner", "partner", "seat 1 agent", true);
  shortcut(rec, opts.overrides, "--episodes", "episodes", "episode count", false);
  shortcut(rec, opts.overrides, "--first-episode", "first_episode", "id of the first episode", false);

  auto* sv = add_command("serve", "live play server for human partners");
  shortcut(sv, opts.overrides, "--port", "port", "listen port (HIPT_PORT overrides)", false);
  shortcut(sv, opts.overrides, "--data-dir", "data_dir", "session output root (HIPT_DATA_DIR overrides)", true);
  shortcut(sv, opts.overrides, "--static-dir", "static_dir", "directory served over HTTP", true);
  shortcut(sv, opts.overrides, "--tick-ms", "tick_ms", "milliseconds per step", false);
  shortcut(sv, opts.overrides, "--rounds", "rounds", "two-episode rounds per session", false);
  std::vector<std::string> serve_agents;
  sv->add_option("--agent", serve_agents, "agent in the comparison set (repeatable)");

  auto* rp = app.add_subcommand("replay", "re-simulate a trajectory log and verify its digests");
  std::string replay_path;
  std::string replay_layout;
  int replay_horizon = env::kDefaultHorizon;
  rp->add_option("trajectory", replay_path, "trajectory JSONL")->required();
  rp->add_option("--layout", replay_layout, "layout override");
  rp->add_option("--horizon", replay_horizon, "episode horizon")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (rp->parsed()) return replay_cmd(replay_path, replay_layout, replay_horizon);
    const std::string command = app.get_subcommands().front()->get_name();
    if (!serve_agents.empty()) opts.overrides.push_back("agents=" + json(serve_agents).dump());
    const RunConfig config = resolve_config(command, opts.config_path, opts.overrides);
    if (command == "train-population") return train_population_cmd(config);
    if (command == "train-hipt") return train_hipt_cmd(config);
    if (command == "eval") return eval_cmd(config);
    if (command == "crossplay") return crossplay_cmd(config);
    if (command == "bc-train") return bc_train_cmd(config);
    if (command == "record") return record_cmd(config);
    if (command == "serve") return serve_cmd(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace hipt::service
