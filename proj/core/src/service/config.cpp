#include "hipt/service/config.hpp"

#include <fstream>

#include "hipt/util/error.hpp"

namespace hipt::service {

using nlohmann::json;

LayoutHyperparameters layout_hyperparameters(const std::string& layout) {
  if (layout == "coordination_ring") return {6e-4, 1.5};
  if (layout == "forced_coordination") return {8e-4, 2.0};
  if (layout == "counter_circuit") return {8e-4, 3.0};
  return {1e-3, 3.0};
}

namespace {

json ppo_defaults() {
  const rl::PpoConfig p;
  return {{"discount", p.discount},
          {"gae_lambda", p.gae_lambda},
          {"clip", p.clip},
          {"value_coef", p.value_coef},
          {"entropy_coef", p.entropy_coef},
          {"entropy_coef_end", p.entropy_coef_end},
          {"minibatch_size", p.minibatch_size},
          {"epochs", p.epochs},
          {"normalize_advantages", p.normalize_advantages},
          {"normalize_values", p.normalize_values},
          {"max_grad_norm", p.max_grad_norm},
          {"chunk_length", p.chunk_length}};
}

json network_defaults() {
  const nn::NetworkSpec s;
  return {{"trunk_widths", s.trunk_widths}, {"activation", "tanh"}, {"recurrent_hidden", s.recurrent_hidden}};
}

json training_defaults(const std::string& layout, long steps) {
  const auto hp = layout_hyperparameters(layout);
  return {{"total_env_steps", steps},
          {"episodes_per_update", 8},
          {"horizon", env::kDefaultHorizon},
          {"shaping_anneal_fraction", 0.5},
          {"learning_rate", hp.learning_rate},
          {"lr_decay", hp.lr_decay}};
}

const json& at_path(const json& config, std::initializer_list<const char*> path) {
  const json* node = &config;
  std::string where;
  for (const char* key : path) {
    where += where.empty() ? key : std::string(".") + key;
    if (!node->is_object() || !node->contains(key)) throw ContractViolation("config is missing " + where);
    node = &(*node)[key];
  }
  return *node;
}

template <typename T>
T get(const json& config, std::initializer_list<const char*> path) {
  try {
    return at_path(config, path).get<T>();
  } catch (const json::exception& e) {
    std::string where;
    for (const char* k : path) where += where.empty() ? k : std::string(".") + k;
    throw ContractViolation("config value " + where + " has the wrong type: " + e.what());
  }
}

}  // namespace

RunConfig default_run_config(const std::string& command, const std::string& layout) {
  json c;
  c["command"] = command;
  c["layout"] = layout;
  c["seed"] = 1;
  c["out"] = "runs";
  if (command == "train-population") {
    c["network"] = network_defaults();
    c["ppo"] = ppo_defaults();
    c["training"] = training_defaults(layout, 2'000'000);
    c["population"] = {{"size", 4}, {"jsd_coef", 0.1}, {"checkpoint_every", 8}, {"eval_episodes", 5},
                       {"max_retries", 2}, {"mid_target", 0.5}, {"mid_low", 0.35}, {"mid_high", 0.65}};
  } else if (command == "train-hipt") {
    c["network"] = network_defaults();
    c["ppo"] = ppo_defaults();
    c["training"] = training_defaults(layout, 5'000'000);
    c["hipt"] = {{"num_priors", hierarchy::default_num_priors(layout)},
                 {"p_min", 20},
                 {"p_max", 40},
                 {"kappa_start", 1000.0},
                 {"kappa_end", 1.0},
                 {"alpha", 1.0},
                 {"anneal_steps", nullptr},
                 {"high_uses_shaping", true}};
    c["partners"] = nullptr;
    c["checkpoint_every"] = 50;
  } else if (command == "eval") {
    c["agent"] = nullptr;
    c["method"] = "agent";
    c["held_out"] = nullptr;
    c["training_population"] = nullptr;
    c["proxy"] = nullptr;
    c["episodes"] = 5;
    c["tiers"] = {"full", "mid", "random"};
  } else if (command == "crossplay") {
    c["population"] = nullptr;
    c["episodes"] = 5;
    c["tiers"] = {"full"};
    c["seat_balancing"] = true;
    c["tolerance"] = 0.2;
  } else if (command == "bc-train") {
    const eval::BcConfig b;
    c["train"] = nullptr;
    c["held_out"] = nullptr;
    c["bc"] = {{"trunk_widths", b.trunk_widths}, {"epochs", b.epochs}, {"batch_size", b.batch_size},
               {"learning_rate", b.learning_rate}, {"seats", b.seats}};
  } else if (command == "record") {
    c["agent"] = "scripted";
    c["partner"] = "random";
    c["episodes"] = 10;
    c["first_episode"] = 0;
    c["output"] = nullptr;
  } else if (command == "serve") {
    c["port"] = 8080;
    c["data_dir"] = "sessions";
    c["static_dir"] = nullptr;
    c["tick_ms"] = 150;
    c["horizon"] = env::kDefaultHorizon;
    c["episodes_per_round"] = 2;
    c["rounds"] = 10;
    c["agents"] = json::array();
    c["park_timeout_s"] = 120;
  } else if (command == "replay") {
    c["trajectory"] = nullptr;
  } else {
    throw ContractViolation("unknown command: " + command);
  }
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config file not found: " + path);
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw IoError("config file is not a JSON object: " + path);
    return j;
  } catch (const json::exception& e) {
    throw IoError("malformed config file " + path + ": " + e.what());
  }
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ContractViolation("override must look like key.path=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json::json_pointer ptr;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    ptr /= key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  config[ptr] = std::move(value);
}

RunConfig resolve_config(const std::string& command, const std::string& config_path,
                         const std::vector<std::string>& overrides) {
  json file = config_path.empty() ? json::object() : load_config_file(config_path);
  json flags = json::object();
  for (const auto& o : overrides) apply_override(flags, o);
  std::string layout = "cramped_room";
  if (file.contains("layout")) layout = file["layout"].get<std::string>();
  if (flags.contains("layout")) layout = flags["layout"].get<std::string>();
  json config = default_run_config(command, layout);
  config.merge_patch(file);
  config.merge_patch(flags);
  config["command"] = command;
  return config;
}

nn::NetworkSpec network_spec(const RunConfig& config) {
  nn::NetworkSpec s;
  s.trunk_widths = get<std::vector<int>>(config, {"network", "trunk_widths"});
  const auto act = get<std::string>(config, {"network", "activation"});
  if (act == "tanh") s.activation = nn::Activation::Tanh;
  else if (act == "relu") s.activation = nn::Activation::Relu;
  else throw ContractViolation("network.activation must be tanh or relu");
  s.recurrent_hidden = get<int>(config, {"network", "recurrent_hidden"});
  return s;
}

rl::PpoConfig ppo_config(const RunConfig& config) {
  rl::PpoConfig p;
  p.discount = get<double>(config, {"ppo", "discount"});
  p.gae_lambda = get<double>(config, {"ppo", "gae_lambda"});
  p.clip = get<double>(config, {"ppo", "clip"});
  p.value_coef = get<double>(config, {"ppo", "value_coef"});
  p.entropy_coef = get<double>(config, {"ppo", "entropy_coef"});
  p.entropy_coef_end = get<double>(config, {"ppo", "entropy_coef_end"});
  p.minibatch_size = get<int>(config, {"ppo", "minibatch_size"});
  p.epochs = get<int>(config, {"ppo", "epochs"});
  p.normalize_advantages = get<bool>(config, {"ppo", "normalize_advantages"});
  p.normalize_values = get<bool>(config, {"ppo", "normalize_values"});
  p.max_grad_norm = get<double>(config, {"ppo", "max_grad_norm"});
  p.chunk_length = get<int>(config, {"ppo", "chunk_length"});
  p.validate();
  return p;
}

population::PopulationConfig population_config(const RunConfig& config) {
  population::PopulationConfig c;
  c.trainer.network = network_spec(config);
  c.trainer.ppo = ppo_config(config);
  c.trainer.total_env_steps = get<long>(config, {"training", "total_env_steps"});
  c.trainer.episodes_per_update = get<int>(config, {"training", "episodes_per_update"});
  c.trainer.horizon = get<int>(config, {"training", "horizon"});
  c.trainer.shaping_anneal_fraction = get<double>(config, {"training", "shaping_anneal_fraction"});
  c.trainer.learning_rate = get<double>(config, {"training", "learning_rate"});
  c.trainer.lr_decay = get<double>(config, {"training", "lr_decay"});
  c.size = get<int>(config, {"population", "size"});
  c.jsd_coef = get<double>(config, {"population", "jsd_coef"});
  c.checkpoint_every = get<int>(config, {"population", "checkpoint_every"});
  c.eval_episodes = get<int>(config, {"population", "eval_episodes"});
  c.max_retries = get<int>(config, {"population", "max_retries"});
  c.mid_target = get<double>(config, {"population", "mid_target"});
  c.mid_low = get<double>(config, {"population", "mid_low"});
  c.mid_high = get<double>(config, {"population", "mid_high"});
  c.seed = get<std::uint64_t>(config, {"seed"});
  c.validate();
  return c;
}

hierarchy::HiptConfig hipt_config(const RunConfig& config) {
  hierarchy::HiptConfig c;
  c.network = network_spec(config);
  c.ppo = ppo_config(config);
  c.total_env_steps = get<long>(config, {"training", "total_env_steps"});
  c.episodes_per_update = get<int>(config, {"training", "episodes_per_update"});
  c.horizon = get<int>(config, {"training", "horizon"});
  c.shaping_anneal_fraction = get<double>(config, {"training", "shaping_anneal_fraction"});
  c.learning_rate = get<double>(config, {"training", "learning_rate"});
  c.lr_decay = get<double>(config, {"training", "lr_decay"});
  c.num_priors = get<int>(config, {"hipt", "num_priors"});
  c.p_min = get<int>(config, {"hipt", "p_min"});
  c.p_max = get<int>(config, {"hipt", "p_max"});
  c.influence.kappa_start = get<double>(config, {"hipt", "kappa_start"});
  c.influence.kappa_end = get<double>(config, {"hipt", "kappa_end"});
  c.influence.alpha = get<double>(config, {"hipt", "alpha"});
  const json& anneal = at_path(config, {"hipt", "anneal_steps"});
  c.influence.horizon_steps = anneal.is_null() ? c.total_env_steps : anneal.get<long>();
  c.high_uses_shaping = get<bool>(config, {"hipt", "high_uses_shaping"});
  c.validate();
  return c;
}

eval::BcConfig bc_config(const RunConfig& config) {
  eval::BcConfig b;
  b.trunk_widths = get<std::vector<int>>(config, {"bc", "trunk_widths"});
  b.epochs = get<int>(config, {"bc", "epochs"});
  b.batch_size = get<int>(config, {"bc", "batch_size"});
  b.learning_rate = get<double>(config, {"bc", "learning_rate"});
  b.seats = get<std::vector<int>>(config, {"bc", "seats"});
  b.seed = get<std::uint64_t>(config, {"seed"});
  return b;
}

}  // namespace hipt::service
