#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "hipt/eval/behavior_cloning.hpp"
#include "hipt/hipt/agent.hpp"
#include "hipt/population/population.hpp"

namespace hipt::service {

// Effective configuration of one command: defaults, then the config file,
// then command-line overrides. Persisted verbatim beside the run's outputs.
using RunConfig = nlohmann::json;

struct LayoutHyperparameters {
  double learning_rate = 1e-3;
  double lr_decay = 3.0;
};

// Per-layout optimizer settings used by the reference experiments.
LayoutHyperparameters layout_hyperparameters(const std::string& layout);

RunConfig default_run_config(const std::string& command, const std::string& layout);
RunConfig load_config_file(const std::string& path);

// "a.b.c=value"; the value is parsed as JSON when possible, else taken as a string.
void apply_override(RunConfig& config, const std::string& assignment);

// defaults(command, layout) <- file <- overrides; the layout itself is resolved
// with the same precedence before the defaults are built.
RunConfig resolve_config(const std::string& command, const std::string& config_path,
                         const std::vector<std::string>& overrides);

nn::NetworkSpec network_spec(const RunConfig& config);
rl::PpoConfig ppo_config(const RunConfig& config);
population::PopulationConfig population_config(const RunConfig& config);
hierarchy::HiptConfig hipt_config(const RunConfig& config);
eval::BcConfig bc_config(const RunConfig& config);

}  // namespace hipt::service
