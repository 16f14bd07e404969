#pragma once

#include <cstdint>
#include <vector>

#include "hipt/env/layout.hpp"
#include "hipt/env/world.hpp"
#include "hipt/nn/adam.hpp"
#include "hipt/nn/network.hpp"
#include "hipt/rl/learner.hpp"
#include "hipt/rl/ppo.hpp"

namespace hipt::population {

struct TrainerConfig {
  nn::NetworkSpec network;  // input_dim is taken from the layout
  rl::PpoConfig ppo;
  double learning_rate = 1e-3;
  double lr_decay = 3.0;  // final rate = learning_rate / lr_decay
  int episodes_per_update = 8;
  int horizon = env::kDefaultHorizon;
  long total_env_steps = 2'000'000;
  double shaping_anneal_fraction = 0.5;  // shaping factor reaches 0 at this fraction of training

  void validate() const;
};

// Shaping factor after `steps` of `total` environment steps.
double shaping_factor(long steps, long total, double anneal_fraction);

struct IterationStats {
  long env_steps = 0;  // cumulative
  double mean_return = 0.0;         // sparse score per episode
  double mean_shaped_return = 0.0;  // per seat, shaped components only
  rl::UpdateDiagnostics update;
};

// Self-play PPO for one agent: both seats are driven by the learner and every
// seat's steps are training data.
class SelfPlayTrainer {
 public:
  SelfPlayTrainer(const env::Layout& layout, const TrainerConfig& config, std::uint64_t seed);

  // One batch of lockstep episodes followed by one PPO update. Peer parameters,
  // when given, feed the diversity term with weight `jsd_coef`.
  IterationStats iterate(const std::vector<const nn::ParamStore*>& peers = {}, double jsd_coef = 0.0);

  bool finished() const { return env_steps_ >= config_.total_env_steps; }
  long env_steps() const { return env_steps_; }
  int updates() const { return updates_; }
  double progress() const;
  const nn::ParamStore& params() const { return params_; }
  const nn::ParamStore& initial_params() const { return initial_; }
  const TrainerConfig& config() const { return config_; }

 private:
  env::Layout layout_;
  TrainerConfig config_;
  nn::Network network_;
  nn::ParamStore params_;
  nn::ParamStore initial_;
  nn::AdamState adam_;
  nn::LinearDecaySchedule schedule_;
  rl::RunningMeanStd value_scale_;
  Rng rng_;
  long env_steps_ = 0;
  int updates_ = 0;
};

// Network spec for a layout: copies `base` and sets the input width.
nn::NetworkSpec spec_for_layout(const nn::NetworkSpec& base, const env::Layout& layout);

}  // namespace hipt::population
