#pragma once

#include <vector>

#include "hipt/env/episode.hpp"
#include "hipt/hipt/agent.hpp"
#include "hipt/util/rng.hpp"

namespace hipt::hierarchy {

struct LowStep {
  int prior = 0;
  int action = 0;
  double log_prob = 0.0;
  double reward = 0.0;         // sparse + shaped, the low-level training reward
  double sparse_reward = 0.0;
  double influence = 0.0;
  double value = 0.0;          // value head output, in the head's units
};

struct HighStep {
  int start_tick = 0;
  int prior = 0;
  int sampled_horizon = 0;
  int horizon = 0;  // executed; shorter than sampled only when cut by the episode end
  double reward = 0.0;
  double log_prob = 0.0;
  double value = 0.0;
};

struct HiptEpisode {
  int seat = 0;
  nn::Matrix observations;  // input_dim x T, the agent's view
  std::vector<nn::Vector> hidden_at;  // recurrent state before each step (recurrent nets only)
  std::vector<LowStep> low;
  std::vector<HighStep> high;
  double episode_return = 0.0;
};

// Either a network driven by its low head under prior 0, or any seat controller.
struct Partner {
  const nn::ParamStore* params = nullptr;
  env::Policy* policy = nullptr;
};

struct RolloutSettings {
  int horizon = env::kDefaultHorizon;
  double kappa = 1000.0;
  double alpha = 1.0;
  env::ShapingConfig shaping = env::no_shaping();
  bool high_uses_shaping = true;
};

// Lockstep rollout of one episode per partner; seats[i] is the agent's seat in episode i.
std::vector<HiptEpisode> rollout_batch(const HiptAgent& agent, const std::vector<Partner>& partners,
                                       const std::vector<int>& seats, const env::Layout& layout,
                                       const RolloutSettings& settings, Rng& rng);

HiptEpisode rollout_episode(const HiptAgent& agent, const Partner& partner, int seat, const env::Layout& layout,
                            const RolloutSettings& settings, Rng& rng);

}  // namespace hipt::hierarchy
