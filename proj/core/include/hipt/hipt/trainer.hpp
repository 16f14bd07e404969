#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hipt/env/layout.hpp"
#include "hipt/hipt/agent.hpp"
#include "hipt/hipt/rollout.hpp"
#include "hipt/nn/adam.hpp"
#include "hipt/population/population.hpp"
#include "hipt/rl/learner.hpp"

namespace hipt::hierarchy {

// Uniform draws over a fixed list of partner entries.
class PartnerSampler {
 public:
  explicit PartnerSampler(std::size_t count);
  std::size_t sample(Rng& rng) const;
  std::size_t size() const { return count_; }

 private:
  std::size_t count_;
};

// Every tier of every slot, slot-major.
std::vector<nn::ParamStore> flatten_population(const population::PartnerPopulation& population);

struct HiptIteration {
  long env_steps = 0;
  double kappa = 0.0;
  double mean_return = 0.0;
  double mean_influence = 0.0;
  double mean_high_reward = 0.0;
  double mean_segments = 0.0;
  rl::UpdateDiagnostics update;
  std::vector<std::size_t> partners;  // entry index per episode of this batch
};

// Converts rolled-out episodes into learner chunks: per-level GAE, the high
// level treating each decision as one step.
std::vector<rl::SequenceChunk> build_chunks(const std::vector<HiptEpisode>& episodes, const rl::PpoConfig& ppo,
                                            rl::RunningMeanStd* low_scale, rl::RunningMeanStd* high_scale,
                                            bool recurrent);

class HiptTrainer {
 public:
  HiptTrainer(const env::Layout& layout, const HiptConfig& config, std::vector<nn::ParamStore> partners,
              std::uint64_t seed);

  HiptIteration iterate();

  bool finished() const { return env_steps_ >= config_.total_env_steps; }
  long env_steps() const { return env_steps_; }
  int updates() const { return updates_; }
  double kappa() const { return anneal(config_.influence, env_steps_); }
  const HiptAgent& agent() const { return agent_; }
  const HiptConfig& config() const { return config_; }
  HiptCheckpointInfo checkpoint_info() const;

 private:
  env::Layout layout_;
  HiptConfig config_;
  std::vector<nn::ParamStore> partners_;
  PartnerSampler sampler_;
  nn::Network network_;
  HiptAgent agent_;
  nn::AdamState adam_;
  nn::LinearDecaySchedule schedule_;
  rl::RunningMeanStd low_scale_;
  rl::RunningMeanStd high_scale_;
  Rng rng_;
  long env_steps_ = 0;
  int updates_ = 0;
};

}  // namespace hipt::hierarchy
