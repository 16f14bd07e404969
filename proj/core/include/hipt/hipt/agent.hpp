#pragma once

#include <cstdint>
#include <string>

#include "hipt/env/episode.hpp"
#include "hipt/hipt/influence.hpp"
#include "hipt/nn/network.hpp"
#include "hipt/rl/ppo.hpp"
#include "hipt/util/rng.hpp"

namespace hipt::hierarchy {

// Sub-policy counts used per bundled layout; 4 elsewhere.
int default_num_priors(const std::string& layout_name);

struct HiptConfig {
  nn::NetworkSpec network;  // input_dim and num_priors are filled in
  int num_priors = 4;
  int p_min = 20;
  int p_max = 40;
  InfluenceSchedule influence;
  rl::PpoConfig ppo;
  double learning_rate = 1e-3;
  double lr_decay = 3.0;
  int episodes_per_update = 8;
  int horizon = env::kDefaultHorizon;
  long total_env_steps = 5'000'000;
  double shaping_anneal_fraction = 0.5;
  bool high_uses_shaping = true;  // shaped components enter the high-level reward too

  void validate() const;
};

struct HiptAgent {
  nn::ParamStore params;
  int p_min = 20;
  int p_max = 40;

  int num_priors() const { return params.spec.num_priors; }
};

// Seat controller running the two-level policy: every p ~ U{p_min..p_max}
// steps a prior is drawn from the high head, and the low head conditioned on
// it picks actions. The recurrent state persists across segments.
class HiptPolicy final : public env::Policy {
 public:
  explicit HiptPolicy(HiptAgent agent);

  void reset(std::uint64_t seed) override;
  env::ActionDistribution act(const env::WorldState& state, const env::Layout& layout, int seat) override;

  int active_prior() const { return prior_; }
  int segment_remaining() const { return remaining_; }
  const HiptAgent& agent() const { return agent_; }

 private:
  HiptAgent agent_;
  nn::Network network_;
  Rng rng_;
  nn::Matrix hidden_;
  int prior_ = 0;
  int remaining_ = 0;
  std::vector<double> features_;
};

struct HiptCheckpointInfo {
  std::string layout;
  int p_min = 20;
  int p_max = 40;
  InfluenceSchedule influence;
  long env_steps = 0;
  int updates = 0;
};

// Writes <prefix>.model and the JSON sidecar <prefix>.json.
void save_hipt_checkpoint(const std::string& prefix, const HiptAgent& agent, const HiptCheckpointInfo& info);
HiptAgent load_hipt_checkpoint(const std::string& prefix, HiptCheckpointInfo* info = nullptr);

}  // namespace hipt::hierarchy
