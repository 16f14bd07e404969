#pragma once

#include "hipt/env/episode.hpp"
#include "hipt/nn/network.hpp"

namespace hipt::population {

// Plays the low-level head of a network under a fixed prior as a seat
// controller, carrying the recurrent state through the episode.
class NetworkPolicy final : public env::Policy {
 public:
  explicit NetworkPolicy(nn::ParamStore params, int prior = 0);

  void reset(std::uint64_t seed) override;
  env::ActionDistribution act(const env::WorldState& state, const env::Layout& layout, int seat) override;

  const nn::ParamStore& params() const { return params_; }

 private:
  nn::ParamStore params_;
  nn::Network network_;
  int prior_;
  nn::Matrix hidden_;
  std::vector<double> features_;
};

// Action probabilities of the low head for prior `prior`, one column per sample.
nn::Matrix low_policy(const nn::Outputs& out, int prior, int num_actions);

}  // namespace hipt::population
