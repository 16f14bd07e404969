#pragma once

#include <span>
#include <vector>

#include "hipt/nn/network.hpp"

namespace hipt::hierarchy {

// sum_z pi_low(. | z) pi_high(z). `low` holds one conditioned distribution per
// column (actions x priors).
nn::Vector marginal_low_policy(const nn::Vector& high, const nn::Matrix& low);

// KL(pi_low(. | active) || marginal) in nats. Marginal entries that vanish
// where the conditioned policy has mass are floored at kSupportFloor so the
// result stays finite.
double influence_reward(const nn::Vector& high, const nn::Matrix& low, int active);

inline constexpr double kSupportFloor = 1e-300;

// Mean over the executed segment of alpha * env_reward + kappa * influence.
double high_level_reward(std::span<const double> env_rewards, std::span<const double> influence, double alpha,
                         double kappa);

struct InfluenceSchedule {
  double kappa_start = 1000.0;
  double kappa_end = 1.0;
  double alpha = 1.0;
  long horizon_steps = 5'000'000;

  void validate() const;
};

// Linear from kappa_start to kappa_end over horizon_steps, then held at kappa_end.
double anneal(const InfluenceSchedule& schedule, long env_steps_done);

}  // namespace hipt::hierarchy
