#include "hipt/hipt/influence.hpp"

#include <algorithm>
#include <cmath>

#include "hipt/util/error.hpp"

namespace hipt::hierarchy {

nn::Vector marginal_low_policy(const nn::Vector& high, const nn::Matrix& low) {
  if (high.size() != low.cols() || high.size() == 0) throw DimensionMismatch("marginal_low_policy: prior count");
  return low * high;
}

double influence_reward(const nn::Vector& high, const nn::Matrix& low, int active) {
  if (active < 0 || active >= low.cols()) throw ContractViolation("influence_reward: prior out of range");
  const nn::Vector marginal = marginal_low_policy(high, low);
  double kl = 0.0;
  for (Eigen::Index a = 0; a < low.rows(); ++a) {
    const double p = low(a, active);
    if (p > 0.0) kl += p * (std::log(p) - std::log(std::max(marginal[a], kSupportFloor)));
  }
  return kl;
}

double high_level_reward(std::span<const double> env_rewards, std::span<const double> influence, double alpha,
                         double kappa) {
  if (env_rewards.size() != influence.size()) throw DimensionMismatch("high_level_reward: segment lengths differ");
  if (env_rewards.empty()) throw ContractViolation("high_level_reward: empty segment");
  double sum = 0.0;
  for (std::size_t i = 0; i < env_rewards.size(); ++i) sum += alpha * env_rewards[i] + kappa * influence[i];
  return sum / static_cast<double>(env_rewards.size());
}

void InfluenceSchedule::validate() const {
  if (kappa_start < 0.0 || kappa_end < 0.0) throw ContractViolation("influence coefficients must be >= 0");
  if (horizon_steps < 1) throw ContractViolation("influence anneal horizon must be >= 1");
}

double anneal(const InfluenceSchedule& schedule, long env_steps_done) {
  if (env_steps_done < 0) throw ContractViolation("anneal: negative step count");
  if (env_steps_done >= schedule.horizon_steps) return schedule.kappa_end;
  const double frac = static_cast<double>(env_steps_done) / static_cast<double>(schedule.horizon_steps);
  return schedule.kappa_start + (schedule.kappa_end - schedule.kappa_start) * frac;
}

}  // namespace hipt::hierarchy
