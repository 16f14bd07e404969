#include "hipt/population/network_policy.hpp"

#include "hipt/env/observation.hpp"

namespace hipt::population {

NetworkPolicy::NetworkPolicy(nn::ParamStore params, int prior)
    : params_(std::move(params)), network_(params_.spec), prior_(prior) {
  if (prior_ < 0 || prior_ >= params_.spec.num_priors) throw ContractViolation("NetworkPolicy: prior out of range");
  if (params_.spec.num_actions != env::kNumActions) throw DimensionMismatch("NetworkPolicy: action count");
  hidden_ = network_.initial_hidden(1);
}

void NetworkPolicy::reset(std::uint64_t) { hidden_ = network_.initial_hidden(1); }

env::ActionDistribution NetworkPolicy::act(const env::WorldState& state, const env::Layout& layout, int seat) {
  features_.resize(static_cast<std::size_t>(params_.spec.input_dim));
  if (env::observation_size(layout) != params_.spec.input_dim) {
    throw DimensionMismatch("NetworkPolicy: network input does not match layout " + layout.name);
  }
  env::encode_observation(state, layout, seat, features_.data());
  const nn::Matrix x = Eigen::Map<const nn::Matrix>(features_.data(), params_.spec.input_dim, 1);
  const auto out = network_.forward(params_, x, hidden_);
  hidden_ = out.hidden;
  const nn::Matrix p = low_policy(out, prior_, env::kNumActions);
  env::ActionDistribution dist{};
  for (int a = 0; a < env::kNumActions; ++a) dist[a] = p(a, 0);
  return dist;
}

nn::Matrix low_policy(const nn::Outputs& out, int prior, int num_actions) {
  return nn::softmax(out.low_block(prior, num_actions));
}

}  // namespace hipt::population
