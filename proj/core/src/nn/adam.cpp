#include "hipt/nn/adam.hpp"

#include <algorithm>
#include <cmath>

namespace hipt::nn {

double LinearDecaySchedule::at(std::int64_t step) const {
  const double frac = total_steps <= 0 ? 1.0 : std::clamp(static_cast<double>(step) / total_steps, 0.0, 1.0);
  const double end = start / decay;
  return start + (end - start) * frac;
}

AdamState AdamState::for_params(const ParamStore& params) {
  return AdamState{ParamVector(params.size(), 0.0), ParamVector(params.size(), 0.0), 0};
}

void adam_update(ParamStore& params, const Gradient& grad, AdamState& state, const LinearDecaySchedule& schedule,
                 const AdamConfig& config) {
  const std::size_t n = params.values.size();
  if (grad.values.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
    throw DimensionMismatch("adam_update: parameter, gradient and moment sizes differ");
  }
  if (!grad.finite()) throw DivergenceError("adam_update: non-finite gradient entry");
  const double lr = schedule.at(state.step);
  ++state.step;
  const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad.values[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g * g;
    params.values[i] -= lr * (m / bias1) / (std::sqrt(v / bias2) + config.epsilon);
  }
}

}  // namespace hipt::nn
