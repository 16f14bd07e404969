#pragma once

#include <cstdint>
#include <vector>

#include "hipt/nn/network.hpp"

namespace hipt::nn {

// Learning rate decaying linearly from `start` to `start / decay` over
// `total_steps` optimizer steps, constant afterwards.
struct LinearDecaySchedule {
  double start = 1e-3;
  double decay = 1.0;
  std::int64_t total_steps = 1;

  double at(std::int64_t step) const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  ParamVector first_moment;
  ParamVector second_moment;
  std::int64_t step = 0;

  static AdamState for_params(const ParamStore& params);
};

// One bias-corrected Adam step at the schedule's rate for state.step.
// Throws DivergenceError, leaving params and moments untouched, when the
// gradient has non-finite entries.
void adam_update(ParamStore& params, const Gradient& grad, AdamState& state, const LinearDecaySchedule& schedule,
                 const AdamConfig& config = {});

}  // namespace hipt::nn
