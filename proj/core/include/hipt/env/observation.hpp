#pragma once

#include <vector>

#include "hipt/env/world.hpp"

namespace hipt::env {

// Egocentric flat encoding of a WorldState. Block order:
//   per player (own seat first): position one-hot [cells], facing [4], held [4],
//                                faced-cell terrain one-hot [6]
//   per cell: counter item {onion, dish} [2 * cells]
//   per cell: pot onion count one-hot [4 * cells], pot timer / cook_time [cells]
//   tick / kDefaultHorizon [1]
// The length depends only on the grid dimensions.
int observation_size(const Layout& layout);

std::vector<double> encode_observation(const WorldState& state, const Layout& layout, int agent_index);
void encode_observation(const WorldState& state, const Layout& layout, int agent_index, double* out);

// Inverse of encode_observation (score is not observable and is returned as 0).
WorldState decode_observation(const std::vector<double>& features, const Layout& layout, int agent_index);

}  // namespace hipt::env
