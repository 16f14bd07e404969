#pragma once

#include <span>

#include "hipt/nn/network.hpp"

namespace hipt::population {

// Mean over a batch of states of H(mixture) - mean_n H(member_n), where each
// entry of `members` holds one member's action distributions (actions x batch)
// and the mixture is their unweighted average.
double jsd_term(std::span<const nn::Matrix> members);

}  // namespace hipt::population
