#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hipt/env/episode.hpp"
#include "hipt/population/population.hpp"

namespace hipt::eval {

// Unshaped sparse scores over `episodes` per seat, agent in both seats.
env::ReturnStats evaluate_pair(env::Policy& agent, env::Policy& partner, const env::Layout& layout, int episodes,
                               std::uint64_t seed, int horizon = env::kDefaultHorizon);

struct EvalSuite {
  population::PartnerPopulation held_out;
  std::vector<population::Tier> tiers{population::Tier::Full, population::Tier::Mid, population::Tier::Random};
  int episodes = 5;  // per (member, tier, seat)
  int horizon = env::kDefaultHorizon;
  std::uint64_t seed = 1;

  void validate() const;
};

// Throws ContractViolation when any slot seed appears in both populations.
void check_disjoint(const population::PartnerPopulation& training, const population::PartnerPopulation& held_out);

struct EvalRow {
  std::string layout;
  std::string method;
  std::string partner_type;
  double mean = 0.0;
  double std = 0.0;
  int n = 0;

  friend bool operator==(const EvalRow&, const EvalRow&) = default;
};

// One row per tier plus an "all" row pooling every tier and both seats.
std::vector<EvalRow> evaluate_vs_population(env::Policy& agent, const std::string& method, const env::Layout& layout,
                                            const EvalSuite& suite);

// Pooled row over every evaluated episode of a single partner.
EvalRow evaluate_vs_partner(env::Policy& agent, env::Policy& partner, const std::string& method,
                            const std::string& partner_type, const env::Layout& layout, int episodes,
                            std::uint64_t seed, int horizon = env::kDefaultHorizon);

}  // namespace hipt::eval
