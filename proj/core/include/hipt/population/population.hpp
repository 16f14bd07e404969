#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hipt/env/layout.hpp"
#include "hipt/nn/network.hpp"
#include "hipt/population/self_play.hpp"

namespace hipt::rl {
class MetricsLog;
}

namespace hipt::population {

enum class Tier { Full, Mid, Random };

std::string to_string(Tier tier);
Tier parse_tier(const std::string& text);

struct CheckpointRecord {
  long env_steps = 0;
  nn::ParamStore params;
  double self_play_return = 0.0;  // measured without shaping
  double self_play_std = 0.0;
};

struct PopulationSlot {
  std::uint64_t seed = 0;
  nn::ParamStore full;
  nn::ParamStore mid;
  nn::ParamStore random;
  double full_return = 0.0;
  double mid_return = 0.0;
  double random_return = 0.0;
  long full_steps = 0;
  long mid_steps = 0;
  bool mid_in_band = false;
  int attempts = 1;
  // Measured self-play return of every recorded checkpoint, in order.
  std::vector<std::pair<long, double>> history;

  const nn::ParamStore& tier(Tier t) const;
  double tier_return(Tier t) const;

  friend bool operator==(const PopulationSlot&, const PopulationSlot&) = default;
};

struct PartnerPopulation {
  std::string layout;
  std::vector<PopulationSlot> slots;

  std::size_t size() const { return slots.size(); }
  // Every (slot, tier) entry, slot-major: 3N policies.
  std::vector<std::pair<int, Tier>> entries() const;

  friend bool operator==(const PartnerPopulation&, const PartnerPopulation&) = default;
};

struct PopulationConfig {
  int size = 4;
  TrainerConfig trainer;
  double jsd_coef = 0.1;  // annealed linearly to 0 over training
  int checkpoint_every = 8;  // updates between recorded checkpoints
  int eval_episodes = 10;    // per seat order when measuring self-play return
  int max_retries = 2;
  double mid_target = 0.5;
  double mid_low = 0.35;
  double mid_high = 0.65;
  std::uint64_t seed = 1;

  void validate() const;
};

// Index of the checkpoint whose return is nearest `target` x `full_return`;
// `in_band` reports whether it lies in [low, high] x full_return.
int select_mid_checkpoint(const std::vector<CheckpointRecord>& records, double full_return, double target,
                          double low, double high, bool& in_band);

double measure_self_play(const nn::ParamStore& params, const env::Layout& layout, int episodes, int horizon,
                         std::uint64_t seed, double* stddev = nullptr);

struct PopulationProgress {
  int slot = 0;
  IterationStats stats;
};

// Round-robin self-play of `size` agents with the diversity term evaluated
// against the previous round's frozen snapshots of the other members.
PartnerPopulation train_population(const env::Layout& layout, const PopulationConfig& config,
                                   rl::MetricsLog* metrics = nullptr,
                                   const std::function<void(const PopulationProgress&)>& on_progress = {});

// Archive: <dir>/manifest.json plus one model file per slot and tier.
void save_population(const PartnerPopulation& population, const std::string& dir);
PartnerPopulation load_population(const std::string& dir);

}  // namespace hipt::population
