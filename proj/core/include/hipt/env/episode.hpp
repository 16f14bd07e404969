#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hipt/env/world.hpp"
#include "hipt/util/rng.hpp"

namespace hipt::env {

using ActionDistribution = std::array<double, kNumActions>;

// A seat controller. One instance drives one seat for one episode at a time;
// reset() is called before every episode.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(std::uint64_t /*seed*/) {}
  virtual ActionDistribution act(const WorldState& state, const Layout& layout, int seat) = 0;
};

class StayPolicy final : public Policy {
 public:
  ActionDistribution act(const WorldState&, const Layout&, int) override;
};

class UniformRandomPolicy final : public Policy {
 public:
  ActionDistribution act(const WorldState&, const Layout&, int) override;
};

// Deterministic greedy cook: fills pots, fetches a dish when a pot is cooking,
// plates and serves. Shortest paths avoid the partner's cell.
class ScriptedCookPolicy final : public Policy {
 public:
  ActionDistribution act(const WorldState& state, const Layout& layout, int seat) override;
  static Action choose(const WorldState& state, const Layout& layout, int seat);
};

// One tick of a logged episode.
struct StepLog {
  int tick = 0;  // tick at which the joint action was taken
  JointAction joint{};
  double sparse_reward = 0.0;
  std::array<ShapedReward, 2> shaped{};
  std::vector<Event> events;
  std::string state_digest;  // digest of the state after the step
};

struct SeatStep {
  Action action = Action::Stay;
  double log_prob = 0.0;
  double reward = 0.0;  // sparse + shaped for this seat
};

struct EpisodeRecord {
  std::vector<StepLog> steps;
  std::array<std::vector<SeatStep>, 2> seats;
  double episode_return = 0.0;  // sum of sparse rewards
  int deliveries = 0;
  WorldState final_state;
};

ActionDistribution sanitize(const ActionDistribution& dist);

// Plays exactly `horizon` ticks. Identical inputs reproduce the record bit for bit.
EpisodeRecord run_episode(Policy& seat0, Policy& seat1, const Layout& layout, int horizon,
                          const ShapingConfig& shaping, std::uint64_t seed);

struct ReturnStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over episodes
  int episodes = 0;
  std::vector<double> returns;
};

ReturnStats summarize_returns(std::vector<double> returns);

// Sparse-score statistics of `episodes` unshaped episodes per seat order. With
// seat balancing the pair also plays the swapped assignment.
ReturnStats measure_returns(Policy& first, Policy& second, const Layout& layout, int episodes, int horizon,
                            std::uint64_t seed, bool seat_balanced = true);

}  // namespace hipt::env
