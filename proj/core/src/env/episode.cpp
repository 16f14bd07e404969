#include "hipt/env/episode.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace hipt::env {
namespace {

constexpr std::array<Action, 4> kMoves = {Action::North, Action::South, Action::East, Action::West};

Direction to_direction(Action a) {
  switch (a) {
    case Action::North: return Direction::North;
    case Action::South: return Direction::South;
    case Action::East: return Direction::East;
    default: return Direction::West;
  }
}

ActionDistribution one_hot(Action a) {
  ActionDistribution d{};
  d[static_cast<int>(a)] = 1.0;
  return d;
}

// Action that brings `me` to interact with any cell satisfying `is_target`.
// Returns nullopt when no target is reachable.
template <typename Pred>
std::optional<Action> approach(const WorldState& s, const Layout& layout, int seat, Pred is_target) {
  const PlayerState& me = s.players[seat];
  const Position other = s.players[1 - seat].position;

  // Already adjacent: face and interact.
  for (Action a : kMoves) {
    const Position t = step_towards(me.position, to_direction(a));
    if (layout.in_bounds(t) && is_target(t)) {
      return me.facing == to_direction(a) ? Action::Interact : a;
    }
  }

  for (int pass = 0; pass < 2; ++pass) {
    const bool avoid_partner = pass == 0;
    std::vector<int> first_move(static_cast<std::size_t>(layout.cell_count()), -1);
    std::deque<Position> frontier;
    first_move[layout.index(me.position)] = 4;
    frontier.push_back(me.position);
    while (!frontier.empty()) {
      const Position p = frontier.front();
      frontier.pop_front();
      for (int m = 0; m < 4; ++m) {
        const Position n = step_towards(p, to_direction(kMoves[m]));
        if (layout.at(n) != Cell::Floor) continue;
        if (avoid_partner && n == other) continue;
        if (first_move[layout.index(n)] != -1) continue;
        const int origin = first_move[layout.index(p)];
        first_move[layout.index(n)] = origin == 4 ? m : origin;
        for (Action a : kMoves) {
          const Position t = step_towards(n, to_direction(a));
          if (layout.in_bounds(t) && is_target(t)) return kMoves[first_move[layout.index(n)]];
        }
        frontier.push_back(n);
      }
    }
  }
  return std::nullopt;
}

}  // namespace

ActionDistribution StayPolicy::act(const WorldState&, const Layout&, int) { return one_hot(Action::Stay); }

ActionDistribution UniformRandomPolicy::act(const WorldState&, const Layout&, int) {
  ActionDistribution d;
  d.fill(1.0 / kNumActions);
  return d;
}

Action ScriptedCookPolicy::choose(const WorldState& s, const Layout& layout, int seat) {
  const PlayerState& me = s.players[seat];
  const PlayerState& partner = s.players[1 - seat];
  const auto pot_cells = layout.pot_cells();
  const auto pot_at = [&](Position p) -> const PotState* {
    const int idx = layout.index(p);
    for (std::size_t i = 0; i < pot_cells.size(); ++i) {
      if (pot_cells[i] == idx) return &s.pots[i];
    }
    return nullptr;
  };
  const auto kind_is = [&](Cell kind) { return [&layout, kind](Position p) { return layout.at(p) == kind; }; };

  bool any_cooking = false;
  bool any_needs_onion = false;
  for (const auto& pot : s.pots) {
    any_cooking = any_cooking || pot.onions == 3;
    any_needs_onion = any_needs_onion || pot.onions < 3;
  }

  std::optional<Action> plan;
  switch (me.held) {
    case Item::Soup:
      plan = approach(s, layout, seat, kind_is(Cell::ServingCounter));
      break;
    case Item::Dish: {
      // Wait facing a cooking pot; only interact once it is ready.
      plan = approach(s, layout, seat, [&](Position p) {
        const PotState* pot = pot_at(p);
        return pot != nullptr && pot->onions == 3;
      });
      if (plan == Action::Interact) {
        const PotState* faced = pot_at(step_towards(me.position, me.facing));
        if (faced == nullptr || !faced->ready()) plan = Action::Stay;
      }
      break;
    }
    case Item::Onion:
      plan = approach(s, layout, seat, [&](Position p) {
        const PotState* pot = pot_at(p);
        return pot != nullptr && pot->onions < 3;
      });
      break;
    case Item::None: {
      const bool partner_has_dish = partner.held == Item::Dish || partner.held == Item::Soup;
      if (any_cooking && !partner_has_dish) {
        plan = approach(s, layout, seat, kind_is(Cell::DishDispenser));
      } else if (any_needs_onion) {
        plan = approach(s, layout, seat, [&](Position p) {
          return layout.at(p) == Cell::OnionDispenser ||
                 (layout.at(p) == Cell::Counter && s.counter_items[layout.index(p)] == Item::Onion);
        });
      }
      break;
    }
  }
  return plan.value_or(Action::Stay);
}

ActionDistribution ScriptedCookPolicy::act(const WorldState& state, const Layout& layout, int seat) {
  return one_hot(choose(state, layout, seat));
}

ActionDistribution sanitize(const ActionDistribution& dist) {
  double total = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ContractViolation("policy returned an invalid probability");
    total += p;
  }
  if (!(total > 0.0)) throw ContractViolation("policy returned an all-zero distribution");
  ActionDistribution out = dist;
  for (double& p : out) p /= total;
  return out;
}

EpisodeRecord run_episode(Policy& seat0, Policy& seat1, const Layout& layout, int horizon,
                          const ShapingConfig& shaping, std::uint64_t seed) {
  EpisodeRecord record;
  record.steps.reserve(static_cast<std::size_t>(horizon));
  std::array<Policy*, 2> policies{&seat0, &seat1};
  seat0.reset(derive_seed(seed, 100));
  seat1.reset(derive_seed(seed, 101));
  Rng rng(seed);
  WorldState state = reset(layout);
  for (int t = 0; t < horizon; ++t) {
    JointAction joint{};
    std::array<double, 2> log_probs{};
    for (int seat = 0; seat < 2; ++seat) {
      const auto dist = sanitize(policies[seat]->act(state, layout, seat));
      const int a = rng.categorical(dist);
      joint[seat] = static_cast<Action>(a);
      log_probs[seat] = std::log(dist[a]);
    }
    StepOutcome out = step(state, joint, layout, shaping, horizon);
    StepLog log;
    log.tick = state.tick;
    log.joint = joint;
    log.sparse_reward = out.sparse_reward;
    log.shaped = out.shaped;
    log.events = out.events;
    log.state_digest = state_digest(out.next_state);
    for (int seat = 0; seat < 2; ++seat) {
      record.seats[seat].push_back({joint[seat], log_probs[seat], out.sparse_reward + out.shaped[seat].total()});
    }
    for (const auto& e : out.events) record.deliveries += e.kind == EventKind::SoupDelivered ? 1 : 0;
    record.episode_return += out.sparse_reward;
    record.steps.push_back(std::move(log));
    state = std::move(out.next_state);
  }
  record.final_state = std::move(state);
  return record;
}

ReturnStats summarize_returns(std::vector<double> returns) {
  ReturnStats out;
  out.episodes = static_cast<int>(returns.size());
  if (returns.empty()) return out;
  double sum = 0.0;
  for (double r : returns) sum += r;
  out.mean = sum / out.episodes;
  if (out.episodes > 1) {
    double sq = 0.0;
    for (double r : returns) sq += (r - out.mean) * (r - out.mean);
    out.stddev = std::sqrt(sq / (out.episodes - 1));
  }
  out.returns = std::move(returns);
  return out;
}

ReturnStats measure_returns(Policy& first, Policy& second, const Layout& layout, int episodes, int horizon,
                            std::uint64_t seed, bool seat_balanced) {
  if (episodes < 1) throw ContractViolation("measure_returns: need at least one episode");
  std::vector<double> returns;
  const ShapingConfig off = no_shaping();
  for (int i = 0; i < episodes; ++i) {
    returns.push_back(run_episode(first, second, layout, horizon, off, derive_seed(seed, 2 * i)).episode_return);
    if (seat_balanced) {
      returns.push_back(run_episode(second, first, layout, horizon, off, derive_seed(seed, 2 * i + 1)).episode_return);
    }
  }
  return summarize_returns(std::move(returns));
}

}  // namespace hipt::env
