#include "hipt/env/world.hpp"

#include <algorithm>

#include "hipt/util/digest.hpp"

namespace hipt::env {
namespace {

bool is_move(Action a) {
  return a == Action::North || a == Action::South || a == Action::East || a == Action::West;
}

Direction direction_of(Action a) {
  switch (a) {
    case Action::North: return Direction::North;
    case Action::South: return Direction::South;
    case Action::East: return Direction::East;
    default: return Direction::West;
  }
}

int pot_slot(const Layout& layout, int cell) {
  const auto pots = layout.pot_cells();
  const auto it = std::find(pots.begin(), pots.end(), cell);
  return it == pots.end() ? -1 : static_cast<int>(it - pots.begin());
}

void interact(int who, WorldState& s, const Layout& layout, const ShapingConfig& shaping, StepOutcome& out) {
  PlayerState& player = s.players[who];
  const Position target = step_towards(player.position, player.facing);
  if (!layout.in_bounds(target)) return;
  const int cell = layout.index(target);
  const double bonus = shaping.enabled ? shaping.pickup_drop * shaping.scale : 0.0;
  switch (layout.terrain[cell]) {
    case Cell::Floor:
      return;
    case Cell::OnionDispenser:
      if (player.held == Item::None) {
        player.held = Item::Onion;
        out.shaped[who].pickup_drop += bonus;
        out.events.push_back({EventKind::OnionPickup, who, target, Item::Onion});
      }
      return;
    case Cell::DishDispenser:
      if (player.held == Item::None) {
        player.held = Item::Dish;
        out.events.push_back({EventKind::DishPickup, who, target, Item::Dish});
      }
      return;
    case Cell::Counter: {
      Item& slot = s.counter_items[cell];
      if (player.held == Item::None && slot != Item::None) {
        player.held = slot;
        out.events.push_back({EventKind::CounterPickup, who, target, slot});
        slot = Item::None;
      } else if ((player.held == Item::Onion || player.held == Item::Dish) && slot == Item::None) {
        slot = player.held;
        out.events.push_back({EventKind::CounterDrop, who, target, slot});
        player.held = Item::None;
      }
      return;
    }
    case Cell::Pot: {
      PotState& pot = s.pots[pot_slot(layout, cell)];
      if (player.held == Item::Onion && pot.onions < 3) {
        player.held = Item::None;
        ++pot.onions;
        out.shaped[who].pickup_drop += bonus;
        out.events.push_back({EventKind::OnionDrop, who, target, Item::Onion});
        if (pot.onions == 3) {
          pot.cook_timer = layout.cook_time;
          out.events.push_back({EventKind::CookingStarted, who, target, Item::None});
        }
      } else if (player.held == Item::Dish && pot.ready()) {
        player.held = Item::Soup;
        pot = PotState{};
        out.events.push_back({EventKind::SoupPickup, who, target, Item::Soup});
      }
      return;
    }
    case Cell::ServingCounter:
      if (player.held == Item::Soup) {
        player.held = Item::None;
        out.sparse_reward += kDeliveryReward;
        s.score += static_cast<int>(kDeliveryReward);
        if (shaping.enabled) out.shaped[1 - who].delivery_penalty += shaping.delivery_penalty * shaping.scale;
        out.events.push_back({EventKind::SoupDelivered, who, target, Item::Soup});
      }
      return;
  }
}

}  // namespace

std::string_view to_string(Action a) {
  switch (a) {
    case Action::North: return "N";
    case Action::South: return "S";
    case Action::East: return "E";
    case Action::West: return "W";
    case Action::Stay: return "stay";
    case Action::Interact: return "interact";
  }
  return "?";
}

std::optional<Action> parse_action(std::string_view text) {
  for (int i = 0; i < kNumActions; ++i) {
    const auto a = static_cast<Action>(i);
    if (to_string(a) == text) return a;
  }
  return std::nullopt;
}

std::string_view to_string(Item item) {
  switch (item) {
    case Item::None: return "none";
    case Item::Onion: return "onion";
    case Item::Dish: return "dish";
    case Item::Soup: return "soup";
  }
  return "?";
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::North: return "N";
    case Direction::East: return "E";
    case Direction::South: return "S";
    case Direction::West: return "W";
  }
  return "?";
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::OnionPickup: return "onion_pickup";
    case EventKind::DishPickup: return "dish_pickup";
    case EventKind::CounterPickup: return "counter_pickup";
    case EventKind::CounterDrop: return "counter_drop";
    case EventKind::OnionDrop: return "onion_drop";
    case EventKind::CookingStarted: return "cooking_started";
    case EventKind::SoupPickup: return "soup_pickup";
    case EventKind::SoupDelivered: return "soup_delivered";
  }
  return "?";
}

ShapingConfig default_shaping(const Layout& layout) {
  ShapingConfig cfg;
  cfg.enabled = layout.name != "forced_coordination";
  return cfg;
}

WorldState reset(const Layout& layout) {
  WorldState s;
  for (int i = 0; i < 2; ++i) {
    s.players[i] = PlayerState{layout.starts[i].position, layout.starts[i].facing, Item::None};
  }
  s.pots.assign(layout.pot_cells().size(), PotState{});
  s.counter_items.assign(static_cast<std::size_t>(layout.cell_count()), Item::None);
  return s;
}

StepOutcome step(const WorldState& state, const JointAction& joint, const Layout& layout,
                 const ShapingConfig& shaping, int horizon) {
  if (state.tick >= horizon) {
    throw ContractViolation("step called on a finished episode (tick " + std::to_string(state.tick) +
                            " >= horizon " + std::to_string(horizon) + ")");
  }
  StepOutcome out;
  out.next_state = state;
  WorldState& s = out.next_state;

  // Pots filled on earlier ticks keep cooking.
  for (auto& pot : s.pots) {
    if (pot.onions == 3 && pot.cook_timer > 0) --pot.cook_timer;
  }

  // Interactions resolve in seat order.
  for (int who = 0; who < 2; ++who) {
    if (joint[who] == Action::Interact) interact(who, s, layout, shaping, out);
  }

  // Movement: blocked moves still turn the player; same-target and swap moves both fail.
  std::array<Position, 2> proposed{s.players[0].position, s.players[1].position};
  for (int who = 0; who < 2; ++who) {
    if (!is_move(joint[who])) continue;
    const Direction d = direction_of(joint[who]);
    s.players[who].facing = d;
    const Position target = step_towards(s.players[who].position, d);
    if (layout.at(target) == Cell::Floor) proposed[who] = target;
  }
  const bool same_cell = proposed[0] == proposed[1];
  const bool swap = proposed[0] == s.players[1].position && proposed[1] == s.players[0].position;
  if (!same_cell && !swap) {
    s.players[0].position = proposed[0];
    s.players[1].position = proposed[1];
  }

  ++s.tick;
  return out;
}

std::vector<std::uint8_t> serialize_state(const WorldState& state) {
  std::vector<std::uint8_t> out;
  const auto put32 = [&](std::int32_t v) {
    const auto u = static_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  };
  put32(state.tick);
  put32(state.score);
  for (const auto& p : state.players) {
    put32(p.position.x);
    put32(p.position.y);
    out.push_back(static_cast<std::uint8_t>(p.facing));
    out.push_back(static_cast<std::uint8_t>(p.held));
  }
  put32(static_cast<std::int32_t>(state.pots.size()));
  for (const auto& pot : state.pots) {
    put32(pot.onions);
    put32(pot.cook_timer);
  }
  put32(static_cast<std::int32_t>(state.counter_items.size()));
  for (Item item : state.counter_items) out.push_back(static_cast<std::uint8_t>(item));
  return out;
}

std::string state_digest(const WorldState& state) { return to_hex(fnv1a(serialize_state(state))); }

std::string check_invariants(const WorldState& state, const Layout& layout) {
  for (int i = 0; i < 2; ++i) {
    const auto& p = state.players[i];
    if (layout.at(p.position) != Cell::Floor) return "player " + std::to_string(i) + " off floor";
  }
  if (state.players[0].position == state.players[1].position) return "players share a cell";
  if (state.pots.size() != layout.pot_cells().size()) return "pot count mismatch";
  for (const auto& pot : state.pots) {
    if (pot.onions < 0 || pot.onions > 3) return "pot onion count out of range";
    if (pot.cook_timer > 0 && pot.onions != 3) return "cooking pot without three onions";
    if (pot.cook_timer < 0 || pot.cook_timer > layout.cook_time) return "cook timer out of range";
  }
  if (static_cast<int>(state.counter_items.size()) != layout.cell_count()) return "counter slot count mismatch";
  for (int c = 0; c < layout.cell_count(); ++c) {
    const Item item = state.counter_items[c];
    if (item == Item::None) continue;
    if (layout.terrain[c] != Cell::Counter) return "item resting off a counter";
    if (item == Item::Soup) return "soup resting on a counter";
  }
  if (state.score % static_cast<int>(kDeliveryReward) != 0) return "score not a multiple of the delivery reward";
  return {};
}

}  // namespace hipt::env
