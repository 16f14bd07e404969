#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hipt/env/layout.hpp"

namespace hipt::env {

enum class Item : std::uint8_t { None, Onion, Dish, Soup };
inline constexpr int kNumItems = 4;

enum class Action : std::uint8_t { North, South, East, West, Stay, Interact };
inline constexpr int kNumActions = 6;
using JointAction = std::array<Action, 2>;

inline constexpr int kDefaultHorizon = 400;
inline constexpr double kDeliveryReward = 20.0;

std::string_view to_string(Action a);
std::optional<Action> parse_action(std::string_view text);
std::string_view to_string(Item item);
std::string_view to_string(Direction d);

struct PlayerState {
  Position position;
  Direction facing = Direction::North;
  Item held = Item::None;
  friend bool operator==(const PlayerState&, const PlayerState&) = default;
};

struct PotState {
  int onions = 0;
  int cook_timer = 0;  // remaining ticks; only meaningful once onions == 3
  bool ready() const { return onions == 3 && cook_timer == 0; }
  friend bool operator==(const PotState&, const PotState&) = default;
};

struct WorldState {
  int tick = 0;
  std::array<PlayerState, 2> players{};
  std::vector<PotState> pots;        // parallel to Layout::pot_cells()
  std::vector<Item> counter_items;   // one slot per grid cell; None off-counter
  int score = 0;
  friend bool operator==(const WorldState&, const WorldState&) = default;
};

// Shaped training rewards. `scale` carries the annealing factor.
struct ShapingConfig {
  bool enabled = true;
  double pickup_drop = 3.0;
  double delivery_penalty = -20.0;
  double scale = 1.0;
};

// Shaping used during training on a layout; forced_coordination trains unshaped.
ShapingConfig default_shaping(const Layout& layout);
inline ShapingConfig no_shaping() { return ShapingConfig{.enabled = false}; }

struct ShapedReward {
  double pickup_drop = 0.0;
  double delivery_penalty = 0.0;
  double total() const { return pickup_drop + delivery_penalty; }
  friend bool operator==(const ShapedReward&, const ShapedReward&) = default;
};

enum class EventKind : std::uint8_t {
  OnionPickup,     // from a dispenser
  DishPickup,      // from a dispenser
  CounterPickup,   // item lifted off a counter
  CounterDrop,     // item put down on a counter
  OnionDrop,       // onion into a pot
  CookingStarted,  // third onion went in
  SoupPickup,
  SoupDelivered,
};
std::string_view to_string(EventKind kind);

struct Event {
  EventKind kind;
  int player = 0;
  Position cell;
  Item item = Item::None;
  friend bool operator==(const Event&, const Event&) = default;
};

struct StepOutcome {
  WorldState next_state;
  double sparse_reward = 0.0;
  std::array<ShapedReward, 2> shaped{};
  std::vector<Event> events;
};

WorldState reset(const Layout& layout);

// Throws ContractViolation when state.tick >= horizon.
StepOutcome step(const WorldState& state, const JointAction& joint, const Layout& layout,
                 const ShapingConfig& shaping, int horizon = kDefaultHorizon);

// Canonical byte serialization and its 64-bit digest (hex).
std::vector<std::uint8_t> serialize_state(const WorldState& state);
std::string state_digest(const WorldState& state);

// Structural validation of the state invariants; returns an empty string when valid.
std::string check_invariants(const WorldState& state, const Layout& layout);

}  // namespace hipt::env
