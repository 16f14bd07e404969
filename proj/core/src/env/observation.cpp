#include "hipt/env/observation.hpp"

#include <algorithm>
#include <cmath>

namespace hipt::env {
namespace {

constexpr int kPlayerExtras = 4 + kNumItems + kNumCellKinds;

int player_block(const Layout& layout) { return layout.cell_count() + kPlayerExtras; }

int argmax(const double* begin, int n) {
  return static_cast<int>(std::max_element(begin, begin + n) - begin);
}

}  // namespace

int observation_size(const Layout& layout) {
  const int cells = layout.cell_count();
  return 2 * player_block(layout) + 2 * cells + 5 * cells + 1;
}

void encode_observation(const WorldState& state, const Layout& layout, int agent_index, double* out) {
  const int cells = layout.cell_count();
  std::fill(out, out + observation_size(layout), 0.0);
  double* cursor = out;
  for (int k = 0; k < 2; ++k) {
    const PlayerState& p = state.players[k == 0 ? agent_index : 1 - agent_index];
    cursor[layout.index(p.position)] = 1.0;
    cursor += cells;
    cursor[static_cast<int>(p.facing)] = 1.0;
    cursor += 4;
    cursor[static_cast<int>(p.held)] = 1.0;
    cursor += kNumItems;
    cursor[static_cast<int>(layout.at(step_towards(p.position, p.facing)))] = 1.0;
    cursor += kNumCellKinds;
  }
  for (int c = 0; c < cells; ++c) {
    const Item item = state.counter_items[c];
    if (item == Item::Onion) cursor[2 * c] = 1.0;
    if (item == Item::Dish) cursor[2 * c + 1] = 1.0;
  }
  cursor += 2 * cells;
  const auto pots = layout.pot_cells();
  for (std::size_t i = 0; i < pots.size(); ++i) {
    const int c = pots[i];
    cursor[4 * c + state.pots[i].onions] = 1.0;
    cursor[4 * cells + c] = static_cast<double>(state.pots[i].cook_timer) / layout.cook_time;
  }
  cursor += 5 * cells;
  cursor[0] = static_cast<double>(state.tick) / kDefaultHorizon;
}

std::vector<double> encode_observation(const WorldState& state, const Layout& layout, int agent_index) {
  std::vector<double> out(static_cast<std::size_t>(observation_size(layout)));
  encode_observation(state, layout, agent_index, out.data());
  return out;
}

WorldState decode_observation(const std::vector<double>& features, const Layout& layout, int agent_index) {
  if (static_cast<int>(features.size()) != observation_size(layout)) {
    throw DimensionMismatch("decode_observation: feature length does not match layout");
  }
  const int cells = layout.cell_count();
  WorldState s = reset(layout);
  const double* cursor = features.data();
  for (int k = 0; k < 2; ++k) {
    PlayerState& p = s.players[k == 0 ? agent_index : 1 - agent_index];
    p.position = layout.position(argmax(cursor, cells));
    cursor += cells;
    p.facing = static_cast<Direction>(argmax(cursor, 4));
    cursor += 4;
    p.held = static_cast<Item>(argmax(cursor, kNumItems));
    cursor += kNumItems + kNumCellKinds;
  }
  for (int c = 0; c < cells; ++c) {
    if (cursor[2 * c] > 0.5) s.counter_items[c] = Item::Onion;
    if (cursor[2 * c + 1] > 0.5) s.counter_items[c] = Item::Dish;
  }
  cursor += 2 * cells;
  const auto pots = layout.pot_cells();
  for (std::size_t i = 0; i < pots.size(); ++i) {
    const int c = pots[i];
    s.pots[i].onions = argmax(cursor + 4 * c, 4);
    s.pots[i].cook_timer = static_cast<int>(std::lround(cursor[4 * cells + c] * layout.cook_time));
  }
  cursor += 5 * cells;
  s.tick = static_cast<int>(std::lround(cursor[0] * kDefaultHorizon));
  return s;
}

}  // namespace hipt::env
