#include <set>
#include <sstream>

#include "doctest.h"
#include "hipt/env/episode.hpp"
#include "hipt/env/layout.hpp"
#include "hipt/env/observation.hpp"
#include "hipt/env/trajectory_log.hpp"
#include "hipt/env/world.hpp"

using namespace hipt;
using namespace hipt::env;

namespace {

WorldState with_player(WorldState s, int who, Position p, Direction d, Item held = Item::None) {
  s.players[who] = PlayerState{p, d, held};
  return s;
}

JointAction joint(Action a, Action b) { return {a, b}; }

}  // namespace

TEST_CASE("bundled layouts parse with the expected names and shapes") {
  const std::vector<std::string> expected = {"cramped_room", "asymmetric_advantages", "coordination_ring",
                                             "forced_coordination", "counter_circuit"};
  CHECK(bundled_layout_names() == expected);
  const std::vector<std::pair<int, int>> dims = {{5, 4}, {9, 5}, {5, 5}, {5, 5}, {8, 5}};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const Layout l = bundled_layout(expected[i]);
    CHECK(l.name == expected[i]);
    CHECK(l.width == dims[i].first);
    CHECK(l.height == dims[i].second);
    CHECK(l.at(l.starts[0].position) == Cell::Floor);
    CHECK(l.at(l.starts[1].position) == Cell::Floor);
    CHECK(serialize_layout(l) == canonical_layout_text(bundled_layout_text(expected[i])));
  }
}

TEST_CASE("layout parse errors name their kind and location") {
  SUBCASE("one start marker") {
    try {
      parse_layout("XXPXX\nO  1O\nX   X\nXDXSX\n");
      FAIL("expected an error");
    } catch (const LayoutParseError& e) {
      CHECK(e.kind() == LayoutErrorKind::StartCountMismatch);
    }
  }
  SUBCASE("malformed character") {
    try {
      parse_layout("XXPXX\nO  1O\nX2 ?X\nXDXSX\n");
      FAIL("expected an error");
    } catch (const LayoutParseError& e) {
      CHECK(e.kind() == LayoutErrorKind::MalformedCharacter);
      CHECK(e.line() == 3);
      CHECK(e.column() == 4);
    }
  }
  SUBCASE("missing serving counter") {
    try {
      parse_layout("XXPXX\nO  1O\nX2  X\nXDXXX\n");
      FAIL("expected an error");
    } catch (const LayoutParseError& e) {
      CHECK(e.kind() == LayoutErrorKind::MissingCellKind);
    }
  }
  SUBCASE("ragged rows") {
    CHECK_THROWS_AS(parse_layout("XXPXX\nO  1O\nX2 X\nXDXSX\n"), LayoutParseError);
  }
  SUBCASE("CR line endings are malformed") {
    CHECK_THROWS_AS(parse_layout("XXPXX\r\nO  1O\r\nX2  X\r\nXDXSX\r\n"), LayoutParseError);
  }
  SUBCASE("floor on the boundary") {
    try {
      parse_layout("XXPXX\n   1O\nX2  X\nXDXSX\n");
      FAIL("expected an error");
    } catch (const LayoutParseError& e) {
      CHECK(e.kind() == LayoutErrorKind::OpenBoundary);
    }
  }
}

TEST_CASE("layout text round-trips to canonical form") {
  const std::string text = "XXPXX\nO  2O\nX1  X\nXDXSX";  // no trailing newline
  CHECK(serialize_layout(parse_layout(text)) == canonical_layout_text(text));
}

TEST_CASE("reset places players on their starts with empty hands") {
  const Layout l = bundled_layout("cramped_room");
  const WorldState s = reset(l);
  CHECK(s.tick == 0);
  CHECK(s.score == 0);
  for (int i = 0; i < 2; ++i) {
    CHECK(s.players[i].position == l.starts[i].position);
    CHECK(s.players[i].facing == l.starts[i].facing);
    CHECK(s.players[i].held == Item::None);
  }
  for (const auto& pot : s.pots) CHECK(pot == PotState{});
  CHECK(reset(l) == s);
}

TEST_CASE("both players staying only advances tick and cook timers") {
  const Layout l = bundled_layout("cramped_room");
  WorldState s = reset(l);
  s.pots[0] = PotState{3, 7};
  const auto out = step(s, joint(Action::Stay, Action::Stay), l, default_shaping(l));
  WorldState expected = s;
  expected.tick = 1;
  expected.pots[0].cook_timer = 6;
  CHECK(out.next_state == expected);
  CHECK(out.sparse_reward == 0.0);
  CHECK(out.events.empty());
}

TEST_CASE("delivering soup pays 20 to both and penalizes the partner when shaped") {
  const Layout l = bundled_layout("cramped_room");
  // Serving counter at (3,3); stand at (3,2) facing south.
  WorldState s = with_player(reset(l), 0, {3, 2}, Direction::South, Item::Soup);
  s = with_player(s, 1, {1, 1}, Direction::North);
  const auto out = step(s, joint(Action::Interact, Action::Stay), l, default_shaping(l));
  CHECK(out.sparse_reward == 20.0);
  CHECK(out.next_state.score == 20);
  CHECK(out.next_state.players[0].held == Item::None);
  CHECK(out.shaped[1].delivery_penalty == -20.0);
  CHECK(out.shaped[0].delivery_penalty == 0.0);
  REQUIRE(out.events.size() == 1);
  CHECK(out.events[0].kind == EventKind::SoupDelivered);

  const auto unshaped = step(s, joint(Action::Interact, Action::Stay), l, no_shaping());
  CHECK(unshaped.shaped[1].total() == 0.0);
  CHECK(unshaped.sparse_reward == 20.0);
}

TEST_CASE("simultaneous deliveries pay 40") {
  const Layout l = parse_layout("XXPXX\nO12 O\nX   X\nXSDSX\n");
  WorldState s = reset(l);
  s = with_player(s, 0, {1, 2}, Direction::South, Item::Soup);
  s = with_player(s, 1, {3, 2}, Direction::South, Item::Soup);
  const auto out = step(s, joint(Action::Interact, Action::Interact), l, no_shaping());
  CHECK(out.sparse_reward == 40.0);
}

TEST_CASE("onion pickup and pot drop earn the shaped +3 and start cooking") {
  const Layout l = bundled_layout("cramped_room");
  WorldState s = with_player(reset(l), 0, {1, 1}, Direction::West);
  auto out = step(s, joint(Action::Interact, Action::Stay), l, default_shaping(l));
  CHECK(out.next_state.players[0].held == Item::Onion);
  CHECK(out.shaped[0].pickup_drop == 3.0);

  WorldState at_pot = with_player(out.next_state, 0, {2, 1}, Direction::North, Item::Onion);
  at_pot.pots[0].onions = 2;
  out = step(at_pot, joint(Action::Interact, Action::Stay), l, default_shaping(l));
  CHECK(out.next_state.pots[0].onions == 3);
  CHECK(out.next_state.pots[0].cook_timer == l.cook_time);
  CHECK(out.shaped[0].pickup_drop == 3.0);

  ShapingConfig half = default_shaping(l);
  half.scale = 0.5;
  out = step(s, joint(Action::Interact, Action::Stay), l, half);
  CHECK(out.shaped[0].pickup_drop == 1.5);
}

TEST_CASE("forced coordination trains without shaping") {
  CHECK_FALSE(default_shaping(bundled_layout("forced_coordination")).enabled);
  CHECK(default_shaping(bundled_layout("counter_circuit")).enabled);
}

TEST_CASE("a dish collects a ready soup and nothing else") {
  const Layout l = bundled_layout("cramped_room");
  WorldState s = with_player(reset(l), 0, {2, 1}, Direction::North, Item::Dish);
  s.pots[0] = PotState{3, 5};
  auto out = step(s, joint(Action::Interact, Action::Stay), l, no_shaping());
  CHECK(out.next_state.players[0].held == Item::Dish);
  s.pots[0] = PotState{3, 0};
  out = step(s, joint(Action::Interact, Action::Stay), l, no_shaping());
  CHECK(out.next_state.players[0].held == Item::Soup);
  CHECK(out.next_state.pots[0] == PotState{});
}

TEST_CASE("counters hold onions and dishes but not soup") {
  const Layout l = bundled_layout("cramped_room");
  // Counter at (0,2), stand at (1,2) facing west.
  WorldState s = with_player(reset(l), 0, {1, 2}, Direction::West, Item::Onion);
  s = with_player(s, 1, {3, 1}, Direction::North);
  auto out = step(s, joint(Action::Interact, Action::Stay), l, no_shaping());
  CHECK(out.next_state.counter_items[l.index({0, 2})] == Item::Onion);
  out = step(out.next_state, joint(Action::Interact, Action::Stay), l, no_shaping());
  CHECK(out.next_state.players[0].held == Item::Onion);
  CHECK(out.next_state.counter_items[l.index({0, 2})] == Item::None);

  WorldState soup = with_player(s, 0, {1, 2}, Direction::West, Item::Soup);
  out = step(soup, joint(Action::Interact, Action::Stay), l, no_shaping());
  CHECK(out.next_state.players[0].held == Item::Soup);
}

TEST_CASE("movement collisions") {
  const Layout l = bundled_layout("cramped_room");
  SUBCASE("same target cell: both fail but turn") {
    WorldState s = with_player(reset(l), 0, {1, 1}, Direction::North);
    s = with_player(s, 1, {3, 1}, Direction::North);
    const auto out = step(s, joint(Action::East, Action::West), l, no_shaping());
    CHECK(out.next_state.players[0].position == Position{1, 1});
    CHECK(out.next_state.players[1].position == Position{3, 1});
    CHECK(out.next_state.players[0].facing == Direction::East);
    CHECK(out.next_state.players[1].facing == Direction::West);
  }
  SUBCASE("swap: both fail") {
    WorldState s = with_player(reset(l), 0, {1, 1}, Direction::North);
    s = with_player(s, 1, {2, 1}, Direction::North);
    const auto out = step(s, joint(Action::East, Action::West), l, no_shaping());
    CHECK(out.next_state.players[0].position == Position{1, 1});
    CHECK(out.next_state.players[1].position == Position{2, 1});
  }
  SUBCASE("following into a vacated cell succeeds") {
    WorldState s = with_player(reset(l), 0, {1, 1}, Direction::North);
    s = with_player(s, 1, {2, 1}, Direction::North);
    const auto out = step(s, joint(Action::East, Action::East), l, no_shaping());
    CHECK(out.next_state.players[0].position == Position{2, 1});
    CHECK(out.next_state.players[1].position == Position{3, 1});
  }
  SUBCASE("walking into a counter only turns") {
    WorldState s = with_player(reset(l), 0, {1, 1}, Direction::South);
    const auto out = step(s, joint(Action::North, Action::Stay), l, no_shaping());
    CHECK(out.next_state.players[0].position == Position{1, 1});
    CHECK(out.next_state.players[0].facing == Direction::North);
  }
}

TEST_CASE("stepping a finished episode is a contract violation") {
  const Layout l = bundled_layout("cramped_room");
  WorldState s = reset(l);
  s.tick = 400;
  CHECK_THROWS_AS(step(s, joint(Action::Stay, Action::Stay), l, no_shaping()), ContractViolation);
  s.tick = 9;
  CHECK_THROWS_AS(step(s, joint(Action::Stay, Action::Stay), l, no_shaping(), 9), ContractViolation);
}

TEST_CASE("random play keeps every invariant") {
  // Conservation: the onion count in the world changes only via dispenser
  // pickups (+1) and pot drops (-1); dish-like items (dish or soup) only via
  // dish pickups (+1) and deliveries (-1).
  const auto count = [](const WorldState& s) {
    int onions = 0, dishes = 0;
    for (const auto& p : s.players) {
      onions += p.held == Item::Onion;
      dishes += p.held == Item::Dish || p.held == Item::Soup;
    }
    for (Item i : s.counter_items) {
      onions += i == Item::Onion;
      dishes += i == Item::Dish;
    }
    return std::pair{onions, dishes};
  };
  for (const auto& name : bundled_layout_names()) {
    const Layout l = bundled_layout(name);
    Rng rng(17);
    for (int episode = 0; episode < 20; ++episode) {
      WorldState s = reset(l);
      int deliveries = 0;
      for (int t = 0; t < 400; ++t) {
        const JointAction j{static_cast<Action>(rng.uniform_int(0, 5)), static_cast<Action>(rng.uniform_int(0, 5))};
        const auto before = count(s);
        const auto out = step(s, j, l, default_shaping(l));
        const auto after = count(out.next_state);
        int d_onion = 0, d_dish = 0;
        for (const auto& e : out.events) {
          d_onion += e.kind == EventKind::OnionPickup ? 1 : e.kind == EventKind::OnionDrop ? -1 : 0;
          d_dish += e.kind == EventKind::DishPickup ? 1 : e.kind == EventKind::SoupDelivered ? -1 : 0;
          deliveries += e.kind == EventKind::SoupDelivered;
        }
        REQUIRE(after.first - before.first == d_onion);
        REQUIRE(after.second - before.second == d_dish);
        REQUIRE(out.next_state.tick == s.tick + 1);
        REQUIRE(check_invariants(out.next_state, l).empty());
        REQUIRE((out.sparse_reward == 0.0 || out.sparse_reward == 20.0 || out.sparse_reward == 40.0));
        s = out.next_state;
      }
      REQUIRE(s.score == 20 * deliveries);
    }
  }
}

TEST_CASE("observations are egocentric, lossless and injective") {
  for (const auto& name : bundled_layout_names()) {
    const Layout l = bundled_layout(name);
    const int size = observation_size(l);
    const int cells = l.cell_count();
    CHECK(size == 2 * (cells + 14) + 7 * cells + 1);
    Rng rng(3);
    std::vector<WorldState> states;
    WorldState s = reset(l);
    for (int i = 0; i < 1000; ++i) {
      if (s.tick == 400) s = reset(l);
      const JointAction j{static_cast<Action>(rng.uniform_int(0, 5)), static_cast<Action>(rng.uniform_int(0, 5))};
      s = step(s, j, l, no_shaping()).next_state;
      states.push_back(s);
      for (int seat = 0; seat < 2; ++seat) {
        const auto enc = encode_observation(s, l, seat);
        REQUIRE(static_cast<int>(enc.size()) == size);
        WorldState decoded = decode_observation(enc, l, seat);
        decoded.score = s.score;
        REQUIRE(decoded == s);
      }
      // Seat views swap the two player blocks and agree elsewhere.
      const auto a = encode_observation(s, l, 0);
      const auto b = encode_observation(s, l, 1);
      const int block = cells + 14;
      REQUIRE(std::equal(a.begin(), a.begin() + block, b.begin() + block));
      REQUIRE(std::equal(a.begin() + block, a.begin() + 2 * block, b.begin()));
      REQUIRE(std::equal(a.begin() + 2 * block, a.end(), b.begin() + 2 * block));
    }
    for (int k = 0; k < 500; ++k) {
      const auto& x = states[static_cast<std::size_t>(rng.uniform_int(0, 999))];
      const auto& y = states[static_cast<std::size_t>(rng.uniform_int(0, 999))];
      WorldState xs = x, ys = y;
      xs.score = ys.score = 0;
      if (xs == ys) continue;
      REQUIRE(encode_observation(x, l, 0) != encode_observation(y, l, 0));
    }
  }
}

TEST_CASE("run_episode: stay policies score nothing, scripted cooks deliver") {
  const Layout l = bundled_layout("cramped_room");
  StayPolicy a, b;
  const auto idle = run_episode(a, b, l, 400, no_shaping(), 1);
  CHECK(idle.steps.size() == 400);
  CHECK(idle.episode_return == 0.0);

  ScriptedCookPolicy cook;
  StayPolicy partner;
  const auto solo = run_episode(cook, partner, l, 400, no_shaping(), 1);
  CHECK(solo.episode_return >= 20.0);
  CHECK(solo.episode_return == 20.0 * solo.deliveries);

  ScriptedCookPolicy c0, c1;
  const auto pair = run_episode(c0, c1, l, 400, no_shaping(), 1);
  CHECK(pair.episode_return >= 20.0);

  // Forced coordination separates the kitchen: nobody can finish alone.
  const Layout fc = bundled_layout("forced_coordination");
  ScriptedCookPolicy lone;
  StayPolicy still;
  CHECK(run_episode(lone, still, fc, 400, no_shaping(), 2).episode_return == 0.0);
  CHECK(run_episode(still, lone, fc, 400, no_shaping(), 2).episode_return == 0.0);
}

TEST_CASE("run_episode replays bit-identically and logs round-trip through JSONL") {
  const Layout l = bundled_layout("coordination_ring");
  UniformRandomPolicy a, b;
  const auto first = run_episode(a, b, l, 400, default_shaping(l), 99);
  const auto second = run_episode(a, b, l, 400, default_shaping(l), 99);
  REQUIRE(first.steps.size() == second.steps.size());
  for (std::size_t i = 0; i < first.steps.size(); ++i) {
    REQUIRE(first.steps[i].state_digest == second.steps[i].state_digest);
    REQUIRE(first.steps[i].joint == second.steps[i].joint);
  }
  std::stringstream buf;
  write_jsonl(buf, to_log(first, "ep-1", l.name));
  const auto logs = read_jsonl(buf);
  REQUIRE(logs.size() == 1);
  CHECK(logs[0].episode_id == "ep-1");
  CHECK(logs[0].steps.size() == 400);
  const auto result = replay(logs[0], l);
  CHECK(result.ok);
  CHECK(result.final_state == first.final_state);

  auto tampered = logs[0];
  tampered.steps[10].joint[0] = tampered.steps[10].joint[0] == Action::Stay ? Action::North : Action::Stay;
  tampered.steps[10].joint[1] = Action::Interact;
  const auto bad = replay(tampered, l);
  if (!bad.ok) CHECK(bad.first_mismatch_tick.has_value());
}

TEST_CASE("state digests are deterministic and sensitive") {
  const Layout l = bundled_layout("cramped_room");
  WorldState s = reset(l);
  CHECK(state_digest(s) == state_digest(reset(l)));
  WorldState t = s;
  t.pots[0].onions = 1;
  CHECK(state_digest(s) != state_digest(t));
  CHECK(serialize_state(s) == serialize_state(reset(l)));
}
