#include "hipt/service/protocol.hpp"

#include "hipt/util/error.hpp"

namespace hipt::service {

using nlohmann::json;

namespace {

env::Action parse_action_value(const json& v) {
  if (v.is_number_integer()) {
    const int i = v.get<int>();
    if (i < 0 || i >= env::kNumActions) throw ContractViolation("action index out of range");
    return static_cast<env::Action>(i);
  }
  if (v.is_string()) {
    if (auto a = env::parse_action(v.get<std::string>())) return *a;
  }
  throw ContractViolation("unknown action: " + v.dump());
}

}  // namespace

ClientMessage parse_client_message(const std::string& text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ContractViolation("message is not a JSON object");
  const std::string type = j.value("type", "");
  if (type == "join") {
    if (!j.contains("session") || !j["session"].is_string()) throw ContractViolation("join needs a session string");
    JoinMessage m{j["session"].get<std::string>(), std::nullopt};
    if (j.contains("seat")) {
      if (!j["seat"].is_number_integer()) throw ContractViolation("seat must be 0 or 1");
      m.seat = j["seat"].get<int>();
      if (*m.seat != 0 && *m.seat != 1) throw ContractViolation("seat must be 0 or 1");
    }
    return m;
  }
  if (type == "input") {
    if (!j.contains("action")) throw ContractViolation("input needs an action");
    return InputMessage{parse_action_value(j["action"])};
  }
  if (type == "preference") {
    if (!j.contains("choice") || !j["choice"].is_number_integer()) throw ContractViolation("preference needs choice -1 or +1");
    const int c = j["choice"].get<int>();
    if (c != -1 && c != 1) throw ContractViolation("preference needs choice -1 or +1");
    return PreferenceMessage{c};
  }
  throw ContractViolation("unknown message type: " + type);
}

json layout_to_json(const env::Layout& layout) {
  json rows = json::array();
  const std::string text = env::serialize_layout(layout);
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    rows.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return {{"name", layout.name}, {"width", layout.width}, {"height", layout.height},
          {"grid", rows}, {"cook_time", layout.cook_time}};
}

json state_to_json(const env::WorldState& state, const env::Layout& layout) {
  json players = json::array();
  for (const auto& p : state.players)
    players.push_back({{"position", {p.position.x, p.position.y}},
                       {"facing", env::to_string(p.facing)},
                       {"held", env::to_string(p.held)}});
  json pots = json::array();
  const auto cells = layout.pot_cells();
  for (std::size_t i = 0; i < state.pots.size(); ++i) {
    const auto pos = layout.position(cells[i]);
    pots.push_back({{"cell", {pos.x, pos.y}}, {"onions", state.pots[i].onions},
                    {"cook_timer", state.pots[i].cook_timer}, {"ready", state.pots[i].ready()}});
  }
  json counters = json::array();
  for (int i = 0; i < static_cast<int>(state.counter_items.size()); ++i) {
    if (state.counter_items[i] == env::Item::None) continue;
    const auto pos = layout.position(i);
    counters.push_back({{"cell", {pos.x, pos.y}}, {"item", env::to_string(state.counter_items[i])}});
  }
  return {{"tick", state.tick}, {"players", players}, {"pots", pots}, {"counters", counters},
          {"score", state.score}, {"digest", env::state_digest(state)}};
}

}  // namespace hipt::service
