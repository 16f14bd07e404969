#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <variant>

#include "hipt/env/layout.hpp"
#include "hipt/env/world.hpp"

namespace hipt::service {

// Text frames carrying one JSON object each, tagged by "type".
//   client: join{session, seat?}, input{action}, preference{choice}
//   server: hello{layout, seat, tick_ms}, state{tick, state, scores}, round_end{scores},
//           prompt_preference{}, done{}, error{message}

struct JoinMessage {
  std::string session;
  std::optional<int> seat;
};
struct InputMessage {
  env::Action action = env::Action::Stay;
};
struct PreferenceMessage {
  int choice = 0;
};
using ClientMessage = std::variant<JoinMessage, InputMessage, PreferenceMessage>;

// Throws ContractViolation on malformed or unknown messages. Actions are
// accepted as "N"/"S"/"E"/"W"/"stay"/"interact" or as an index 0..5.
ClientMessage parse_client_message(const std::string& text);

nlohmann::json layout_to_json(const env::Layout& layout);
nlohmann::json state_to_json(const env::WorldState& state, const env::Layout& layout);

}  // namespace hipt::service
