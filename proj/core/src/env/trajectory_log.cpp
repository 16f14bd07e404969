#include "hipt/env/trajectory_log.hpp"

#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <unordered_map>

namespace hipt::env {
namespace {

using nlohmann::json;

json event_to_json(const Event& e) {
  return json{{"kind", to_string(e.kind)}, {"player", e.player}, {"cell", {e.cell.x, e.cell.y}},
              {"item", to_string(e.item)}};
}

Event event_from_json(const json& j) {
  Event e{};
  const auto kind = j.at("kind").get<std::string>();
  bool found = false;
  for (int k = 0; k <= static_cast<int>(EventKind::SoupDelivered); ++k) {
    if (to_string(static_cast<EventKind>(k)) == kind) {
      e.kind = static_cast<EventKind>(k);
      found = true;
    }
  }
  if (!found) throw Error("trajectory log: unknown event kind '" + kind + "'");
  e.player = j.at("player").get<int>();
  e.cell = {j.at("cell").at(0).get<int>(), j.at("cell").at(1).get<int>()};
  const auto item = j.at("item").get<std::string>();
  for (int i = 0; i < kNumItems; ++i) {
    if (to_string(static_cast<Item>(i)) == item) e.item = static_cast<Item>(i);
  }
  return e;
}

}  // namespace

void write_jsonl(std::ostream& out, const EpisodeLog& episode) {
  for (const auto& s : episode.steps) {
    json events = json::array();
    for (const auto& e : s.events) events.push_back(event_to_json(e));
    json shaped = json::array();
    for (const auto& r : s.shaped) {
      shaped.push_back({{"pickup_drop", r.pickup_drop}, {"delivery_penalty", r.delivery_penalty}});
    }
    const json line = {{"episode", episode.episode_id},
                       {"layout", episode.layout},
                       {"tick", s.tick},
                       {"joint_action", {to_string(s.joint[0]), to_string(s.joint[1])}},
                       {"sparse_reward", s.sparse_reward},
                       {"shaped", shaped},
                       {"events", events},
                       {"state_digest", s.state_digest}};
    out << line.dump() << '\n';
  }
}

void write_jsonl_file(const std::string& path, const std::vector<EpisodeLog>& episodes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write trajectory log '" + path + "'");
  for (const auto& e : episodes) write_jsonl(out, e);
  if (!out) throw IoError("failed writing trajectory log '" + path + "'");
}

std::vector<EpisodeLog> read_jsonl(std::istream& in) {
  std::vector<EpisodeLog> episodes;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error("trajectory log line " + std::to_string(line_no) + ": " + e.what());
    }
    const auto id = j.value("episode", std::string("0"));
    auto it = index.find(id);
    if (it == index.end()) {
      it = index.emplace(id, episodes.size()).first;
      episodes.push_back(EpisodeLog{id, j.value("layout", std::string()), {}});
    }
    StepLog s;
    s.tick = j.at("tick").get<int>();
    for (int seat = 0; seat < 2; ++seat) {
      const auto text = j.at("joint_action").at(seat).get<std::string>();
      const auto action = parse_action(text);
      if (!action) throw Error("trajectory log line " + std::to_string(line_no) + ": bad action '" + text + "'");
      s.joint[seat] = *action;
    }
    s.sparse_reward = j.at("sparse_reward").get<double>();
    if (j.contains("shaped")) {
      for (int seat = 0; seat < 2; ++seat) {
        s.shaped[seat].pickup_drop = j["shaped"].at(seat).at("pickup_drop").get<double>();
        s.shaped[seat].delivery_penalty = j["shaped"].at(seat).at("delivery_penalty").get<double>();
      }
    }
    if (j.contains("events")) {
      for (const auto& e : j["events"]) s.events.push_back(event_from_json(e));
    }
    s.state_digest = j.value("state_digest", std::string());
    episodes[it->second].steps.push_back(std::move(s));
  }
  return episodes;
}

std::vector<EpisodeLog> read_jsonl_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trajectory log '" + path + "'");
  return read_jsonl(in);
}

ReplayResult replay(const EpisodeLog& episode, const Layout& layout, int horizon) {
  ReplayResult result;
  WorldState state = reset(layout);
  for (const auto& s : episode.steps) {
    const auto fail = [&](const std::string& why) {
      result.ok = false;
      result.first_mismatch_tick = s.tick;
      result.message = why;
      result.final_state = state;
      return result;
    };
    if (s.tick != state.tick) return fail("tick gap in log");
    if (state.tick >= horizon) return fail("log runs past the horizon");
    StepOutcome out = step(state, s.joint, layout, no_shaping(), horizon);
    if (out.sparse_reward != s.sparse_reward) return fail("sparse reward differs");
    if (!s.state_digest.empty() && state_digest(out.next_state) != s.state_digest) {
      return fail("state digest differs");
    }
    state = std::move(out.next_state);
    ++result.steps_checked;
  }
  result.final_state = std::move(state);
  return result;
}

EpisodeLog to_log(const EpisodeRecord& record, std::string episode_id, std::string layout) {
  return EpisodeLog{std::move(episode_id), std::move(layout), record.steps};
}

}  // namespace hipt::env
