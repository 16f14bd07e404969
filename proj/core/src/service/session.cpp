#include "hipt/service/session.hpp"

#include <unistd.h>

#include <cstdio>
#include <ctime>
#include <fstream>
#include <spdlog/spdlog.h>
#include <sstream>

#include "hipt/service/protocol.hpp"
#include "hipt/util/error.hpp"

namespace hipt::service {

using nlohmann::json;

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Lobby: return "lobby";
    case Phase::Playing: return "playing";
    case Phase::BetweenEpisodes: return "between_episodes";
    case Phase::Preference: return "preference";
    case Phase::Done: return "done";
  }
  return "?";
}

void SessionConfig::validate() const {
  if (session_id.empty()) throw ContractViolation("session id is empty");
  if (human_seat != 0 && human_seat != 1) throw ContractViolation("human seat must be 0 or 1");
  if (tick_ms <= 0) throw ContractViolation("tick_ms must be positive");
  if (horizon <= 0) throw ContractViolation("horizon must be positive");
  if (rounds <= 0) throw ContractViolation("rounds must be positive");
  if (tutorial_episodes < 0) throw ContractViolation("tutorial_episodes must be >= 0");
  if (output_dir.empty()) throw ContractViolation("session output directory is empty");
}

namespace {

std::string now_iso() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

// Appends and fsyncs, so a record acknowledged to the client survives a crash.
void append_durably(const std::filesystem::path& path, const std::string& text) {
  std::FILE* f = std::fopen(path.c_str(), "ab");
  if (!f) throw IoError("cannot open " + path.string());
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size() && std::fflush(f) == 0 &&
                  ::fsync(fileno(f)) == 0;
  std::fclose(f);
  if (!ok) throw IoError("write failed: " + path.string());
}

}  // namespace

json to_json(const PreferenceRecord& r) {
  return {{"session", r.session},   {"round", r.round},
          {"agents", r.agents},     {"choice", r.choice},
          {"scores", r.scores},     {"round_started", r.round_started},
          {"round_ended", r.round_ended}, {"answered", r.answered}};
}

PreferenceRecord preference_from_json(const json& j) {
  PreferenceRecord r;
  r.session = j.at("session").get<std::string>();
  r.round = j.at("round").get<int>();
  r.agents = j.at("agents").get<std::vector<std::string>>();
  r.choice = j.at("choice").get<int>();
  r.scores = j.at("scores").get<std::vector<int>>();
  r.round_started = j.at("round_started").get<std::string>();
  r.round_ended = j.at("round_ended").get<std::string>();
  r.answered = j.at("answered").get<std::string>();
  return r;
}

std::vector<PreferenceRecord> read_preferences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<PreferenceRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(preference_from_json(json::parse(line)));
  }
  return out;
}

SessionEngine::SessionEngine(SessionConfig config, std::vector<AgentHandle> comparison,
                             std::optional<AgentHandle> tutorial)
    : config_(std::move(config)), comparison_(std::move(comparison)), tutorial_(std::move(tutorial)),
      rng_(config_.seed) {
  config_.validate();
  if (comparison_.size() < 2) throw ContractViolation("a session compares at least two agents");
  if (config_.tutorial_episodes > 0 && !tutorial_) throw ContractViolation("tutorial episodes need a tutorial agent");
  std::filesystem::create_directories(config_.output_dir);
  state_ = env::reset(config_.layout);
}

std::string SessionEngine::partner_label() const {
  if (tutorial_done_ < config_.tutorial_episodes) return "Tutorial";
  return episode_ == 0 ? "Partner A" : "Partner B";
}

void SessionEngine::start_episode() {
  const bool tutorial = tutorial_done_ < config_.tutorial_episodes;
  std::string id;
  if (tutorial) {
    agent_ = tutorial_->make_policy();
    id = config_.session_id + "-t" + std::to_string(tutorial_done_);
  } else {
    if (episode_ == 0) {
      // Two distinct agents in random order; the client only sees the labels.
      const auto n = static_cast<std::int64_t>(comparison_.size());
      const int a = static_cast<int>(rng_.uniform_int(0, n - 1));
      int b = static_cast<int>(rng_.uniform_int(0, n - 2));
      if (b >= a) ++b;
      round_agents_ = {a, b};
      round_scores_.clear();
      round_started_ = now_iso();
    }
    agent_ = comparison_[round_agents_[episode_]].make_policy();
    id = config_.session_id + "-r" + std::to_string(round_) + "-e" + std::to_string(episode_);
  }
  agent_->reset(rng_.next());
  state_ = env::reset(config_.layout);
  log_ = env::EpisodeLog{id, config_.layout.name, {}};
  pending_ = env::Action::Stay;
  phase_ = Phase::Playing;
}

json SessionEngine::state_message() const {
  return {{"type", "state"},
          {"tick", state_.tick},
          {"horizon", config_.horizon},
          {"round", round_},
          {"rounds", config_.rounds},
          {"episode", episode_},
          {"partner", partner_label()},
          {"phase", to_string(phase_)},
          {"state", state_to_json(state_, config_.layout)},
          {"scores", {{"episode", state_.score}, {"round", round_scores_}}}};
}

Outbox SessionEngine::join(std::optional<int> seat) {
  if (phase_ == Phase::Lobby) {
    if (seat) config_.human_seat = *seat;
    start_episode();
  }
  Outbox out;
  out.push_back({{"type", "hello"},
                 {"session", config_.session_id},
                 {"layout", layout_to_json(config_.layout)},
                 {"seat", config_.human_seat},
                 {"tick_ms", config_.tick_ms},
                 {"phase", to_string(phase_)}});
  out.push_back(state_message());
  if (phase_ == Phase::Preference)
    out.push_back({{"type", "prompt_preference"}, {"round", round_}, {"options", {"Partner A", "Partner B"}}});
  if (phase_ == Phase::Done) out.push_back({{"type", "done"}});
  return out;
}

void SessionEngine::input(env::Action action) {
  if (phase_ == Phase::Playing) pending_ = action;
}

Outbox SessionEngine::tick() {
  if (phase_ == Phase::BetweenEpisodes) {
    start_episode();
    return {state_message()};
  }
  if (phase_ != Phase::Playing) return {};

  const int agent_seat = 1 - config_.human_seat;
  env::Action agent_action = env::Action::Stay;
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const auto dist = env::sanitize(agent_->act(state_, config_.layout, agent_seat));
    max_inference_ = std::max(max_inference_, std::chrono::duration_cast<std::chrono::microseconds>(
                                                  std::chrono::steady_clock::now() - t0));
    agent_action = static_cast<env::Action>(rng_.categorical(dist));
  } catch (const std::exception& e) {
    return abort(std::string("agent inference failed: ") + e.what());
  }
  env::JointAction joint{};
  joint[config_.human_seat] = pending_;
  joint[agent_seat] = agent_action;
  pending_ = env::Action::Stay;

  const int tick = state_.tick;
  auto outcome = env::step(state_, joint, config_.layout, env::no_shaping(), config_.horizon);
  state_ = std::move(outcome.next_state);
  log_.steps.push_back(env::StepLog{tick, joint, outcome.sparse_reward, outcome.shaped, std::move(outcome.events),
                                    env::state_digest(state_)});
  Outbox out{state_message()};
  if (state_.tick >= config_.horizon) {
    auto tail = finish_episode();
    out.insert(out.end(), tail.begin(), tail.end());
  }
  return out;
}

Outbox SessionEngine::finish_episode() {
  std::ostringstream line;
  env::write_jsonl(line, log_);
  append_durably(transcript_path(), line.str());
  if (tutorial_done_ < config_.tutorial_episodes) {
    ++tutorial_done_;
    phase_ = Phase::BetweenEpisodes;
    return {};
  }
  round_scores_.push_back(state_.score);
  if (++episode_ < kEpisodesPerRound) {
    phase_ = Phase::BetweenEpisodes;
    return {};
  }
  round_ended_ = now_iso();
  phase_ = Phase::Preference;
  return {{{"type", "round_end"}, {"round", round_}, {"scores", round_scores_}},
          {{"type", "prompt_preference"}, {"round", round_}, {"options", {"Partner A", "Partner B"}}}};
}

Outbox SessionEngine::preference(int choice) {
  if (phase_ != Phase::Preference) throw ContractViolation("no preference is being asked for");
  if (choice != -1 && choice != 1) throw ContractViolation("preference choice must be -1 or +1");
  PreferenceRecord r;
  r.session = config_.session_id;
  r.round = round_;
  for (int i : round_agents_) r.agents.push_back(comparison_[i].id);
  r.choice = choice;
  r.scores = round_scores_;
  r.round_started = round_started_;
  r.round_ended = round_ended_;
  r.answered = now_iso();
  append_durably(preferences_path(), to_json(r).dump() + "\n");
  preferences_.push_back(std::move(r));

  episode_ = 0;
  if (++round_ >= config_.rounds) {
    phase_ = Phase::Done;
    return {{{"type", "done"}, {"session", config_.session_id}}};
  }
  round_scores_.clear();
  phase_ = Phase::BetweenEpisodes;
  return {};
}

Outbox SessionEngine::abort(const std::string& reason) {
  spdlog::error("session {} aborted at round {} episode {} tick {}: {}", config_.session_id, round_, episode_,
                state_.tick, reason);
  phase_ = Phase::Done;
  return {{{"type", "error"}, {"message", reason}}, {{"type", "done"}, {"session", config_.session_id}}};
}

}  // namespace hipt::service
