#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "hipt/env/trajectory_log.hpp"
#include "hipt/service/agents.hpp"
#include "hipt/util/rng.hpp"

namespace hipt::service {

enum class Phase { Lobby, Playing, BetweenEpisodes, Preference, Done };
std::string_view to_string(Phase phase);

inline constexpr int kEpisodesPerRound = 2;

struct SessionConfig {
  std::string session_id;
  env::Layout layout;
  int human_seat = 0;
  int tick_ms = 150;
  int horizon = env::kDefaultHorizon;
  int rounds = 1;
  int tutorial_episodes = 0;  // played first with the tutorial agent, no preference asked
  std::filesystem::path output_dir;
  std::uint64_t seed = 1;

  void validate() const;
};

struct PreferenceRecord {
  std::string session;
  int round = 0;
  std::vector<std::string> agents;  // unmasked ids in presentation order (Partner A, Partner B)
  int choice = 0;                   // -1 prefers Partner A, +1 prefers Partner B
  std::vector<int> scores;
  std::string round_started;  // ISO-8601 UTC
  std::string round_ended;
  std::string answered;
};

nlohmann::json to_json(const PreferenceRecord& record);
PreferenceRecord preference_from_json(const nlohmann::json& j);
std::vector<PreferenceRecord> read_preferences(const std::filesystem::path& path);

using Outbox = std::vector<nlohmann::json>;

// One human and one agent on a server-owned world. Transport agnostic: the
// caller drives tick() on its clock and relays the returned messages.
class SessionEngine {
 public:
  SessionEngine(SessionConfig config, std::vector<AgentHandle> comparison,
                std::optional<AgentHandle> tutorial = std::nullopt);

  // hello followed by the current state. Starts play from the lobby; later
  // calls resume a parked session without changing it.
  Outbox join(std::optional<int> seat = std::nullopt);
  // Replaces any action buffered since the last tick.
  void input(env::Action action);
  Outbox tick();
  Outbox preference(int choice);
  Outbox abort(const std::string& reason);

  Phase phase() const { return phase_; }
  bool ticking() const { return phase_ == Phase::Playing || phase_ == Phase::BetweenEpisodes; }
  const SessionConfig& config() const { return config_; }
  const env::WorldState& state() const { return state_; }
  int round() const { return round_; }
  const std::vector<PreferenceRecord>& preferences() const { return preferences_; }
  std::filesystem::path transcript_path() const { return config_.output_dir / "transcript.jsonl"; }
  std::filesystem::path preferences_path() const { return config_.output_dir / "preferences.jsonl"; }
  std::chrono::microseconds max_inference_time() const { return max_inference_; }

 private:
  void start_episode();
  Outbox finish_episode();
  nlohmann::json state_message() const;
  std::string partner_label() const;

  SessionConfig config_;
  std::vector<AgentHandle> comparison_;
  std::optional<AgentHandle> tutorial_;
  Rng rng_;
  Phase phase_ = Phase::Lobby;
  int tutorial_done_ = 0;
  int round_ = 0;
  int episode_ = 0;  // within the round
  std::vector<int> round_agents_;
  std::vector<int> round_scores_;
  std::string round_started_;
  std::string round_ended_;
  std::unique_ptr<env::Policy> agent_;
  env::WorldState state_;
  env::EpisodeLog log_;
  env::Action pending_ = env::Action::Stay;
  std::vector<PreferenceRecord> preferences_;
  std::chrono::microseconds max_inference_{0};
};

}  // namespace hipt::service
