#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hipt/env/episode.hpp"

namespace hipt::env {

// A logged episode. Each JSONL line carries
// {episode, layout, tick, joint_action, sparse_reward, shaped, events, state_digest}.
struct EpisodeLog {
  std::string episode_id;
  std::string layout;
  std::vector<StepLog> steps;
};

void write_jsonl(std::ostream& out, const EpisodeLog& episode);
void write_jsonl_file(const std::string& path, const std::vector<EpisodeLog>& episodes);

// Groups lines by episode id, preserving first-seen order.
std::vector<EpisodeLog> read_jsonl(std::istream& in);
std::vector<EpisodeLog> read_jsonl_file(const std::string& path);

struct ReplayResult {
  bool ok = true;
  int steps_checked = 0;
  std::optional<int> first_mismatch_tick;
  std::string message;
  WorldState final_state;
};

// Re-simulates the joint actions from reset and compares every state digest,
// sparse reward and score against the log.
ReplayResult replay(const EpisodeLog& episode, const Layout& layout, int horizon = kDefaultHorizon);

EpisodeLog to_log(const EpisodeRecord& record, std::string episode_id, std::string layout);

}  // namespace hipt::env
