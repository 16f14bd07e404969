#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hipt/service/agents.hpp"

namespace hipt::service {

struct ServerConfig {
  std::string address = "0.0.0.0";
  unsigned short port = 8080;  // 0 binds a free port
  std::filesystem::path data_dir = "sessions";
  std::filesystem::path static_dir;  // served over plain HTTP when set
  std::string layout = "cramped_room";
  int tick_ms = 150;
  int horizon = 400;
  int rounds = 1;
  int tutorial_episodes = 0;
  std::chrono::seconds park_timeout{120};
  std::uint64_t seed = 1;

  // HIPT_PORT and HIPT_DATA_DIR take precedence over the configured values.
  void apply_environment();
  void validate() const;
};

// Live play endpoint: one WebSocket per human, one tick loop per session, all
// on a single io_context. A dropped connection parks its session until the
// same session id joins again or the park timeout expires.
class SessionServer {
 public:
  SessionServer(ServerConfig config, std::vector<AgentHandle> agents,
                std::optional<AgentHandle> tutorial = std::nullopt);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  unsigned short port() const;
  void run();   // blocks until stop()
  void stop();  // callable from any thread

 struct Impl;  // opaque

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace hipt::service
