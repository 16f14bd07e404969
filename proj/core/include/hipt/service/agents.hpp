#pragma once

#include <functional>
#include <memory>
#include <string>

#include "hipt/env/episode.hpp"

namespace hipt::service {

// A saved agent loaded once and shared read-only; make_policy() hands out an
// independent controller with its own recurrent state.
struct AgentHandle {
  std::string id;
  std::string kind;  // scripted, random, stay, hipt, bc, network
  std::function<std::unique_ptr<env::Policy>()> make_policy;
};

// Accepts "scripted", "random", "stay", a raw .model file, or a checkpoint
// prefix whose JSON sidecar identifies a two-level agent or a cloned policy.
// "name=spec" assigns the id; otherwise the spec is the id.
AgentHandle load_agent(const std::string& spec);

}  // namespace hipt::service
