#include "hipt/service/agents.hpp"

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "hipt/eval/behavior_cloning.hpp"
#include "hipt/hipt/agent.hpp"
#include "hipt/nn/model_file.hpp"
#include "hipt/population/network_policy.hpp"
#include "hipt/util/error.hpp"

namespace hipt::service {

namespace fs = std::filesystem;

namespace {

std::string sidecar_format(const std::string& prefix) {
  std::ifstream in(prefix + ".json");
  if (!in) return {};
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw IoError("malformed agent sidecar: " + prefix + ".json");
  return j.value("format", "");
}

}  // namespace

AgentHandle load_agent(const std::string& spec_in) {
  std::string id = spec_in;
  std::string spec = spec_in;
  if (const auto eq = spec_in.find('='); eq != std::string::npos && eq > 0) {
    id = spec_in.substr(0, eq);
    spec = spec_in.substr(eq + 1);
  }
  if (spec == "scripted") return {id, "scripted", [] { return std::make_unique<env::ScriptedCookPolicy>(); }};
  if (spec == "random") return {id, "random", [] { return std::make_unique<env::UniformRandomPolicy>(); }};
  if (spec == "stay") return {id, "stay", [] { return std::make_unique<env::StayPolicy>(); }};

  std::string prefix = spec;
  for (const char* ext : {".json", ".model"}) {
    const std::string e = ext;
    if (prefix.size() > e.size() && prefix.ends_with(e) && fs::exists(prefix.substr(0, prefix.size() - e.size()) + ".json")) {
      prefix = prefix.substr(0, prefix.size() - e.size());
      break;
    }
  }
  const std::string format = sidecar_format(prefix);
  if (format == "hipt-agent") {
    auto agent = std::make_shared<const hierarchy::HiptAgent>(hierarchy::load_hipt_checkpoint(prefix));
    return {id, "hipt", [agent] { return std::make_unique<hierarchy::HiptPolicy>(*agent); }};
  }
  if (format == "hipt-bc") {
    auto params = std::make_shared<const nn::ParamStore>(eval::load_bc_model(prefix).params);
    return {id, "bc", [params] { return std::make_unique<population::NetworkPolicy>(*params); }};
  }
  if (!format.empty()) throw IoError("unsupported agent format '" + format + "' in " + prefix + ".json");
  if (!fs::exists(spec)) throw IoError("agent not found: " + spec);
  auto params = std::make_shared<const nn::ParamStore>(nn::load_model(spec));
  return {id, "network", [params] { return std::make_unique<population::NetworkPolicy>(*params); }};
}

}  // namespace hipt::service
