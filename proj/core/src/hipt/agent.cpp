#include "hipt/hipt/agent.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "hipt/env/observation.hpp"
#include "hipt/nn/model_file.hpp"
#include "hipt/util/error.hpp"

namespace hipt::hierarchy {

using nlohmann::json;

int default_num_priors(const std::string& layout_name) {
  if (layout_name == "forced_coordination") return 5;
  if (layout_name == "counter_circuit") return 6;
  return 4;
}

void HiptConfig::validate() const {
  ppo.validate();
  influence.validate();
  if (num_priors < 1) throw ContractViolation("num_priors must be >= 1");
  if (p_min < 1 || p_min > p_max || p_max > horizon) throw ContractViolation("need 1 <= p_min <= p_max <= horizon");
  if (episodes_per_update < 1) throw ContractViolation("episodes_per_update must be >= 1");
  if (total_env_steps < 1) throw ContractViolation("total_env_steps must be >= 1");
  if (!(learning_rate > 0.0) || !(lr_decay >= 1.0)) throw ContractViolation("bad learning-rate schedule");
}

HiptPolicy::HiptPolicy(HiptAgent agent) : agent_(std::move(agent)), network_(agent_.params.spec) {
  if (agent_.p_min < 1 || agent_.p_min > agent_.p_max) throw ContractViolation("HiptPolicy: bad horizon bounds");
  hidden_ = network_.initial_hidden(1);
}

void HiptPolicy::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  hidden_ = network_.initial_hidden(1);
  remaining_ = 0;
  prior_ = 0;
}

env::ActionDistribution HiptPolicy::act(const env::WorldState& state, const env::Layout& layout, int seat) {
  const auto& spec = agent_.params.spec;
  if (env::observation_size(layout) != spec.input_dim) {
    throw DimensionMismatch("HiptPolicy: network input does not match layout " + layout.name);
  }
  features_.resize(static_cast<std::size_t>(spec.input_dim));
  env::encode_observation(state, layout, seat, features_.data());
  const nn::Matrix x = Eigen::Map<const nn::Matrix>(features_.data(), spec.input_dim, 1);
  const auto out = network_.forward(agent_.params, x, hidden_);
  hidden_ = out.hidden;
  if (remaining_ == 0) {
    remaining_ = static_cast<int>(rng_.uniform_int(agent_.p_min, agent_.p_max));
    const nn::Matrix high = nn::softmax(out.high_logits);
    prior_ = rng_.categorical(std::span<const double>(high.data(), static_cast<std::size_t>(high.size())));
  }
  --remaining_;
  const nn::Matrix low = nn::softmax(out.low_block(prior_, spec.num_actions));
  env::ActionDistribution dist{};
  for (int a = 0; a < env::kNumActions; ++a) dist[a] = low(a, 0);
  return dist;
}

void save_hipt_checkpoint(const std::string& prefix, const HiptAgent& agent, const HiptCheckpointInfo& info) {
  nn::save_model(prefix + ".model", agent.params);
  json j;
  j["format"] = "hipt-agent";
  j["version"] = 1;
  j["layout"] = info.layout;
  j["num_priors"] = agent.num_priors();
  j["p_min"] = agent.p_min;
  j["p_max"] = agent.p_max;
  j["influence"] = {{"kappa_start", info.influence.kappa_start},
                    {"kappa_end", info.influence.kappa_end},
                    {"alpha", info.influence.alpha},
                    {"horizon_steps", info.influence.horizon_steps}};
  j["kappa_current"] = anneal(info.influence, info.env_steps);
  j["env_steps"] = info.env_steps;
  j["updates"] = info.updates;
  j["params_digest"] = nn::params_digest(agent.params);
  std::ofstream out(prefix + ".json");
  if (!out) throw IoError("cannot write " + prefix + ".json");
  out << j.dump(2) << '\n';
}

HiptAgent load_hipt_checkpoint(const std::string& prefix, HiptCheckpointInfo* info) {
  std::ifstream in(prefix + ".json");
  if (!in) throw IoError("cannot read " + prefix + ".json");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint sidecar: " + std::string(e.what()));
  }
  if (j.value("format", "") != "hipt-agent") throw IoError("not a HiPT checkpoint: " + prefix);
  HiptAgent agent;
  agent.params = nn::load_model(prefix + ".model");
  if (nn::params_digest(agent.params) != j.at("params_digest").get<std::string>()) {
    throw ChecksumError("checkpoint model does not match its sidecar: " + prefix);
  }
  agent.p_min = j.at("p_min").get<int>();
  agent.p_max = j.at("p_max").get<int>();
  if (agent.num_priors() != j.at("num_priors").get<int>()) throw IoError("sidecar prior count mismatch: " + prefix);
  if (info != nullptr) {
    info->layout = j.at("layout").get<std::string>();
    info->p_min = agent.p_min;
    info->p_max = agent.p_max;
    const auto& s = j.at("influence");
    info->influence = {s.at("kappa_start").get<double>(), s.at("kappa_end").get<double>(), s.at("alpha").get<double>(),
                       s.at("horizon_steps").get<long>()};
    info->env_steps = j.at("env_steps").get<long>();
    info->updates = j.at("updates").get<int>();
  }
  return agent;
}

}  // namespace hipt::hierarchy
