#include "hipt/population/population.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "hipt/nn/model_file.hpp"
#include "hipt/population/network_policy.hpp"
#include "hipt/rl/metrics.hpp"
#include "hipt/util/error.hpp"

namespace hipt::population {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Tier tier) {
  switch (tier) {
    case Tier::Full: return "full";
    case Tier::Mid: return "mid";
    case Tier::Random: return "random";
  }
  return "?";
}

Tier parse_tier(const std::string& text) {
  if (text == "full") return Tier::Full;
  if (text == "mid") return Tier::Mid;
  if (text == "random") return Tier::Random;
  throw ContractViolation("unknown tier: " + text);
}

const nn::ParamStore& PopulationSlot::tier(Tier t) const {
  switch (t) {
    case Tier::Full: return full;
    case Tier::Mid: return mid;
    case Tier::Random: return random;
  }
  throw ContractViolation("bad tier");
}

double PopulationSlot::tier_return(Tier t) const {
  switch (t) {
    case Tier::Full: return full_return;
    case Tier::Mid: return mid_return;
    case Tier::Random: return random_return;
  }
  throw ContractViolation("bad tier");
}

std::vector<std::pair<int, Tier>> PartnerPopulation::entries() const {
  std::vector<std::pair<int, Tier>> out;
  for (int i = 0; i < static_cast<int>(slots.size()); ++i) {
    for (Tier t : {Tier::Full, Tier::Mid, Tier::Random}) out.emplace_back(i, t);
  }
  return out;
}

void PopulationConfig::validate() const {
  trainer.validate();
  if (size < 2) throw ContractViolation("population size must be >= 2");
  if (checkpoint_every < 1) throw ContractViolation("checkpoint_every must be >= 1");
  if (eval_episodes < 1) throw ContractViolation("eval_episodes must be >= 1");
  if (max_retries < 0) throw ContractViolation("max_retries must be >= 0");
  if (!(mid_low <= mid_target && mid_target <= mid_high)) throw ContractViolation("mid band must contain the target");
}

int select_mid_checkpoint(const std::vector<CheckpointRecord>& records, double full_return, double target,
                          double low, double high, bool& in_band) {
  if (records.empty()) throw ContractViolation("select_mid_checkpoint: no checkpoints");
  int best = 0;
  double best_gap = std::abs(records[0].self_play_return - target * full_return);
  for (int i = 1; i < static_cast<int>(records.size()); ++i) {
    const double gap = std::abs(records[i].self_play_return - target * full_return);
    if (gap < best_gap) {
      best = i;
      best_gap = gap;
    }
  }
  const double r = records[best].self_play_return;
  in_band = full_return > 0.0 && r >= low * full_return && r <= high * full_return;
  return best;
}

double measure_self_play(const nn::ParamStore& params, const env::Layout& layout, int episodes, int horizon,
                         std::uint64_t seed, double* stddev) {
  NetworkPolicy a(params);
  NetworkPolicy b(params);
  const auto stats = env::measure_returns(a, b, layout, episodes, horizon, seed, true);
  if (stddev != nullptr) *stddev = stats.stddev;
  return stats.mean;
}

namespace {

struct Member {
  std::unique_ptr<SelfPlayTrainer> trainer;
  std::vector<CheckpointRecord> checkpoints;
  std::uint64_t seed = 0;
  int attempts = 0;
};

std::uint64_t member_seed(std::uint64_t base, int slot, int attempt) {
  return derive_seed(base, static_cast<std::uint64_t>(slot) * 1000 + static_cast<std::uint64_t>(attempt));
}

void record_checkpoint(Member& m, const env::Layout& layout, const PopulationConfig& config) {
  CheckpointRecord rec;
  rec.env_steps = m.trainer->env_steps();
  rec.params = m.trainer->params();
  rec.self_play_return = measure_self_play(rec.params, layout, config.eval_episodes, config.trainer.horizon,
                                           derive_seed(m.seed, 500 + m.checkpoints.size()), &rec.self_play_std);
  m.checkpoints.push_back(std::move(rec));
}

void start_member(Member& m, int slot, const env::Layout& layout, const PopulationConfig& config) {
  m.seed = member_seed(config.seed, slot, m.attempts);
  ++m.attempts;
  m.trainer = std::make_unique<SelfPlayTrainer>(layout, config.trainer, m.seed);
  m.checkpoints.clear();
  record_checkpoint(m, layout, config);
}

}  // namespace

PartnerPopulation train_population(const env::Layout& layout, const PopulationConfig& config,
                                   rl::MetricsLog* metrics,
                                   const std::function<void(const PopulationProgress&)>& on_progress) {
  config.validate();
  std::vector<Member> members(static_cast<std::size_t>(config.size));
  for (int i = 0; i < config.size; ++i) start_member(members[i], i, layout, config);

  while (true) {
    bool any = false;
    std::vector<nn::ParamStore> snapshot;
    for (const auto& m : members) snapshot.push_back(m.trainer->params());
    for (int i = 0; i < config.size; ++i) {
      Member& m = members[i];
      if (m.trainer->finished()) continue;
      any = true;
      const double jsd_coef = config.jsd_coef * (1.0 - m.trainer->progress());
      std::vector<const nn::ParamStore*> peers;
      if (jsd_coef != 0.0) {
        for (int j = 0; j < config.size; ++j) {
          if (j != i) peers.push_back(&snapshot[j]);
        }
      }
      IterationStats stats;
      try {
        stats = m.trainer->iterate(peers, jsd_coef);
      } catch (const DivergenceError& e) {
        spdlog::warn("population slot {} diverged at {} steps ({}); attempt {}/{}", i, m.trainer->env_steps(),
                     e.what(), m.attempts, config.max_retries + 1);
        if (m.attempts > config.max_retries) {
          throw DivergenceError("population slot " + std::to_string(i) + " diverged after all retries");
        }
        start_member(m, i, layout, config);
        continue;
      }
      if (metrics != nullptr) metrics->record(m.trainer->updates(), stats.update, stats.mean_return, "slot" + std::to_string(i));
      if (on_progress) on_progress({i, stats});
      if (m.trainer->updates() % config.checkpoint_every == 0 || m.trainer->finished()) {
        record_checkpoint(m, layout, config);
      }
    }
    if (!any) break;
  }

  PartnerPopulation pop;
  pop.layout = layout.name;
  for (int i = 0; i < config.size; ++i) {
    Member& m = members[i];
    PopulationSlot slot;
    slot.seed = m.seed;
    slot.attempts = m.attempts;
    const CheckpointRecord& last = m.checkpoints.back();
    slot.full = last.params;
    slot.full_return = last.self_play_return;
    slot.full_steps = last.env_steps;
    const int mid = select_mid_checkpoint(m.checkpoints, slot.full_return, config.mid_target, config.mid_low,
                                          config.mid_high, slot.mid_in_band);
    slot.mid = m.checkpoints[mid].params;
    slot.mid_return = m.checkpoints[mid].self_play_return;
    slot.mid_steps = m.checkpoints[mid].env_steps;
    slot.random = m.trainer->initial_params();
    slot.random_return = m.checkpoints.front().self_play_return;
    for (const auto& c : m.checkpoints) slot.history.emplace_back(c.env_steps, c.self_play_return);
    if (!slot.mid_in_band) {
      spdlog::warn("population slot {}: no checkpoint within [{}, {}] of full return {:.1f}; using {:.1f}", i,
                   config.mid_low, config.mid_high, slot.full_return, slot.mid_return);
    }
    pop.slots.push_back(std::move(slot));
  }
  return pop;
}

void save_population(const PartnerPopulation& population, const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "hipt-population";
  manifest["version"] = 1;
  manifest["layout"] = population.layout;
  json slots = json::array();
  for (std::size_t i = 0; i < population.slots.size(); ++i) {
    const auto& s = population.slots[i];
    json js;
    js["seed"] = s.seed;
    js["attempts"] = s.attempts;
    js["full_steps"] = s.full_steps;
    js["mid_steps"] = s.mid_steps;
    js["mid_in_band"] = s.mid_in_band;
    js["history"] = s.history;
    for (Tier t : {Tier::Full, Tier::Mid, Tier::Random}) {
      const std::string name = "slot" + std::to_string(i) + "_" + to_string(t) + ".model";
      nn::save_model((fs::path(dir) / name).string(), s.tier(t));
      js["tiers"][to_string(t)] = {{"file", name}, {"self_play_return", s.tier_return(t)},
                                  {"digest", nn::params_digest(s.tier(t))}};
    }
    slots.push_back(std::move(js));
  }
  manifest["slots"] = std::move(slots);
  const fs::path path = fs::path(dir) / "manifest.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << manifest.dump(2) << '\n';
}

PartnerPopulation load_population(const std::string& dir) {
  const fs::path path = fs::path(dir) / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed population manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "hipt-population") throw IoError("not a population manifest: " + path.string());
  PartnerPopulation pop;
  pop.layout = manifest.at("layout").get<std::string>();
  for (const auto& js : manifest.at("slots")) {
    PopulationSlot s;
    s.seed = js.at("seed").get<std::uint64_t>();
    s.attempts = js.at("attempts").get<int>();
    s.full_steps = js.at("full_steps").get<long>();
    s.mid_steps = js.at("mid_steps").get<long>();
    s.mid_in_band = js.at("mid_in_band").get<bool>();
    s.history = js.at("history").get<std::vector<std::pair<long, double>>>();
    for (Tier t : {Tier::Full, Tier::Mid, Tier::Random}) {
      const auto& jt = js.at("tiers").at(to_string(t));
      nn::ParamStore p = nn::load_model((fs::path(dir) / jt.at("file").get<std::string>()).string());
      if (nn::params_digest(p) != jt.at("digest").get<std::string>()) {
        throw ChecksumError("population model digest mismatch: " + jt.at("file").get<std::string>());
      }
      const double r = jt.at("self_play_return").get<double>();
      switch (t) {
        case Tier::Full: s.full = std::move(p); s.full_return = r; break;
        case Tier::Mid: s.mid = std::move(p); s.mid_return = r; break;
        case Tier::Random: s.random = std::move(p); s.random_return = r; break;
      }
    }
    pop.slots.push_back(std::move(s));
  }
  if (pop.slots.size() < 2) throw IoError("population archive has fewer than two slots");
  return pop;
}

}  // namespace hipt::population
