#include "hipt/eval/evaluate.hpp"

#include <set>

#include "hipt/population/network_policy.hpp"
#include "hipt/util/error.hpp"

namespace hipt::eval {

env::ReturnStats evaluate_pair(env::Policy& agent, env::Policy& partner, const env::Layout& layout, int episodes,
                               std::uint64_t seed, int horizon) {
  if (episodes < 1) throw ContractViolation("evaluate_pair: episodes must be >= 1");
  return env::measure_returns(agent, partner, layout, episodes, horizon, seed, true);
}

void EvalSuite::validate() const {
  if (episodes < 1) throw ContractViolation("eval suite: episodes must be >= 1");
  if (tiers.empty()) throw ContractViolation("eval suite: no tiers selected");
  if (held_out.slots.empty()) throw ContractViolation("eval suite: empty held-out population");
}

void check_disjoint(const population::PartnerPopulation& training, const population::PartnerPopulation& held_out) {
  std::set<std::uint64_t> seeds;
  for (const auto& s : training.slots) seeds.insert(s.seed);
  for (const auto& s : held_out.slots) {
    if (seeds.count(s.seed) != 0) throw ContractViolation("held-out population shares a seed with the training population");
  }
}

std::vector<EvalRow> evaluate_vs_population(env::Policy& agent, const std::string& method, const env::Layout& layout,
                                            const EvalSuite& suite) {
  suite.validate();
  std::vector<EvalRow> rows;
  std::vector<double> pooled;
  for (const auto tier : suite.tiers) {
    std::vector<double> returns;
    for (std::size_t i = 0; i < suite.held_out.slots.size(); ++i) {
      population::NetworkPolicy partner(suite.held_out.slots[i].tier(tier));
      const auto seed = derive_seed(suite.seed, i * 8 + static_cast<std::size_t>(tier));
      const auto stats = evaluate_pair(agent, partner, layout, suite.episodes, seed, suite.horizon);
      returns.insert(returns.end(), stats.returns.begin(), stats.returns.end());
    }
    pooled.insert(pooled.end(), returns.begin(), returns.end());
    const auto s = env::summarize_returns(std::move(returns));
    rows.push_back({layout.name, method, population::to_string(tier), s.mean, s.stddev, s.episodes});
  }
  const auto all = env::summarize_returns(std::move(pooled));
  rows.push_back({layout.name, method, "all", all.mean, all.stddev, all.episodes});
  return rows;
}

EvalRow evaluate_vs_partner(env::Policy& agent, env::Policy& partner, const std::string& method,
                            const std::string& partner_type, const env::Layout& layout, int episodes,
                            std::uint64_t seed, int horizon) {
  const auto s = evaluate_pair(agent, partner, layout, episodes, seed, horizon);
  return {layout.name, method, partner_type, s.mean, s.stddev, s.episodes};
}

}  // namespace hipt::eval
