#include "hipt/hipt/rollout.hpp"

#include <algorithm>
#include <cmath>

#include "hipt/env/observation.hpp"
#include "hipt/util/error.hpp"

namespace hipt::hierarchy {

namespace {

struct SegmentState {
  int remaining = 0;
  int prior = 0;
  std::vector<double> env_rewards;
  std::vector<double> influence;
};

void close_segment(HiptEpisode& ep, SegmentState& seg, const RolloutSettings& settings) {
  HighStep& h = ep.high.back();
  h.horizon = static_cast<int>(seg.env_rewards.size());
  h.reward = high_level_reward(seg.env_rewards, seg.influence, settings.alpha, settings.kappa);
  seg.env_rewards.clear();
  seg.influence.clear();
}

}  // namespace

std::vector<HiptEpisode> rollout_batch(const HiptAgent& agent, const std::vector<Partner>& partners,
                                       const std::vector<int>& seats, const env::Layout& layout,
                                       const RolloutSettings& settings, Rng& rng) {
  const int n = static_cast<int>(partners.size());
  if (n == 0 || static_cast<int>(seats.size()) != n) throw ContractViolation("rollout_batch: one seat per partner");
  if (agent.p_min < 1 || agent.p_min > agent.p_max) throw ContractViolation("rollout_batch: bad horizon bounds");
  const auto& spec = agent.params.spec;
  const int dim = spec.input_dim;
  const int actions = spec.num_actions;
  const int priors = spec.num_priors;
  const int horizon = settings.horizon;
  if (env::observation_size(layout) != dim) throw DimensionMismatch("rollout_batch: network input vs layout");
  const nn::Network net(spec);

  // Episodes sharing partner parameters run as one batched pass; groups are
  // ordered by first appearance so random draws do not depend on addresses.
  struct Group {
    const nn::ParamStore* params;
    nn::Network net;
    std::vector<int> episodes;
    nn::Matrix hidden;
    nn::Matrix input;
  };
  std::vector<Group> partner_groups;
  for (int i = 0; i < n; ++i) {
    if ((partners[i].params == nullptr) == (partners[i].policy == nullptr)) {
      throw ContractViolation("rollout_batch: partner needs exactly one of params or policy");
    }
    if (seats[i] != 0 && seats[i] != 1) throw ContractViolation("rollout_batch: seat must be 0 or 1");
    const nn::ParamStore* p = partners[i].params;
    if (p == nullptr) continue;
    auto it = std::find_if(partner_groups.begin(), partner_groups.end(), [p](const Group& g) { return g.params == p; });
    if (it == partner_groups.end()) {
      if (p->spec.input_dim != dim) throw DimensionMismatch("rollout_batch: partner input vs layout");
      partner_groups.push_back({p, nn::Network(p->spec), {}, {}, {}});
      it = std::prev(partner_groups.end());
    }
    it->episodes.push_back(i);
  }
  for (auto& g : partner_groups) {
    g.hidden = g.net.initial_hidden(static_cast<int>(g.episodes.size()));
    g.input.resize(dim, static_cast<Eigen::Index>(g.episodes.size()));
  }
  for (int i = 0; i < n; ++i) {
    if (partners[i].policy != nullptr) partners[i].policy->reset(rng.next());
  }

  std::vector<HiptEpisode> episodes(n);
  std::vector<SegmentState> segments(n);
  std::vector<env::WorldState> worlds(n, env::reset(layout));
  for (int i = 0; i < n; ++i) {
    episodes[i].seat = seats[i];
    episodes[i].observations.resize(dim, horizon);
    episodes[i].low.reserve(static_cast<std::size_t>(horizon));
  }

  nn::Matrix x(dim, n);
  nn::Matrix hidden = net.initial_hidden(n);
  std::vector<int> partner_action(n, 0);
  std::vector<double> dist(static_cast<std::size_t>(std::max(actions, priors)));
  nn::Vector high_col(priors);
  nn::Matrix low_cond(actions, priors);

  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < n; ++i) env::encode_observation(worlds[i], layout, seats[i], x.col(i).data());
    if (spec.recurrent()) {
      for (int i = 0; i < n; ++i) episodes[i].hidden_at.push_back(hidden.col(i));
    }
    const nn::Outputs out = net.forward(agent.params, x, hidden);
    const nn::Matrix high = nn::softmax(out.high_logits);

    for (int i = 0; i < n; ++i) {
      HiptEpisode& ep = episodes[i];
      SegmentState& seg = segments[i];
      ep.observations.col(t) = x.col(i);
      high_col = high.col(i);
      if (seg.remaining == 0) {
        HighStep h;
        h.start_tick = t;
        h.sampled_horizon = static_cast<int>(rng.uniform_int(agent.p_min, agent.p_max));
        h.prior = rng.categorical(std::span<const double>(high_col.data(), static_cast<std::size_t>(priors)));
        h.log_prob = std::log(std::max(high_col[h.prior], 1e-300));
        h.value = out.value_high(0, i);
        seg.remaining = h.sampled_horizon;
        seg.prior = h.prior;
        ep.high.push_back(h);
      }
      for (int z = 0; z < priors; ++z) {
        low_cond.col(z) = nn::softmax(out.low_logits.col(i).segment(static_cast<Eigen::Index>(z) * actions, actions));
      }
      LowStep step;
      step.prior = seg.prior;
      step.action = rng.categorical(std::span<const double>(low_cond.col(seg.prior).data(), static_cast<std::size_t>(actions)));
      step.log_prob = std::log(std::max(low_cond(step.action, seg.prior), 1e-300));
      step.influence = influence_reward(high_col, low_cond, seg.prior);
      step.value = out.value_low(0, i);
      ep.low.push_back(step);
    }
    hidden = out.hidden;

    for (auto& g : partner_groups) {
      for (std::size_t k = 0; k < g.episodes.size(); ++k) {
        const int i = g.episodes[k];
        env::encode_observation(worlds[i], layout, 1 - seats[i], g.input.col(static_cast<Eigen::Index>(k)).data());
      }
      const nn::Outputs po = g.net.forward(*g.params, g.input, g.hidden);
      g.hidden = po.hidden;
      const nn::Matrix probs = nn::softmax(po.low_block(0, g.params->spec.num_actions));
      for (std::size_t k = 0; k < g.episodes.size(); ++k) {
        const auto col = static_cast<Eigen::Index>(k);
        partner_action[g.episodes[k]] =
            rng.categorical(std::span<const double>(probs.col(col).data(), static_cast<std::size_t>(probs.rows())));
      }
    }
    for (int i = 0; i < n; ++i) {
      if (partners[i].policy != nullptr) {
        const auto d = env::sanitize(partners[i].policy->act(worlds[i], layout, 1 - seats[i]));
        partner_action[i] = rng.categorical(d);
      }
    }

    for (int i = 0; i < n; ++i) {
      HiptEpisode& ep = episodes[i];
      SegmentState& seg = segments[i];
      env::JointAction joint{};
      joint[seats[i]] = static_cast<env::Action>(ep.low.back().action);
      joint[1 - seats[i]] = static_cast<env::Action>(partner_action[i]);
      env::StepOutcome o = env::step(worlds[i], joint, layout, settings.shaping, horizon);
      const double shaped = o.shaped[seats[i]].total();
      LowStep& step = ep.low.back();
      step.sparse_reward = o.sparse_reward;
      step.reward = o.sparse_reward + shaped;
      ep.episode_return += o.sparse_reward;
      seg.env_rewards.push_back(settings.high_uses_shaping ? step.reward : step.sparse_reward);
      seg.influence.push_back(step.influence);
      --seg.remaining;
      if (seg.remaining == 0 || t == horizon - 1) {
        close_segment(ep, seg, settings);
        seg.remaining = 0;
      }
      worlds[i] = std::move(o.next_state);
    }
  }
  return episodes;
}

HiptEpisode rollout_episode(const HiptAgent& agent, const Partner& partner, int seat, const env::Layout& layout,
                            const RolloutSettings& settings, Rng& rng) {
  return std::move(rollout_batch(agent, {partner}, {seat}, layout, settings, rng).front());
}

}  // namespace hipt::hierarchy
