#include "hipt/hipt/trainer.hpp"

#include <algorithm>

#include "hipt/population/self_play.hpp"
#include "hipt/util/error.hpp"

namespace hipt::hierarchy {

PartnerSampler::PartnerSampler(std::size_t count) : count_(count) {
  if (count_ == 0) throw ContractViolation("PartnerSampler: no partners");
}

std::size_t PartnerSampler::sample(Rng& rng) const {
  return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(count_) - 1));
}

std::vector<nn::ParamStore> flatten_population(const population::PartnerPopulation& population) {
  std::vector<nn::ParamStore> out;
  for (const auto& [slot, tier] : population.entries()) out.push_back(population.slots[slot].tier(tier));
  return out;
}

std::vector<rl::SequenceChunk> build_chunks(const std::vector<HiptEpisode>& episodes, const rl::PpoConfig& ppo,
                                            rl::RunningMeanStd* low_scale, rl::RunningMeanStd* high_scale,
                                            bool recurrent) {
  const auto denorm = [](rl::RunningMeanStd* s, double v) { return s != nullptr ? s->denormalize(v) : v; };
  std::vector<rl::SequenceChunk> streams;
  std::vector<double> low_returns, high_returns;
  for (const auto& ep : episodes) {
    const int len = static_cast<int>(ep.low.size());
    if (len == 0 || ep.high.empty()) throw ContractViolation("build_chunks: empty episode");
    rl::SequenceChunk c;
    c.resize(static_cast<int>(ep.observations.rows()), len);
    c.observations = ep.observations.leftCols(len);
    std::vector<double> rewards(len), values(len);
    for (int t = 0; t < len; ++t) {
      const auto& s = ep.low[t];
      c.priors[t] = s.prior;
      c.actions[t] = s.action;
      c.old_log_probs[t] = s.log_prob;
      rewards[t] = s.reward;
      values[t] = denorm(low_scale, s.value);
    }
    std::vector<std::uint8_t> dones(len, 0);
    dones[static_cast<std::size_t>(len) - 1] = 1;
    const auto low = rl::compute_gae(rewards, values, dones, 0.0, ppo.discount, ppo.gae_lambda);
    c.advantages = low.advantages;
    c.returns = low.returns;
    low_returns.insert(low_returns.end(), low.returns.begin(), low.returns.end());

    const int decisions = static_cast<int>(ep.high.size());
    std::vector<double> hr(decisions), hv(decisions);
    for (int k = 0; k < decisions; ++k) {
      hr[k] = ep.high[k].reward;
      hv[k] = denorm(high_scale, ep.high[k].value);
    }
    std::vector<std::uint8_t> hdone(decisions, 0);
    hdone[static_cast<std::size_t>(decisions) - 1] = 1;
    const auto high = rl::compute_gae(hr, hv, hdone, 0.0, ppo.discount, ppo.gae_lambda);
    c.high_choices.assign(len, -1);
    c.high_old_log_probs.assign(len, 0.0);
    c.high_advantages.assign(len, 0.0);
    c.high_returns.assign(len, 0.0);
    for (int k = 0; k < decisions; ++k) {
      const int t = ep.high[k].start_tick;
      c.high_choices[t] = ep.high[k].prior;
      c.high_old_log_probs[t] = ep.high[k].log_prob;
      c.high_advantages[t] = high.advantages[k];
      c.high_returns[t] = high.returns[k];
    }
    high_returns.insert(high_returns.end(), high.returns.begin(), high.returns.end());
    streams.push_back(std::move(c));
  }

  if (low_scale != nullptr) low_scale->update(low_returns);
  if (high_scale != nullptr) high_scale->update(high_returns);
  for (auto& c : streams) {
    if (low_scale != nullptr) {
      for (double& r : c.returns) r = low_scale->normalize(r);
    }
    if (high_scale != nullptr) {
      for (int t = 0; t < c.length(); ++t) {
        if (c.high_choices[t] >= 0) c.high_returns[t] = high_scale->normalize(c.high_returns[t]);
      }
    }
  }
  if (!recurrent) return streams;
  std::vector<rl::SequenceChunk> chunks;
  for (std::size_t e = 0; e < streams.size(); ++e) {
    auto parts = rl::split_into_chunks(streams[e], ppo.chunk_length, episodes[e].hidden_at);
    for (auto& p : parts) chunks.push_back(std::move(p));
  }
  return chunks;
}

namespace {

nn::NetworkSpec hipt_spec(const HiptConfig& config, const env::Layout& layout) {
  nn::NetworkSpec spec = population::spec_for_layout(config.network, layout);
  spec.num_priors = config.num_priors;
  spec.validate();
  return spec;
}

long schedule_steps(const HiptConfig& c) {
  const long per_update = static_cast<long>(c.episodes_per_update) * c.horizon;
  const long updates = std::max(1L, (c.total_env_steps + per_update - 1) / per_update);
  const long per_epoch = (per_update + c.ppo.minibatch_size - 1) / c.ppo.minibatch_size;
  return updates * per_epoch * c.ppo.epochs;
}

}  // namespace

HiptTrainer::HiptTrainer(const env::Layout& layout, const HiptConfig& config, std::vector<nn::ParamStore> partners,
                         std::uint64_t seed)
    : layout_(layout),
      config_(config),
      partners_(std::move(partners)),
      sampler_((config_.validate(), partners_.size())),
      network_(hipt_spec(config_, layout_)),
      agent_{network_.init_params(derive_seed(seed, 1)), config_.p_min, config_.p_max},
      adam_(nn::AdamState::for_params(agent_.params)),
      schedule_{config_.learning_rate, config_.lr_decay, schedule_steps(config_)},
      rng_(derive_seed(seed, 2)) {
  for (const auto& p : partners_) {
    if (p.spec.input_dim != network_.spec().input_dim || p.spec.num_actions != network_.spec().num_actions) {
      throw DimensionMismatch("HiptTrainer: partner network does not fit layout " + layout_.name);
    }
  }
}

HiptCheckpointInfo HiptTrainer::checkpoint_info() const {
  return {layout_.name, config_.p_min, config_.p_max, config_.influence, env_steps_, updates_};
}

HiptIteration HiptTrainer::iterate() {
  HiptIteration it;
  const int n = config_.episodes_per_update;
  std::vector<Partner> partners(n);
  std::vector<int> seats(n);
  for (int i = 0; i < n; ++i) {
    const std::size_t idx = sampler_.sample(rng_);
    it.partners.push_back(idx);
    partners[i].params = &partners_[idx];
    seats[i] = static_cast<int>(rng_.uniform_int(0, 1));
  }
  RolloutSettings settings;
  settings.horizon = config_.horizon;
  settings.kappa = anneal(config_.influence, env_steps_);
  settings.alpha = config_.influence.alpha;
  settings.shaping = env::default_shaping(layout_);
  settings.shaping.scale =
      population::shaping_factor(env_steps_, config_.total_env_steps, config_.shaping_anneal_fraction);
  settings.high_uses_shaping = config_.high_uses_shaping;

  const auto episodes = rollout_batch(agent_, partners, seats, layout_, settings, rng_);
  const bool norm = config_.ppo.normalize_values;
  const auto chunks = build_chunks(episodes, config_.ppo, norm ? &low_scale_ : nullptr, norm ? &high_scale_ : nullptr,
                                   network_.spec().recurrent());

  const double frac = std::min(1.0, static_cast<double>(env_steps_) / static_cast<double>(config_.total_env_steps));
  rl::UpdateCoefficients coef;
  coef.entropy = config_.ppo.entropy_coef + (config_.ppo.entropy_coef_end - config_.ppo.entropy_coef) * frac;
  it.update = rl::ppo_update(network_, agent_.params, adam_, schedule_, chunks, config_.ppo, coef, rng_);

  double influence = 0.0, high_reward = 0.0, segments = 0.0, ret = 0.0;
  long low_steps = 0;
  for (const auto& ep : episodes) {
    ret += ep.episode_return;
    segments += static_cast<double>(ep.high.size());
    for (const auto& s : ep.low) influence += s.influence;
    for (const auto& h : ep.high) high_reward += h.reward;
    low_steps += static_cast<long>(ep.low.size());
  }
  it.kappa = settings.kappa;
  env_steps_ += static_cast<long>(n) * config_.horizon;
  ++updates_;
  it.env_steps = env_steps_;
  it.mean_return = ret / n;
  it.mean_influence = influence / static_cast<double>(low_steps);
  it.mean_high_reward = segments > 0 ? high_reward / segments : 0.0;
  it.mean_segments = segments / n;
  return it;
}

}  // namespace hipt::hierarchy
