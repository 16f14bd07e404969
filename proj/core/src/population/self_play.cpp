#include "hipt/population/self_play.hpp"

#include <algorithm>
#include <cmath>

#include "hipt/env/observation.hpp"
#include "hipt/population/network_policy.hpp"
#include "hipt/util/error.hpp"

namespace hipt::population {

namespace {

long minibatches_per_update(const TrainerConfig& c) {
  const long samples = 2L * c.episodes_per_update * c.horizon;
  const long per_epoch = (samples + c.ppo.minibatch_size - 1) / c.ppo.minibatch_size;
  return per_epoch * c.ppo.epochs;
}

long total_updates(const TrainerConfig& c) {
  const long per_update = static_cast<long>(c.episodes_per_update) * c.horizon;
  return std::max(1L, (c.total_env_steps + per_update - 1) / per_update);
}

}  // namespace

void TrainerConfig::validate() const {
  ppo.validate();
  if (episodes_per_update < 1) throw ContractViolation("episodes_per_update must be >= 1");
  if (horizon < 1) throw ContractViolation("horizon must be >= 1");
  if (total_env_steps < 1) throw ContractViolation("total_env_steps must be >= 1");
  if (!(learning_rate > 0.0) || !(lr_decay >= 1.0)) throw ContractViolation("bad learning-rate schedule");
  if (shaping_anneal_fraction < 0.0) throw ContractViolation("shaping_anneal_fraction must be >= 0");
}

double shaping_factor(long steps, long total, double anneal_fraction) {
  if (anneal_fraction <= 0.0) return 1.0;
  const double horizon = anneal_fraction * static_cast<double>(total);
  return std::clamp(1.0 - static_cast<double>(steps) / horizon, 0.0, 1.0);
}

nn::NetworkSpec spec_for_layout(const nn::NetworkSpec& base, const env::Layout& layout) {
  nn::NetworkSpec spec = base;
  spec.input_dim = env::observation_size(layout);
  spec.num_actions = env::kNumActions;
  spec.validate();
  return spec;
}

SelfPlayTrainer::SelfPlayTrainer(const env::Layout& layout, const TrainerConfig& config, std::uint64_t seed)
    : layout_(layout),
      config_(config),
      network_((config_.validate(), spec_for_layout(config.network, layout))),
      params_(network_.init_params(derive_seed(seed, 1))),
      initial_(params_),
      adam_(nn::AdamState::for_params(params_)),
      schedule_{config.learning_rate, config.lr_decay, total_updates(config) * minibatches_per_update(config)},
      rng_(derive_seed(seed, 2)) {}

double SelfPlayTrainer::progress() const {
  return std::min(1.0, static_cast<double>(env_steps_) / static_cast<double>(config_.total_env_steps));
}

IterationStats SelfPlayTrainer::iterate(const std::vector<const nn::ParamStore*>& peers, double jsd_coef) {
  const int episodes = config_.episodes_per_update;
  const int streams = 2 * episodes;
  const int horizon = config_.horizon;
  const auto& spec = network_.spec();
  const int dim = spec.input_dim;
  const int actions = spec.num_actions;
  const bool use_peers = jsd_coef != 0.0 && !peers.empty();

  env::ShapingConfig shaping = env::default_shaping(layout_);
  shaping.scale = shaping_factor(env_steps_, config_.total_env_steps, config_.shaping_anneal_fraction);

  std::vector<rl::SequenceChunk> stream_data(streams);
  std::vector<std::vector<double>> values(streams, std::vector<double>(horizon));
  std::vector<std::vector<double>> rewards(streams, std::vector<double>(horizon));
  std::vector<std::vector<nn::Vector>> hidden_at(streams);
  for (auto& s : stream_data) {
    s.resize(dim, horizon);
    if (use_peers) {
      s.peer_prob_sum = nn::Matrix::Zero(actions, horizon);
      s.peer_entropy_sum.assign(horizon, 0.0);
      s.population_size = static_cast<int>(peers.size()) + 1;
    }
  }

  std::vector<env::WorldState> worlds(episodes, env::reset(layout_));
  nn::Matrix x(dim, streams);
  nn::Matrix hidden = network_.initial_hidden(streams);
  std::vector<nn::Network> peer_nets;
  std::vector<nn::Matrix> peer_hidden;
  if (use_peers) {
    for (const auto* p : peers) {
      peer_nets.emplace_back(p->spec);
      peer_hidden.push_back(peer_nets.back().initial_hidden(streams));
    }
  }

  double sparse_total = 0.0;
  double shaped_total = 0.0;
  std::vector<double> dist(actions);
  for (int t = 0; t < horizon; ++t) {
    for (int e = 0; e < episodes; ++e) {
      for (int seat = 0; seat < 2; ++seat) {
        env::encode_observation(worlds[e], layout_, seat, x.col(2 * e + seat).data());
      }
    }
    if (spec.recurrent()) {
      for (int s = 0; s < streams; ++s) hidden_at[s].push_back(hidden.col(s));
    }
    const nn::Outputs out = network_.forward(params_, x, hidden);
    const nn::Matrix probs = low_policy(out, 0, actions);
    if (use_peers) {
      for (std::size_t k = 0; k < peers.size(); ++k) {
        const nn::Outputs po = peer_nets[k].forward(*peers[k], x, peer_hidden[k]);
        peer_hidden[k] = po.hidden;
        const nn::Matrix pp = low_policy(po, 0, actions);
        for (int s = 0; s < streams; ++s) {
          stream_data[s].peer_prob_sum.col(t) += pp.col(s);
          double h = 0.0;
          for (int a = 0; a < actions; ++a) {
            if (pp(a, s) > 0.0) h -= pp(a, s) * std::log(pp(a, s));
          }
          stream_data[s].peer_entropy_sum[t] += h;
        }
      }
    }
    for (int e = 0; e < episodes; ++e) {
      env::JointAction joint{};
      for (int seat = 0; seat < 2; ++seat) {
        const int s = 2 * e + seat;
        for (int a = 0; a < actions; ++a) dist[a] = probs(a, s);
        const int a = rng_.categorical(dist);
        joint[seat] = static_cast<env::Action>(a);
        auto& d = stream_data[s];
        d.observations.col(t) = x.col(s);
        d.actions[t] = a;
        d.old_log_probs[t] = std::log(std::max(probs(a, s), 1e-300));
        values[s][t] = value_scale_.denormalize(out.value_low(0, s));
      }
      env::StepOutcome step = env::step(worlds[e], joint, layout_, shaping, horizon);
      for (int seat = 0; seat < 2; ++seat) {
        rewards[2 * e + seat][t] = step.sparse_reward + step.shaped[seat].total();
        shaped_total += step.shaped[seat].total();
      }
      sparse_total += step.sparse_reward;
      worlds[e] = std::move(step.next_state);
    }
    hidden = out.hidden;
  }

  // Episodes end at the horizon and the tick is observed, so the tail is terminal.
  std::vector<std::uint8_t> dones(horizon, 0);
  dones.back() = 1;
  std::vector<double> all_returns;
  all_returns.reserve(static_cast<std::size_t>(streams) * horizon);
  for (int s = 0; s < streams; ++s) {
    const auto gae = rl::compute_gae(rewards[s], values[s], dones, 0.0, config_.ppo.discount, config_.ppo.gae_lambda);
    stream_data[s].advantages = gae.advantages;
    stream_data[s].returns = gae.returns;
    all_returns.insert(all_returns.end(), gae.returns.begin(), gae.returns.end());
  }
  if (config_.ppo.normalize_values) {
    value_scale_.update(all_returns);
    for (auto& d : stream_data) {
      for (double& r : d.returns) r = value_scale_.normalize(r);
    }
  }

  std::vector<rl::SequenceChunk> chunks;
  if (spec.recurrent()) {
    for (int s = 0; s < streams; ++s) {
      auto parts = rl::split_into_chunks(stream_data[s], config_.ppo.chunk_length, hidden_at[s]);
      for (auto& p : parts) chunks.push_back(std::move(p));
    }
  } else {
    chunks = std::move(stream_data);
  }

  const double frac = progress();
  rl::UpdateCoefficients coef;
  coef.entropy = config_.ppo.entropy_coef + (config_.ppo.entropy_coef_end - config_.ppo.entropy_coef) * frac;
  coef.jsd = use_peers ? jsd_coef : 0.0;

  IterationStats stats;
  stats.update = rl::ppo_update(network_, params_, adam_, schedule_, chunks, config_.ppo, coef, rng_);
  env_steps_ += static_cast<long>(episodes) * horizon;
  ++updates_;
  stats.env_steps = env_steps_;
  stats.mean_return = sparse_total / episodes;
  stats.mean_shaped_return = shaped_total / streams;
  return stats;
}

}  // namespace hipt::population
