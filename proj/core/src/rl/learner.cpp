#include "hipt/rl/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hipt::rl {
namespace {

using nn::Matrix;
using nn::Vector;

struct StepRef {
  int chunk;
  int step;
};

struct Moments {
  double mean = 0.0;
  double inv_std = 1.0;
};

Moments moments_of(const std::vector<double>& xs, bool normalize) {
  Moments m;
  if (!normalize || xs.size() < 2) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - m.mean) * (x - m.mean);
  var /= static_cast<double>(xs.size());
  m.inv_std = 1.0 / (std::sqrt(var) + 1e-8);
  return m;
}

template <typename Col>
double column_entropy(const Col& probs, const Col& log_probs) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) h -= probs[i] * log_probs[i];
  }
  return h;
}

struct LossAccumulator {
  LevelDiagnostics low;
  LevelDiagnostics high;
  double jsd = 0.0;
  double loss = 0.0;
};

// Clipped surrogate + entropy for one categorical head; writes the logit
// cotangent (scaled by `weight`) into d_logits and updates diagnostics.
void policy_head_loss(const Vector& logits, int action, double old_log_prob, double advantage, double clip,
                      double entropy_coef, double weight, Eigen::Ref<Vector> d_logits, LevelDiagnostics& diag,
                      double& loss, Vector* probs_out = nullptr, Vector* log_probs_out = nullptr) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  const Vector log_probs = (logits.array() - lse).matrix();
  const Vector probs = log_probs.array().exp().matrix();
  const double new_lp = log_probs[action];
  const double ratio = std::exp(new_lp - old_log_prob);
  const double bounded = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  const double unclipped = ratio * advantage;
  const double clipped = bounded * advantage;
  const double objective = std::min(unclipped, clipped);
  const double g = unclipped <= clipped ? unclipped : 0.0;
  const double h = column_entropy(probs, log_probs);

  // d(-objective)/dlogits = -g * (onehot - probs)
  d_logits.noalias() += weight * g * probs;
  d_logits[action] -= weight * g;
  // d(-c*H)/dlogits = c * probs * (log_probs + H)
  d_logits.noalias() += weight * entropy_coef * (probs.array() * (log_probs.array() + h)).matrix();

  loss += weight * (-objective - entropy_coef * h);
  diag.policy_objective += objective;
  diag.entropy += h;
  diag.clip_fraction += ratio != bounded ? 1.0 : 0.0;
  diag.approx_kl += (ratio - 1.0) - (new_lp - old_log_prob);
  ++diag.samples;
  if (probs_out != nullptr) *probs_out = probs;
  if (log_probs_out != nullptr) *log_probs_out = log_probs;
}

class MinibatchLoss {
 public:
  MinibatchLoss(const nn::Network& net, const std::vector<SequenceChunk>& data, const std::vector<StepRef>& refs,
                const PpoConfig& cfg, const UpdateCoefficients& coef)
      : net_(net), data_(data), cfg_(cfg), coef_(coef) {
    std::vector<double> low_adv, high_adv;
    for (const auto& r : refs) {
      const auto& c = data[r.chunk];
      low_adv.push_back(c.advantages[r.step]);
      if (c.has_high() && c.high_choices[r.step] >= 0) high_adv.push_back(c.high_advantages[r.step]);
    }
    n_low_ = static_cast<double>(low_adv.size());
    n_high_ = static_cast<double>(high_adv.size());
    low_norm_ = moments_of(low_adv, cfg.normalize_advantages);
    high_norm_ = moments_of(high_adv, cfg.normalize_advantages);
  }

  // Fills cotangent column `col` for the step `ref` given the outputs column.
  void apply(const nn::Outputs& out, Eigen::Index col, StepRef ref, nn::OutputCotangents& cot) {
    const auto& c = data_[ref.chunk];
    const int t = ref.step;
    const int a = net_.spec().num_actions;
    const int prior = c.priors.empty() ? 0 : c.priors[t];

    const Vector logits = out.low_logits.col(col).segment(static_cast<Eigen::Index>(prior) * a, a);
    Vector d_logits = Vector::Zero(a);
    const double w_low = 1.0 / n_low_;
    const double adv = (c.advantages[t] - low_norm_.mean) * low_norm_.inv_std;
    Vector probs, log_probs;
    policy_head_loss(logits, c.actions[t], c.old_log_probs[t], adv, cfg_.clip, coef_.entropy, w_low, d_logits,
                     acc_.low, acc_.loss, &probs, &log_probs);

    if (c.population_size > 0 && c.peer_prob_sum.cols() > 0) {
      const double n = c.population_size;
      const Vector mix = (probs + c.peer_prob_sum.col(t)) / n;
      double h_mix = 0.0;
      for (Eigen::Index i = 0; i < mix.size(); ++i) {
        if (mix[i] > 0.0) h_mix -= mix[i] * std::log(mix[i]);
      }
      const double h_self = column_entropy(probs, log_probs);
      const double jsd = h_mix - (h_self + c.peer_entropy_sum[t]) / n;
      acc_.jsd += jsd;
      acc_.loss -= w_low * coef_.jsd * jsd;
      if (coef_.jsd != 0.0) {
        // dJSD/dprobs = (log probs - log mix) / n
        Vector d_probs(a);
        for (int i = 0; i < a; ++i) {
          d_probs[i] = mix[i] > 0.0 ? (log_probs[i] - std::log(mix[i])) / n : 0.0;
        }
        d_logits += -w_low * coef_.jsd * nn::softmax_backward(probs, d_probs);
      }
    }
    cot.low_logits.col(col).segment(static_cast<Eigen::Index>(prior) * a, a) += d_logits;

    const double v_err = out.value_low[col] - c.returns[t];
    cot.value_low[col] += w_low * cfg_.value_coef * 2.0 * v_err;
    acc_.loss += w_low * cfg_.value_coef * v_err * v_err;
    acc_.low.value_loss += v_err * v_err;

    if (c.has_high() && c.high_choices[t] >= 0) {
      const double w_high = 1.0 / n_high_;
      const double hadv = (c.high_advantages[t] - high_norm_.mean) * high_norm_.inv_std;
      Vector d_high = Vector::Zero(net_.spec().num_priors);
      policy_head_loss(out.high_logits.col(col), c.high_choices[t], c.high_old_log_probs[t], hadv, cfg_.clip,
                       coef_.entropy, w_high, d_high, acc_.high, acc_.loss);
      cot.high_logits.col(col) += d_high;
      const double hv_err = out.value_high[col] - c.high_returns[t];
      cot.value_high[col] += w_high * cfg_.value_coef * 2.0 * hv_err;
      acc_.loss += w_high * cfg_.value_coef * hv_err * hv_err;
      acc_.high.value_loss += hv_err * hv_err;
    }
  }

  LossAccumulator& totals() { return acc_; }

 private:
  const nn::Network& net_;
  const std::vector<SequenceChunk>& data_;
  const PpoConfig& cfg_;
  const UpdateCoefficients& coef_;
  double n_low_ = 1.0;
  double n_high_ = 1.0;
  Moments low_norm_;
  Moments high_norm_;
  LossAccumulator acc_;
};

nn::OutputCotangents zero_cotangents(const nn::NetworkSpec& spec, Eigen::Index batch) {
  nn::OutputCotangents cot;
  cot.high_logits = Matrix::Zero(spec.num_priors, batch);
  cot.low_logits = Matrix::Zero(static_cast<Eigen::Index>(spec.num_priors) * spec.num_actions, batch);
  cot.value_high = nn::RowVector::Zero(batch);
  cot.value_low = nn::RowVector::Zero(batch);
  return cot;
}

void merge(LevelDiagnostics& into, const LevelDiagnostics& from) {
  into.policy_objective += from.policy_objective;
  into.value_loss += from.value_loss;
  into.entropy += from.entropy;
  into.clip_fraction += from.clip_fraction;
  into.approx_kl += from.approx_kl;
  into.samples += from.samples;
}

void finalize(LevelDiagnostics& d) {
  if (d.samples == 0) return;
  const double n = static_cast<double>(d.samples);
  d.policy_objective /= n;
  d.value_loss /= n;
  d.entropy /= n;
  d.clip_fraction /= n;
  d.approx_kl /= n;
}

// Gradient of one minibatch for a feed-forward trunk: all steps in one pass.
LossAccumulator feedforward_minibatch(const nn::Network& net, const nn::ParamStore& params,
                                      const std::vector<SequenceChunk>& data, const std::vector<StepRef>& refs,
                                      const PpoConfig& cfg, const UpdateCoefficients& coef, nn::Gradient& grad) {
  const auto& spec = net.spec();
  const auto batch = static_cast<Eigen::Index>(refs.size());
  Matrix x(spec.input_dim, batch);
  for (Eigen::Index j = 0; j < batch; ++j) x.col(j) = data[refs[j].chunk].observations.col(refs[j].step);
  nn::ForwardCache cache;
  const auto out = net.forward(params, x, Matrix(), &cache);
  auto cot = zero_cotangents(spec, batch);
  MinibatchLoss loss(net, data, refs, cfg, coef);
  for (Eigen::Index j = 0; j < batch; ++j) loss.apply(out, j, refs[j], cot);
  net.backward(params, cache, cot, grad);
  return loss.totals();
}

// Truncated BPTT over a group of chunks, processed time-major.
LossAccumulator recurrent_minibatch(const nn::Network& net, const nn::ParamStore& params,
                                    const std::vector<SequenceChunk>& data, std::vector<int> chunk_ids,
                                    const PpoConfig& cfg, const UpdateCoefficients& coef, nn::Gradient& grad) {
  const auto& spec = net.spec();
  std::stable_sort(chunk_ids.begin(), chunk_ids.end(),
                   [&](int a, int b) { return data[a].length() > data[b].length(); });
  const int horizon = data[chunk_ids.front()].length();
  std::vector<StepRef> refs;
  for (int id : chunk_ids) {
    for (int t = 0; t < data[id].length(); ++t) refs.push_back({id, t});
  }
  MinibatchLoss loss(net, data, refs, cfg, coef);

  Matrix hidden(spec.recurrent_hidden, static_cast<Eigen::Index>(chunk_ids.size()));
  for (std::size_t k = 0; k < chunk_ids.size(); ++k) hidden.col(static_cast<Eigen::Index>(k)) = data[chunk_ids[k]].initial_hidden;

  std::vector<nn::ForwardCache> caches(static_cast<std::size_t>(horizon));
  std::vector<nn::OutputCotangents> cots(static_cast<std::size_t>(horizon));
  std::vector<Eigen::Index> active(static_cast<std::size_t>(horizon));
  for (int t = 0; t < horizon; ++t) {
    Eigen::Index k = 0;
    while (k < static_cast<Eigen::Index>(chunk_ids.size()) && data[chunk_ids[k]].length() > t) ++k;
    active[t] = k;
    Matrix x(spec.input_dim, k);
    for (Eigen::Index j = 0; j < k; ++j) x.col(j) = data[chunk_ids[j]].observations.col(t);
    const Matrix h_in = hidden.leftCols(k);
    const auto out = net.forward(params, x, h_in, &caches[t]);
    cots[t] = zero_cotangents(spec, k);
    for (Eigen::Index j = 0; j < k; ++j) loss.apply(out, j, StepRef{chunk_ids[j], t}, cots[t]);
    hidden = out.hidden;
  }
  Matrix d_hidden;
  for (int t = horizon - 1; t >= 0; --t) {
    const Eigen::Index k = active[t];
    cots[t].hidden = Matrix::Zero(spec.recurrent_hidden, k);
    if (d_hidden.size() != 0) cots[t].hidden.leftCols(d_hidden.cols()) = d_hidden;
    d_hidden = net.backward(params, caches[t], cots[t], grad);
  }
  return loss.totals();
}

}  // namespace

bool SequenceChunk::has_high() const { return !high_choices.empty(); }

void SequenceChunk::resize(int input_dim, int length) {
  observations = Matrix::Zero(input_dim, length);
  priors.assign(length, 0);
  actions.assign(length, 0);
  old_log_probs.assign(length, 0.0);
  advantages.assign(length, 0.0);
  returns.assign(length, 0.0);
}

UpdateDiagnostics ppo_update(const nn::Network& network, nn::ParamStore& params, nn::AdamState& adam,
                             const nn::LinearDecaySchedule& schedule, const std::vector<SequenceChunk>& data,
                             const PpoConfig& config, const UpdateCoefficients& coefficients, Rng& rng) {
  config.validate();
  UpdateDiagnostics diag;
  if (data.empty()) return diag;
  const nn::ParamStore entry_params = params;
  const nn::AdamState entry_adam = adam;
  const bool recurrent = network.spec().recurrent();

  std::vector<StepRef> all_steps;
  for (int c = 0; c < static_cast<int>(data.size()); ++c) {
    for (int t = 0; t < data[c].length(); ++t) all_steps.push_back({c, t});
  }
  std::vector<int> chunk_order(data.size());
  std::iota(chunk_order.begin(), chunk_order.end(), 0);

  const auto shuffle = [&rng](auto& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  };

  nn::Gradient grad(params.size());
  double grad_norm_total = 0.0;
  try {
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      std::vector<std::vector<StepRef>> ff_batches;
      std::vector<std::vector<int>> rec_batches;
      if (recurrent) {
        shuffle(chunk_order);
        std::vector<int> group;
        int steps = 0;
        for (int id : chunk_order) {
          group.push_back(id);
          steps += data[id].length();
          if (steps >= config.minibatch_size) {
            rec_batches.push_back(std::move(group));
            group.clear();
            steps = 0;
          }
        }
        if (!group.empty()) rec_batches.push_back(std::move(group));
      } else {
        shuffle(all_steps);
        for (std::size_t i = 0; i < all_steps.size(); i += config.minibatch_size) {
          const auto end = std::min(all_steps.size(), i + static_cast<std::size_t>(config.minibatch_size));
          ff_batches.emplace_back(all_steps.begin() + static_cast<std::ptrdiff_t>(i),
                                  all_steps.begin() + static_cast<std::ptrdiff_t>(end));
        }
      }
      const std::size_t count = recurrent ? rec_batches.size() : ff_batches.size();
      for (std::size_t b = 0; b < count; ++b) {
        grad.zero();
        LossAccumulator acc = recurrent
                                  ? recurrent_minibatch(network, params, data, rec_batches[b], config, coefficients, grad)
                                  : feedforward_minibatch(network, params, data, ff_batches[b], config, coefficients, grad);
        if (!std::isfinite(acc.loss)) throw DivergenceError("ppo_update: non-finite loss");
        const double norm = grad.norm();
        if (!std::isfinite(norm)) throw DivergenceError("ppo_update: non-finite gradient");
        if (config.max_grad_norm > 0.0 && norm > config.max_grad_norm) {
          const double scale = config.max_grad_norm / norm;
          for (double& g : grad.values) g *= scale;
        }
        nn::adam_update(params, grad, adam, schedule);
        grad_norm_total += norm;
        merge(diag.low, acc.low);
        merge(diag.high, acc.high);
        diag.jsd += acc.jsd;
        ++diag.minibatches;
      }
    }
  } catch (const DivergenceError&) {
    params = entry_params;
    adam = entry_adam;
    throw;
  }
  const long low_samples = diag.low.samples;
  finalize(diag.low);
  finalize(diag.high);
  if (low_samples > 0) diag.jsd /= static_cast<double>(low_samples);
  if (diag.minibatches > 0) diag.grad_norm = grad_norm_total / diag.minibatches;
  return diag;
}

std::vector<SequenceChunk> split_into_chunks(const SequenceChunk& stream, int chunk_length,
                                             const std::vector<nn::Vector>& hidden_at_step) {
  std::vector<SequenceChunk> chunks;
  const int n = stream.length();
  for (int start = 0; start < n; start += chunk_length) {
    const int len = std::min(chunk_length, n - start);
    SequenceChunk c;
    c.observations = stream.observations.middleCols(start, len);
    if (!hidden_at_step.empty()) c.initial_hidden = hidden_at_step[start];
    const auto slice = [&](const auto& v) {
      using T = typename std::decay_t<decltype(v)>::value_type;
      return std::vector<T>(v.begin() + start, v.begin() + start + len);
    };
    c.priors = slice(stream.priors);
    c.actions = slice(stream.actions);
    c.old_log_probs = slice(stream.old_log_probs);
    c.advantages = slice(stream.advantages);
    c.returns = slice(stream.returns);
    if (stream.has_high()) {
      c.high_choices = slice(stream.high_choices);
      c.high_old_log_probs = slice(stream.high_old_log_probs);
      c.high_advantages = slice(stream.high_advantages);
      c.high_returns = slice(stream.high_returns);
    }
    if (stream.peer_prob_sum.cols() > 0) {
      c.peer_prob_sum = stream.peer_prob_sum.middleCols(start, len);
      c.peer_entropy_sum = slice(stream.peer_entropy_sum);
      c.population_size = stream.population_size;
    }
    chunks.push_back(std::move(c));
  }
  return chunks;
}

}  // namespace hipt::rl
