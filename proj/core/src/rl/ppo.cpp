#include "hipt/rl/ppo.hpp"

#include <algorithm>
#include <cmath>

#include "hipt/util/error.hpp"

namespace hipt::rl {

void PpoConfig::validate() const {
  if (discount < 0.0 || discount > 1.0) throw ContractViolation("PpoConfig: discount must be in [0, 1]");
  if (gae_lambda < 0.0 || gae_lambda > 1.0) throw ContractViolation("PpoConfig: gae_lambda must be in [0, 1]");
  if (!(clip > 0.0)) throw ContractViolation("PpoConfig: clip must be > 0");
  if (minibatch_size < 1 || epochs < 1 || chunk_length < 1) {
    throw ContractViolation("PpoConfig: minibatch_size, epochs and chunk_length must be >= 1");
  }
}

Advantages compute_gae(std::span<const double> rewards, std::span<const double> values,
                       std::span<const std::uint8_t> dones, double bootstrap_value, double discount, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw DimensionMismatch("compute_gae: length mismatch");
  Advantages out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  double next_value = bootstrap_value;
  for (std::size_t i = n; i-- > 0;) {
    const double not_done = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + discount * next_value * not_done - values[i];
    running = delta + discount * lambda * not_done * running;
    out.advantages[i] = running;
    out.returns[i] = running + values[i];
    next_value = values[i];
  }
  return out;
}

Advantages compute_gae(const TrajectoryBuffer& buffer, double bootstrap_value, double discount, double lambda) {
  std::vector<double> rewards, values;
  std::vector<std::uint8_t> dones;
  for (const auto& t : buffer.transitions) {
    rewards.push_back(t.reward);
    values.push_back(t.value);
    dones.push_back(t.done ? 1 : 0);
  }
  return compute_gae(rewards, values, dones, bootstrap_value, discount, lambda);
}

void normalize_in_place(std::span<double> values) {
  if (values.size() < 2) return;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  const double scale = 1.0 / (std::sqrt(var) + 1e-8);
  for (double& v : values) v = (v - mean) * scale;
}

SurrogateResult ppo_clip_loss(std::span<const double> new_log_probs, std::span<const double> old_log_probs,
                              std::span<const double> advantages, double clip) {
  const std::size_t n = new_log_probs.size();
  if (old_log_probs.size() != n || advantages.size() != n) throw DimensionMismatch("ppo_clip_loss: length mismatch");
  SurrogateResult out;
  out.grad_new_log_probs.assign(n, 0.0);
  if (n == 0) return out;
  int clipped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(new_log_probs[i]) || !std::isfinite(old_log_probs[i]) || !std::isfinite(advantages[i])) {
      throw DivergenceError("ppo_clip_loss: non-finite input");
    }
    const double ratio = std::exp(new_log_probs[i] - old_log_probs[i]);
    const double bounded = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    const double unclipped_obj = ratio * advantages[i];
    const double clipped_obj = bounded * advantages[i];
    if (ratio != bounded) ++clipped;
    if (unclipped_obj <= clipped_obj) {
      out.value += unclipped_obj;
      out.grad_new_log_probs[i] = unclipped_obj / static_cast<double>(n);
    } else {
      out.value += clipped_obj;
    }
  }
  out.value /= static_cast<double>(n);
  out.clip_fraction = static_cast<double>(clipped) / static_cast<double>(n);
  return out;
}

ValueLoss value_loss(std::span<const double> predictions, std::span<const double> targets) {
  const std::size_t n = predictions.size();
  if (targets.size() != n) throw DimensionMismatch("value_loss: length mismatch");
  ValueLoss out;
  out.grad_predictions.assign(n, 0.0);
  if (n == 0) return out;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = predictions[i] - targets[i];
    out.value += d * d;
    out.grad_predictions[i] = 2.0 * d / static_cast<double>(n);
  }
  out.value /= static_cast<double>(n);
  return out;
}

double entropy(std::span<const double> distribution) {
  double h = 0.0;
  for (double p : distribution) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double entropy_bonus(const std::vector<std::vector<double>>& distributions) {
  if (distributions.empty()) return 0.0;
  double total = 0.0;
  for (const auto& d : distributions) total += entropy(d);
  return total / static_cast<double>(distributions.size());
}

void RunningMeanStd::update(std::span<const double> batch) {
  if (batch.empty()) return;
  double mean = 0.0;
  for (double v : batch) mean += v;
  mean /= static_cast<double>(batch.size());
  double var = 0.0;
  for (double v : batch) var += (v - mean) * (v - mean);
  var /= static_cast<double>(batch.size());
  const double n = static_cast<double>(batch.size());
  if (count_ == 0.0) {
    mean_ = mean;
    var_ = var;
    count_ = n;
    return;
  }
  const double total = count_ + n;
  const double delta = mean - mean_;
  mean_ += delta * n / total;
  var_ = (var_ * count_ + var * n + delta * delta * count_ * n / total) / total;
  count_ = total;
}

double RunningMeanStd::stddev() const { return std::max(std::sqrt(var_), 1e-2); }

}  // namespace hipt::rl
