#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hipt::rl {

struct Transition {
  std::vector<double> observation;
  int action = 0;
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
  std::vector<double> recurrent_state;
};

enum class Level { High, Low };

struct TrajectoryBuffer {
  Level level = Level::Low;
  std::vector<Transition> transitions;
  std::vector<int> horizons;  // High level only: executed segment length per decision
};

struct PpoConfig {
  double discount = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.05;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double entropy_coef_end = 0.0;  // linear decay target over training
  int minibatch_size = 512;
  int epochs = 4;
  bool normalize_advantages = true;
  bool normalize_values = true;
  double max_grad_norm = 0.5;
  int chunk_length = 20;  // BPTT window for recurrent networks

  void validate() const;
};

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + value estimates
};

// Generalized advantage estimation. dones[t] marks an episode end after step t
// (no bootstrap across it); bootstrap_value is V(s_T) for a non-terminal tail.
Advantages compute_gae(std::span<const double> rewards, std::span<const double> values,
                       std::span<const std::uint8_t> dones, double bootstrap_value, double discount, double lambda);
Advantages compute_gae(const TrajectoryBuffer& buffer, double bootstrap_value, double discount, double lambda);

// Rescales to zero mean and unit variance (no-op for fewer than two entries).
void normalize_in_place(std::span<double> values);

struct SurrogateResult {
  double value = 0.0;                    // mean clipped objective (to maximize)
  std::vector<double> grad_new_log_probs;
  double clip_fraction = 0.0;
};

SurrogateResult ppo_clip_loss(std::span<const double> new_log_probs, std::span<const double> old_log_probs,
                              std::span<const double> advantages, double clip);

struct ValueLoss {
  double value = 0.0;
  std::vector<double> grad_predictions;
};

ValueLoss value_loss(std::span<const double> predictions, std::span<const double> targets);

// Shannon entropy in nats.
double entropy(std::span<const double> distribution);
double entropy_bonus(const std::vector<std::vector<double>>& distributions);

// Running mean/variance of value targets (parallel-merge form).
class RunningMeanStd {
 public:
  void update(std::span<const double> batch);
  double mean() const { return mean_; }
  double stddev() const;
  double normalize(double x) const { return (x - mean_) / stddev(); }
  double denormalize(double x) const { return x * stddev() + mean_; }

 private:
  double mean_ = 0.0;
  double var_ = 1.0;
  double count_ = 0.0;
};

}  // namespace hipt::rl
