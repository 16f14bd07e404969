#pragma once

#include <string>
#include <vector>

#include "hipt/nn/adam.hpp"
#include "hipt/nn/network.hpp"
#include "hipt/rl/ppo.hpp"
#include "hipt/util/rng.hpp"

namespace hipt::rl {

// A contiguous run of steps from one stream (one seat of one episode). The
// low-level fields are filled for every step; the high-level fields only at
// steps where a prior was chosen (high_choices[t] >= 0).
struct SequenceChunk {
  nn::Matrix observations;  // input_dim x length
  nn::Vector initial_hidden;

  std::vector<int> priors;
  std::vector<int> actions;
  std::vector<double> old_log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;      // value targets, in the value head's (possibly normalized) units

  std::vector<int> high_choices;
  std::vector<double> high_old_log_probs;
  std::vector<double> high_advantages;
  std::vector<double> high_returns;

  // Diversity term: column t holds the summed action probabilities of the
  // other population members at step t; empty disables the term.
  nn::Matrix peer_prob_sum;
  std::vector<double> peer_entropy_sum;
  int population_size = 0;

  int length() const { return static_cast<int>(actions.size()); }
  bool has_high() const;
  // Sizes every per-step array for `length` steps with no high-level decisions.
  void resize(int input_dim, int length);
};

struct UpdateCoefficients {
  double entropy = 0.01;
  double jsd = 0.0;
};

struct LevelDiagnostics {
  double policy_objective = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  long samples = 0;
};

struct UpdateDiagnostics {
  LevelDiagnostics low;
  LevelDiagnostics high;
  double jsd = 0.0;
  double grad_norm = 0.0;
  int minibatches = 0;
};

// Multi-epoch minibatched PPO over both hierarchy levels with the summed
// objective. On divergence the parameters and optimizer state are restored to
// their values on entry and DivergenceError is thrown.
UpdateDiagnostics ppo_update(const nn::Network& network, nn::ParamStore& params, nn::AdamState& adam,
                             const nn::LinearDecaySchedule& schedule, const std::vector<SequenceChunk>& data,
                             const PpoConfig& config, const UpdateCoefficients& coefficients, Rng& rng);

// Splits a stream of per-step arrays into chunks of at most `chunk_length`.
std::vector<SequenceChunk> split_into_chunks(const SequenceChunk& stream, int chunk_length,
                                             const std::vector<nn::Vector>& hidden_at_step);

}  // namespace hipt::rl
