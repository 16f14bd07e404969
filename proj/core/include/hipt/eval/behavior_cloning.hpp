#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hipt/env/trajectory_log.hpp"
#include "hipt/nn/network.hpp"

namespace hipt::eval {

struct BcDataset {
  nn::Matrix observations;  // input_dim x samples
  std::vector<int> actions;
  std::vector<std::string> episode_ids;
  std::string digest;  // over the logged actions and digests of every episode

  int size() const { return static_cast<int>(actions.size()); }
};

// Replays each log from reset (verifying every state digest) and collects
// (observation, action) pairs for the requested seats.
BcDataset build_bc_dataset(const std::vector<env::EpisodeLog>& logs, const env::Layout& layout,
                           const std::vector<int>& seats = {0, 1});

struct BcConfig {
  std::vector<int> trunk_widths{64, 64};
  nn::Activation activation = nn::Activation::Tanh;
  int epochs = 40;
  int batch_size = 128;
  double learning_rate = 1e-3;
  std::vector<int> seats{0, 1};
  std::uint64_t seed = 1;
};

struct BcModel {
  nn::ParamStore params;
  std::string dataset_digest;
  double train_accuracy = 0.0;
  double held_out_accuracy = 0.0;
  std::vector<double> epoch_losses;  // mean training cross-entropy per epoch
  bool degenerate = false;           // the training split holds a single action
};

// Supervised cross-entropy training of a feed-forward classifier. The two
// splits must not share an episode id.
BcModel train_bc(const std::vector<env::EpisodeLog>& train, const std::vector<env::EpisodeLog>& held_out,
                 const env::Layout& layout, const BcConfig& config);

double bc_accuracy(const nn::ParamStore& params, const BcDataset& data);

void save_bc_model(const std::string& prefix, const BcModel& model);
BcModel load_bc_model(const std::string& prefix);

}  // namespace hipt::eval
