#include "hipt/eval/behavior_cloning.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>

#include "hipt/env/observation.hpp"
#include "hipt/nn/adam.hpp"
#include "hipt/nn/model_file.hpp"
#include "hipt/util/digest.hpp"
#include "hipt/util/error.hpp"

namespace hipt::eval {

using nlohmann::json;

BcDataset build_bc_dataset(const std::vector<env::EpisodeLog>& logs, const env::Layout& layout,
                           const std::vector<int>& seats) {
  for (int s : seats) {
    if (s != 0 && s != 1) throw ContractViolation("build_bc_dataset: seat must be 0 or 1");
  }
  std::size_t total = 0;
  for (const auto& log : logs) total += log.steps.size() * seats.size();
  const int dim = env::observation_size(layout);
  BcDataset data;
  data.observations.resize(dim, static_cast<Eigen::Index>(total));
  Fnv1a hash;
  Eigen::Index col = 0;
  for (const auto& log : logs) {
    if (log.layout != layout.name) throw ContractViolation("build_bc_dataset: log " + log.episode_id + " is for " + log.layout);
    hash.update(log.episode_id);
    env::WorldState state = env::reset(layout);
    for (const auto& step : log.steps) {
      for (int seat : seats) {
        env::encode_observation(state, layout, seat, data.observations.col(col++).data());
        data.actions.push_back(static_cast<int>(step.joint[seat]));
        data.episode_ids.push_back(log.episode_id);
      }
      env::StepOutcome out = env::step(state, step.joint, layout, env::no_shaping());
      const std::string digest = env::state_digest(out.next_state);
      if (digest != step.state_digest) {
        throw ContractViolation("build_bc_dataset: log " + log.episode_id + " diverges at tick " + std::to_string(step.tick));
      }
      hash.update(digest);
      state = std::move(out.next_state);
    }
  }
  data.digest = to_hex(hash.value());
  return data;
}

double bc_accuracy(const nn::ParamStore& params, const BcDataset& data) {
  if (data.size() == 0) return 0.0;
  const nn::Network net(params.spec);
  int correct = 0;
  constexpr Eigen::Index kBlock = 1024;
  for (Eigen::Index start = 0; start < data.size(); start += kBlock) {
    const Eigen::Index len = std::min<Eigen::Index>(kBlock, data.size() - start);
    const auto out = net.forward(params, data.observations.middleCols(start, len), nn::Matrix());
    const auto logits = out.low_block(0, params.spec.num_actions);
    for (Eigen::Index j = 0; j < len; ++j) {
      Eigen::Index best = 0;
      logits.col(j).maxCoeff(&best);
      correct += static_cast<int>(best) == data.actions[static_cast<std::size_t>(start + j)] ? 1 : 0;
    }
  }
  return static_cast<double>(correct) / data.size();
}

BcModel train_bc(const std::vector<env::EpisodeLog>& train, const std::vector<env::EpisodeLog>& held_out,
                 const env::Layout& layout, const BcConfig& config) {
  if (config.epochs < 1 || config.batch_size < 1) throw ContractViolation("train_bc: bad epochs or batch size");
  std::set<std::string> ids;
  for (const auto& log : train) ids.insert(log.episode_id);
  for (const auto& log : held_out) {
    if (ids.count(log.episode_id) != 0) {
      throw ContractViolation("train_bc: episode " + log.episode_id + " is in both the training and held-out splits");
    }
  }
  const BcDataset train_data = build_bc_dataset(train, layout, config.seats);
  const BcDataset held_data = build_bc_dataset(held_out, layout, config.seats);
  if (train_data.size() == 0) throw ContractViolation("train_bc: empty training set");

  BcModel model;
  model.dataset_digest = train_data.digest;
  model.degenerate = std::all_of(train_data.actions.begin(), train_data.actions.end(),
                                 [&](int a) { return a == train_data.actions.front(); });
  if (model.degenerate) spdlog::warn("train_bc: training split contains a single action");

  nn::NetworkSpec spec;
  spec.input_dim = env::observation_size(layout);
  spec.trunk_widths = config.trunk_widths;
  spec.activation = config.activation;
  spec.recurrent_hidden = 0;
  spec.num_priors = 1;
  spec.num_actions = env::kNumActions;
  const nn::Network net(spec);
  model.params = net.init_params(derive_seed(config.seed, 1));
  nn::AdamState adam = nn::AdamState::for_params(model.params);
  const long batches = (train_data.size() + config.batch_size - 1) / config.batch_size;
  const nn::LinearDecaySchedule schedule{config.learning_rate, 1.0, batches * config.epochs};
  Rng rng(derive_seed(config.seed, 2));

  std::vector<int> order(static_cast<std::size_t>(train_data.size()));
  std::iota(order.begin(), order.end(), 0);
  nn::Gradient grad(model.params.size());
  nn::ForwardCache cache;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t len = std::min(order.size() - start, static_cast<std::size_t>(config.batch_size));
      nn::Matrix x(spec.input_dim, static_cast<Eigen::Index>(len));
      for (std::size_t j = 0; j < len; ++j) x.col(static_cast<Eigen::Index>(j)) = train_data.observations.col(order[start + j]);
      const auto out = net.forward(model.params, x, nn::Matrix(), &cache);
      const nn::Matrix log_p = nn::log_softmax(out.low_logits);
      nn::OutputCotangents cot;
      cot.low_logits = log_p.array().exp().matrix();  // d(-log p_y)/dlogits = softmax - onehot
      for (std::size_t j = 0; j < len; ++j) {
        const int y = train_data.actions[static_cast<std::size_t>(order[start + j])];
        loss_sum -= log_p(y, static_cast<Eigen::Index>(j));
        cot.low_logits(y, static_cast<Eigen::Index>(j)) -= 1.0;
      }
      cot.low_logits /= static_cast<double>(len);
      grad.zero();
      net.backward(model.params, cache, cot, grad);
      nn::adam_update(model.params, grad, adam, schedule);
    }
    model.epoch_losses.push_back(loss_sum / static_cast<double>(order.size()));
  }
  model.train_accuracy = bc_accuracy(model.params, train_data);
  model.held_out_accuracy = held_data.size() > 0 ? bc_accuracy(model.params, held_data) : 0.0;
  return model;
}

void save_bc_model(const std::string& prefix, const BcModel& model) {
  nn::save_model(prefix + ".model", model.params);
  json j;
  j["format"] = "hipt-bc";
  j["version"] = 1;
  j["dataset_digest"] = model.dataset_digest;
  j["train_accuracy"] = model.train_accuracy;
  j["held_out_accuracy"] = model.held_out_accuracy;
  j["epoch_losses"] = model.epoch_losses;
  j["degenerate"] = model.degenerate;
  j["params_digest"] = nn::params_digest(model.params);
  std::ofstream out(prefix + ".json");
  if (!out) throw IoError("cannot write " + prefix + ".json");
  out << j.dump(2) << '\n';
}

BcModel load_bc_model(const std::string& prefix) {
  std::ifstream in(prefix + ".json");
  if (!in) throw IoError("cannot read " + prefix + ".json");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed BC sidecar: " + std::string(e.what()));
  }
  if (j.value("format", "") != "hipt-bc") throw IoError("not a BC model: " + prefix);
  BcModel m;
  m.params = nn::load_model(prefix + ".model");
  if (nn::params_digest(m.params) != j.at("params_digest").get<std::string>()) {
    throw ChecksumError("BC model does not match its sidecar: " + prefix);
  }
  m.dataset_digest = j.at("dataset_digest").get<std::string>();
  m.train_accuracy = j.at("train_accuracy").get<double>();
  m.held_out_accuracy = j.at("held_out_accuracy").get<double>();
  m.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
  m.degenerate = j.at("degenerate").get<bool>();
  return m;
}

}  // namespace hipt::eval
