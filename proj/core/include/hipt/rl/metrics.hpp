#pragma once

#include <fstream>
#include <mutex>
#include <string>

#include "hipt/rl/learner.hpp"

namespace hipt::rl {

// Append-only JSONL training log, one line per (update, level):
// {update_idx, level, policy_objective, value_loss, entropy, jsd, clip_fraction, approx_kl, mean_return}
class MetricsLog {
 public:
  MetricsLog() = default;
  explicit MetricsLog(const std::string& path);

  bool is_open() const { return out_.is_open(); }
  void record(long update_idx, const UpdateDiagnostics& diag, double mean_return, const std::string& tag = {});

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

}  // namespace hipt::rl
