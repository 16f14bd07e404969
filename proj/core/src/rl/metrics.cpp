#include "hipt/rl/metrics.hpp"

#include <nlohmann/json.hpp>

#include "hipt/util/error.hpp"

namespace hipt::rl {

MetricsLog::MetricsLog(const std::string& path) : out_(path, std::ios::app) {
  if (!out_) throw IoError("cannot open metrics log '" + path + "'");
}

void MetricsLog::record(long update_idx, const UpdateDiagnostics& diag, double mean_return, const std::string& tag) {
  if (!out_.is_open()) return;
  const auto line = [&](const char* level, const LevelDiagnostics& d) {
    nlohmann::json j = {{"update_idx", update_idx},   {"level", level},
                        {"policy_objective", d.policy_objective},
                        {"value_loss", d.value_loss}, {"entropy", d.entropy},
                        {"clip_fraction", d.clip_fraction}, {"approx_kl", d.approx_kl},
                        {"mean_return", mean_return}, {"samples", d.samples}};
    if (std::string(level) == "low") j["jsd"] = diag.jsd;
    if (!tag.empty()) j["tag"] = tag;
    return j.dump();
  };
  std::lock_guard lock(mutex_);
  out_ << line("low", diag.low) << '\n';
  if (diag.high.samples > 0) out_ << line("high", diag.high) << '\n';
  out_.flush();
}

}  // namespace hipt::rl
