#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the code paths it is used to check.

#include <cmath>
#include <functional>
#include <vector>

namespace hipt::testing {

// Brute-force discounted advantage for lambda = 1 and V = values:
// A_t = sum_{k>=t} discount^(k-t) r_k + discount^(T-t) * bootstrap - V_t
inline std::vector<double> discounted_advantages(const std::vector<double>& rewards, const std::vector<double>& values,
                                                 double discount, double bootstrap) {
  const std::size_t n = rewards.size();
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    double g = 0.0;
    double w = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      g += w * rewards[k];
      w *= discount;
    }
    g += w * bootstrap;
    out[t] = g - values[t];
  }
  return out;
}

inline double entropy_direct(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h += -x * std::log(x);
  }
  return h;
}

inline double kl_direct(const std::vector<double>& p, const std::vector<double>& q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  return kl;
}

// JSD = H(mean policy) - mean H(policy), summed by explicit loops.
inline double jsd_direct(const std::vector<std::vector<double>>& members) {
  const std::size_t n = members.size();
  const std::size_t a = members.front().size();
  std::vector<double> mix(a, 0.0);
  double mean_h = 0.0;
  for (const auto& m : members) {
    for (std::size_t i = 0; i < a; ++i) mix[i] += m[i] / static_cast<double>(n);
    mean_h += entropy_direct(m) / static_cast<double>(n);
  }
  return entropy_direct(mix) - mean_h;
}

// Central finite-difference gradient of f at x.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / (||a|| + ||b||), 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nb);
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

}  // namespace hipt::testing
