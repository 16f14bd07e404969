#include "hipt/population/diversity.hpp"

#include <cmath>

#include "hipt/util/error.hpp"

namespace hipt::population {

namespace {

double column_entropy(const nn::Matrix& m, Eigen::Index col) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double p = m(i, col);
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

void check_distributions(const nn::Matrix& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double p = m(i, j);
      if (!(p >= 0.0) || !std::isfinite(p)) throw ContractViolation("jsd_term: negative or non-finite probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ContractViolation("jsd_term: column does not sum to one");
  }
}

}  // namespace

double jsd_term(std::span<const nn::Matrix> members) {
  if (members.size() < 2) throw ContractViolation("jsd_term: need at least two members");
  const auto rows = members.front().rows();
  const auto cols = members.front().cols();
  if (cols == 0) throw ContractViolation("jsd_term: empty batch");
  for (const auto& m : members) {
    if (m.rows() != rows || m.cols() != cols) throw DimensionMismatch("jsd_term: member shapes differ");
    check_distributions(m);
  }
  const double n = static_cast<double>(members.size());
  nn::Matrix mixture = nn::Matrix::Zero(rows, cols);
  for (const auto& m : members) mixture += m;
  mixture /= n;

  double total = 0.0;
  for (Eigen::Index j = 0; j < cols; ++j) {
    double member_entropy = 0.0;
    for (const auto& m : members) member_entropy += column_entropy(m, j);
    // Rounding can push an exact zero slightly negative.
    total += std::max(0.0, column_entropy(mixture, j) - member_entropy / n);
  }
  return total / static_cast<double>(cols);
}

}  // namespace hipt::population
