#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hipt/util/error.hpp"

namespace hipt::nn {

using Matrix = Eigen::MatrixXd;      // features x batch, one sample per column
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class Activation { Tanh, Relu };

// Shared trunk (fully connected layers, optional gated recurrent cell) feeding
// four heads: high-level logits over priors, prior-conditioned low-level logits
// over actions (the prior enters as a one-hot appended to the head input), and
// one value per level.
struct NetworkSpec {
  int input_dim = 0;
  std::vector<int> trunk_widths{128, 128};
  Activation activation = Activation::Tanh;
  int recurrent_hidden = 64;  // 0 disables the recurrent cell
  int num_priors = 1;
  int num_actions = 6;

  bool recurrent() const { return recurrent_hidden > 0; }
  // Width of the features the heads read.
  int feature_dim() const;
  void validate() const;
  std::string descriptor() const;
  static NetworkSpec from_descriptor(std::string_view text);

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct TensorSlice {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

// Named tensors tiling the flat parameter vector in order.
class ParamLayout {
 public:
  explicit ParamLayout(const NetworkSpec& spec);
  const std::vector<TensorSlice>& tensors() const { return tensors_; }
  const TensorSlice& at(std::string_view name) const;
  std::size_t size() const { return size_; }

 private:
  std::vector<TensorSlice> tensors_;
  std::size_t size_ = 0;
};

std::size_t parameter_count(const NetworkSpec& spec);

// Parameter storage is over-aligned so vectorized kernels see the same
// alignment on every run and results are bit-reproducible.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

struct ParamStore {
  NetworkSpec spec;
  ParamVector values;

  std::size_t size() const { return values.size(); }
  ParamLayout layout() const { return ParamLayout(spec); }
  friend bool operator==(const ParamStore&, const ParamStore&) = default;
};

struct Gradient {
  ParamVector values;

  explicit Gradient(std::size_t n = 0) : values(n, 0.0) {}
  void zero() { std::fill(values.begin(), values.end(), 0.0); }
  bool finite() const;
  double norm() const;
};

struct Outputs {
  Matrix high_logits;   // num_priors x B
  Matrix low_logits;    // (num_priors * num_actions) x B; rows [z*A, (z+1)*A) belong to prior z
  RowVector value_high;
  RowVector value_low;
  Matrix hidden;        // recurrent_hidden x B; empty without recurrence

  // Low-level logits for one prior, num_actions x B.
  auto low_block(int prior, int num_actions) const {
    return low_logits.middleRows(static_cast<Eigen::Index>(prior) * num_actions, num_actions);
  }
};

// Cotangents of a scalar loss wrt the outputs. Empty matrices mean zero.
struct OutputCotangents {
  Matrix high_logits;
  Matrix low_logits;
  RowVector value_high;
  RowVector value_low;
  Matrix hidden;
};

struct ForwardCache {
  std::vector<Matrix> layer_inputs;
  std::vector<Matrix> layer_outputs;
  Matrix trunk_out;
  Matrix hidden_prev;
  Matrix update_gate;
  Matrix candidate;
  Matrix features;
};

class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t parameter_count() const { return layout_.size(); }

  // Fan-in-scaled uniform weights, zero biases, policy heads scaled by 0.01.
  ParamStore init_params(std::uint64_t seed) const;

  // Zero recurrent state for a batch of `batch` streams.
  Matrix initial_hidden(int batch) const;

  // input: input_dim x B; hidden: recurrent_hidden x B (ignored without recurrence).
  Outputs forward(const ParamStore& params, const Matrix& input, const Matrix& hidden,
                  ForwardCache* cache = nullptr) const;

  // Accumulates dLoss/dParams into `grad`; returns dLoss/dHiddenPrev.
  Matrix backward(const ParamStore& params, const ForwardCache& cache, const OutputCotangents& cotangents,
                  Gradient& grad) const;

 private:
  void check_params(const ParamStore& params) const;

  NetworkSpec spec_;
  ParamLayout layout_;
  std::vector<std::size_t> trunk_w_, trunk_b_;
  std::size_t gate_w_ = 0, gate_u_ = 0, gate_b_ = 0, cand_w_ = 0, cand_u_ = 0, cand_b_ = 0;
  std::size_t high_w_ = 0, high_b_ = 0, low_w_ = 0, low_b_ = 0, vhigh_w_ = 0, vhigh_b_ = 0, vlow_w_ = 0,
              vlow_b_ = 0;
};

// Column-wise numerically stable softmax / log-softmax.
Matrix softmax(const Matrix& logits);
Matrix log_softmax(const Matrix& logits);

// Cotangent on logits given a cotangent on the probabilities of one column.
Vector softmax_backward(const Vector& probs, const Vector& d_probs);

}  // namespace hipt::nn
