#include "hipt/nn/network.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "hipt/util/rng.hpp"

namespace hipt::nn {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMajor>;
using Weights = Eigen::Map<RowMajor>;
using ConstBias = Eigen::Map<const Vector>;
using Bias = Eigen::Map<Vector>;

ConstWeights cw(const ParamStore& p, std::size_t offset, int rows, int cols) {
  return ConstWeights(p.values.data() + offset, rows, cols);
}
ConstBias cb(const ParamStore& p, std::size_t offset, int n) { return ConstBias(p.values.data() + offset, n); }
Weights gw(Gradient& g, std::size_t offset, int rows, int cols) { return Weights(g.values.data() + offset, rows, cols); }
Bias gb(Gradient& g, std::size_t offset, int n) { return Bias(g.values.data() + offset, n); }

Matrix activate(const Matrix& pre, Activation act) {
  return act == Activation::Tanh ? Matrix(pre.array().tanh()) : Matrix(pre.cwiseMax(0.0));
}

Matrix activation_grad(const Matrix& out, const Matrix& d_out, Activation act) {
  if (act == Activation::Tanh) return d_out.array() * (1.0 - out.array().square());
  return d_out.array() * (out.array() > 0.0).cast<double>();
}

Matrix sigmoid(const Matrix& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

}  // namespace

int NetworkSpec::feature_dim() const {
  if (recurrent()) return recurrent_hidden;
  return trunk_widths.empty() ? input_dim : trunk_widths.back();
}

void NetworkSpec::validate() const {
  if (input_dim < 1) throw DimensionMismatch("NetworkSpec: input_dim must be >= 1");
  for (int w : trunk_widths) {
    if (w < 1) throw DimensionMismatch("NetworkSpec: trunk widths must be >= 1");
  }
  if (recurrent_hidden < 0) throw DimensionMismatch("NetworkSpec: recurrent_hidden must be >= 0");
  if (num_priors < 1) throw DimensionMismatch("NetworkSpec: num_priors must be >= 1");
  if (num_actions < 1) throw DimensionMismatch("NetworkSpec: num_actions must be >= 1");
}

std::string NetworkSpec::descriptor() const {
  const nlohmann::json j = {{"input_dim", input_dim},
                            {"trunk", trunk_widths},
                            {"activation", activation == Activation::Tanh ? "tanh" : "relu"},
                            {"recurrent_hidden", recurrent_hidden},
                            {"num_priors", num_priors},
                            {"num_actions", num_actions}};
  return j.dump();
}

NetworkSpec NetworkSpec::from_descriptor(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    NetworkSpec s;
    s.input_dim = j.at("input_dim").get<int>();
    s.trunk_widths = j.at("trunk").get<std::vector<int>>();
    const auto act = j.at("activation").get<std::string>();
    if (act != "tanh" && act != "relu") throw Error("unknown activation '" + act + "'");
    s.activation = act == "tanh" ? Activation::Tanh : Activation::Relu;
    s.recurrent_hidden = j.at("recurrent_hidden").get<int>();
    s.num_priors = j.at("num_priors").get<int>();
    s.num_actions = j.at("num_actions").get<int>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad network descriptor: ") + e.what());
  }
}

ParamLayout::ParamLayout(const NetworkSpec& spec) {
  spec.validate();
  const auto add = [this](std::string name, int rows, int cols) {
    tensors_.push_back(TensorSlice{std::move(name), size_, rows, cols});
    size_ += tensors_.back().size();
  };
  int width = spec.input_dim;
  for (std::size_t l = 0; l < spec.trunk_widths.size(); ++l) {
    add("trunk." + std::to_string(l) + ".w", spec.trunk_widths[l], width);
    add("trunk." + std::to_string(l) + ".b", spec.trunk_widths[l], 1);
    width = spec.trunk_widths[l];
  }
  if (spec.recurrent()) {
    const int h = spec.recurrent_hidden;
    add("cell.update.w", h, width);
    add("cell.update.u", h, h);
    add("cell.update.b", h, 1);
    add("cell.candidate.w", h, width);
    add("cell.candidate.u", h, h);
    add("cell.candidate.b", h, 1);
  }
  const int f = spec.feature_dim();
  add("high.w", spec.num_priors, f);
  add("high.b", spec.num_priors, 1);
  add("low.w", spec.num_actions, f + spec.num_priors);
  add("low.b", spec.num_actions, 1);
  add("value_high.w", 1, f);
  add("value_high.b", 1, 1);
  add("value_low.w", 1, f);
  add("value_low.b", 1, 1);
}

const TensorSlice& ParamLayout::at(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw Error("no tensor named '" + std::string(name) + "'");
}

std::size_t parameter_count(const NetworkSpec& spec) {
  spec.validate();
  std::size_t n = 0;
  int width = spec.input_dim;
  for (int w : spec.trunk_widths) {
    n += static_cast<std::size_t>(w) * (width + 1);
    width = w;
  }
  if (spec.recurrent()) {
    const std::size_t h = spec.recurrent_hidden;
    n += 2 * (h * width + h * h + h);
  }
  const std::size_t f = spec.feature_dim();
  n += spec.num_priors * (f + 1);
  n += spec.num_actions * (f + spec.num_priors + 1);
  n += 2 * (f + 1);
  return n;
}

bool Gradient::finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Gradient::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)), layout_(spec_) {
  for (std::size_t l = 0; l < spec_.trunk_widths.size(); ++l) {
    trunk_w_.push_back(layout_.at("trunk." + std::to_string(l) + ".w").offset);
    trunk_b_.push_back(layout_.at("trunk." + std::to_string(l) + ".b").offset);
  }
  if (spec_.recurrent()) {
    gate_w_ = layout_.at("cell.update.w").offset;
    gate_u_ = layout_.at("cell.update.u").offset;
    gate_b_ = layout_.at("cell.update.b").offset;
    cand_w_ = layout_.at("cell.candidate.w").offset;
    cand_u_ = layout_.at("cell.candidate.u").offset;
    cand_b_ = layout_.at("cell.candidate.b").offset;
  }
  high_w_ = layout_.at("high.w").offset;
  high_b_ = layout_.at("high.b").offset;
  low_w_ = layout_.at("low.w").offset;
  low_b_ = layout_.at("low.b").offset;
  vhigh_w_ = layout_.at("value_high.w").offset;
  vhigh_b_ = layout_.at("value_high.b").offset;
  vlow_w_ = layout_.at("value_low.w").offset;
  vlow_b_ = layout_.at("value_low.b").offset;
}

ParamStore Network::init_params(std::uint64_t seed) const {
  ParamStore p{spec_, ParamVector(layout_.size(), 0.0)};
  Rng rng(seed);
  for (const auto& t : layout_.tensors()) {
    const bool is_bias = t.name.ends_with(".b");
    if (is_bias) continue;
    const double fan_in = t.cols;
    double scale = 1.0 / std::sqrt(fan_in);
    if (t.name == "high.w" || t.name == "low.w") scale *= 0.01;
    for (std::size_t i = 0; i < t.size(); ++i) p.values[t.offset + i] = scale * (2.0 * rng.uniform() - 1.0);
  }
  return p;
}

Matrix Network::initial_hidden(int batch) const {
  return Matrix::Zero(spec_.recurrent_hidden, batch);
}

void Network::check_params(const ParamStore& params) const {
  if (params.values.size() != layout_.size()) {
    throw DimensionMismatch("parameter vector has " + std::to_string(params.values.size()) + " entries, network needs " +
                            std::to_string(layout_.size()));
  }
}

Outputs Network::forward(const ParamStore& params, const Matrix& input, const Matrix& hidden,
                         ForwardCache* cache) const {
  check_params(params);
  if (input.rows() != spec_.input_dim) {
    throw DimensionMismatch("forward: input has " + std::to_string(input.rows()) + " rows, expected " +
                            std::to_string(spec_.input_dim));
  }
  const Eigen::Index batch = input.cols();
  if (cache != nullptr) {
    cache->layer_inputs.clear();
    cache->layer_outputs.clear();
  }
  Matrix x = input;
  int width = spec_.input_dim;
  for (std::size_t l = 0; l < spec_.trunk_widths.size(); ++l) {
    const int out = spec_.trunk_widths[l];
    Matrix pre = cw(params, trunk_w_[l], out, width) * x;
    pre.colwise() += cb(params, trunk_b_[l], out);
    Matrix a = activate(pre, spec_.activation);
    if (cache != nullptr) {
      cache->layer_inputs.push_back(std::move(x));
      cache->layer_outputs.push_back(a);
    }
    x = std::move(a);
    width = out;
  }

  Outputs o;
  Matrix features;
  if (spec_.recurrent()) {
    const int h = spec_.recurrent_hidden;
    if (hidden.rows() != h || hidden.cols() != batch) {
      throw DimensionMismatch("forward: recurrent state has wrong shape");
    }
    Matrix gate_pre = cw(params, gate_w_, h, width) * x + cw(params, gate_u_, h, h) * hidden;
    gate_pre.colwise() += cb(params, gate_b_, h);
    Matrix cand_pre = cw(params, cand_w_, h, width) * x + cw(params, cand_u_, h, h) * hidden;
    cand_pre.colwise() += cb(params, cand_b_, h);
    Matrix u = sigmoid(gate_pre);
    Matrix c = cand_pre.array().tanh();
    features = hidden + u.cwiseProduct(c - hidden);
    o.hidden = features;
    if (cache != nullptr) {
      cache->hidden_prev = hidden;
      cache->update_gate = std::move(u);
      cache->candidate = std::move(c);
    }
  } else {
    features = x;
  }
  if (cache != nullptr) cache->trunk_out = std::move(x);

  const int f = spec_.feature_dim();
  const int z = spec_.num_priors;
  const int a = spec_.num_actions;
  o.high_logits = cw(params, high_w_, z, f) * features;
  o.high_logits.colwise() += cb(params, high_b_, z);

  const auto low_w = cw(params, low_w_, a, f + z);
  Matrix base = low_w.leftCols(f) * features;
  base.colwise() += cb(params, low_b_, a);
  o.low_logits.resize(static_cast<Eigen::Index>(z) * a, batch);
  for (int k = 0; k < z; ++k) {
    o.low_logits.middleRows(static_cast<Eigen::Index>(k) * a, a) = base.colwise() + Vector(low_w.col(f + k));
  }

  o.value_high = cw(params, vhigh_w_, 1, f) * features;
  o.value_high.array() += params.values[vhigh_b_];
  o.value_low = cw(params, vlow_w_, 1, f) * features;
  o.value_low.array() += params.values[vlow_b_];

  if (cache != nullptr) cache->features = std::move(features);
  return o;
}

Matrix Network::backward(const ParamStore& params, const ForwardCache& cache, const OutputCotangents& cot,
                         Gradient& grad) const {
  check_params(params);
  if (grad.values.size() != layout_.size()) throw DimensionMismatch("backward: gradient size mismatch");
  const Matrix& features = cache.features;
  if (features.size() == 0) throw DimensionMismatch("backward: cache is empty");
  const Eigen::Index batch = features.cols();
  const int f = spec_.feature_dim();
  const int z = spec_.num_priors;
  const int a = spec_.num_actions;
  const auto check = [&](const auto& m, Eigen::Index rows, const char* what) {
    if (m.size() != 0 && (m.rows() != rows || m.cols() != batch)) {
      throw DimensionMismatch(std::string("backward: cotangent shape mismatch for ") + what);
    }
  };
  check(cot.high_logits, z, "high_logits");
  check(cot.low_logits, static_cast<Eigen::Index>(z) * a, "low_logits");
  check(cot.value_high, 1, "value_high");
  check(cot.value_low, 1, "value_low");
  if (spec_.recurrent()) check(cot.hidden, spec_.recurrent_hidden, "hidden");

  Matrix d_features = Matrix::Zero(f, batch);
  if (cot.high_logits.size() != 0) {
    d_features.noalias() += cw(params, high_w_, z, f).transpose() * cot.high_logits;
    gw(grad, high_w_, z, f).noalias() += cot.high_logits * features.transpose();
    gb(grad, high_b_, z) += cot.high_logits.rowwise().sum();
  }
  if (cot.low_logits.size() != 0) {
    Matrix d_base = Matrix::Zero(a, batch);
    auto g_low = gw(grad, low_w_, a, f + z);
    for (int k = 0; k < z; ++k) {
      const auto block = cot.low_logits.middleRows(static_cast<Eigen::Index>(k) * a, a);
      d_base += block;
      g_low.col(f + k) += block.rowwise().sum();
    }
    d_features.noalias() += cw(params, low_w_, a, f + z).leftCols(f).transpose() * d_base;
    g_low.leftCols(f).noalias() += d_base * features.transpose();
    gb(grad, low_b_, a) += d_base.rowwise().sum();
  }
  if (cot.value_high.size() != 0) {
    d_features.noalias() += cw(params, vhigh_w_, 1, f).transpose() * cot.value_high;
    gw(grad, vhigh_w_, 1, f).noalias() += cot.value_high * features.transpose();
    grad.values[vhigh_b_] += cot.value_high.sum();
  }
  if (cot.value_low.size() != 0) {
    d_features.noalias() += cw(params, vlow_w_, 1, f).transpose() * cot.value_low;
    gw(grad, vlow_w_, 1, f).noalias() += cot.value_low * features.transpose();
    grad.values[vlow_b_] += cot.value_low.sum();
  }

  int width = spec_.trunk_widths.empty() ? spec_.input_dim : spec_.trunk_widths.back();
  Matrix d_hidden_prev;
  Matrix dx;
  if (spec_.recurrent()) {
    const int h = spec_.recurrent_hidden;
    Matrix dh = d_features;
    if (cot.hidden.size() != 0) dh += cot.hidden;
    const Matrix& u = cache.update_gate;
    const Matrix& c = cache.candidate;
    const Matrix& hp = cache.hidden_prev;
    const Matrix d_gate_pre = (dh.array() * (c - hp).array() * u.array() * (1.0 - u.array())).matrix();
    const Matrix d_cand_pre = (dh.array() * u.array() * (1.0 - c.array().square())).matrix();
    d_hidden_prev = (dh.array() * (1.0 - u.array())).matrix();
    d_hidden_prev.noalias() += cw(params, gate_u_, h, h).transpose() * d_gate_pre;
    d_hidden_prev.noalias() += cw(params, cand_u_, h, h).transpose() * d_cand_pre;
    gw(grad, gate_w_, h, width).noalias() += d_gate_pre * cache.trunk_out.transpose();
    gw(grad, gate_u_, h, h).noalias() += d_gate_pre * hp.transpose();
    gb(grad, gate_b_, h) += d_gate_pre.rowwise().sum();
    gw(grad, cand_w_, h, width).noalias() += d_cand_pre * cache.trunk_out.transpose();
    gw(grad, cand_u_, h, h).noalias() += d_cand_pre * hp.transpose();
    gb(grad, cand_b_, h) += d_cand_pre.rowwise().sum();
    dx = cw(params, gate_w_, h, width).transpose() * d_gate_pre;
    dx.noalias() += cw(params, cand_w_, h, width).transpose() * d_cand_pre;
  } else {
    dx = std::move(d_features);
  }

  for (int l = static_cast<int>(spec_.trunk_widths.size()) - 1; l >= 0; --l) {
    const int out = spec_.trunk_widths[l];
    const int in = l == 0 ? spec_.input_dim : spec_.trunk_widths[l - 1];
    const Matrix d_pre = activation_grad(cache.layer_outputs[l], dx, spec_.activation);
    gw(grad, trunk_w_[l], out, in).noalias() += d_pre * cache.layer_inputs[l].transpose();
    gb(grad, trunk_b_[l], out) += d_pre.rowwise().sum();
    if (l > 0) dx = cw(params, trunk_w_[l], out, in).transpose() * d_pre;
  }
  return d_hidden_prev;
}

Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - m).exp();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    const double lse = m + std::log((logits.col(j).array() - m).exp().sum());
    out.col(j) = logits.col(j).array() - lse;
  }
  return out;
}

Vector softmax_backward(const Vector& probs, const Vector& d_probs) {
  const double dot = probs.dot(d_probs);
  return (probs.array() * (d_probs.array() - dot)).matrix();
}

}  // namespace hipt::nn
