#pragma once

// Dense and LSTM layers with forward evaluation, reverse-mode gradients through
// time and SGD-with-momentum updates. Batched sequences are stored time-major:
// column t * batch + b holds frame t of sequence b.

#include "visemenet/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace visemenet::nn {

template <class S>
struct DenseParams {
  Mat<S> weight;  // out x in
  Vec<S> bias;    // out

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }

  static DenseParams zeros(Eigen::Index out, Eigen::Index in) {
    return {Mat<S>::Zero(out, in), Vec<S>::Zero(out)};
  }
};

/// Gate blocks are stacked row-wise in the order input, forget, output, candidate;
/// each block is [hidden x (input_dim + hidden)] once w_input and w_hidden are
/// placed side by side.
template <class S>
struct LstmLayerParams {
  Mat<S> w_input;   // 4H x in
  Mat<S> w_hidden;  // 4H x H
  Vec<S> bias;      // 4H

  Eigen::Index hidden() const { return w_hidden.cols(); }
  Eigen::Index input_dim() const { return w_input.cols(); }

  static LstmLayerParams zeros(Eigen::Index hidden, Eigen::Index in) {
    return {Mat<S>::Zero(4 * hidden, in), Mat<S>::Zero(4 * hidden, hidden), Vec<S>::Zero(4 * hidden)};
  }
};

template <class S>
struct LstmState {
  Vec<S> h;
  Vec<S> c;

  static LstmState zeros(Eigen::Index hidden) { return {Vec<S>::Zero(hidden), Vec<S>::Zero(hidden)}; }
};

template <class S>
struct DecoderParams {
  DenseParams<S> hidden;  // followed by ReLU
  DenseParams<S> output;
};

enum class Head { kSoftmax, kLinear, kSigmoid };

// ---------------------------------------------------------------------------
// Elementwise helpers

template <class S>
S sigmoid(S x) {
  // Clamped so the result stays strictly inside (0, 1) at any precision.
  constexpr S lo = std::numeric_limits<S>::min();
  constexpr S hi = S(1) - std::numeric_limits<S>::epsilon() / 2;
  const S p = x >= 0 ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
  return std::clamp(p, lo, hi);
}

template <class Derived>
auto sigmoid_array(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([](S v) { return sigmoid<S>(v); });
}

template <class S>
void softmax_columns_inplace(Mat<S>& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    auto col = m.col(j);
    const S mx = col.maxCoeff();
    col = (col.array() - mx).exp().matrix();
    col /= col.sum();
  }
}

template <class S>
Mat<S> apply_head(Mat<S> pre, Head head) {
  switch (head) {
    case Head::kSoftmax: softmax_columns_inplace(pre); break;
    case Head::kSigmoid: pre = sigmoid_array(pre.array()).matrix(); break;
    case Head::kLinear: break;
  }
  return pre;
}

// ---------------------------------------------------------------------------
// Initialization

/// Uniform in [-s, s] with s = sqrt(6 / (fan_in + fan_out)).
template <class S, class Rng>
void glorot_uniform(Mat<S>& w, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-s, s);
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<S>(dist(rng));
  }
}

template <class S, class Rng>
DenseParams<S> init_dense(Eigen::Index out, Eigen::Index in, Rng& rng) {
  auto p = DenseParams<S>::zeros(out, in);
  glorot_uniform(p.weight, in, out, rng);
  return p;
}

/// Forget-gate bias starts at 1.0, every other bias at 0.
template <class S, class Rng>
LstmLayerParams<S> init_lstm(Eigen::Index hidden, Eigen::Index in, Rng& rng) {
  auto p = LstmLayerParams<S>::zeros(hidden, in);
  Mat<S> gate(hidden, in + hidden);
  for (int g = 0; g < 4; ++g) {
    glorot_uniform(gate, in + hidden, hidden, rng);
    p.w_input.middleRows(g * hidden, hidden) = gate.leftCols(in);
    p.w_hidden.middleRows(g * hidden, hidden) = gate.rightCols(hidden);
  }
  p.bias.segment(hidden, hidden).setConstant(S(1));
  return p;
}

// ---------------------------------------------------------------------------
// Single-step LSTM

/// Standard LSTM cell: i, f, o = sigmoid, g = tanh, c' = f*c + i*g, h' = o*tanh(c').
template <class S>
LstmState<S> lstm_cell_forward(const Vec<S>& x, const LstmState<S>& state, const LstmLayerParams<S>& p) {
  const Eigen::Index H = p.hidden();
  require_shape(x.size() == p.input_dim(), "LSTM input has wrong dimension");
  require_shape(state.h.size() == H && state.c.size() == H, "LSTM state has wrong dimension");
  require_shape(p.w_input.rows() == 4 * H && p.bias.size() == 4 * H, "LSTM parameters are inconsistent");
  Vec<S> z = p.bias;
  z.noalias() += p.w_input * x;
  z.noalias() += p.w_hidden * state.h;
  const auto i = sigmoid_array(z.segment(0, H).array());
  const auto f = sigmoid_array(z.segment(H, H).array());
  const auto o = sigmoid_array(z.segment(2 * H, H).array());
  const auto g = z.segment(3 * H, H).array().tanh();
  LstmState<S> next;
  next.c = (f * state.c.array() + i * g).matrix();
  next.h = (o * next.c.array().tanh()).matrix();
  return next;
}

/// In-place variant with caller-owned scratch for the per-frame inference path.
template <class S>
void lstm_cell_step(const Vec<S>& x, LstmState<S>& state, const LstmLayerParams<S>& p, Vec<S>& scratch) {
  const Eigen::Index H = p.hidden();
  scratch = p.bias;
  scratch.noalias() += p.w_input * x;
  scratch.noalias() += p.w_hidden * state.h;
  auto a = scratch.array();
  a.segment(0, 3 * H) = sigmoid_array(a.segment(0, 3 * H)).eval();
  a.segment(3 * H, H) = a.segment(3 * H, H).tanh().eval();
  state.c.array() = a.segment(H, H) * state.c.array() + a.segment(0, H) * a.segment(3 * H, H);
  state.h.array() = a.segment(2 * H, H) * state.c.array().tanh();
}

// ---------------------------------------------------------------------------
// Batched LSTM layer with backpropagation through time

template <class S>
struct LstmCache {
  Mat<S> input;      // in x T*B
  Mat<S> gates;      // 4H x T*B, post-nonlinearity
  Mat<S> cells;      // H x (T+1)*B, block 0 = initial state
  Mat<S> hidden;     // H x (T+1)*B
  Mat<S> cell_tanh;  // H x T*B
  Eigen::Index steps = 0;
  Eigen::Index batch = 0;

  bool valid() const { return steps > 0; }
};

/// Runs one layer over `input` (in x T*B, time-major) from zero initial state.
/// Returns the hidden outputs (H x T*B).
template <class S>
Mat<S> lstm_layer_forward(const LstmLayerParams<S>& p, const Mat<S>& input, Eigen::Index batch,
                          LstmCache<S>* cache = nullptr) {
  require_shape(batch > 0 && input.cols() % batch == 0, "sequence batch layout is inconsistent");
  require_shape(input.rows() == p.input_dim(), "LSTM input has wrong dimension");
  require(input.cols() > 0, ErrorCategory::kInvalidArgument, "LSTM forward over an empty sequence");
  const Eigen::Index H = p.hidden();
  const Eigen::Index B = batch;
  const Eigen::Index T = input.cols() / B;

  Mat<S> pre = p.w_input * input;
  pre.colwise() += p.bias;
  Mat<S> hidden = Mat<S>::Zero(H, (T + 1) * B);
  Mat<S> cells = Mat<S>::Zero(H, (T + 1) * B);
  Mat<S> cell_tanh(H, T * B);
  for (Eigen::Index t = 0; t < T; ++t) {
    auto z = pre.middleCols(t * B, B);
    z.noalias() += p.w_hidden * hidden.middleCols(t * B, B);
    z.topRows(3 * H) = sigmoid_array(z.topRows(3 * H).array()).matrix();
    z.bottomRows(H) = z.bottomRows(H).array().tanh().matrix();
    const auto i = z.topRows(H).array();
    const auto f = z.middleRows(H, H).array();
    const auto o = z.middleRows(2 * H, H).array();
    const auto g = z.bottomRows(H).array();
    cells.middleCols((t + 1) * B, B).array() = f * cells.middleCols(t * B, B).array() + i * g;
    cell_tanh.middleCols(t * B, B) = cells.middleCols((t + 1) * B, B).array().tanh().matrix();
    hidden.middleCols((t + 1) * B, B).array() = o * cell_tanh.middleCols(t * B, B).array();
  }
  Mat<S> out = hidden.rightCols(T * B);
  if (cache) {
    cache->input = input;
    cache->gates = std::move(pre);
    cache->cells = std::move(cells);
    cache->hidden = std::move(hidden);
    cache->cell_tanh = std::move(cell_tanh);
    cache->steps = T;
    cache->batch = B;
  }
  return out;
}

/// Accumulates parameter gradients into `grad` given d(loss)/d(outputs).
/// Returns d(loss)/d(input) unless `need_input_grad` is false (then empty).
template <class S>
Mat<S> lstm_layer_backward(const LstmLayerParams<S>& p, const LstmCache<S>& cache, const Mat<S>& d_output,
                           LstmLayerParams<S>& grad, bool need_input_grad = true) {
  require(cache.valid(), ErrorCategory::kState, "LSTM backward called before forward");
  const Eigen::Index H = p.hidden();
  const Eigen::Index B = cache.batch;
  const Eigen::Index T = cache.steps;
  require_shape(d_output.rows() == H && d_output.cols() == T * B, "LSTM output gradient has wrong shape");
  require_shape(grad.w_input.rows() == p.w_input.rows() && grad.w_input.cols() == p.w_input.cols(),
                "LSTM gradient accumulator has wrong shape");

  Mat<S> dz(4 * H, T * B);
  Mat<S> dh_next = Mat<S>::Zero(H, B);
  Mat<S> dc_next = Mat<S>::Zero(H, B);
  Mat<S> dh(H, B), dc(H, B);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const auto gates = cache.gates.middleCols(t * B, B);
    const auto i = gates.topRows(H).array();
    const auto f = gates.middleRows(H, H).array();
    const auto o = gates.middleRows(2 * H, H).array();
    const auto g = gates.bottomRows(H).array();
    const auto tc = cache.cell_tanh.middleCols(t * B, B).array();
    const auto c_prev = cache.cells.middleCols(t * B, B).array();

    dh = d_output.middleCols(t * B, B) + dh_next;
    dc.array() = dc_next.array() + dh.array() * o * (S(1) - tc.square());
    auto dzt = dz.middleCols(t * B, B);
    dzt.topRows(H).array() = dc.array() * g * i * (S(1) - i);
    dzt.middleRows(H, H).array() = dc.array() * c_prev * f * (S(1) - f);
    dzt.middleRows(2 * H, H).array() = dh.array() * tc * o * (S(1) - o);
    dzt.bottomRows(H).array() = dc.array() * i * (S(1) - g.square());
    dc_next.array() = dc.array() * f;
    dh_next.noalias() = p.w_hidden.transpose() * dzt;
  }
  grad.w_input.noalias() += dz * cache.input.transpose();
  grad.w_hidden.noalias() += dz * cache.hidden.leftCols(T * B).transpose();
  grad.bias += dz.rowwise().sum();
  if (!need_input_grad) return {};
  return p.w_input.transpose() * dz;
}

template <class S>
struct LstmStackCache {
  std::vector<LstmCache<S>> layers;
};

template <class S>
Mat<S> lstm_stack_forward(std::span<const LstmLayerParams<S>> layers, const Mat<S>& input, Eigen::Index batch,
                          LstmStackCache<S>* cache = nullptr) {
  require(!layers.empty(), ErrorCategory::kInvalidArgument, "LSTM stack has no layers");
  if (cache) cache->layers.assign(layers.size(), {});
  Mat<S> x = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    x = lstm_layer_forward(layers[l], x, batch, cache ? &cache->layers[l] : nullptr);
  }
  return x;
}

/// Sequence form: one column per frame, single sequence, zero initial state.
template <class S>
std::vector<Vec<S>> lstm_stack_forward(const std::vector<Vec<S>>& inputs, std::span<const LstmLayerParams<S>> layers) {
  require(!inputs.empty(), ErrorCategory::kInvalidArgument, "LSTM forward over an empty sequence");
  Mat<S> x(inputs.front().size(), static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    require_shape(inputs[t].size() == x.rows(), "inconsistent frame dimensions");
    x.col(static_cast<Eigen::Index>(t)) = inputs[t];
  }
  const Mat<S> y = lstm_stack_forward(layers, x, 1);
  std::vector<Vec<S>> out;
  for (Eigen::Index t = 0; t < y.cols(); ++t) out.push_back(y.col(t));
  return out;
}

template <class S>
Mat<S> lstm_stack_backward(std::span<const LstmLayerParams<S>> layers, const LstmStackCache<S>& cache,
                           const Mat<S>& d_output, std::span<LstmLayerParams<S>> grads,
                           bool need_input_grad = true) {
  require(cache.layers.size() == layers.size(), ErrorCategory::kState, "LSTM stack backward called before forward");
  require_shape(grads.size() == layers.size(), "LSTM stack gradient has wrong layer count");
  Mat<S> d = d_output;
  for (std::size_t l = layers.size(); l-- > 0;) {
    d = lstm_layer_backward(layers[l], cache.layers[l], d, grads[l], l > 0 || need_input_grad);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Dense layers and two-layer decoders

template <class S>
Mat<S> dense_forward(const DenseParams<S>& p, const Mat<S>& input) {
  require_shape(input.rows() == p.in_dim() && p.bias.size() == p.out_dim(), "dense layer shape mismatch");
  Mat<S> y = p.weight * input;
  y.colwise() += p.bias;
  return y;
}

template <class S>
Mat<S> dense_backward(const DenseParams<S>& p, const Mat<S>& input, const Mat<S>& d_output, DenseParams<S>& grad) {
  require_shape(d_output.rows() == p.out_dim() && d_output.cols() == input.cols(),
                "dense output gradient has wrong shape");
  grad.weight.noalias() += d_output * input.transpose();
  grad.bias += d_output.rowwise().sum();
  return p.weight.transpose() * d_output;
}

template <class S>
struct DecoderCache {
  Mat<S> input;
  Mat<S> hidden;  // post-ReLU
  bool valid = false;
};

/// Linear -> ReLU -> linear. Returns the pre-head output (logits for softmax/sigmoid heads).
template <class S>
Mat<S> decoder_forward(const DecoderParams<S>& p, const Mat<S>& input, DecoderCache<S>* cache = nullptr) {
  Mat<S> hidden = dense_forward(p.hidden, input).cwiseMax(S(0));
  Mat<S> out = dense_forward(p.output, hidden);
  if (cache) {
    cache->input = input;
    cache->hidden = std::move(hidden);
    cache->valid = true;
  }
  return out;
}

template <class S>
Vec<S> decoder_forward(const Vec<S>& h, const DenseParams<S>& p1, const DenseParams<S>& p2, Head head) {
  const Mat<S> out = decoder_forward(DecoderParams<S>{p1, p2}, Mat<S>(h));
  return apply_head(out, head).col(0);
}

template <class S>
Mat<S> decoder_backward(const DecoderParams<S>& p, const DecoderCache<S>& cache, const Mat<S>& d_output,
                        DecoderParams<S>& grad) {
  require(cache.valid, ErrorCategory::kState, "decoder backward called before forward");
  Mat<S> d_hidden = dense_backward(p.output, cache.hidden, d_output, grad.output);
  d_hidden = (cache.hidden.array() > S(0)).select(d_hidden, S(0));
  return dense_backward(p.hidden, cache.input, d_hidden, grad.hidden);
}

// ---------------------------------------------------------------------------
// Parameter tables and optimization

/// Non-owning view of one named parameter tensor.
template <class S>
struct TensorRef {
  std::string name;
  S* data;
  Eigen::Index rows;
  Eigen::Index cols;

  Eigen::Index size() const { return rows * cols; }
  Eigen::Map<Vec<S>> flat() const { return Eigen::Map<Vec<S>>(data, size()); }
};

template <class S>
void append_tensors(const std::string& prefix, DenseParams<S>& p, std::vector<TensorRef<S>>& out) {
  out.push_back({prefix + ".weight", p.weight.data(), p.weight.rows(), p.weight.cols()});
  out.push_back({prefix + ".bias", p.bias.data(), p.bias.rows(), 1});
}

template <class S>
void append_tensors(const std::string& prefix, LstmLayerParams<S>& p, std::vector<TensorRef<S>>& out) {
  out.push_back({prefix + ".w_input", p.w_input.data(), p.w_input.rows(), p.w_input.cols()});
  out.push_back({prefix + ".w_hidden", p.w_hidden.data(), p.w_hidden.rows(), p.w_hidden.cols()});
  out.push_back({prefix + ".bias", p.bias.data(), p.bias.rows(), 1});
}

template <class S>
void append_tensors(const std::string& prefix, DecoderParams<S>& p, std::vector<TensorRef<S>>& out) {
  append_tensors(prefix + ".fc0", p.hidden, out);
  append_tensors(prefix + ".fc1", p.output, out);
}

/// v <- momentum * v + grad; param <- param - lr * v.
template <class S>
void sgd_momentum_step(Eigen::Ref<Vec<S>> param, const Eigen::Ref<const Vec<S>>& grad, Eigen::Ref<Vec<S>> velocity,
                       S learning_rate, S momentum) {
  require_shape(param.size() == grad.size() && param.size() == velocity.size(),
                "parameter, gradient and velocity shapes differ");
  velocity = momentum * velocity + grad;
  param -= learning_rate * velocity;
}

template <class S>
void sgd_momentum_step(const std::vector<TensorRef<S>>& params, const std::vector<TensorRef<S>>& grads,
                       const std::vector<TensorRef<S>>& velocity, S learning_rate, S momentum) {
  require_shape(params.size() == grads.size() && params.size() == velocity.size(),
                "parameter, gradient and velocity tables differ");
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_shape(params[k].size() == grads[k].size() && params[k].size() == velocity[k].size(),
                  "shape mismatch for " + params[k].name);
    sgd_momentum_step<S>(params[k].flat(), grads[k].flat(), velocity[k].flat(), learning_rate, momentum);
  }
}

template <class S>
double global_norm(const std::vector<TensorRef<S>>& tensors) {
  double sq = 0.0;
  for (const auto& t : tensors) sq += t.flat().template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

/// Rescales gradients so their global L2 norm does not exceed `max_norm` (no-op if max_norm <= 0).
template <class S>
double clip_global_norm(const std::vector<TensorRef<S>>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0.0 && norm > max_norm) {
    const S scale = static_cast<S>(max_norm / norm);
    for (const auto& g : grads) g.flat() *= scale;
  }
  return norm;
}

}  // namespace visemenet::nn
