#include "visemenet/gradcheck.hpp"
#include "visemenet/net_core.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

namespace visemenet::nn {
namespace {

constexpr double kTol = 1e-4;

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar LSTM step, one unit at a time.
void scalar_step(const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c,
                 const LstmLayerParams<double>& p) {
  const int H = static_cast<int>(p.hidden());
  const int I = static_cast<int>(p.input_dim());
  std::vector<double> hn(H), cn(H);
  for (int u = 0; u < H; ++u) {
    double z[4];
    for (int g = 0; g < 4; ++g) {
      const int row = g * H + u;
      double acc = p.bias[row];
      for (int i = 0; i < I; ++i) acc += p.w_input(row, i) * x[i];
      for (int j = 0; j < H; ++j) acc += p.w_hidden(row, j) * h[j];
      z[g] = acc;
    }
    cn[u] = sig(z[1]) * c[u] + sig(z[0]) * std::tanh(z[3]);
    hn[u] = sig(z[2]) * std::tanh(cn[u]);
  }
  h = hn;
  c = cn;
}

LstmLayerParams<double> random_lstm(int H, int I, std::mt19937_64& rng) {
  auto p = init_lstm<double>(H, I, rng);
  p.bias = gradcheck::detail::random_matrix(4 * H, 1, rng, 0.5);
  return p;
}

TEST(NetCore, SigmoidStaysInsideOpenInterval) {
  for (double x : {-1000.0, -40.0, 0.0, 40.0, 1000.0}) {
    EXPECT_GT(sigmoid(x), 0.0);
    EXPECT_LT(sigmoid(x), 1.0);
  }
  EXPECT_LT(sigmoid(100.0f), 1.0f);
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(2.0), sig(2.0), 1e-15);
  EXPECT_NEAR(sigmoid(-30.0), sig(-30.0), 1e-25);
}

TEST(NetCore, SoftmaxColumnsAreDistributions) {
  Mat<double> m(3, 2);
  m << 1, 1000, 2, 1000, 3, -1000;
  softmax_columns_inplace(m);
  EXPECT_NEAR(m.col(0).sum(), 1.0, 1e-15);
  EXPECT_NEAR(m.col(1).sum(), 1.0, 1e-15);
  EXPECT_NEAR(m(2, 0) / m(1, 0), std::exp(1.0), 1e-12);
  EXPECT_NEAR(m(0, 1), 0.5, 1e-15);
}

TEST(NetCore, InitializationRangesAndForgetBias) {
  std::mt19937_64 rng(3);
  const auto p = init_lstm<double>(8, 5, rng);
  const double s = std::sqrt(6.0 / (5 + 8 + 8));
  EXPECT_LE(p.w_input.cwiseAbs().maxCoeff(), s);
  EXPECT_LE(p.w_hidden.cwiseAbs().maxCoeff(), s);
  EXPECT_EQ(p.bias.segment(8, 8), Vec<double>::Ones(8));
  EXPECT_EQ(p.bias.head(8), Vec<double>::Zero(8));
  EXPECT_EQ(p.bias.tail(16), Vec<double>::Zero(16));
  const auto d = init_dense<double>(4, 6, rng);
  EXPECT_LE(d.weight.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 10));
  EXPECT_EQ(d.bias, Vec<double>::Zero(4));
}

TEST(NetCore, LstmCellMatchesScalarOracle) {
  std::mt19937_64 rng(5);
  const auto p = random_lstm(6, 4, rng);
  std::vector<double> h(6, 0.0), c(6, 0.0);
  auto state = LstmState<double>::zeros(6);
  auto stepped = LstmState<double>::zeros(6);
  Vec<double> scratch;
  for (int t = 0; t < 5; ++t) {
    const Vec<double> x = gradcheck::detail::random_matrix(4, 1, rng);
    scalar_step(std::vector<double>(x.data(), x.data() + 4), h, c, p);
    state = lstm_cell_forward(x, state, p);
    lstm_cell_step(x, stepped, p, scratch);
    for (int u = 0; u < 6; ++u) {
      EXPECT_NEAR(state.h[u], h[u], 1e-14);
      EXPECT_NEAR(state.c[u], c[u], 1e-14);
    }
    EXPECT_LT((stepped.h - state.h).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(NetCore, BatchedLayerMatchesPerSequenceOracle) {
  std::mt19937_64 rng(6);
  const int H = 5, I = 3, B = 3, T = 7;
  const auto p = random_lstm(H, I, rng);
  const Mat<double> in = gradcheck::detail::random_matrix(I, T * B, rng);
  const Mat<double> out = lstm_layer_forward(p, in, B);
  ASSERT_EQ(out.rows(), H);
  ASSERT_EQ(out.cols(), T * B);
  for (int b = 0; b < B; ++b) {
    std::vector<double> h(H, 0.0), c(H, 0.0);
    for (int t = 0; t < T; ++t) {
      const Vec<double> x = in.col(t * B + b);
      scalar_step(std::vector<double>(x.data(), x.data() + I), h, c, p);
      for (int u = 0; u < H; ++u) EXPECT_NEAR(out(u, t * B + b), h[u], 1e-13);
    }
  }
}

TEST(NetCore, StackSequenceFormMatchesBatchForm) {
  std::mt19937_64 rng(7);
  std::vector<LstmLayerParams<double>> layers = {random_lstm(4, 3, rng), random_lstm(4, 4, rng)};
  std::vector<Vec<double>> seq;
  Mat<double> m(3, 6);
  for (int t = 0; t < 6; ++t) {
    seq.push_back(gradcheck::detail::random_matrix(3, 1, rng));
    m.col(t) = seq.back();
  }
  const auto outs = lstm_stack_forward(seq, std::span<const LstmLayerParams<double>>(layers));
  const Mat<double> batch = lstm_stack_forward(std::span<const LstmLayerParams<double>>(layers), m, 1);
  for (int t = 0; t < 6; ++t) EXPECT_EQ(outs[t], Vec<double>(batch.col(t)));
}

TEST(NetCore, DecoderMatchesScalarOracle) {
  std::mt19937_64 rng(8);
  DecoderParams<double> d{init_dense<double>(5, 3, rng), init_dense<double>(2, 5, rng)};
  d.hidden.bias = gradcheck::detail::random_matrix(5, 1, rng, 0.5);
  const Vec<double> x = gradcheck::detail::random_matrix(3, 1, rng);
  std::vector<double> hid(5);
  for (int j = 0; j < 5; ++j) {
    double a = d.hidden.bias[j];
    for (int i = 0; i < 3; ++i) a += d.hidden.weight(j, i) * x[i];
    hid[j] = std::max(a, 0.0);
  }
  for (Head head : {Head::kLinear, Head::kSigmoid, Head::kSoftmax}) {
    const Vec<double> y = decoder_forward(x, d.hidden, d.output, head);
    double raw[2], sum = 0;
    for (int k = 0; k < 2; ++k) {
      raw[k] = d.output.bias[k];
      for (int j = 0; j < 5; ++j) raw[k] += d.output.weight(k, j) * hid[j];
      sum += std::exp(raw[k]);
    }
    for (int k = 0; k < 2; ++k) {
      const double want = head == Head::kLinear ? raw[k] : head == Head::kSigmoid ? sig(raw[k]) : std::exp(raw[k]) / sum;
      EXPECT_NEAR(y[k], want, 1e-14);
    }
  }
}

TEST(NetCore, SgdMomentumUpdate) {
  Vec<double> p(2), g(2), v(2);
  p << 1, 2;
  g << 0.5, -1;
  v << 0.1, 0.2;
  sgd_momentum_step<double>(p, g, v, 0.1, 0.9);
  EXPECT_NEAR(v[0], 0.59, 1e-15);
  EXPECT_NEAR(v[1], -0.82, 1e-15);
  EXPECT_NEAR(p[0], 1 - 0.059, 1e-15);
  EXPECT_NEAR(p[1], 2 + 0.082, 1e-15);
}

TEST(NetCore, GlobalNormClipping) {
  Vec<double> a(2), b(1);
  a << 3, 0;
  b << 4;
  std::vector<TensorRef<double>> t = {{"a", a.data(), 2, 1}, {"b", b.data(), 1, 1}};
  EXPECT_DOUBLE_EQ(clip_global_norm(t, 10.0), 5.0);
  EXPECT_EQ(a[0], 3);
  EXPECT_DOUBLE_EQ(clip_global_norm(t, 1.0), 5.0);
  EXPECT_NEAR(global_norm(t), 1.0, 1e-15);
  EXPECT_NEAR(a[0], 0.6, 1e-15);
  EXPECT_DOUBLE_EQ(clip_global_norm(t, 0.0), global_norm(t));
}

TEST(NetCore, ShapeErrorsAreReported) {
  std::mt19937_64 rng(1);
  const auto p = init_lstm<double>(3, 2, rng);  // hidden 3, input 2
  const Mat<double> wrong_rows = Mat<double>::Zero(3, 4), ragged = Mat<double>::Zero(2, 5);
  EXPECT_THROW(lstm_layer_forward(p, wrong_rows, 1), Error);
  EXPECT_THROW(lstm_layer_forward(p, ragged, 2), Error);
  LstmCache<double> empty;
  auto g = LstmLayerParams<double>::zeros(3, 2);
  const Mat<double> d = Mat<double>::Zero(3, 1);
  EXPECT_THROW(lstm_layer_backward(p, empty, d, g), Error);
}

// Finite-difference checks of every layer's backward pass.
TEST(NetCoreGradients, DenseLayer) {
  std::mt19937_64 rng(21);
  EXPECT_LT(gradcheck::check_dense(rng).error(), kTol);
}

TEST(NetCoreGradients, LstmLayerThroughTime) {
  for (std::uint64_t seed : {22u, 23u, 24u}) {
    std::mt19937_64 rng(seed);
    const auto r = gradcheck::check_lstm_layer(rng);
    EXPECT_LT(r.error(), kTol) << "seed " << seed;
    EXPECT_GT(r.checked, 100u);
  }
}

TEST(NetCoreGradients, LstmStack) {
  std::mt19937_64 rng(25);
  EXPECT_LT(gradcheck::check_lstm_stack(rng).error(), kTol);
}

TEST(NetCoreGradients, Decoder) {
  std::mt19937_64 rng(26);
  EXPECT_LT(gradcheck::check_decoder(rng).error(), kTol);
}

TEST(NetCoreGradients, LstmDecoderCrossEntropyPipeline) {
  std::mt19937_64 rng(27);
  EXPECT_LT(gradcheck::check_pipeline(rng).error(), kTol);
}

}  // namespace
}  // namespace visemenet::nn
