#include "visemenet/gradcheck.hpp"
#include "visemenet/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace visemenet::losses {
namespace {

using gradcheck::detail::random_mask;
using gradcheck::detail::random_matrix;

std::vector<Mat<double>> uniform_probs(int rows, std::vector<int> lengths) {
  std::vector<Mat<double>> out;
  for (int T : lengths) out.push_back(Mat<double>::Constant(rows, T, 1.0 / rows));
  return out;
}

std::vector<Mat<double>> random_probs(int rows, std::vector<int> lengths, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<Mat<double>> out;
  for (int T : lengths) {
    Mat<double> m(rows, T);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    for (int t = 0; t < T; ++t) m.col(t) /= m.col(t).sum();
    out.push_back(m);
  }
  return out;
}

// --- unit identities -------------------------------------------------------

TEST(LossIdentities, UniformPredictionCrossEntropyIsLn20) {
  std::mt19937_64 rng(1);
  std::vector<std::vector<int>> labels;
  for (int T : {7, 13, 30}) labels.push_back(gradcheck::detail::random_labels(T, rng));
  EXPECT_NEAR(phoneme_ce_loss(uniform_probs(20, {7, 13, 30}), labels), std::log(20.0), 1e-9);
}

TEST(LossIdentities, HalfProbabilityBceIsLn2) {
  std::mt19937_64 rng(2);
  std::vector<Mask> active = {random_mask(29, 9, rng), random_mask(29, 4, rng)};
  const std::vector<Mat<double>> half = {Mat<double>::Constant(29, 9, 0.5), Mat<double>::Constant(29, 4, 0.5)};
  EXPECT_NEAR(activation_bce_loss(half, active), std::numbers::ln2, 1e-9);
}

TEST(LossIdentities, ExactMatchGivesZero) {
  std::mt19937_64 rng(3);
  // One-hot probabilities are clamped at 1 - 1e-7, so the CE floor is -ln(1 - 1e-7).
  std::vector<Mat<double>> onehot;
  std::vector<std::vector<int>> labels;
  for (int T : {5, 8}) {
    labels.push_back(gradcheck::detail::random_labels(T, rng));
    Mat<double> p = Mat<double>::Zero(20, T);
    for (int t = 0; t < T; ++t) p(std::max(labels.back()[t], 0), t) = 1.0;
    onehot.push_back(p);
  }
  EXPECT_NEAR(phoneme_ce_loss(onehot, labels), 0.0, 1e-9);

  std::vector<Mask> active = {random_mask(29, 6, rng), random_mask(29, 3, rng)};
  std::vector<Mat<double>> exact_probs;
  for (const auto& m : active) exact_probs.push_back(m.cast<double>());
  EXPECT_NEAR(activation_bce_loss(exact_probs, active), 0.0, 1e-6);  // 29 terms of -ln(1 - 1e-7) each / 29

  std::vector<Mat<double>> q = {random_matrix(76, 6, rng), random_matrix(76, 3, rng)};
  EXPECT_EQ(landmark_l1_loss(q, q), 0.0);
  std::vector<Mat<double>> still = {Mat<double>::Constant(76, 6, 0.3)};
  EXPECT_EQ(landmark_smoothness_loss(still), 0.0);

  std::vector<Mat<double>> v = {random_matrix(29, 6, rng), random_matrix(29, 3, rng)};
  EXPECT_EQ(masked_rig_l1_loss(v, v, active), 0.0);
  std::vector<Mat<double>> flat = {Mat<double>::Constant(29, 6, 0.4), Mat<double>::Constant(29, 3, 0.1)};
  EXPECT_EQ(rig_smoothness_loss(flat, active), 0.0);

  std::vector<Mat<double>> y = {random_matrix(2, 6, rng)};
  EXPECT_EQ(jali_l1_loss(y, y), 0.0);
  EXPECT_EQ(jali_smoothness_loss(std::vector<Mat<double>>{Mat<double>::Constant(2, 6, 0.7)}), 0.0);
}

// --- scalar-loop oracles ---------------------------------------------------

TEST(LossOracles, CrossEntropyIgnoresUnlabelledFrames) {
  std::mt19937_64 rng(4);
  const auto p = random_probs(20, {6, 9}, rng);
  std::vector<std::vector<int>> labels = {{3, -1, 4, -1, -1, 19}, {-1, 0, 1, 2, 3, 4, 5, 6, -1}};
  double want = 0;
  for (int n = 0; n < 2; ++n) {
    double s = 0;
    int cnt = 0;
    for (std::size_t t = 0; t < labels[n].size(); ++t) {
      if (labels[n][t] < 0) continue;
      s -= std::log(p[n](labels[n][t], static_cast<Eigen::Index>(t)));
      ++cnt;
    }
    want += s / cnt / 2;
  }
  EXPECT_NEAR(phoneme_ce_loss(p, labels), want, 1e-12);
  labels[0][0] = 20;
  EXPECT_THROW(phoneme_ce_loss(p, labels), Error);
}

TEST(LossOracles, LandmarkAndJaliTerms) {
  std::mt19937_64 rng(5);
  std::vector<Mat<double>> q = {random_matrix(76, 5, rng), random_matrix(76, 8, rng)};
  std::vector<Mat<double>> g = {random_matrix(76, 5, rng), random_matrix(76, 8, rng)};
  double l1 = 0, smooth = 0;
  for (int n = 0; n < 2; ++n) {
    const int T = static_cast<int>(q[n].cols());
    double a = 0, b = 0;
    for (int t = 0; t < T; ++t) {
      for (int m = 0; m < 76; ++m) {
        a += std::abs(q[n](m, t) - g[n](m, t));
        const double d = t == 0 ? q[n](m, 1) - q[n](m, 0)
                                : t == T - 1 ? q[n](m, T - 1) - q[n](m, T - 2) : (q[n](m, t + 1) - q[n](m, t - 1)) / 2;
        b += std::abs(d);
      }
    }
    l1 += a / (76.0 * T) / 2;
    smooth += b / (76.0 * T) / 2;
  }
  EXPECT_NEAR(landmark_l1_loss(q, g), l1, 1e-12);
  EXPECT_NEAR(landmark_smoothness_loss(q), smooth, 1e-12);

  std::vector<Mat<double>> y = {q[0].topRows(2)}, yt = {g[0].topRows(2)};
  double j = 0, js = 0;
  for (int t = 0; t < 5; ++t) {
    for (int k = 0; k < 2; ++k) {
      j += std::abs(y[0](k, t) - yt[0](k, t));
      const double d = t == 0 ? y[0](k, 1) - y[0](k, 0) : t == 4 ? y[0](k, 4) - y[0](k, 3) : (y[0](k, t + 1) - y[0](k, t - 1)) / 2;
      js += std::abs(d);
    }
  }
  EXPECT_NEAR(jali_l1_loss(y, yt), j / 5, 1e-12);
  EXPECT_NEAR(jali_smoothness_loss(y), js / 5, 1e-12);
}

TEST(LossOracles, ActivationBce) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::vector<Mat<double>> p = {Mat<double>(29, 4), Mat<double>(29, 7)};
  for (auto& m : p) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  }
  std::vector<Mask> a = {random_mask(29, 4, rng), random_mask(29, 7, rng)};
  double want = 0;
  for (int n = 0; n < 2; ++n) {
    const double T = static_cast<double>(p[n].cols());
    double per_param = 0;
    for (int k = 0; k < 29; ++k) {
      double pos = 0, neg = 0;
      for (Eigen::Index t = 0; t < p[n].cols(); ++t) {
        if (a[n](k, t)) pos -= std::log(p[n](k, t));
        else neg -= std::log(1 - p[n](k, t));
      }
      per_param += pos / T + neg / T;
    }
    want += per_param / 29 / 2;
  }
  EXPECT_NEAR(activation_bce_loss(p, a), want, 1e-12);
}

TEST(LossOracles, MaskedRigTermsUseOnlyActiveFrames) {
  std::mt19937_64 rng(7);
  std::vector<Mat<double>> v = {random_matrix(29, 10, rng), random_matrix(29, 6, rng)};
  std::vector<Mat<double>> vt = {random_matrix(29, 10, rng), random_matrix(29, 6, rng)};
  std::vector<Mask> a = {random_mask(29, 10, rng, 0.7), random_mask(29, 6, rng, 0.7)};
  a[1].row(3).setZero();  // never active in clip 1
  double rig = 0, smooth = 0;
  for (int n = 0; n < 2; ++n) {
    double r_sum = 0, s_sum = 0;
    int r_params = 0, s_params = 0;
    for (int k = 0; k < 29; ++k) {
      double acc = 0, sacc = 0;
      int cnt = 0, scnt = 0;
      for (Eigen::Index t = 0; t < v[n].cols(); ++t) {
        if (a[n](k, t)) {
          acc += std::abs(v[n](k, t) - vt[n](k, t));
          ++cnt;
        }
        if (t >= 1 && t + 1 < v[n].cols() && a[n](k, t - 1) && a[n](k, t) && a[n](k, t + 1)) {
          sacc += std::abs(v[n](k, t + 1) - v[n](k, t - 1)) / 2;
          ++scnt;
        }
      }
      if (cnt) {
        r_sum += acc / cnt;
        ++r_params;
      }
      if (scnt) {
        s_sum += sacc / scnt;
        ++s_params;
      }
    }
    rig += r_sum / r_params / 2;
    smooth += s_sum / s_params / 2;
  }
  EXPECT_NEAR(masked_rig_l1_loss(v, vt, a), rig, 1e-12);
  EXPECT_NEAR(rig_smoothness_loss(v, a), smooth, 1e-12);

  // Values at inactive frames do not matter.
  auto v2 = v;
  for (int n = 0; n < 2; ++n) {
    for (Eigen::Index i = 0; i < v2[n].size(); ++i) {
      if (!a[n].data()[i]) v2[n].data()[i] += 5.0;
    }
  }
  EXPECT_NEAR(masked_rig_l1_loss(v2, vt, a), rig, 1e-12);
}

TEST(LossOracles, AllInactiveClipContributesZero) {
  std::mt19937_64 rng(8);
  std::vector<Mat<double>> v = {random_matrix(29, 5, rng)};
  std::vector<Mask> a = {Mask::Zero(29, 5)};
  EXPECT_EQ(masked_rig_l1_loss(v, v, a), 0.0);
  EXPECT_EQ(rig_smoothness_loss(v, a), 0.0);
}

TEST(LossOracles, CentralDifferenceAdjoint) {
  std::mt19937_64 rng(9);
  for (int T : {1, 2, 3, 9}) {
    const Mat<double> x = random_matrix(3, T, rng), y = random_matrix(3, T, rng);
    const double lhs = (central_difference(x).array() * y.array()).sum();
    const double rhs = (x.array() * central_difference_adjoint(y).array()).sum();
    EXPECT_NEAR(lhs, rhs, 1e-12) << "T " << T;
  }
}

TEST(LossOracles, WeightedCombinations) {
  std::mt19937_64 rng(10);
  Predictions<double> pred;
  Targets<double> tgt;
  for (int T : {6, 9}) {
    pred.phoneme_probs.push_back(random_probs(20, {T}, rng)[0]);
    tgt.phoneme.push_back(gradcheck::detail::random_labels(T, rng));
    pred.landmarks.push_back(random_matrix(76, T, rng));
    tgt.landmarks.push_back(random_matrix(76, T, rng));
    pred.activation_probs.push_back(random_probs(29, {T}, rng)[0]);
    tgt.active.push_back(random_mask(29, T, rng));
    pred.rig.push_back(random_matrix(29, T, rng));
    tgt.rig.push_back(random_matrix(29, T, rng));
    pred.jali.push_back(random_matrix(2, T, rng));
    tgt.jali.push_back(random_matrix(2, T, rng));
  }
  const PretrainWeights w1;
  const JointWeights w2;
  const auto l = joint_loss(pred, tgt, w1, w2);
  EXPECT_NEAR(l.phoneme, phoneme_ce_loss(pred.phoneme_probs, tgt.phoneme), 1e-15);
  EXPECT_NEAR(l.rig_smooth, rig_smoothness_loss(pred.rig, tgt.active), 1e-15);
  const double want = 0.75 * l.phoneme + 0.25 * l.landmark + 0.1 * l.landmark_smooth + 0.1 * l.activation +
                      0.2 * l.rig + 0.2 * l.jali + 0.15 * l.rig_smooth + 0.15 * l.jali_smooth;
  EXPECT_NEAR(l.total, want, 1e-12);
  EXPECT_NEAR(pretrain_loss(pred, tgt, w1).total, l.pretrain, 1e-15);
}

TEST(LossOracles, MismatchedInputsAreRejected) {
  std::vector<Mat<double>> a = {Mat<double>::Zero(76, 3)}, b = {Mat<double>::Zero(76, 4)};
  EXPECT_THROW(landmark_l1_loss(a, b), Error);
  EXPECT_THROW(landmark_l1_loss(a, std::vector<Mat<double>>{}), Error);
}

// --- finite-difference checks of every loss gradient -----------------------

TEST(LossGradients, EveryTermPassesFiniteDifferences) {
  for (std::uint64_t seed : {31u, 32u, 33u}) {
    std::mt19937_64 rng(seed);
    const auto results = gradcheck::check_losses(rng);
    ASSERT_EQ(results.size(), 8u);
    for (const auto& r : results) EXPECT_LT(r.error(), 1e-4) << r.name << " seed " << seed;
  }
}

}  // namespace
}  // namespace visemenet::losses
