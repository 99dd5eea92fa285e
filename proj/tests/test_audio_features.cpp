#include "visemenet/audio_features.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace visemenet {
namespace {

constexpr double kPi = std::numbers::pi;

// Direct O(N^2) DFT of the pre-emphasized, Hamming-windowed, zero-padded frame.
std::vector<double> naive_power(const std::vector<std::int16_t>& s, std::size_t start) {
  std::vector<double> x(kFftSize, 0.0);
  for (int n = 0; n < kWindowSamples; ++n) {
    const double cur = s[start + n] / 32768.0;
    const double prev = (start + n == 0) ? 0.0 : s[start + n - 1] / 32768.0;
    const double w = 0.54 - 0.46 * std::cos(2 * kPi * n / (kWindowSamples - 1));
    x[n] = (cur - 0.97 * prev) * w;
  }
  std::vector<double> p(kFftSize / 2 + 1);
  for (int k = 0; k <= kFftSize / 2; ++k) {
    std::complex<double> acc = 0;
    for (int n = 0; n < kFftSize; ++n) acc += x[n] * std::polar(1.0, -2 * kPi * k * n / kFftSize);
    p[k] = std::norm(acc) / kFftSize;
  }
  return p;
}

// Triangle weight of band m at frequency f, from the mel formula written out directly.
double tri(int m, double f) {
  auto mel = [](double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); };
  auto inv = [](double m) { return 700.0 * (std::exp(m / 1127.0) - 1.0); };
  const double top = mel(8000.0);
  const double lo = inv(top * m / 27.0), mid = inv(top * (m + 1) / 27.0), hi = inv(top * (m + 2) / 27.0);
  if (f > lo && f < mid) return (f - lo) / (mid - lo);
  if (f >= mid && f < hi) return (hi - f) / (hi - mid);
  return 0.0;
}

struct NaiveFeatures {
  std::vector<double> mfcc, mfb, ssc;
};

NaiveFeatures naive_features(const std::vector<std::int16_t>& s, std::size_t start) {
  const auto p = naive_power(s, start);
  NaiveFeatures out;
  std::vector<double> loge(kNumMelBands);
  for (int m = 0; m < kNumMelBands; ++m) {
    double e = 0, mom = 0;
    for (int k = 0; k <= kFftSize / 2; ++k) {
      const double f = k * 16000.0 / kFftSize;
      e += tri(m, f) * p[k];
      mom += tri(m, f) * p[k] * f;
    }
    loge[m] = std::log(std::max(e, 1e-10));
    out.mfb.push_back(loge[m]);
    out.ssc.push_back(mom / e / 8000.0);
  }
  for (int k = 0; k < kNumMfcc; ++k) {
    double acc = 0;
    for (int n = 0; n < kNumMelBands; ++n) acc += loge[n] * std::cos(kPi * k * (n + 0.5) / kNumMelBands);
    out.mfcc.push_back(acc * std::sqrt((k == 0 ? 1.0 : 2.0) / kNumMelBands));
  }
  return out;
}

TEST(AudioFeatures, FrameCountFollowsHop) {
  EXPECT_EQ(frame_count(0), 0);
  EXPECT_EQ(frame_count(399), 0);
  EXPECT_EQ(frame_count(400), 1);
  EXPECT_EQ(frame_count(559), 1);
  EXPECT_EQ(frame_count(560), 2);
  EXPECT_EQ(frame_count(16000), 98);
  EXPECT_EQ(samples_needed_for_frame(0), 400u);
  EXPECT_EQ(samples_needed_for_frame(11), 2160u);
}

TEST(AudioFeatures, MelScaleRoundTrips) {
  for (double hz : {0.0, 100.0, 700.0, 1000.0, 4321.0, 8000.0}) EXPECT_NEAR(mel_to_hz(hz_to_mel(hz)), hz, 1e-9);
  EXPECT_NEAR(hz_to_mel(1000.0), 1000.0, 0.1);
}

TEST(AudioFeatures, FilterbankMatchesDirectTriangles) {
  const MelFilterBank bank;
  ASSERT_EQ(bank.num_bands(), kNumMelBands);
  ASSERT_EQ(bank.num_bins(), kFftSize / 2 + 1);
  for (int m = 0; m < kNumMelBands; ++m) {
    for (int k = 0; k < bank.num_bins(); ++k) EXPECT_NEAR(bank.weights()(m, k), tri(m, k * 16000.0 / kFftSize), 1e-9);
  }
}

TEST(AudioFeatures, FilterbankPartitionsUnityBetweenCenters) {
  const MelFilterBank bank;
  for (int k = 0; k < bank.num_bins(); ++k) {
    const double f = bank.bin_hz(k);
    if (f < bank.center_hz(0) || f > bank.center_hz(kNumMelBands - 1)) continue;
    EXPECT_NEAR(bank.weights().col(k).sum(), 1.0, 1e-12) << "bin " << k;
  }
}

TEST(AudioFeatures, DctIsOrthonormalCosineBasis) {
  const Mat<double> d = dct2_matrix(kNumMelBands, kNumMelBands);
  EXPECT_LT((d * d.transpose() - Mat<double>::Identity(kNumMelBands, kNumMelBands)).cwiseAbs().maxCoeff(), 1e-12);
  const Mat<double> d13 = dct2_matrix(kNumMfcc, kNumMelBands);
  for (int k = 0; k < kNumMfcc; ++k) {
    for (int n = 0; n < kNumMelBands; ++n) {
      const double want = std::sqrt((k == 0 ? 1.0 : 2.0) / kNumMelBands) * std::cos(kPi * k * (n + 0.5) / kNumMelBands);
      EXPECT_NEAR(d13(k, n), want, 1e-14);
    }
  }
}

TEST(AudioFeatures, FramesMatchDirectDftOracle) {
  const AudioClip clip = testing::noisy_tones(4000, 11);
  const auto frames = extract_features(clip);
  ASSERT_EQ(frames.size(), static_cast<std::size_t>(frame_count(clip.samples.size())));
  for (std::size_t t : {std::size_t{0}, std::size_t{1}, std::size_t{7}, frames.size() - 1}) {
    const auto want = naive_features(clip.samples, t * kHopSamples);
    const auto& got = frames[t];
    EXPECT_EQ(got.frame_index, static_cast<std::int64_t>(t));
    for (int i = 0; i < kNumMfcc; ++i) EXPECT_NEAR(got.mfcc[i], want.mfcc[i], 1e-8) << "frame " << t << " mfcc " << i;
    for (int i = 0; i < kNumMelBands; ++i) {
      EXPECT_NEAR(got.mfb[i], want.mfb[i], 1e-8) << "frame " << t << " mfb " << i;
      EXPECT_NEAR(got.ssc[i], want.ssc[i], 1e-10) << "frame " << t << " ssc " << i;
    }
  }
}

TEST(AudioFeatures, SubbandCentroidTracksATone) {
  // A pure 2 kHz tone: the band centred nearest 2 kHz has its centroid near 2 kHz.
  AudioClip clip;
  for (int i = 0; i < 1600; ++i) clip.samples.push_back(static_cast<std::int16_t>(8000 * std::sin(2 * kPi * 2000.0 * i / 16000)));
  const auto f = extract_features(clip)[3];
  const MelFilterBank bank;
  int best = 0;
  for (int m = 0; m < kNumMelBands; ++m) {
    if (std::abs(bank.center_hz(m) - 2000) < std::abs(bank.center_hz(best) - 2000)) best = m;
  }
  EXPECT_NEAR(f.ssc[best] * 8000.0, 2000.0, 60.0);
  for (double v : f.ssc) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(AudioFeatures, SilenceHitsTheEnergyFloor) {
  AudioClip clip;
  clip.samples.assign(800, 0);
  const auto f = extract_features(clip)[0];
  for (double v : f.mfb) EXPECT_DOUBLE_EQ(v, std::log(FeatureExtractor::kEnergyFloor));
  // Empty bands report their own center as centroid.
  const MelFilterBank bank;
  for (int m = 0; m < kNumMelBands; ++m) EXPECT_NEAR(f.ssc[m], bank.center_hz(m) / 8000.0, 1e-12);
}

TEST(AudioFeatures, RejectsWrongRateAndShortClips) {
  AudioClip clip = testing::noisy_tones(1000, 1);
  clip.sample_rate = 8000;
  try {
    extract_features(clip);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kInvalidArgument);
    EXPECT_NE(std::string(e.what()).find("16000"), std::string::npos);
  }
  AudioClip tiny = testing::noisy_tones(399, 1);
  EXPECT_THROW(extract_features(tiny), Error);
}

TEST(AudioFeatures, ValuesLayoutIsMfccMfbSsc) {
  const auto f = extract_features(testing::noisy_tones(400, 3))[0];
  const Vec<double> v = f.values();
  ASSERT_EQ(v.size(), kFeatureDim);
  EXPECT_EQ(v[0], f.mfcc[0]);
  EXPECT_EQ(v[kNumMfcc], f.mfb[0]);
  EXPECT_EQ(v[kNumMfcc + kNumMelBands], f.ssc[0]);
  EXPECT_EQ(v[kFeatureDim - 1], f.ssc[kNumMelBands - 1]);
}

TEST(AudioFeatures, ContextStacksTwentyFourFramesWithEdgeReplication) {
  const auto frames = extract_features(testing::noisy_tones(160 * 40 + 240, 5));
  const auto n = static_cast<std::int64_t>(frames.size());
  const Mat<double> m = feature_matrix(frames);
  for (std::int64_t t : {std::int64_t{0}, std::int64_t{5}, std::int64_t{20}, n - 3, n - 1}) {
    const Vec<double> ctx = stack_context(frames, t);
    ASSERT_EQ(ctx.size(), kContextDim);
    EXPECT_EQ(ctx, stack_context<double>(m, t));
    for (int k = 0; k < kContextFrames; ++k) {
      const std::int64_t src = std::clamp<std::int64_t>(t - 12 + k, 0, n - 1);
      EXPECT_EQ(ctx.segment(k * kFeatureDim, kFeatureDim), frames[src].values()) << "t " << t << " slot " << k;
    }
  }
  const Mat<float> all = stack_all_contexts<float>(m);
  EXPECT_EQ(all.rows(), kContextDim);
  EXPECT_EQ(all.col(9), stack_context(frames, 9).cast<float>());
  EXPECT_THROW(stack_context(frames, n), Error);
}

TEST(AudioFeatures, NormalizationStatisticsAndInverse) {
  std::vector<Mat<double>> clips = {feature_matrix(extract_features(testing::noisy_tones(3000, 1))),
                                    feature_matrix(extract_features(testing::noisy_tones(5000, 2)))};
  const auto stats = FeatureStats::compute(clips);
  Mat<double> all(kFeatureDim, clips[0].cols() + clips[1].cols());
  all << clips[0], clips[1];
  const Vec<double> mean = all.rowwise().mean();
  for (int d = 0; d < kFeatureDim; ++d) {
    const double var = (all.row(d).array() - mean[d]).square().mean();
    EXPECT_NEAR(stats.mean[d], mean[d], 1e-6 * (1 + std::abs(mean[d])));
    EXPECT_NEAR(stats.stddev[d], std::sqrt(var), 1e-6 * (1 + std::sqrt(var)));
    EXPECT_EQ(stats.mean[d], static_cast<double>(static_cast<float>(stats.mean[d])));
  }
  const Mat<double> z = normalize_features(all, stats);
  EXPECT_LT(z.rowwise().mean().cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_LT((denormalize_features(z, stats) - all).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(AudioFeatures, ConstantDimensionGetsFlooredDeviation) {
  Mat<double> c = Mat<double>::Constant(kFeatureDim, 10, 3.0);
  const auto stats = FeatureStats::compute({c});
  EXPECT_GE(stats.stddev.minCoeff(), FeatureStats::kMinStd);
  EXPECT_TRUE(normalize_features(c, stats).allFinite());
}

}  // namespace
}  // namespace visemenet
