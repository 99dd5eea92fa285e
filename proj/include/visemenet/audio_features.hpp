#pragma once

#include "visemenet/common.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace visemenet {

/// Mono 16-bit PCM. Only 16 kHz input is accepted; resampling happens outside this library.
struct AudioClip {
  std::vector<std::int16_t> samples;
  int sample_rate = kSampleRate;

  double duration_seconds() const { return static_cast<double>(samples.size()) / sample_rate; }

  void validate() const {
    require(sample_rate == kSampleRate, ErrorCategory::kInvalidArgument,
            "audio sample rate is " + std::to_string(sample_rate) +
                " Hz; expected 16000 Hz (resample externally)");
    require(samples.size() >= static_cast<std::size_t>(kWindowSamples), ErrorCategory::kInvalidArgument,
            "audio clip has " + std::to_string(samples.size()) +
                " samples; at least one 400-sample analysis window is required");
  }
};

/// Number of analysis frames for a clip of `num_samples` samples (0 if shorter than one window).
constexpr std::int64_t frame_count(std::size_t num_samples) {
  if (num_samples < static_cast<std::size_t>(kWindowSamples)) return 0;
  return static_cast<std::int64_t>((num_samples - kWindowSamples) / kHopSamples) + 1;
}

/// Number of samples that must have been seen before frame `index` can be computed.
constexpr std::size_t samples_needed_for_frame(std::int64_t index) {
  return static_cast<std::size_t>(index) * kHopSamples + kWindowSamples;
}

struct FeatureFrame {
  std::array<double, kNumMfcc> mfcc{};
  std::array<double, kNumMelBands> mfb{};  // log filterbank energies
  std::array<double, kNumMelBands> ssc{};  // subband centroids / Nyquist, in [0, 1]
  std::int64_t frame_index = 0;

  /// Concatenated [mfcc | mfb | ssc] layout used everywhere downstream.
  Vec<double> values() const {
    Vec<double> v(kFeatureDim);
    for (int i = 0; i < kNumMfcc; ++i) v[i] = mfcc[i];
    for (int i = 0; i < kNumMelBands; ++i) v[kNumMfcc + i] = mfb[i];
    for (int i = 0; i < kNumMelBands; ++i) v[kNumMfcc + kNumMelBands + i] = ssc[i];
    return v;
  }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular mel filters with unit peaks, evaluated at the exact bin frequencies.
/// Adjacent triangles share edges at band centers, so weights sum to one between
/// the first and last band centers.
class MelFilterBank {
 public:
  explicit MelFilterBank(int num_bands = kNumMelBands, int fft_size = kFftSize,
                         double sample_rate = kSampleRate, double low_hz = 0.0,
                         double high_hz = kSampleRate / 2.0)
      : fft_size_(fft_size), sample_rate_(sample_rate) {
    require(num_bands > 0 && fft_size > 0 && low_hz >= 0.0 && high_hz > low_hz &&
                high_hz <= sample_rate / 2.0,
            ErrorCategory::kInvalidArgument, "invalid mel filterbank configuration");
    const double low_mel = hz_to_mel(low_hz);
    const double high_mel = hz_to_mel(high_hz);
    points_hz_.resize(num_bands + 2);
    for (int i = 0; i < num_bands + 2; ++i) {
      points_hz_[i] = mel_to_hz(low_mel + (high_mel - low_mel) * i / (num_bands + 1));
    }
    const int bins = fft_size / 2 + 1;
    weights_ = Mat<double>::Zero(num_bands, bins);
    for (int m = 0; m < num_bands; ++m) {
      const double lo = points_hz_[m], mid = points_hz_[m + 1], hi = points_hz_[m + 2];
      for (int k = 0; k < bins; ++k) {
        const double f = bin_hz(k);
        if (f > lo && f < mid) {
          weights_(m, k) = (f - lo) / (mid - lo);
        } else if (f >= mid && f < hi) {
          weights_(m, k) = (hi - f) / (hi - mid);
        }
      }
    }
  }

  int num_bands() const { return static_cast<int>(weights_.rows()); }
  int num_bins() const { return static_cast<int>(weights_.cols()); }
  double bin_hz(int k) const { return k * sample_rate_ / fft_size_; }
  double center_hz(int band) const { return points_hz_.at(band + 1); }
  double lower_edge_hz(int band) const { return points_hz_.at(band); }
  double upper_edge_hz(int band) const { return points_hz_.at(band + 2); }
  const Mat<double>& weights() const { return weights_; }

 private:
  int fft_size_;
  double sample_rate_;
  std::vector<double> points_hz_;
  Mat<double> weights_;  // bands x bins
};

/// Orthonormal DCT-II basis, rows = output coefficients.
inline Mat<double> dct2_matrix(int num_out, int num_in) {
  Mat<double> d(num_out, num_in);
  for (int k = 0; k < num_out; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / num_in) : std::sqrt(2.0 / num_in);
    for (int n = 0; n < num_in; ++n) {
      d(k, n) = scale * std::cos(std::numbers::pi * k * (2.0 * n + 1.0) / (2.0 * num_in));
    }
  }
  return d;
}

/// Per-frame spectral front end: pre-emphasis, Hamming window, 512-point power
/// spectrum, 26 mel bands, then MFCC / log-MFB / SSC.
///
/// Not thread-safe (the FFT plan cache is mutable); use one extractor per thread.
class FeatureExtractor {
 public:
  static constexpr double kPreEmphasis = 0.97;
  static constexpr double kEnergyFloor = 1e-10;

  FeatureExtractor() : dct_(dct2_matrix(kNumMfcc, kNumMelBands)) {
    window_.resize(kWindowSamples);
    for (int n = 0; n < kWindowSamples; ++n) {
      window_[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (kWindowSamples - 1));
    }
    frame_buffer_.assign(kFftSize, 0.0);
  }

  const MelFilterBank& filterbank() const { return bank_; }

  /// Power spectrum (bins 0..256) of one window. `previous_sample` is the sample
  /// immediately preceding the window in the signal (0 for the first frame).
  Vec<double> power_spectrum(std::span<const std::int16_t> window, std::int16_t previous_sample) {
    require(window.size() == static_cast<std::size_t>(kWindowSamples), ErrorCategory::kShape,
            "analysis window must hold 400 samples");
    double prev = previous_sample / 32768.0;
    for (int n = 0; n < kWindowSamples; ++n) {
      const double x = window[n] / 32768.0;
      frame_buffer_[n] = (x - kPreEmphasis * prev) * window_[n];
      prev = x;
    }
    std::fill(frame_buffer_.begin() + kWindowSamples, frame_buffer_.end(), 0.0);
    fft_.fwd(spectrum_, frame_buffer_);
    Vec<double> power(kFftSize / 2 + 1);
    for (int k = 0; k <= kFftSize / 2; ++k) power[k] = std::norm(spectrum_[k]) / kFftSize;
    return power;
  }

  FeatureFrame compute(std::span<const std::int16_t> window, std::int16_t previous_sample,
                       std::int64_t frame_index) {
    const Vec<double> power = power_spectrum(window, previous_sample);
    const Mat<double>& w = bank_.weights();
    FeatureFrame out;
    out.frame_index = frame_index;
    Vec<double> log_energy(kNumMelBands);
    const double nyquist = kSampleRate / 2.0;
    for (int m = 0; m < kNumMelBands; ++m) {
      double energy = 0.0, moment = 0.0;
      for (int k = 0; k < power.size(); ++k) {
        const double e = w(m, k) * power[k];
        energy += e;
        moment += e * bank_.bin_hz(k);
      }
      log_energy[m] = std::log(std::max(energy, kEnergyFloor));
      out.mfb[m] = log_energy[m];
      const double centroid = energy > 1e-20 ? moment / energy : bank_.center_hz(m);
      out.ssc[m] = std::clamp(centroid / nyquist, 0.0, 1.0);
    }
    const Vec<double> cep = dct_ * log_energy;
    for (int i = 0; i < kNumMfcc; ++i) out.mfcc[i] = cep[i];
    return out;
  }

  /// Features of frame `index` of a full signal.
  FeatureFrame compute_frame(std::span<const std::int16_t> samples, std::int64_t index) {
    const std::size_t start = static_cast<std::size_t>(index) * kHopSamples;
    const std::int16_t prev = start == 0 ? std::int16_t{0} : samples[start - 1];
    return compute(samples.subspan(start, kWindowSamples), prev, index);
  }

 private:
  MelFilterBank bank_;
  Mat<double> dct_;
  std::vector<double> window_;
  std::vector<double> frame_buffer_;
  std::vector<std::complex<double>> spectrum_;
  Eigen::FFT<double> fft_;
};

/// One FeatureFrame per 10 ms hop over 25 ms windows.
inline std::vector<FeatureFrame> extract_features(const AudioClip& clip) {
  clip.validate();
  FeatureExtractor extractor;
  const std::int64_t n = frame_count(clip.samples.size());
  std::vector<FeatureFrame> frames;
  frames.reserve(static_cast<std::size_t>(n));
  const std::span<const std::int16_t> samples(clip.samples);
  for (std::int64_t t = 0; t < n; ++t) frames.push_back(extractor.compute_frame(samples, t));
  return frames;
}

/// Features as a 65 x T matrix.
inline Mat<double> feature_matrix(const std::vector<FeatureFrame>& frames) {
  Mat<double> m(kFeatureDim, static_cast<Eigen::Index>(frames.size()));
  for (std::size_t t = 0; t < frames.size(); ++t) m.col(static_cast<Eigen::Index>(t)) = frames[t].values();
  return m;
}

/// Writes the 24-frame context for frame `t` of `frames` (rows = feature dims) into `out`,
/// replicating the first/last frame beyond the sequence boundaries.
template <class S, class Derived>
void stack_context_into(const Eigen::MatrixBase<Derived>& frames, Eigen::Index t, Vec<S>& out) {
  const Eigen::Index n = frames.cols();
  const Eigen::Index dim = frames.rows();
  require(n > 0, ErrorCategory::kInvalidArgument, "cannot stack context over an empty feature sequence");
  require(t >= 0 && t < n, ErrorCategory::kInvalidArgument, "context frame index out of range");
  out.resize(dim * kContextFrames);
  for (int k = 0; k < kContextFrames; ++k) {
    const Eigen::Index src = std::clamp<Eigen::Index>(t - kContextBefore + k, 0, n - 1);
    out.segment(k * dim, dim) = frames.col(src).template cast<S>();
  }
}

template <class S = double>
Vec<S> stack_context(const Mat<S>& frames, Eigen::Index t) {
  Vec<S> out;
  stack_context_into<S>(frames, t, out);
  return out;
}

inline Vec<double> stack_context(const std::vector<FeatureFrame>& frames, std::int64_t t) {
  require(!frames.empty(), ErrorCategory::kInvalidArgument,
          "cannot stack context over an empty feature sequence");
  const auto n = static_cast<std::int64_t>(frames.size());
  require(t >= 0 && t < n, ErrorCategory::kInvalidArgument, "context frame index out of range");
  Vec<double> out(kContextDim);
  for (int k = 0; k < kContextFrames; ++k) {
    const std::int64_t src = std::clamp<std::int64_t>(t - kContextBefore + k, 0, n - 1);
    out.segment(k * kFeatureDim, kFeatureDim) = frames[static_cast<std::size_t>(src)].values();
  }
  return out;
}

/// All contexts of a sequence, one 1560-dim column per frame.
template <class S, class Derived>
Mat<S> stack_all_contexts(const Eigen::MatrixBase<Derived>& frames) {
  Mat<S> out(frames.rows() * kContextFrames, frames.cols());
  Vec<S> ctx;
  for (Eigen::Index t = 0; t < frames.cols(); ++t) {
    stack_context_into<S>(frames, t, ctx);
    out.col(t) = ctx;
  }
  return out;
}

/// Per-dimension normalization statistics. Values are rounded to float so that a
/// model behaves identically before and after a checkpoint round trip.
struct FeatureStats {
  static constexpr double kMinStd = 1e-8;

  Vec<double> mean = Vec<double>::Zero(kFeatureDim);
  Vec<double> stddev = Vec<double>::Ones(kFeatureDim);

  static FeatureStats compute(const std::vector<Mat<double>>& clips) {
    FeatureStats s;
    require(!clips.empty(), ErrorCategory::kInvalidArgument, "no feature data for normalization statistics");
    const Eigen::Index dim = clips.front().rows();
    Vec<double> sum = Vec<double>::Zero(dim), sq = Vec<double>::Zero(dim);
    double count = 0.0;
    for (const auto& c : clips) {
      require_shape(c.rows() == dim, "feature dimension mismatch in statistics");
      sum += c.rowwise().sum();
      count += static_cast<double>(c.cols());
    }
    require(count > 0, ErrorCategory::kInvalidArgument, "no feature frames for normalization statistics");
    s.mean = sum / count;
    for (const auto& c : clips) sq += (c.colwise() - s.mean).array().square().matrix().rowwise().sum();
    s.stddev = (sq / count).array().sqrt().max(kMinStd).matrix();
    s.mean = s.mean.cast<float>().cast<double>();
    s.stddev = s.stddev.cast<float>().cast<double>().array().max(kMinStd).matrix();
    return s;
  }
};

/// out[d] = (in[d] - mean[d]) / std[d], std floored at 1e-8.
inline Mat<double> normalize_features(const Mat<double>& frames, const FeatureStats& stats) {
  require_shape(frames.rows() == stats.mean.size() && stats.stddev.size() == stats.mean.size(),
                "feature dimension does not match normalization statistics");
  const Vec<double> sd = stats.stddev.array().max(FeatureStats::kMinStd).matrix();
  return ((frames.colwise() - stats.mean).array().colwise() / sd.array()).matrix();
}

inline Mat<double> denormalize_features(const Mat<double>& frames, const FeatureStats& stats) {
  require_shape(frames.rows() == stats.mean.size() && stats.stddev.size() == stats.mean.size(),
                "feature dimension does not match normalization statistics");
  const Vec<double> sd = stats.stddev.array().max(FeatureStats::kMinStd).matrix();
  return ((frames.array().colwise() * sd.array()).matrix().colwise() + stats.mean);
}

/// Normalized single-precision features of a clip, 65 x T.
inline Mat<float> network_features(const AudioClip& clip, const FeatureStats& stats) {
  return normalize_features(feature_matrix(extract_features(clip)), stats).cast<float>();
}

}  // namespace visemenet
