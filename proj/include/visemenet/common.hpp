#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace visemenet {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Per-frame, per-parameter binary indicators (rows = parameters, cols = frames).
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// Audio front end.
inline constexpr int kSampleRate = 16000;
inline constexpr int kWindowSamples = 400;  // 25 ms
inline constexpr int kHopSamples = 160;     // 10 ms
inline constexpr int kFftSize = 512;
inline constexpr int kNumMfcc = 13;
inline constexpr int kNumMelBands = 26;
inline constexpr int kFeatureDim = kNumMfcc + 2 * kNumMelBands;  // 65
inline constexpr double kFramesPerSecond = 100.0;

// Context window: 12 past frames, the current frame and 11 future frames.
inline constexpr int kContextBefore = 12;
inline constexpr int kContextAfter = 11;
inline constexpr int kContextFrames = kContextBefore + 1 + kContextAfter;  // 24
inline constexpr int kContextDim = kFeatureDim * kContextFrames;            // 1560

// Output representation.
inline constexpr int kPhonemeGroups = 20;
inline constexpr int kNumLandmarks = 38;
inline constexpr int kLandmarkDim = 2 * kNumLandmarks;  // 76
inline constexpr int kNumVisemes = 20;
inline constexpr int kNumCoarticulation = 9;
inline constexpr int kRigDim = kNumVisemes + kNumCoarticulation;  // 29
inline constexpr int kJaliDim = 2;
inline constexpr int kNumTracks = kRigDim + kJaliDim;  // 31

/// Threshold applied to ground-truth curves when a dataset carries no explicit activation bits.
inline constexpr double kActivationEpsilon = 1e-3;

enum class ErrorCategory {
  kInvalidArgument,
  kShape,
  kIo,
  kFormat,
  kData,
  kState,
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kInvalidArgument: return "invalid_argument";
    case ErrorCategory::kShape: return "shape";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kFormat: return "format";
    case ErrorCategory::kData: return "data";
    case ErrorCategory::kState: return "state";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

inline void require(bool condition, ErrorCategory category, const std::string& message) {
  if (!condition) throw Error(category, message);
}

inline void require_shape(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorCategory::kShape, message);
}

}  // namespace visemenet
