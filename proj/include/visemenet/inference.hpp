#pragma once

// Batch and streaming inference, curve tracks and their CSV / keyframe-JSON forms.
//
// A streamed frame t is emitted once the audio for frame t+11 has been consumed (2160
// samples for frame 0), so output lags input by 120 ms. Streaming and batch inference
// share the feature extractor, the normalization, the context layout and the per-frame
// evaluator, and therefore agree bit for bit.

#include "visemenet/audio_features.hpp"
#include "visemenet/dataset.hpp"
#include "visemenet/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace visemenet {

// ---------------------------------------------------------------------------
// Curve tracks

struct ActiveRun {
  int start = 0;  // first active frame
  int end = 0;    // one past the last active frame
  bool operator==(const ActiveRun&) const = default;
};

struct CurveTrack {
  int parameter_id = 0;  // 0..28 rig, 29..30 JALI
  std::string name;
  std::vector<float> values;  // one per frame, 100 FPS
  std::vector<ActiveRun> active_runs;

  std::size_t frames() const { return values.size(); }
  static double time_of(std::size_t frame) { return static_cast<double>(frame) / kFramesPerSecond; }
  bool is_jali() const { return parameter_id >= kRigDim; }
  bool operator==(const CurveTrack&) const = default;
};

inline std::vector<ActiveRun> runs_of(const std::vector<bool>& active) {
  std::vector<ActiveRun> runs;
  for (std::size_t t = 0; t < active.size();) {
    if (!active[t]) {
      ++t;
      continue;
    }
    std::size_t e = t;
    while (e < active.size() && active[e]) ++e;
    runs.push_back({static_cast<int>(t), static_cast<int>(e)});
    t = e;
  }
  return runs;
}

/// 31 tracks from per-frame rig states.
inline std::vector<CurveTrack> tracks_from_frames(const std::vector<RigFrame>& frames) {
  const auto& names = track_names();
  std::vector<CurveTrack> tracks(kNumTracks);
  for (int k = 0; k < kNumTracks; ++k) {
    tracks[k].parameter_id = k;
    tracks[k].name = names[k];
    tracks[k].values.reserve(frames.size());
  }
  for (int a = 0; a < kRigDim; ++a) {
    std::vector<bool> active(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
      tracks[a].values.push_back(frames[t].rig[a]);
      active[t] = frames[t].active[a];
    }
    tracks[a].active_runs = runs_of(active);
  }
  for (int j = 0; j < kJaliDim; ++j) {
    for (const auto& f : frames) tracks[kRigDim + j].values.push_back(f.jali[j]);
    if (!frames.empty()) tracks[kRigDim + j].active_runs = {{0, static_cast<int>(frames.size())}};
  }
  return tracks;
}

/// Sliding median of odd width over each track; rig values stay 0 outside active runs.
inline void median_filter_tracks(std::vector<CurveTrack>& tracks, int width) {
  if (width <= 1) return;
  require(width % 2 == 1, ErrorCategory::kInvalidArgument, "median filter width must be odd");
  const int half = width / 2;
  for (auto& tr : tracks) {
    const auto src = tr.values;
    const int n = static_cast<int>(src.size());
    std::vector<float> window;
    for (int t = 0; t < n; ++t) {
      window.clear();
      for (int k = std::max(0, t - half); k <= std::min(n - 1, t + half); ++k) window.push_back(src[k]);
      std::nth_element(window.begin(), window.begin() + window.size() / 2, window.end());
      tr.values[t] = window[window.size() / 2];
    }
    if (!tr.is_jali()) {
      std::vector<bool> active(src.size(), false);
      for (const auto& r : tr.active_runs) {
        for (int t = r.start; t < r.end; ++t) active[t] = true;
      }
      for (int t = 0; t < n; ++t) {
        if (!active[t]) tr.values[t] = 0.0f;
      }
    }
  }
}

struct InferOptions {
  int median_width = 0;  // 0 = no post filter
};

struct ClipInference {
  FullOutput output;
  std::vector<CurveTrack> tracks;
};

inline ClipInference infer_clip_full(const AudioClip& clip, const ModelParams& params, const InferOptions& opt = {}) {
  params.validate();
  ClipInference r;
  r.output = full_forward(clip, params);
  r.tracks = tracks_from_frames(r.output.rig);
  median_filter_tracks(r.tracks, opt.median_width);
  return r;
}

/// 31 curve tracks for a clip: 29 rig parameters gated by their thresholds, 2 JALI values.
inline std::vector<CurveTrack> infer_clip(const AudioClip& clip, const ModelParams& params,
                                          const InferOptions& opt = {}) {
  return infer_clip_full(clip, params, opt).tracks;
}

// ---------------------------------------------------------------------------
// Streaming

struct StreamFrame {
  std::int64_t index = 0;
  RigFrame rig;
};

/// Single-owner streaming state over shared read-only parameters.
class StreamState {
 public:
  explicit StreamState(const ModelParams& params) : params_(&params), eval_(params.config, params.weights) {
    params.validate();
  }

  /// Consumes a chunk of PCM16 samples and returns every frame that became complete.
  /// `sample_offset`, when given, must equal the number of samples consumed so far.
  std::vector<StreamFrame> push(std::span<const std::int16_t> chunk, std::optional<std::uint64_t> sample_offset = {}) {
    require(!finished_, ErrorCategory::kState, "stream already finished");
    if (sample_offset) {
      require(*sample_offset == consumed_, ErrorCategory::kState,
              "out-of-order chunk: starts at sample " + std::to_string(*sample_offset) + ", expected " +
                  std::to_string(consumed_));
    }
    samples_.insert(samples_.end(), chunk.begin(), chunk.end());
    consumed_ += chunk.size();
    std::vector<StreamFrame> out;
    while (frame_available()) {
      compute_next_frame();
      // Frame t is ready once frame t + 11 exists.
      while (emitted_ + kContextAfter < computed_) out.push_back(emit(emitted_, computed_ - 1));
    }
    return out;
  }

  /// Flushes the last frames, replicating the final frame as future context.
  std::vector<StreamFrame> finish() {
    require(!finished_, ErrorCategory::kState, "stream already finished");
    finished_ = true;
    require(computed_ > 0, ErrorCategory::kInvalidArgument,
            "stream ended before one full analysis window (400 samples)");
    std::vector<StreamFrame> out;
    while (emitted_ < computed_) out.push_back(emit(emitted_, computed_ - 1));
    return out;
  }

  std::int64_t frames_emitted() const { return emitted_; }
  std::int64_t frames_computed() const { return computed_; }
  std::uint64_t samples_consumed() const { return consumed_; }

 private:
  bool frame_available() const {
    const std::uint64_t end = static_cast<std::uint64_t>(computed_) * kHopSamples + kWindowSamples;
    return consumed_ >= end;
  }

  void compute_next_frame() {
    const std::uint64_t start = static_cast<std::uint64_t>(computed_) * kHopSamples;
    const std::size_t local = static_cast<std::size_t>(start - samples_base_);
    const std::int16_t prev = start == 0 ? std::int16_t{0} : samples_[local - 1];
    const FeatureFrame f = extractor_.compute(std::span<const std::int16_t>(samples_).subspan(local, kWindowSamples),
                                             prev, computed_);
    Mat<double> col(kFeatureDim, 1);
    col.col(0) = f.values();
    frames_.push_back(normalize_features(col, params_->stats).cast<float>().col(0));
    ++computed_;
    // Keep the sample before the next window for pre-emphasis.
    const std::uint64_t keep_from = static_cast<std::uint64_t>(computed_) * kHopSamples - 1;
    if (keep_from > samples_base_) {
      samples_.erase(samples_.begin(), samples_.begin() + static_cast<std::ptrdiff_t>(keep_from - samples_base_));
      samples_base_ = keep_from;
    }
  }

  StreamFrame emit(std::int64_t t, std::int64_t last) {
    // frames_ holds frames [first_, computed_).
    ctx_.resize(kContextDim);
    for (int k = 0; k < kContextFrames; ++k) {
      const std::int64_t src = std::clamp<std::int64_t>(t - kContextBefore + k, 0, last);
      ctx_.segment(k * kFeatureDim, kFeatureDim) = frames_[static_cast<std::size_t>(src - first_)];
    }
    frame_ = frames_[static_cast<std::size_t>(t - first_)];
    const auto& o = eval_.step(ctx_, frame_);
    StreamFrame sf{t, make_rig_frame<float>(o.activation_probs, o.rig, o.jali, params_->thresholds)};
    ++emitted_;
    // Frames before emitted_ - 12 are no longer needed.
    while (first_ < emitted_ - kContextBefore && first_ < computed_ - 1) {
      frames_.pop_front();
      ++first_;
    }
    return sf;
  }

  const ModelParams* params_;
  FeatureExtractor extractor_;
  FrameEvaluator<float> eval_;
  std::vector<std::int16_t> samples_;
  std::uint64_t samples_base_ = 0;  // absolute index of samples_[0]
  std::uint64_t consumed_ = 0;
  std::deque<Vec<float>> frames_;
  std::int64_t first_ = 0;  // absolute index of frames_[0]
  std::int64_t computed_ = 0;
  std::int64_t emitted_ = 0;
  bool finished_ = false;
  Vec<float> ctx_, frame_;
};

// ---------------------------------------------------------------------------
// CSV: frame, time_s, 29 rig values, 2 JALI values, 29 activation bits

inline void write_curves_csv_header(std::ostream& os) {
  os << "frame,time_s";
  for (const auto& name : track_names()) os << ',' << name;
  for (int a = 0; a < kRigDim; ++a) os << ",active_" << track_names()[static_cast<std::size_t>(a)];
  os << '\n';
}

inline void write_curves_csv_row(std::ostream& os, std::size_t frame, const std::array<float, kNumTracks>& values,
                                 const std::array<bool, kRigDim>& active) {
  os << frame << ',' << std::fixed << std::setprecision(2) << CurveTrack::time_of(frame) << std::defaultfloat
     << std::setprecision(std::numeric_limits<float>::max_digits10);
  for (float v : values) os << ',' << v;
  for (bool b : active) os << ',' << (b ? 1 : 0);
  os << '\n';
}

/// One streaming or batch frame as a CSV row (same columns as write_curves_csv).
inline void write_curves_csv_row(std::ostream& os, std::size_t frame, const RigFrame& f) {
  std::array<float, kNumTracks> values{};
  std::copy(f.rig.begin(), f.rig.end(), values.begin());
  std::copy(f.jali.begin(), f.jali.end(), values.begin() + kRigDim);
  write_curves_csv_row(os, frame, values, f.active);
}

inline void write_curves_csv(std::ostream& os, const std::vector<CurveTrack>& tracks) {
  require_shape(tracks.size() == static_cast<std::size_t>(kNumTracks), "expected 31 curve tracks");
  const std::size_t T = tracks.front().frames();
  for (const auto& tr : tracks) require_shape(tr.frames() == T, "curve tracks differ in length");
  write_curves_csv_header(os);
  std::vector<std::array<bool, kRigDim>> active(T);
  for (int a = 0; a < kRigDim; ++a) {
    for (const auto& r : tracks[a].active_runs) {
      for (int t = r.start; t < r.end; ++t) active[static_cast<std::size_t>(t)][a] = true;
    }
  }
  std::array<float, kNumTracks> values{};
  for (std::size_t t = 0; t < T; ++t) {
    for (int k = 0; k < kNumTracks; ++k) values[k] = tracks[k].values[t];
    write_curves_csv_row(os, t, values, active[t]);
  }
}

inline std::vector<CurveTrack> read_curves_csv(std::istream& is, const std::string& name = "curves") {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCategory::kFormat, name + ": empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  require(header.size() == 2 + kNumTracks + kRigDim && header[0] == "frame" && header[1] == "time_s",
          ErrorCategory::kFormat, name + ": unexpected header");
  std::vector<CurveTrack> tracks(kNumTracks);
  for (int k = 0; k < kNumTracks; ++k) {
    tracks[k].parameter_id = k;
    tracks[k].name = header[2 + k];
  }
  std::vector<std::vector<bool>> active(kRigDim);
  std::size_t row = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    require(cells.size() == header.size(), ErrorCategory::kFormat,
            name + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " columns");
    require(std::stoull(cells[0]) == row, ErrorCategory::kFormat, name + ": frames must be consecutive from 0");
    for (int k = 0; k < kNumTracks; ++k) tracks[k].values.push_back(std::stof(cells[2 + k]));
    for (int a = 0; a < kRigDim; ++a) active[a].push_back(cells[2 + kNumTracks + a] == "1");
    ++row;
  }
  for (int a = 0; a < kRigDim; ++a) tracks[a].active_runs = runs_of(active[a]);
  for (int j = 0; j < kJaliDim; ++j) {
    if (row > 0) tracks[kRigDim + j].active_runs = {{0, static_cast<int>(row)}};
  }
  return tracks;
}

// ---------------------------------------------------------------------------
// Keyframe JSON
//
// {"format": "visemenet-keyframes", "version": 1, "fps": 100, "frames": T,
//  "tracks": [{"id": k, "name": "...", "keys": [{"frame": f, "time": s, "value": v}, ...]}]}
//
// Keys sit on the first and last frame of every active run and on every frame inside
// a run where the slope changes direction (flat stretches count as a direction).

inline constexpr int kKeyframeVersion = 1;

struct Keyframe {
  int frame = 0;
  float value = 0.0f;
};

inline std::vector<Keyframe> keyframes_of(const CurveTrack& tr, float tolerance = 1e-4f) {
  std::vector<Keyframe> keys;
  auto slope = [&](int a, int b) {
    const float d = tr.values[b] - tr.values[a];
    return d > tolerance ? 1 : (d < -tolerance ? -1 : 0);
  };
  for (const auto& r : tr.active_runs) {
    keys.push_back({r.start, tr.values[r.start]});
    for (int t = r.start + 1; t + 1 < r.end; ++t) {
      if (slope(t - 1, t) != slope(t, t + 1)) keys.push_back({t, tr.values[t]});
    }
    if (r.end - 1 > r.start) keys.push_back({r.end - 1, tr.values[r.end - 1]});
  }
  return keys;
}

inline nlohmann::json keyframe_json(const std::vector<CurveTrack>& tracks, float tolerance = 1e-4f) {
  nlohmann::json j;
  j["format"] = "visemenet-keyframes";
  j["version"] = kKeyframeVersion;
  j["fps"] = kFramesPerSecond;
  j["frames"] = tracks.empty() ? 0 : tracks.front().frames();
  j["tracks"] = nlohmann::json::array();
  for (const auto& tr : tracks) {
    nlohmann::json keys = nlohmann::json::array();
    for (const auto& k : keyframes_of(tr, tolerance)) {
      keys.push_back({{"frame", k.frame}, {"time", CurveTrack::time_of(static_cast<std::size_t>(k.frame))},
                      {"value", k.value}});
    }
    j["tracks"].push_back({{"id", tr.parameter_id}, {"name", tr.name}, {"keys", keys}});
  }
  return j;
}

inline void write_keyframes(std::ostream& os, const std::vector<CurveTrack>& tracks) {
  os << keyframe_json(tracks).dump(2) << '\n';
}

}  // namespace visemenet
