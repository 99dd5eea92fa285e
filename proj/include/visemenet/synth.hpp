#pragma once

// Synthetic audiovisual corpus.
//
// Each speaker gets formant pairs per phoneme group, a pitch, a landmark pose scale and a
// home point in the JALI square. A clip is silence, a run of group segments (80-320 ms,
// no immediate repeats), then silence. Audio is two formant sinusoids plus a pitch
// component, with band-passed noise for fricatives; loudness follows the jaw value and
// the second formant's level follows the lip value. Landmarks chase per-group pose
// targets with a critically damped second-order system. Rig curves are trapezoids on
// the group's viseme; co-articulation controls fire around each segment boundary.

#include "visemenet/common.hpp"
#include "visemenet/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace visemenet::synth {

/// SplitMix64; used to derive independent per-speaker and per-clip streams.
inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Portable generator: identical streams on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed)) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double normal() {
    const double u1 = std::max(uniform(), 1e-300);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

// Articulatory classes used to index co-articulation controls.
enum ArticClass { kVowel = 0, kLabial = 1, kLingual = 2 };

struct GroupArticulation {
  double f1, f2;  // base formants (Hz)
  double jaw, open, round, wide, close;
  double loudness;
  int noise_band;  // -1 = none, else index into kNoiseBands
  ArticClass cls;
};

struct NoiseBand {
  double center_hz, q, gain;
};

inline constexpr std::array<NoiseBand, 4> kNoiseBands = {{
    {5500.0, 3.0, 0.55},  // S
    {3200.0, 2.5, 0.55},  // ShChZh
    {4500.0, 1.2, 0.30},  // Th
    {6500.0, 1.5, 0.28},  // FV
}};

/// Per-group synthesis table, in phoneme-table order.
inline const std::array<GroupArticulation, kPhonemeGroups>& group_articulation() {
  static const std::array<GroupArticulation, kPhonemeGroups> table = [] {
    constexpr double f1s[4] = {300.0, 500.0, 700.0, 900.0};
    constexpr double f2s[5] = {1000.0, 1500.0, 2000.0, 2600.0, 3300.0};
    // jaw, open, round, wide, close, loudness, noise band, class
    struct Row {
      double jaw, open, round, wide, close, loud;
      int noise;
      ArticClass cls;
    };
    constexpr Row rows[kPhonemeGroups] = {
        {0.90, 0.80, 0.10, 0.30, 0.0, 1.00, -1, kVowel},    // Ah
        {0.80, 0.70, 0.00, 0.50, 0.0, 1.00, -1, kVowel},    // Aa
        {0.60, 0.50, 0.00, 0.60, 0.0, 0.95, -1, kVowel},    // Eh
        {0.30, 0.30, 0.00, 0.90, 0.0, 0.90, -1, kVowel},    // Ee
        {0.40, 0.35, 0.00, 0.70, 0.0, 0.90, -1, kVowel},    // Ih
        {0.70, 0.60, 0.80, 0.00, 0.0, 0.95, -1, kVowel},    // Oh
        {0.60, 0.50, 0.20, 0.20, 0.0, 0.90, -1, kVowel},    // Uh
        {0.30, 0.20, 1.00, 0.00, 0.0, 0.85, -1, kVowel},    // U
        {0.35, 0.30, 0.90, 0.10, 0.0, 0.85, -1, kVowel},    // Eu
        {0.45, 0.40, 0.10, 0.20, 0.0, 0.80, -1, kVowel},    // Schwa
        {0.35, 0.25, 0.60, 0.00, 0.0, 0.75, -1, kLingual},  // R
        {0.20, 0.10, 0.00, 0.60, 0.0, 0.40, 0, kLingual},   // S
        {0.25, 0.15, 0.70, 0.00, 0.0, 0.40, 1, kLingual},   // ShChZh
        {0.35, 0.30, 0.00, 0.30, 0.0, 0.45, 2, kLingual},   // Th
        {0.30, 0.20, 0.00, 0.60, 0.0, 0.70, -1, kLingual},  // JY
        {0.40, 0.30, 0.00, 0.30, 0.0, 0.65, -1, kLingual},  // LNTD
        {0.45, 0.35, 0.00, 0.20, 0.0, 0.60, -1, kLingual},  // GK
        {0.05, 0.00, 0.00, 0.10, 1.0, 0.35, -1, kLabial},   // MBP
        {0.15, 0.05, 0.00, 0.20, 0.5, 0.45, 3, kLabial},    // FV
        {0.25, 0.15, 1.00, 0.00, 0.2, 0.70, -1, kLabial},   // WA_PEDAL
    };
    std::array<GroupArticulation, kPhonemeGroups> t{};
    for (int g = 0; g < kPhonemeGroups; ++g) {
      const auto& r = rows[g];
      t[g] = {f1s[g % 4], f2s[g / 4], r.jaw, r.open, r.round, r.wide, r.close, r.loud, r.noise, r.cls};
    }
    return t;
  }();
  return table;
}

/// Co-articulation control (20..28) for a transition between two groups.
inline int coarticulation_parameter(int from_group, int to_group) {
  const auto& t = group_articulation();
  return kNumVisemes + 3 * t[from_group].cls + t[to_group].cls;
}

// ---------------------------------------------------------------------------
// Face geometry: 15 jaw points, 7 nose points, 10 outer-lip and 6 inner-lip points.

inline constexpr int kJawPoints = 15;
inline constexpr int kNosePoints = 7;
inline constexpr int kOuterLipPoints = 10;
inline constexpr int kInnerLipPoints = 6;
static_assert(kJawPoints + kNosePoints + kOuterLipPoints + kInnerLipPoints == kNumLandmarks);

/// Template neutral face, interleaved (x0, y0, x1, y1, ...), y pointing down.
inline Vec<float> neutral_face_template() {
  Vec<double> b(kLandmarkDim);
  int p = 0;
  auto put = [&](double x, double y) {
    b[2 * p] = x;
    b[2 * p + 1] = y;
    ++p;
  };
  for (int i = 0; i < kJawPoints; ++i) {
    const double phi = std::numbers::pi * i / (kJawPoints - 1);
    put(-0.5 * std::cos(phi), 0.1 + 0.45 * std::sin(phi));
  }
  for (int i = 0; i < 4; ++i) put(0.0, -0.35 + 0.08 * i);
  put(-0.08, -0.05);
  put(0.0, -0.04);
  put(0.08, -0.05);
  for (int i = 0; i < kOuterLipPoints; ++i) {
    const double a = 2.0 * std::numbers::pi * i / kOuterLipPoints;
    put(0.22 * std::cos(a), 0.2 + 0.08 * std::sin(a));
  }
  for (int i = 0; i < kInnerLipPoints; ++i) {
    const double a = 2.0 * std::numbers::pi * i / kInnerLipPoints;
    put(0.15 * std::cos(a), 0.2 + 0.03 * std::sin(a));
  }
  return b.cast<float>();
}

/// Displacement of every landmark for a mouth configuration.
inline Vec<double> pose_displacement(double jaw, double open, double round, double wide, double close) {
  Vec<double> d = Vec<double>::Zero(kLandmarkDim);
  int p = 0;
  for (int i = 0; i < kJawPoints; ++i, ++p) {
    const double phi = std::numbers::pi * i / (kJawPoints - 1);
    d[2 * p + 1] = 0.12 * jaw * std::sin(phi);
  }
  for (int i = 0; i < kNosePoints; ++i, ++p) d[2 * p + 1] = 0.004 * jaw;
  auto lip = [&](int count, double open_gain, double close_gain) {
    for (int i = 0; i < count; ++i, ++p) {
      const double a = 2.0 * std::numbers::pi * i / count;
      const double cx = std::cos(a), sy = std::sin(a);
      const double lower = sy > 0 ? sy : 0.0;
      d[2 * p] = -0.07 * round * cx + 0.05 * wide * cx;
      d[2 * p + 1] = 0.09 * jaw * lower + open_gain * open * sy + 0.02 * round * sy - close_gain * close * sy;
    }
  };
  lip(kOuterLipPoints, 0.03, 0.01);
  lip(kInnerLipPoints, 0.05, 0.04);
  return d;
}

// ---------------------------------------------------------------------------
// Speakers and clip plans

struct SpeakerProfile {
  std::string speaker_id;
  std::array<std::array<double, 2>, kPhonemeGroups> formants{};  // Hz
  double pitch_hz = 150.0;
  double pose_scale = 1.0;
  std::array<double, 2> jali_home{0.5, 0.5};  // jaw, lip
  std::array<Vec<float>, kPhonemeGroups> pose_targets;  // at jaw = lip = 0.5

  void validate() const {
    for (const auto& f : formants) {
      require(f[0] >= 200.0 && f[1] <= 4000.0 && f[0] < f[1], ErrorCategory::kData, "formants out of range");
    }
    for (const auto& t : pose_targets) {
      require(t.size() == kLandmarkDim && t.cwiseAbs().maxCoeff() < 0.5f, ErrorCategory::kData, "pose target out of range");
    }
  }
};

/// Landmark target for a group under a JALI setting. Jaw motion scales with the jaw
/// value, lip motion with the lip value.
inline Vec<double> group_pose(const SpeakerProfile& sp, int group, double jali_jaw, double jali_lip) {
  const auto& g = group_articulation()[group];
  const double js = 0.4 + 0.8 * jali_jaw, ls = 0.4 + 0.8 * jali_lip;
  return sp.pose_scale * pose_displacement(g.jaw * js, g.open * ls, g.round * ls, g.wide * ls, g.close * ls);
}

inline SpeakerProfile make_speaker(std::uint64_t speaker_seed, int index) {
  Rng rng(mix(speaker_seed) ^ mix(0x5bea4e7ULL + static_cast<std::uint64_t>(index)));
  SpeakerProfile sp;
  sp.speaker_id = "spk" + std::string(index < 10 ? "0" : "") + std::to_string(index);
  const double scale = rng.uniform(0.92, 1.08);
  const auto& table = group_articulation();
  for (int g = 0; g < kPhonemeGroups; ++g) {
    sp.formants[g][0] = table[g].f1 * scale * (1.0 + rng.uniform(-0.03, 0.03));
    sp.formants[g][1] = table[g].f2 * scale * (1.0 + rng.uniform(-0.03, 0.03));
  }
  sp.pitch_hz = rng.uniform(100.0, 220.0);
  sp.pose_scale = rng.uniform(0.9, 1.1);
  sp.jali_home = {rng.uniform(0.35, 0.65), rng.uniform(0.35, 0.65)};
  for (int g = 0; g < kPhonemeGroups; ++g) sp.pose_targets[g] = group_pose(sp, g, 0.5, 0.5).cast<float>();
  return sp;
}

struct Segment {
  int group = 0;
  int start = 0;  // first frame
  int end = 0;    // one past the last frame
};

struct ClipPlan {
  std::string clip_id;
  int speaker = 0;
  Style style = Style::kNeutral;
  int num_frames = 0;
  std::vector<Segment> segments;  // frames outside every segment are silence
  std::uint64_t seed = 0;
};

struct GenerateOptions {
  int num_speakers = 1;
  int clips_per_speaker = 1;
  std::uint64_t seed = 1;
  std::uint64_t speaker_seed = 0;  // 0 = use seed
  double min_seconds = 2.0;
  double max_seconds = 3.5;
  int min_segment_frames = 8;   // 80 ms
  int max_segment_frames = 32;  // 320 ms
  int lead_silence_frames = 20;
  int tail_silence_frames = 20;

  void validate() const {
    require(num_speakers >= 1, ErrorCategory::kInvalidArgument, "num_speakers must be at least 1");
    require(clips_per_speaker >= 1, ErrorCategory::kInvalidArgument, "clips_per_speaker must be at least 1");
    require(min_seconds > 0.0 && max_seconds >= min_seconds, ErrorCategory::kInvalidArgument,
            "invalid clip duration range");
    require(min_segment_frames >= 2 && max_segment_frames >= min_segment_frames, ErrorCategory::kInvalidArgument,
            "invalid segment duration range");
    require(lead_silence_frames >= 0 && tail_silence_frames >= 0, ErrorCategory::kInvalidArgument,
            "silence lengths must be non-negative");
  }
};

/// Draws groups from a shuffled bag of all 20, refilled when empty, so every speaker with
/// at least 20 segments covers every group. Never repeats the previous group.
class GroupBag {
 public:
  int draw(Rng& rng, int previous) {
    if (bag_.empty()) refill(rng);
    auto it = std::find_if(bag_.rbegin(), bag_.rend(), [&](int g) { return g != previous; });
    if (it == bag_.rend()) {
      refill(rng);
      it = std::find_if(bag_.rbegin(), bag_.rend(), [&](int g) { return g != previous; });
    }
    const int g = *it;
    bag_.erase(std::next(it).base());
    return g;
  }
  int refills() const { return refills_; }
  bool empty() const { return bag_.empty(); }

 private:
  void refill(Rng& rng) {
    std::vector<int> fresh(kPhonemeGroups);
    for (int g = 0; g < kPhonemeGroups; ++g) fresh[g] = g;
    for (int i = kPhonemeGroups - 1; i > 0; --i) std::swap(fresh[i], fresh[rng.uniform_int(0, i)]);
    bag_.insert(bag_.begin(), fresh.begin(), fresh.end());
    ++refills_;
  }
  std::vector<int> bag_;
  int refills_ = 0;
};

inline std::vector<ClipPlan> plan_speaker(const GenerateOptions& opt, int speaker) {
  Rng rng(mix(opt.seed) ^ mix(0xc11b5ULL + static_cast<std::uint64_t>(speaker)));
  GroupBag bag;
  std::vector<ClipPlan> plans;
  std::array<bool, kPhonemeGroups> seen{};
  int num_seen = 0;
  int previous = -1;
  for (int c = 0; c < opt.clips_per_speaker; ++c) {
    ClipPlan plan;
    plan.speaker = speaker;
    plan.clip_id = "s" + std::string(speaker < 10 ? "0" : "") + std::to_string(speaker) + "_c" +
                   std::string(c < 100 ? (c < 10 ? "00" : "0") : "") + std::to_string(c);
    plan.style = rng.uniform() < 0.5 ? Style::kNeutral : Style::kExpressive;
    plan.seed = rng.next();
    const int target = static_cast<int>(std::lround(rng.uniform(opt.min_seconds, opt.max_seconds) * kFramesPerSecond));
    const bool last = c + 1 == opt.clips_per_speaker;
    int t = opt.lead_silence_frames;
    previous = -1;
    while (t + opt.tail_silence_frames < target || (last && num_seen < kPhonemeGroups) || plan.segments.empty()) {
      const int g = bag.draw(rng, previous);
      if (!seen[g]) {
        seen[g] = true;
        ++num_seen;
      }
      const int len = rng.uniform_int(opt.min_segment_frames, opt.max_segment_frames);
      plan.segments.push_back({g, t, t + len});
      t += len;
      previous = g;
    }
    plan.num_frames = t + opt.tail_silence_frames;
    plans.push_back(std::move(plan));
  }
  return plans;
}

// ---------------------------------------------------------------------------
// Clip synthesis

struct ClipCurves {
  Mat<float> rig;        // 29 x T
  Mat<float> jali;       // 2 x T
  Mat<float> landmarks;  // 76 x T
  std::vector<int> phoneme;
};

inline constexpr int kAttackFrames = 4;
inline constexpr int kDecayFrames = 6;

/// Viseme peak level for a clip whose lip value is `lip`.
inline double viseme_peak(double lip) { return 0.4 + 0.5 * lip; }

/// Labels and curves for a plan (no audio).
inline ClipCurves plan_curves(const ClipPlan& plan, const SpeakerProfile& sp, Rng& rng) {
  const int T = plan.num_frames;
  ClipCurves c;
  c.rig = Mat<float>::Zero(kRigDim, T);
  c.jali.resize(kJaliDim, T);
  c.landmarks.resize(kLandmarkDim, T);
  c.phoneme.assign(static_cast<std::size_t>(T), -1);

  // JALI: style point plus slow drift.
  const double push = plan.style == Style::kExpressive ? 0.17 : -0.12;
  const double jaw0 = std::clamp(sp.jali_home[0] + push + rng.uniform(-0.05, 0.05), 0.05, 0.95);
  const double lip0 = std::clamp(sp.jali_home[1] + push + rng.uniform(-0.05, 0.05), 0.05, 0.95);
  const double period = rng.uniform(150.0, 300.0), ph0 = rng.uniform(0.0, 6.28), ph1 = rng.uniform(0.0, 6.28);
  for (int t = 0; t < T; ++t) {
    const double w = 2.0 * std::numbers::pi * t / period;
    c.jali(0, t) = static_cast<float>(std::clamp(jaw0 + 0.03 * std::sin(w + ph0), 0.0, 1.0));
    c.jali(1, t) = static_cast<float>(std::clamp(lip0 + 0.03 * std::sin(w + ph1), 0.0, 1.0));
  }

  const double peak = viseme_peak(lip0);
  auto raise = [&](int row, int t, double v) {
    if (t >= 0 && t < T) c.rig(row, t) = std::max(c.rig(row, t), static_cast<float>(v));
  };
  for (std::size_t k = 0; k < plan.segments.size(); ++k) {
    const auto& s = plan.segments[k];
    for (int t = s.start; t < s.end; ++t) c.phoneme[static_cast<std::size_t>(t)] = s.group;
    for (int j = 0; j < kAttackFrames; ++j) raise(s.group, s.start - kAttackFrames + j, peak * (j + 1) / (kAttackFrames + 1));
    for (int t = s.start; t < s.end; ++t) raise(s.group, t, peak);
    for (int j = 0; j < kDecayFrames; ++j) raise(s.group, s.end + j, peak * (kDecayFrames - j) / (kDecayFrames + 1));
    if (k + 1 < plan.segments.size() && plan.segments[k + 1].start == s.end) {
      const int a = coarticulation_parameter(s.group, plan.segments[k + 1].group);
      const int b = s.end;
      const double cp = 0.5 * peak;
      for (int t = b - kAttackFrames; t < b; ++t) raise(a, t, cp * (1.0 - double(b - t) / (kAttackFrames + 1)));
      for (int t = b; t < b + kDecayFrames; ++t) raise(a, t, cp * (1.0 - double(t - b) / (kDecayFrames + 1)));
    }
  }

  // Landmarks: critically damped tracking of the pose of the group four frames ahead.
  std::vector<int> ahead(static_cast<std::size_t>(T), -1);
  for (int t = 0; t < T; ++t) ahead[static_cast<std::size_t>(t)] = c.phoneme[static_cast<std::size_t>(std::min(T - 1, t + kAttackFrames))];
  constexpr double omega = 2.0 * std::numbers::pi * 5.0;
  constexpr int substeps = 10;
  constexpr double dt = 0.01 / substeps;
  Vec<double> x = Vec<double>::Zero(kLandmarkDim), v = Vec<double>::Zero(kLandmarkDim);
  for (int t = 0; t < T; ++t) {
    const int g = ahead[static_cast<std::size_t>(t)];
    const Vec<double> target =
        g < 0 ? Vec<double>::Zero(kLandmarkDim) : group_pose(sp, g, c.jali(0, t), c.jali(1, t));
    for (int s = 0; s < substeps; ++s) {
      v += dt * (omega * omega * (target - x) - 2.0 * omega * v);
      x += dt * v;
    }
    c.landmarks.col(t) = x.cast<float>();
  }
  return c;
}

/// Renders the audio for a plan. `jali` supplies per-frame loudness (jaw) and second
/// formant level (lip).
inline AudioClip render_audio(const ClipPlan& plan, const SpeakerProfile& sp, const Mat<float>& jali, Rng& rng) {
  const auto& table = group_articulation();
  const std::size_t n = static_cast<std::size_t>(kHopSamples) * (plan.num_frames - 1) + kWindowSamples;
  AudioClip clip;
  clip.samples.resize(n);

  // Per-sample group: segment k covers samples [160*start + 120, 160*end + 120), so frame
  // centres of its frames fall inside it.
  std::vector<int> group_at(n, -1);
  for (const auto& s : plan.segments) {
    const std::size_t a = static_cast<std::size_t>(kHopSamples) * s.start + 120;
    const std::size_t b = std::min(n, static_cast<std::size_t>(kHopSamples) * s.end + 120);
    for (std::size_t i = a; i < b; ++i) group_at[i] = s.group;
  }

  struct Biquad {
    double b0, b2, a1, a2, x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    double step(double x) {
      const double y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = x;
      y2 = y1;
      y1 = y;
      return y;
    }
  };
  std::array<Biquad, kNoiseBands.size()> filters{};
  for (std::size_t k = 0; k < kNoiseBands.size(); ++k) {
    const double w0 = 2.0 * std::numbers::pi * kNoiseBands[k].center_hz / kSampleRate;
    const double alpha = std::sin(w0) / (2.0 * kNoiseBands[k].q);
    const double a0 = 1.0 + alpha;
    filters[k] = {alpha / a0, -alpha / a0, -2.0 * std::cos(w0) / a0, (1.0 - alpha) / a0};
  }

  const double smooth = 1.0 - std::exp(-1.0 / (0.003 * kSampleRate));
  double f0 = sp.pitch_hz, f1 = sp.formants[0][0], f2 = sp.formants[0][1];
  double amp = 0.0, voiced = 0.0, tilt = 0.5;
  std::array<double, kNoiseBands.size()> noise_gain{};
  double p0 = 0.0, p1 = 0.0, p2 = 0.0;
  const double vib_rate = rng.uniform(4.0, 6.0), vib_phase = rng.uniform(0.0, 6.28);
  for (std::size_t i = 0; i < n; ++i) {
    const int g = group_at[i];
    const double frame = std::clamp((static_cast<double>(i) - 200.0) / kHopSamples, 0.0, plan.num_frames - 1.0);
    const int fi = static_cast<int>(frame);
    const double jaw = jali(0, fi), lip = jali(1, fi);
    double t_amp = 0.0, t_voiced = 0.0, t_f1 = f1, t_f2 = f2;
    std::array<double, kNoiseBands.size()> t_noise{};
    if (g >= 0) {
      const auto& ga = table[g];
      t_amp = 9000.0 * (0.35 + 0.65 * jaw) * ga.loudness;
      t_voiced = ga.noise_band >= 0 ? 0.35 : 1.0;
      t_f1 = sp.formants[g][0];
      t_f2 = sp.formants[g][1];
      if (ga.noise_band >= 0) t_noise[static_cast<std::size_t>(ga.noise_band)] = kNoiseBands[ga.noise_band].gain;
    }
    const double t_tilt = 0.3 + 0.7 * lip;
    amp += smooth * (t_amp - amp);
    voiced += smooth * (t_voiced - voiced);
    tilt += smooth * (t_tilt - tilt);
    f1 += smooth * (t_f1 - f1);
    f2 += smooth * (t_f2 - f2);
    for (std::size_t k = 0; k < noise_gain.size(); ++k) noise_gain[k] += smooth * (t_noise[k] - noise_gain[k]);

    const double time = static_cast<double>(i) / kSampleRate;
    f0 = sp.pitch_hz * (1.0 + 0.02 * std::sin(2.0 * std::numbers::pi * vib_rate * time + vib_phase));
    p0 = std::fmod(p0 + 2.0 * std::numbers::pi * f0 / kSampleRate, 2.0 * std::numbers::pi);
    p1 = std::fmod(p1 + 2.0 * std::numbers::pi * f1 / kSampleRate, 2.0 * std::numbers::pi);
    p2 = std::fmod(p2 + 2.0 * std::numbers::pi * f2 / kSampleRate, 2.0 * std::numbers::pi);

    const double white = rng.normal();
    double noise = 0.0;
    for (std::size_t k = 0; k < filters.size(); ++k) noise += noise_gain[k] * filters[k].step(white);
    const double tone = 0.55 * std::sin(p1) + 0.45 * tilt * std::sin(p2) + 0.15 * std::sin(p0);
    const double s = amp * (voiced * tone + 2.0 * noise) + 15.0 * white;
    clip.samples[i] = static_cast<std::int16_t>(std::clamp(std::lround(s), -32768L, 32767L));
  }
  return clip;
}

struct Corpus {
  Dataset dataset;
  std::vector<ClipPlan> plans;
  std::vector<SpeakerProfile> speakers;
};

inline ClipRecord synthesize_clip(const ClipPlan& plan, const SpeakerProfile& sp) {
  Rng rng(plan.seed);
  ClipCurves curves = plan_curves(plan, sp, rng);
  ClipRecord r;
  r.clip_id = plan.clip_id;
  r.speaker_id = sp.speaker_id;
  r.style = plan.style;
  r.audio = render_audio(plan, sp, curves.jali, rng);
  r.active = ClipRecord::derive_activations(curves.rig);
  r.phoneme = std::move(curves.phoneme);
  r.landmarks = std::move(curves.landmarks);
  r.rig = std::move(curves.rig);
  r.jali = std::move(curves.jali);
  return r;
}

/// Fully labelled corpus; see strip_rig_labels for audiovisual-style data.
inline Corpus generate_corpus(const GenerateOptions& opt) {
  opt.validate();
  Corpus corpus;
  const std::uint64_t speaker_seed = opt.speaker_seed == 0 ? opt.seed : opt.speaker_seed;
  corpus.dataset.neutral_face = neutral_face_template();
  for (int s = 0; s < opt.num_speakers; ++s) {
    corpus.speakers.push_back(make_speaker(speaker_seed, s));
    for (auto& plan : plan_speaker(opt, s)) {
      corpus.dataset.clips.push_back(synthesize_clip(plan, corpus.speakers.back()));
      corpus.plans.push_back(std::move(plan));
    }
  }
  return corpus;
}

inline Dataset generate_dataset(int num_speakers, int clips_per_speaker, std::uint64_t seed) {
  GenerateOptions opt;
  opt.num_speakers = num_speakers;
  opt.clips_per_speaker = clips_per_speaker;
  opt.seed = seed;
  return generate_corpus(opt).dataset;
}

/// Drops rig, activation and JALI sections, leaving phoneme and landmark labels.
inline Dataset strip_rig_labels(Dataset ds) {
  for (auto& c : ds.clips) {
    c.rig.reset();
    c.active.reset();
    c.jali.reset();
  }
  return ds;
}

}  // namespace visemenet::synth
