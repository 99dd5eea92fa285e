#pragma once

// Two-phase training. Pre-training fits the shared stack and both decoders on phoneme
// and landmark labels; joint training starts from those weights and fits the whole
// network on fully labelled clips. Thresholds are calibrated on held-out clips afterwards.
//
// Batches are fixed-length subsequences sampled uniformly over clips and offsets, each
// run from a zero LSTM state. Context stacking reads frames outside the subsequence
// when the clip has them.

#include "visemenet/checkpoint.hpp"
#include "visemenet/dataset.hpp"
#include "visemenet/losses.hpp"
#include "visemenet/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace visemenet {

// ---------------------------------------------------------------------------
// key=value configuration files

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline std::map<std::string, std::string> parse_key_values(std::istream& is, const std::string& name) {
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCategory::kFormat,
            name + ":" + std::to_string(line_no) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

inline std::map<std::string, std::string> load_key_values(const std::filesystem::path& path) {
  auto is = open_input(path, false);
  return parse_key_values(is, path.string());
}

inline void write_key_values(std::ostream& os, const KeyValues& kv) {
  for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
}

namespace detail {

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    require(pos == v.size(), ErrorCategory::kInvalidArgument, "");
    return d;
  } catch (...) {
    throw Error(ErrorCategory::kInvalidArgument, "config key " + key + ": \"" + v + "\" is not a number");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    require(pos == v.size(), ErrorCategory::kInvalidArgument, "");
    return d;
  } catch (...) {
    throw Error(ErrorCategory::kInvalidArgument, "config key " + key + ": \"" + v + "\" is not an integer");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error(ErrorCategory::kInvalidArgument, "config key " + key + ": \"" + v + "\" is not a boolean");
}

}  // namespace detail

inline KeyValues to_key_values(const ModelConfig& c) {
  return {{"model.lstm_hidden", std::to_string(c.lstm_hidden)},
          {"model.lstm_layers", std::to_string(c.lstm_layers)},
          {"model.decoder_hidden", std::to_string(c.decoder_hidden)},
          {"model.viseme_hidden", std::to_string(c.viseme_hidden)},
          {"model.viseme_decoder_hidden", std::to_string(c.viseme_decoder_hidden)},
          {"model.phoneme_stage", c.phoneme_stage ? "true" : "false"},
          {"model.landmark_stage", c.landmark_stage ? "true" : "false"}};
}

/// Applies the model.* keys present in `kv`.
inline void apply_key_values(ModelConfig& c, const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "model.lstm_hidden") c.lstm_hidden = static_cast<int>(detail::parse_int(k, v));
    else if (k == "model.lstm_layers") c.lstm_layers = static_cast<int>(detail::parse_int(k, v));
    else if (k == "model.decoder_hidden") c.decoder_hidden = static_cast<int>(detail::parse_int(k, v));
    else if (k == "model.viseme_hidden") c.viseme_hidden = static_cast<int>(detail::parse_int(k, v));
    else if (k == "model.viseme_decoder_hidden") c.viseme_decoder_hidden = static_cast<int>(detail::parse_int(k, v));
    else if (k == "model.phoneme_stage") c.phoneme_stage = detail::parse_bool(k, v);
    else if (k == "model.landmark_stage") c.landmark_stage = detail::parse_bool(k, v);
  }
}

// ---------------------------------------------------------------------------
// Training configuration

struct TrainConfig {
  int batch_size = 256;
  double learning_rate = 1e-5;
  double momentum = 0.9;
  int pretrain_iters = 20000;
  int joint_iters = 5000;
  int subsequence_len = 96;
  std::uint64_t seed = 1;
  double holdout_fraction = 0.10;
  losses::PretrainWeights pretrain_weights;
  losses::JointWeights joint_weights;
  double clip_norm = 0.0;  // global gradient-norm cap, 0 = off
  int log_every = 100;
  int checkpoint_every = 0;  // 0 = final checkpoint only
  int threads = 1;
  bool deterministic = true;  // forces one worker, so results do not depend on --threads

  int workers() const { return deterministic ? 1 : std::max(1, threads); }

  void validate() const {
    require(batch_size >= 1, ErrorCategory::kInvalidArgument, "batch_size must be at least 1");
    require(learning_rate > 0.0, ErrorCategory::kInvalidArgument, "learning_rate must be positive");
    require(momentum >= 0.0 && momentum < 1.0, ErrorCategory::kInvalidArgument, "momentum must lie in [0, 1)");
    require(pretrain_iters >= 0 && joint_iters >= 0, ErrorCategory::kInvalidArgument,
            "iteration counts must be non-negative");
    require(subsequence_len > kContextFrames, ErrorCategory::kInvalidArgument, "subsequence_len must exceed 24");
    require(holdout_fraction > 0.0 && holdout_fraction < 1.0, ErrorCategory::kInvalidArgument,
            "holdout_fraction must lie in (0, 1)");
    const auto& a = pretrain_weights;
    const auto& b = joint_weights;
    require(a.phoneme >= 0 && a.landmark >= 0 && a.landmark_smooth >= 0 && b.activation >= 0 && b.rig >= 0 &&
                b.jali >= 0 && b.rig_smooth >= 0 && b.jali_smooth >= 0,
            ErrorCategory::kInvalidArgument, "loss weights must be non-negative");
    require(clip_norm >= 0.0, ErrorCategory::kInvalidArgument, "clip_norm must be non-negative");
    require(log_every >= 1 && checkpoint_every >= 0 && threads >= 1, ErrorCategory::kInvalidArgument,
            "log_every and threads must be at least 1");
  }
};

inline KeyValues to_key_values(const TrainConfig& c) {
  using detail::format_double;
  return {{"train.batch_size", std::to_string(c.batch_size)},
          {"train.learning_rate", format_double(c.learning_rate)},
          {"train.momentum", format_double(c.momentum)},
          {"train.pretrain_iters", std::to_string(c.pretrain_iters)},
          {"train.joint_iters", std::to_string(c.joint_iters)},
          {"train.subsequence_len", std::to_string(c.subsequence_len)},
          {"train.seed", std::to_string(c.seed)},
          {"train.holdout_fraction", format_double(c.holdout_fraction)},
          {"train.w_phoneme", format_double(c.pretrain_weights.phoneme)},
          {"train.w_landmark", format_double(c.pretrain_weights.landmark)},
          {"train.w_landmark_smooth", format_double(c.pretrain_weights.landmark_smooth)},
          {"train.w_activation", format_double(c.joint_weights.activation)},
          {"train.w_rig", format_double(c.joint_weights.rig)},
          {"train.w_jali", format_double(c.joint_weights.jali)},
          {"train.w_rig_smooth", format_double(c.joint_weights.rig_smooth)},
          {"train.w_jali_smooth", format_double(c.joint_weights.jali_smooth)},
          {"train.clip_norm", format_double(c.clip_norm)},
          {"train.log_every", std::to_string(c.log_every)},
          {"train.checkpoint_every", std::to_string(c.checkpoint_every)},
          {"train.threads", std::to_string(c.threads)},
          {"train.deterministic", c.deterministic ? "true" : "false"}};
}

inline void apply_key_values(TrainConfig& c, const std::map<std::string, std::string>& kv) {
  using detail::parse_double;
  using detail::parse_int;
  for (const auto& [k, v] : kv) {
    if (k == "train.batch_size") c.batch_size = static_cast<int>(parse_int(k, v));
    else if (k == "train.learning_rate") c.learning_rate = parse_double(k, v);
    else if (k == "train.momentum") c.momentum = parse_double(k, v);
    else if (k == "train.pretrain_iters") c.pretrain_iters = static_cast<int>(parse_int(k, v));
    else if (k == "train.joint_iters") c.joint_iters = static_cast<int>(parse_int(k, v));
    else if (k == "train.subsequence_len") c.subsequence_len = static_cast<int>(parse_int(k, v));
    else if (k == "train.seed") c.seed = static_cast<std::uint64_t>(parse_int(k, v));
    else if (k == "train.holdout_fraction") c.holdout_fraction = parse_double(k, v);
    else if (k == "train.w_phoneme") c.pretrain_weights.phoneme = parse_double(k, v);
    else if (k == "train.w_landmark") c.pretrain_weights.landmark = parse_double(k, v);
    else if (k == "train.w_landmark_smooth") c.pretrain_weights.landmark_smooth = parse_double(k, v);
    else if (k == "train.w_activation") c.joint_weights.activation = parse_double(k, v);
    else if (k == "train.w_rig") c.joint_weights.rig = parse_double(k, v);
    else if (k == "train.w_jali") c.joint_weights.jali = parse_double(k, v);
    else if (k == "train.w_rig_smooth") c.joint_weights.rig_smooth = parse_double(k, v);
    else if (k == "train.w_jali_smooth") c.joint_weights.jali_smooth = parse_double(k, v);
    else if (k == "train.clip_norm") c.clip_norm = parse_double(k, v);
    else if (k == "train.log_every") c.log_every = static_cast<int>(parse_int(k, v));
    else if (k == "train.checkpoint_every") c.checkpoint_every = static_cast<int>(parse_int(k, v));
    else if (k == "train.threads") c.threads = static_cast<int>(parse_int(k, v));
    else if (k == "train.deterministic") c.deterministic = detail::parse_bool(k, v);
  }
}

// ---------------------------------------------------------------------------
// Data preparation

/// Deterministic Fisher-Yates with an explicit generator (identical on every library).
inline void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
}

/// Splits by clip. Returns (train, holdout); the holdout gets round(fraction * n) clips, at least one.
inline std::pair<std::vector<ClipRecord>, std::vector<ClipRecord>> holdout_split(const std::vector<ClipRecord>& clips,
                                                                               double fraction,
                                                                               std::uint64_t seed) {
  require(fraction > 0.0 && fraction < 1.0, ErrorCategory::kInvalidArgument, "holdout fraction must lie in (0, 1)");
  const std::size_t n = clips.size();
  const std::size_t n_hold = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * n)));
  require(n_hold < n, ErrorCategory::kInvalidArgument,
          "dataset of " + std::to_string(n) + " clips is too small for a hold-out split");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  shuffle_indices(idx, rng);
  std::vector<bool> hold(n, false);
  for (std::size_t i = 0; i < n_hold; ++i) hold[idx[i]] = true;
  std::pair<std::vector<ClipRecord>, std::vector<ClipRecord>> out;
  for (std::size_t i = 0; i < n; ++i) (hold[i] ? out.second : out.first).push_back(clips[i]);
  return out;
}

/// Normalized features and label matrices of one clip, ready for batching.
struct TrainingClip {
  std::string clip_id;
  Mat<float> frames;  // 65 x T, normalized
  std::vector<int> phoneme;
  Mat<float> landmarks;  // 76 x T, relative to the model's neutral face
  Mat<float> rig;
  Mask active;
  Mat<float> jali;

  Eigen::Index length() const { return frames.cols(); }
};

inline std::vector<Mat<double>> raw_features(const std::vector<ClipRecord>& clips) {
  std::vector<Mat<double>> out;
  out.reserve(clips.size());
  for (const auto& c : clips) out.push_back(feature_matrix(extract_features(c.audio)));
  return out;
}

/// Per-coordinate mean of absolute landmark positions over all training frames.
inline Vec<float> mean_face(const std::vector<ClipRecord>& clips, const Vec<float>& dataset_neutral) {
  Vec<double> sum = Vec<double>::Zero(kLandmarkDim);
  double count = 0;
  for (const auto& c : clips) {
    if (!c.landmarks) continue;
    sum += c.landmarks->cast<double>().rowwise().sum();
    count += static_cast<double>(c.landmarks->cols());
  }
  require(count > 0, ErrorCategory::kData, "no landmark frames to estimate the neutral face");
  return (dataset_neutral.cast<double>() + sum / count).cast<float>();
}

/// A fresh model whose normalization statistics and neutral face come from `clips`.
inline ModelParams prepare_model(const ModelConfig& cfg, const std::vector<ClipRecord>& clips,
                                 const Vec<float>& dataset_neutral, std::uint64_t seed) {
  cfg.validate();
  require(!clips.empty(), ErrorCategory::kInvalidArgument, "no training clips");
  ModelParams p = init_model_params(cfg, seed);
  p.stats = FeatureStats::compute(raw_features(clips));
  p.neutral_face = mean_face(clips, dataset_neutral);
  return p;
}

inline std::vector<TrainingClip> prepare_clips(const std::vector<ClipRecord>& clips, const ModelParams& params,
                                               const Vec<float>& dataset_neutral, bool joint) {
  if (joint) require_joint_labels(clips);
  else require_pretrain_labels(clips);
  require_shape(dataset_neutral.size() == kLandmarkDim, "dataset neutral face must be 76-dimensional");
  const Vec<float> shift = dataset_neutral - params.neutral_face;
  std::vector<TrainingClip> out;
  out.reserve(clips.size());
  for (const auto& c : clips) {
    c.validate();
    TrainingClip t;
    t.clip_id = c.clip_id;
    t.frames = network_features(c.audio, params.stats);
    t.phoneme = *c.phoneme;
    t.landmarks = c.landmarks->colwise() + shift;
    if (joint) {
      t.rig = *c.rig;
      t.active = *c.active;
      t.jali = *c.jali;
    }
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batching

struct SubsequenceRef {
  std::size_t clip = 0;
  Eigen::Index offset = 0;
};

struct Batch {
  Eigen::Index length = 0;
  std::vector<SubsequenceRef> items;
};

/// Uniform over eligible clips (length >= subsequence_len), then uniform over offsets.
class BatchSampler {
 public:
  BatchSampler(std::vector<Eigen::Index> lengths, int batch_size, int subsequence_len, std::uint64_t seed)
      : lengths_(std::move(lengths)), batch_size_(batch_size), len_(subsequence_len), rng_(seed) {
    for (std::size_t i = 0; i < lengths_.size(); ++i) {
      if (lengths_[i] >= len_) eligible_.push_back(i);
    }
    require(!eligible_.empty(), ErrorCategory::kData,
            "no clip is at least " + std::to_string(len_) + " frames long (subsequence_len)");
  }

  Batch next() {
    Batch b;
    b.length = len_;
    b.items.resize(static_cast<std::size_t>(batch_size_));
    for (auto& item : b.items) {
      item.clip = eligible_[rng_() % eligible_.size()];
      item.offset = static_cast<Eigen::Index>(rng_() % static_cast<std::uint64_t>(lengths_[item.clip] - len_ + 1));
    }
    return b;
  }

  const std::vector<std::size_t>& eligible() const { return eligible_; }

 private:
  std::vector<Eigen::Index> lengths_;
  int batch_size_;
  Eigen::Index len_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> eligible_;
};

inline BatchSampler make_batches(const std::vector<TrainingClip>& clips, const TrainConfig& cfg, std::uint64_t seed) {
  std::vector<Eigen::Index> lengths;
  for (const auto& c : clips) lengths.push_back(c.length());
  return BatchSampler(std::move(lengths), cfg.batch_size, cfg.subsequence_len, seed);
}

// ---------------------------------------------------------------------------
// One gradient evaluation

namespace detail {

/// Columns t*B + b for t in [0, L) of a time-major batch matrix.
template <class S>
Mat<S> gather_sequence(const Mat<S>& m, Eigen::Index batch, Eigen::Index b) {
  const Eigen::Index L = m.cols() / batch;
  Mat<S> out(m.rows(), L);
  for (Eigen::Index t = 0; t < L; ++t) out.col(t) = m.col(t * batch + b);
  return out;
}

template <class S>
void scatter_sequence(Mat<S>& dst, const Mat<S>& src, Eigen::Index batch, Eigen::Index b) {
  for (Eigen::Index t = 0; t < src.cols(); ++t) dst.col(t * batch + b) = src.col(t);
}

template <class S>
Mat<S> scatter_all(const std::vector<Mat<S>>& parts, Eigen::Index rows, Eigen::Index batch, Eigen::Index length) {
  if (parts.empty()) return {};
  Mat<S> out(rows, batch * length);
  for (Eigen::Index b = 0; b < batch; ++b) scatter_sequence(out, parts[static_cast<std::size_t>(b)], batch, b);
  return out;
}

}  // namespace detail

/// Multi-task loss of a time-major batch of B sequences; accumulates exact parameter
/// gradients into `grad` when given. `joint` adds the viseme-stage terms.
template <class S>
losses::LossBreakdown model_loss(const ModelConfig& cfg, const Weights<S>& w, const Mat<S>& contexts,
                                 const Mat<S>& frames, Eigen::Index B, const losses::Targets<S>& target,
                                 const losses::PretrainWeights& w1, const losses::JointWeights& w2, bool joint,
                                 Weights<S>* grad) {
  ForwardCache<S> cache;
  const Outputs<S> out = forward(cfg, w, contexts, frames, B, joint, grad ? &cache : nullptr);
  const Eigen::Index L = frames.cols() / B;
  losses::Predictions<S> pred;
  for (Eigen::Index b = 0; b < B; ++b) {
    if (cfg.phoneme_stage) pred.phoneme_probs.push_back(detail::gather_sequence(out.phoneme_probs, B, b));
    if (cfg.landmark_stage) pred.landmarks.push_back(detail::gather_sequence(out.landmarks, B, b));
    if (joint) {
      pred.activation_probs.push_back(detail::gather_sequence(out.activation_probs, B, b));
      pred.rig.push_back(detail::gather_sequence(out.rig, B, b));
      pred.jali.push_back(detail::gather_sequence(out.jali, B, b));
    }
  }
  losses::Gradients<S> g;
  auto* gp = grad ? &g : nullptr;
  const auto loss = joint ? losses::joint_loss(pred, target, w1, w2, gp) : losses::pretrain_loss(pred, target, w1, gp);
  if (grad) {
    OutputGrads<S> d;
    d.phoneme_logits = detail::scatter_all(g.phoneme_logits, kPhonemeGroups, B, L);
    d.landmarks = detail::scatter_all(g.landmarks, kLandmarkDim, B, L);
    d.activation_logits = detail::scatter_all(g.activation_logits, kRigDim, B, L);
    d.rig = detail::scatter_all(g.rig, kRigDim, B, L);
    d.jali = detail::scatter_all(g.jali, kJaliDim, B, L);
    backward(cfg, w, cache, d, *grad);
  }
  return loss;
}

struct GradientResult {
  losses::LossBreakdown loss;
  Weights<float> grad;
};

/// Loss and exact gradient over `items`. Losses are normalized by `total_items`, so
/// gradients of disjoint chunks of a batch sum to the full-batch gradient.
inline GradientResult batch_gradient(const ModelConfig& cfg, const Weights<float>& w,
                                     const std::vector<TrainingClip>& clips, std::span<const SubsequenceRef> items,
                                     Eigen::Index length, std::size_t total_items, bool joint,
                                     const TrainConfig& tc) {
  const Eigen::Index B = static_cast<Eigen::Index>(items.size());
  const Eigen::Index L = length;
  Mat<float> contexts(kContextDim, B * L), frames(kFeatureDim, B * L);
  Vec<float> ctx;
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& item = items[static_cast<std::size_t>(b)];
    const auto& clip = clips[item.clip];
    for (Eigen::Index t = 0; t < L; ++t) {
      stack_context_into<float>(clip.frames, item.offset + t, ctx);
      contexts.col(t * B + b) = ctx;
      frames.col(t * B + b) = clip.frames.col(item.offset + t);
    }
  }
  losses::Targets<float> target;
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& item = items[static_cast<std::size_t>(b)];
    const auto& clip = clips[item.clip];
    const auto begin = clip.phoneme.begin() + item.offset;
    target.phoneme.emplace_back(begin, begin + L);
    target.landmarks.push_back(clip.landmarks.middleCols(item.offset, L));
    if (joint) {
      target.rig.push_back(clip.rig.middleCols(item.offset, L));
      target.active.push_back(clip.active.middleCols(item.offset, L));
      target.jali.push_back(clip.jali.middleCols(item.offset, L));
    }
  }

  // Loss functions average over the sequences they are given; rescale chunk results to the batch.
  const double share = static_cast<double>(B) / static_cast<double>(total_items);
  const auto& w1 = tc.pretrain_weights;
  const auto& w2 = tc.joint_weights;
  const losses::PretrainWeights gw1{w1.phoneme * share, w1.landmark * share, w1.landmark_smooth * share};
  const losses::JointWeights gw2{w2.activation * share, w2.rig * share, w2.jali * share, w2.rig_smooth * share,
                                 w2.jali_smooth * share};
  GradientResult result;
  result.grad = zeros_like(w, cfg);
  result.loss = model_loss(cfg, w, contexts, frames, B, target, gw1, gw2, joint, &result.grad);
  // total and pretrain already carry the share through the weights; the raw terms are chunk means.
  for (double* v : {&result.loss.phoneme, &result.loss.landmark, &result.loss.landmark_smooth, &result.loss.activation,
                    &result.loss.rig, &result.loss.rig_smooth, &result.loss.jali, &result.loss.jali_smooth}) {
    *v *= share;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Training loop

struct LossRecord {
  int iteration = 0;
  losses::LossBreakdown loss;
};

struct TrainHooks {
  std::function<void(const Batch&)> on_batch;                  // every sampled batch, before the update
  std::function<void(int, const losses::LossBreakdown&)> on_log;  // every log_every iterations
  std::filesystem::path run_dir;                                // empty = no files
};

enum class Phase { kPretrain, kJoint };

inline const char* phase_name(Phase p) { return p == Phase::kPretrain ? "pretrain" : "joint"; }

namespace detail {

inline void write_loss_header(std::ostream& os) {
  os << "iter,phoneme,landmark,landmark_smooth,activation,rig,rig_smooth,jali,jali_smooth,total\n";
}

inline void write_loss_row(std::ostream& os, int iter, const losses::LossBreakdown& l) {
  os << iter << std::setprecision(9) << ',' << l.phoneme << ',' << l.landmark << ',' << l.landmark_smooth << ','
     << l.activation << ',' << l.rig << ',' << l.rig_smooth << ',' << l.jali << ',' << l.jali_smooth << ','
     << l.total << '\n';
}

}  // namespace detail

/// Runs `iters` SGD-momentum updates of `params` on `clips`. Returns the logged losses
/// (the batch loss before each logged update).
inline std::vector<LossRecord> run_phase(Phase phase, ModelParams& params, const std::vector<TrainingClip>& clips,
                                         const TrainConfig& tc, int iters, const TrainHooks& hooks = {}) {
  tc.validate();
  const bool joint = phase == Phase::kJoint;
  const ModelConfig& cfg = params.config;
  if (!joint) {
    require(cfg.has_shared(), ErrorCategory::kInvalidArgument,
            "pre-training needs a phoneme or landmark stage (audio-based models skip it)");
  }
  std::vector<LossRecord> log;
  if (iters == 0) return log;
  BatchSampler sampler = make_batches(clips, tc, tc.seed);
  Weights<float> velocity = zeros_like(params.weights, cfg);
  const auto param_table = tensor_table(params.weights, cfg);
  const auto velocity_table = tensor_table(velocity, cfg);

  std::ofstream loss_csv;
  if (!hooks.run_dir.empty()) {
    std::filesystem::create_directories(hooks.run_dir);
    loss_csv = open_output(hooks.run_dir / (std::string(phase_name(phase)) + "_loss.csv"), false);
    detail::write_loss_header(loss_csv);
  }

  const int workers = tc.workers();
  for (int it = 0; it < iters; ++it) {
    const Batch batch = sampler.next();
    if (hooks.on_batch) hooks.on_batch(batch);
    const std::size_t n = batch.items.size();
    const std::size_t chunks = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<GradientResult> parts(chunks);
    auto work = [&](std::size_t k) {
      const std::size_t a = n * k / chunks, b = n * (k + 1) / chunks;
      parts[k] = batch_gradient(cfg, params.weights, clips, std::span(batch.items).subspan(a, b - a), batch.length, n,
                                joint, tc);
    };
    if (chunks == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t k = 0; k < chunks; ++k) pool.emplace_back(work, k);
      for (auto& th : pool) th.join();
    }
    // Fixed-order reduction.
    GradientResult& total = parts[0];
    const auto grad_table = tensor_table(total.grad, cfg);
    for (std::size_t k = 1; k < chunks; ++k) {
      const auto other = tensor_table(parts[k].grad, cfg);
      for (std::size_t j = 0; j < grad_table.size(); ++j) grad_table[j].flat() += other[j].flat();
      auto& l = total.loss;
      const auto& o = parts[k].loss;
      l.phoneme += o.phoneme, l.landmark += o.landmark, l.landmark_smooth += o.landmark_smooth;
      l.activation += o.activation, l.rig += o.rig, l.rig_smooth += o.rig_smooth;
      l.jali += o.jali, l.jali_smooth += o.jali_smooth, l.pretrain += o.pretrain, l.total += o.total;
    }
    nn::clip_global_norm(grad_table, tc.clip_norm);
    nn::sgd_momentum_step(param_table, grad_table, velocity_table, static_cast<float>(tc.learning_rate),
                          static_cast<float>(tc.momentum));

    if (it % tc.log_every == 0 || it + 1 == iters) {
      log.push_back({it, total.loss});
      if (loss_csv.is_open()) detail::write_loss_row(loss_csv, it, total.loss);
      if (hooks.on_log) hooks.on_log(it, total.loss);
    }
    if (!hooks.run_dir.empty() && tc.checkpoint_every > 0 && (it + 1) % tc.checkpoint_every == 0) {
      std::ostringstream name;
      name << phase_name(phase) << '_' << std::setw(7) << std::setfill('0') << (it + 1) << ".vnck";
      save_checkpoint(hooks.run_dir / name.str(), params);
    }
  }
  return log;
}

inline void write_run_config(const std::filesystem::path& run_dir, const ModelConfig& mc, const TrainConfig& tc) {
  std::filesystem::create_directories(run_dir);
  auto os = open_output(run_dir / "config.txt", false);
  write_key_values(os, to_key_values(mc));
  write_key_values(os, to_key_values(tc));
}

/// Pre-training on clips with phoneme and landmark labels. `params` must already carry
/// normalization statistics and a neutral face (see prepare_model).
inline std::vector<LossRecord> pretrain(ModelParams& params, const std::vector<ClipRecord>& clips,
                                        const Vec<float>& dataset_neutral, const TrainConfig& tc,
                                        const TrainHooks& hooks = {}) {
  require(!clips.empty(), ErrorCategory::kInvalidArgument, "no pre-training clips");
  const auto prepared = prepare_clips(clips, params, dataset_neutral, false);
  if (!hooks.run_dir.empty()) write_run_config(hooks.run_dir, params.config, tc);
  auto log = run_phase(Phase::kPretrain, params, prepared, tc, tc.pretrain_iters, hooks);
  if (!hooks.run_dir.empty()) save_checkpoint(hooks.run_dir / "pretrain_final.vnck", params);
  return log;
}

/// Joint training of every stage on fully labelled clips, starting from `params`.
inline std::vector<LossRecord> joint_train(ModelParams& params, const std::vector<ClipRecord>& clips,
                                           const Vec<float>& dataset_neutral, const TrainConfig& tc,
                                           const TrainHooks& hooks = {}) {
  require(!clips.empty(), ErrorCategory::kInvalidArgument, "no joint-training clips");
  const auto prepared = prepare_clips(clips, params, dataset_neutral, true);
  if (!hooks.run_dir.empty()) write_run_config(hooks.run_dir, params.config, tc);
  auto log = run_phase(Phase::kJoint, params, prepared, tc, tc.joint_iters, hooks);
  if (!hooks.run_dir.empty()) save_checkpoint(hooks.run_dir / "joint_final.vnck", params);
  return log;
}

/// Loss over whole clips (each clip one sequence from a zero state), averaged over clips.
inline losses::LossBreakdown evaluate_loss(const ModelParams& params, const std::vector<TrainingClip>& clips,
                                           const TrainConfig& tc, bool joint) {
  require(!clips.empty(), ErrorCategory::kInvalidArgument, "no clips to evaluate");
  losses::LossBreakdown sum;
  for (std::size_t k = 0; k < clips.size(); ++k) {
    const SubsequenceRef item{k, 0};
    const auto r = batch_gradient(params.config, params.weights, clips, std::span(&item, 1), clips[k].length(), 1,
                                  joint, tc);
    const auto& l = r.loss;
    sum.phoneme += l.phoneme, sum.landmark += l.landmark, sum.landmark_smooth += l.landmark_smooth;
    sum.activation += l.activation, sum.rig += l.rig, sum.rig_smooth += l.rig_smooth;
    sum.jali += l.jali, sum.jali_smooth += l.jali_smooth, sum.pretrain += l.pretrain, sum.total += l.total;
  }
  const double n = static_cast<double>(clips.size());
  for (double* v : {&sum.phoneme, &sum.landmark, &sum.landmark_smooth, &sum.activation, &sum.rig, &sum.rig_smooth,
                    &sum.jali, &sum.jali_smooth, &sum.pretrain, &sum.total}) {
    *v /= n;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Threshold calibration

inline constexpr int kThresholdGridSteps = 99;  // 0.01 .. 0.99

inline float threshold_grid_value(int k) { return static_cast<float>(k) / 100.0f; }

/// F1 of `prob > thr` against the ground truth for one parameter row.
inline double activation_f1(const std::vector<Mat<float>>& probs, const std::vector<Mask>& active, int row,
                            float thr) {
  long long tp = 0, fp = 0, fn = 0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    for (Eigen::Index t = 0; t < probs[n].cols(); ++t) {
      const bool pred = probs[n](row, t) > thr;
      const bool gt = active[n](row, t) != 0;
      tp += pred && gt;
      fp += pred && !gt;
      fn += !pred && gt;
    }
  }
  const long long denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

/// Per-parameter grid search for the F1-maximizing threshold; ties go to the lowest
/// threshold and parameters never active in the data keep 0.5.
inline Vec<float> calibrate_from_probabilities(const std::vector<Mat<float>>& probs, const std::vector<Mask>& active) {
  require(!probs.empty(), ErrorCategory::kInvalidArgument, "threshold calibration needs hold-out clips");
  require_shape(probs.size() == active.size(), "probability and activation clip counts differ");
  const Eigen::Index rows = probs.front().rows();
  for (std::size_t n = 0; n < probs.size(); ++n) {
    require_shape(probs[n].rows() == rows && active[n].rows() == rows && probs[n].cols() == active[n].cols(),
                  "probability and activation shapes differ");
  }
  Vec<float> thr = Vec<float>::Constant(rows, 0.5f);
  for (Eigen::Index a = 0; a < rows; ++a) {
    bool any = false;
    for (const auto& m : active) any = any || (m.row(a).array() != 0).any();
    if (!any) continue;
    double best = -1.0;
    for (int k = 1; k <= kThresholdGridSteps; ++k) {
      const double f1 = activation_f1(probs, active, static_cast<int>(a), threshold_grid_value(k));
      if (f1 > best) {
        best = f1;
        thr[a] = threshold_grid_value(k);
      }
    }
  }
  return thr;
}

/// Activation probabilities (29 x T per clip) of a model over clips.
inline std::vector<Mat<float>> activation_probabilities(const ModelParams& params, const std::vector<ClipRecord>& clips) {
  std::vector<Mat<float>> out;
  for (const auto& c : clips) {
    const auto full = full_forward(c.audio, params);
    Mat<float> p(kRigDim, static_cast<Eigen::Index>(full.frames()));
    for (std::size_t t = 0; t < full.frames(); ++t) {
      for (int a = 0; a < kRigDim; ++a) p(a, static_cast<Eigen::Index>(t)) = full.rig[t].activation_probs[a];
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline Vec<float> calibrate_thresholds(const ModelParams& params, const std::vector<ClipRecord>& holdout) {
  require(!holdout.empty(), ErrorCategory::kInvalidArgument, "threshold calibration needs hold-out clips");
  std::vector<Mask> active;
  for (const auto& c : holdout) {
    require(c.active.has_value(), ErrorCategory::kData, "hold-out clip " + c.clip_id + " has no activation labels");
    active.push_back(*c.active);
  }
  return calibrate_from_probabilities(activation_probabilities(params, holdout), active);
}

}  // namespace visemenet
