#pragma once

// The three-stage network: a shared 3-layer LSTM over 1560-dim audio contexts feeding
// the phoneme-group and landmark decoders, and three independent LSTM stacks in the
// viseme stage reading [phoneme logits | landmark displacements | frame features].

#include "visemenet/audio_features.hpp"
#include "visemenet/common.hpp"
#include "visemenet/net_core.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace visemenet {

struct ModelConfig {
  int lstm_hidden = 256;
  int lstm_layers = 3;
  int decoder_hidden = 256;
  int viseme_hidden = 256;
  int viseme_decoder_hidden = 256;
  bool phoneme_stage = true;
  bool landmark_stage = true;

  bool has_shared() const { return phoneme_stage || landmark_stage; }

  int viseme_input_dim() const {
    return (phoneme_stage ? kPhonemeGroups : 0) + (landmark_stage ? kLandmarkDim : 0) + kFeatureDim;
  }

  void validate() const {
    require(lstm_hidden > 0 && lstm_layers > 0 && decoder_hidden > 0 && viseme_hidden > 0 &&
                viseme_decoder_hidden > 0,
            ErrorCategory::kInvalidArgument, "model dimensions must be positive");
  }

  bool operator==(const ModelConfig&) const = default;
};

template <class S>
struct VisemeBranch {
  std::vector<nn::LstmLayerParams<S>> lstm;
  nn::DecoderParams<S> decoder;
};

/// All learnable tensors. Stages disabled in the ModelConfig hold empty tensors.
template <class S>
struct Weights {
  std::vector<nn::LstmLayerParams<S>> shared;
  nn::DecoderParams<S> phoneme;
  nn::DecoderParams<S> landmark;
  VisemeBranch<S> activation;
  VisemeBranch<S> rig;
  VisemeBranch<S> jali;
};

/// Named view of every tensor of the enabled stages, in a fixed order.
template <class S>
std::vector<nn::TensorRef<S>> tensor_table(Weights<S>& w, const ModelConfig& cfg) {
  std::vector<nn::TensorRef<S>> out;
  for (std::size_t l = 0; l < w.shared.size(); ++l) {
    nn::append_tensors("shared.lstm" + std::to_string(l), w.shared[l], out);
  }
  if (cfg.phoneme_stage) nn::append_tensors("phoneme", w.phoneme, out);
  if (cfg.landmark_stage) nn::append_tensors("landmark", w.landmark, out);
  auto branch = [&](const std::string& name, VisemeBranch<S>& b) {
    for (std::size_t l = 0; l < b.lstm.size(); ++l) {
      nn::append_tensors(name + ".lstm" + std::to_string(l), b.lstm[l], out);
    }
    nn::append_tensors(name, b.decoder, out);
  };
  branch("activation", w.activation);
  branch("rig", w.rig);
  branch("jali", w.jali);
  return out;
}

template <class S>
std::vector<nn::TensorRef<S>> tensor_table(const Weights<S>& w, const ModelConfig& cfg) {
  return tensor_table(const_cast<Weights<S>&>(w), cfg);
}

template <class S>
Weights<S> zeros_like(const Weights<S>& w, const ModelConfig& cfg) {
  Weights<S> z = w;
  for (auto& t : tensor_table(z, cfg)) t.flat().setZero();
  return z;
}

template <class S>
std::size_t parameter_count(const Weights<S>& w, const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const auto& t : tensor_table(w, cfg)) n += static_cast<std::size_t>(t.size());
  return n;
}

/// Random initialization of every enabled stage.
template <class S, class Rng>
Weights<S> init_weights(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  Weights<S> w;
  auto stack = [&](Eigen::Index in, Eigen::Index hidden) {
    std::vector<nn::LstmLayerParams<S>> layers;
    for (int l = 0; l < cfg.lstm_layers; ++l) layers.push_back(nn::init_lstm<S>(hidden, l == 0 ? in : hidden, rng));
    return layers;
  };
  auto decoder = [&](Eigen::Index in, Eigen::Index hidden, Eigen::Index out) {
    nn::DecoderParams<S> d;
    d.hidden = nn::init_dense<S>(hidden, in, rng);
    d.output = nn::init_dense<S>(out, hidden, rng);
    return d;
  };
  if (cfg.has_shared()) w.shared = stack(kContextDim, cfg.lstm_hidden);
  if (cfg.phoneme_stage) w.phoneme = decoder(cfg.lstm_hidden, cfg.decoder_hidden, kPhonemeGroups);
  if (cfg.landmark_stage) w.landmark = decoder(cfg.lstm_hidden, cfg.decoder_hidden, kLandmarkDim);
  const Eigen::Index vin = cfg.viseme_input_dim();
  for (auto [branch, out] : {std::pair{&w.activation, kRigDim}, std::pair{&w.rig, kRigDim}, std::pair{&w.jali, kJaliDim}}) {
    branch->lstm = stack(vin, cfg.viseme_hidden);
    branch->decoder = decoder(cfg.viseme_hidden, cfg.viseme_decoder_hidden, out);
  }
  return w;
}

/// Checks that every tensor an enabled stage needs is present with the right shape.
template <class S>
void validate_weights(const Weights<S>& w, const ModelConfig& cfg) {
  auto check_stack = [&](const std::vector<nn::LstmLayerParams<S>>& layers, Eigen::Index in, Eigen::Index hidden,
                         const std::string& name) {
    require_shape(static_cast<int>(layers.size()) == cfg.lstm_layers, name + ": wrong LSTM layer count");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& p = layers[l];
      const Eigen::Index expect_in = l == 0 ? in : hidden;
      require_shape(p.w_input.rows() == 4 * hidden && p.w_input.cols() == expect_in && p.w_hidden.rows() == 4 * hidden &&
                        p.w_hidden.cols() == hidden && p.bias.size() == 4 * hidden,
                    name + ".lstm" + std::to_string(l) + ": wrong shape");
    }
  };
  auto check_decoder = [&](const nn::DecoderParams<S>& d, Eigen::Index in, Eigen::Index hidden, Eigen::Index out,
                           const std::string& name) {
    require_shape(d.hidden.weight.rows() == hidden && d.hidden.weight.cols() == in && d.hidden.bias.size() == hidden &&
                      d.output.weight.rows() == out && d.output.weight.cols() == hidden && d.output.bias.size() == out,
                  name + ": wrong decoder shape");
  };
  if (cfg.has_shared()) check_stack(w.shared, kContextDim, cfg.lstm_hidden, "shared");
  if (cfg.phoneme_stage) check_decoder(w.phoneme, cfg.lstm_hidden, cfg.decoder_hidden, kPhonemeGroups, "phoneme");
  if (cfg.landmark_stage) check_decoder(w.landmark, cfg.lstm_hidden, cfg.decoder_hidden, kLandmarkDim, "landmark");
  const Eigen::Index vin = cfg.viseme_input_dim();
  check_stack(w.activation.lstm, vin, cfg.viseme_hidden, "activation");
  check_stack(w.rig.lstm, vin, cfg.viseme_hidden, "rig");
  check_stack(w.jali.lstm, vin, cfg.viseme_hidden, "jali");
  check_decoder(w.activation.decoder, cfg.viseme_hidden, cfg.viseme_decoder_hidden, kRigDim, "activation");
  check_decoder(w.rig.decoder, cfg.viseme_hidden, cfg.viseme_decoder_hidden, kRigDim, "rig");
  check_decoder(w.jali.decoder, cfg.viseme_hidden, cfg.viseme_decoder_hidden, kJaliDim, "jali");
}

// ---------------------------------------------------------------------------
// Batched training forward / backward (time-major columns)

template <class S>
struct Outputs {
  Mat<S> phoneme_logits;     // 20 x N
  Mat<S> phoneme_probs;      // 20 x N
  Mat<S> landmarks;          // 76 x N
  Mat<S> activation_logits;  // 29 x N
  Mat<S> activation_probs;   // 29 x N
  Mat<S> rig;                // 29 x N, raw linear output
  Mat<S> jali;               // 2 x N, raw linear output
};

/// d(loss)/d(outputs). Empty matrices mean zero gradient.
template <class S>
struct OutputGrads {
  Mat<S> phoneme_logits;
  Mat<S> landmarks;
  Mat<S> activation_logits;
  Mat<S> rig;
  Mat<S> jali;
};

template <class S>
struct ForwardCache {
  nn::LstmStackCache<S> shared;
  nn::DecoderCache<S> phoneme;
  nn::DecoderCache<S> landmark;
  std::array<nn::LstmStackCache<S>, 3> viseme_lstm;
  std::array<nn::DecoderCache<S>, 3> viseme_decoder;
  Eigen::Index batch = 0;
  bool with_viseme = false;
  bool valid = false;
};

/// Builds the viseme-stage input rows [z | q | x] from whichever stages are enabled.
template <class S>
Mat<S> viseme_input(const ModelConfig& cfg, const Mat<S>& logits, const Mat<S>& landmarks, const Mat<S>& frames) {
  const Eigen::Index n = frames.cols();
  require_shape(frames.rows() == kFeatureDim, "viseme stage expects 65-dim frame features");
  Mat<S> in(cfg.viseme_input_dim(), n);
  Eigen::Index row = 0;
  if (cfg.phoneme_stage) {
    require_shape(logits.rows() == kPhonemeGroups && logits.cols() == n, "phoneme logits length mismatch");
    in.middleRows(row, kPhonemeGroups) = logits;
    row += kPhonemeGroups;
  }
  if (cfg.landmark_stage) {
    require_shape(landmarks.rows() == kLandmarkDim && landmarks.cols() == n, "landmark sequence length mismatch");
    in.middleRows(row, kLandmarkDim) = landmarks;
    row += kLandmarkDim;
  }
  in.bottomRows(kFeatureDim) = frames;
  return in;
}

template <class S>
std::array<const VisemeBranch<S>*, 3> branches(const Weights<S>& w) {
  return {&w.activation, &w.rig, &w.jali};
}

template <class S>
std::array<VisemeBranch<S>*, 3> branches(Weights<S>& w) {
  return {&w.activation, &w.rig, &w.jali};
}

/// Full network over a batch of sequences. `contexts` is 1560 x T*B and `frames`
/// 65 x T*B; every sequence starts from zero LSTM state.
template <class S>
Outputs<S> forward(const ModelConfig& cfg, const Weights<S>& w, const Mat<S>& contexts, const Mat<S>& frames,
                   Eigen::Index batch, bool with_viseme, ForwardCache<S>* cache = nullptr) {
  Outputs<S> out;
  if (cfg.has_shared()) {
    require_shape(contexts.rows() == kContextDim, "contexts must be 1560-dimensional");
    const Mat<S> top = nn::lstm_stack_forward<S>(w.shared, contexts, batch, cache ? &cache->shared : nullptr);
    if (cfg.phoneme_stage) {
      out.phoneme_logits = nn::decoder_forward(w.phoneme, top, cache ? &cache->phoneme : nullptr);
      out.phoneme_probs = nn::apply_head(out.phoneme_logits, nn::Head::kSoftmax);
    }
    if (cfg.landmark_stage) {
      out.landmarks = nn::decoder_forward(w.landmark, top, cache ? &cache->landmark : nullptr);
    }
  }
  if (with_viseme) {
    require_shape(!cfg.has_shared() || frames.cols() == contexts.cols(),
                  "frame features and contexts differ in length");
    const Mat<S> vin = viseme_input(cfg, out.phoneme_logits, out.landmarks, frames);
    const auto br = branches(w);
    std::array<Mat<S>, 3> heads;
    for (int k = 0; k < 3; ++k) {
      const Mat<S> top = nn::lstm_stack_forward<S>(br[k]->lstm, vin, batch, cache ? &cache->viseme_lstm[k] : nullptr);
      heads[k] = nn::decoder_forward(br[k]->decoder, top, cache ? &cache->viseme_decoder[k] : nullptr);
    }
    out.activation_logits = std::move(heads[0]);
    out.activation_probs = nn::apply_head(out.activation_logits, nn::Head::kSigmoid);
    out.rig = std::move(heads[1]);
    out.jali = std::move(heads[2]);
  }
  if (cache) {
    cache->batch = batch;
    cache->with_viseme = with_viseme;
    cache->valid = true;
  }
  return out;
}

/// Accumulates exact gradients of every enabled parameter into `grad`. Viseme-stage
/// gradients flow back into the shared LSTM through the phoneme logits and landmarks.
template <class S>
void backward(const ModelConfig& cfg, const Weights<S>& w, const ForwardCache<S>& cache, const OutputGrads<S>& d,
              Weights<S>& grad) {
  require(cache.valid, ErrorCategory::kState, "backward called before forward");
  Mat<S> d_logits = d.phoneme_logits;
  Mat<S> d_landmarks = d.landmarks;
  auto accumulate = [](Mat<S>& acc, const Mat<S>& extra) {
    if (acc.size() == 0) acc = extra;
    else acc += extra;
  };

  if (cache.with_viseme) {
    const std::array<const Mat<S>*, 3> head_grads = {&d.activation_logits, &d.rig, &d.jali};
    const auto br = branches(w);
    const auto gbr = branches(grad);
    Mat<S> d_vin;
    for (int k = 0; k < 3; ++k) {
      if (head_grads[k]->size() == 0) continue;
      const Mat<S> d_top = nn::decoder_backward(br[k]->decoder, cache.viseme_decoder[k], *head_grads[k], gbr[k]->decoder);
      Mat<S> d_in = nn::lstm_stack_backward<S>(br[k]->lstm, cache.viseme_lstm[k], d_top, gbr[k]->lstm, cfg.has_shared());
      if (cfg.has_shared()) accumulate(d_vin, d_in);
    }
    if (d_vin.size() > 0) {
      Eigen::Index row = 0;
      if (cfg.phoneme_stage) {
        accumulate(d_logits, d_vin.middleRows(row, kPhonemeGroups));
        row += kPhonemeGroups;
      }
      if (cfg.landmark_stage) accumulate(d_landmarks, d_vin.middleRows(row, kLandmarkDim));
    }
  }

  if (!cfg.has_shared()) return;
  Mat<S> d_top;
  if (cfg.phoneme_stage && d_logits.size() > 0) {
    accumulate(d_top, nn::decoder_backward(w.phoneme, cache.phoneme, d_logits, grad.phoneme));
  }
  if (cfg.landmark_stage && d_landmarks.size() > 0) {
    accumulate(d_top, nn::decoder_backward(w.landmark, cache.landmark, d_landmarks, grad.landmark));
  }
  if (d_top.size() > 0) nn::lstm_stack_backward<S>(w.shared, cache.shared, d_top, grad.shared, false);
}

// ---------------------------------------------------------------------------
// Per-frame evaluation (inference and streaming share this path)

template <class S>
class FrameEvaluator {
 public:
  struct Output {
    Vec<S> phoneme_logits;
    Vec<S> phoneme_probs;
    Vec<S> landmarks;
    Vec<S> activation_probs;
    Vec<S> rig;   // raw
    Vec<S> jali;  // raw
  };

  FrameEvaluator(const ModelConfig& cfg, const Weights<S>& w) : cfg_(cfg), w_(&w) {
    validate_weights(w, cfg);
    reset();
  }

  /// Zeroes every LSTM state (start of a new clip).
  void reset() {
    shared_.assign(w_->shared.size(), nn::LstmState<S>::zeros(cfg_.lstm_hidden));
    for (auto& s : viseme_) s.assign(cfg_.lstm_layers, nn::LstmState<S>::zeros(cfg_.viseme_hidden));
  }

  const Output& step(const Vec<S>& context, const Vec<S>& frame) {
    require_shape(frame.size() == kFeatureDim, "frame features must be 65-dimensional");
    if (cfg_.has_shared()) {
      require_shape(context.size() == kContextDim, "context must be 1560-dimensional");
      const Vec<S>* x = &context;
      for (std::size_t l = 0; l < shared_.size(); ++l) {
        nn::lstm_cell_step(*x, shared_[l], w_->shared[l], scratch_);
        x = &shared_[l].h;
      }
      if (cfg_.phoneme_stage) {
        decode(w_->phoneme, *x, out_.phoneme_logits);
        out_.phoneme_probs = nn::apply_head(Mat<S>(out_.phoneme_logits), nn::Head::kSoftmax).col(0);
      }
      if (cfg_.landmark_stage) decode(w_->landmark, *x, out_.landmarks);
    }
    vin_.resize(cfg_.viseme_input_dim());
    Eigen::Index row = 0;
    if (cfg_.phoneme_stage) {
      vin_.segment(row, kPhonemeGroups) = out_.phoneme_logits;
      row += kPhonemeGroups;
    }
    if (cfg_.landmark_stage) {
      vin_.segment(row, kLandmarkDim) = out_.landmarks;
      row += kLandmarkDim;
    }
    vin_.segment(row, kFeatureDim) = frame;
    const auto br = branches(*w_);
    std::array<Vec<S>*, 3> heads = {&act_logits_, &out_.rig, &out_.jali};
    for (int k = 0; k < 3; ++k) {
      const Vec<S>* x = &vin_;
      for (std::size_t l = 0; l < viseme_[k].size(); ++l) {
        nn::lstm_cell_step(*x, viseme_[k][l], br[k]->lstm[l], scratch_);
        x = &viseme_[k][l].h;
      }
      decode(br[k]->decoder, *x, *heads[k]);
    }
    out_.activation_probs = act_logits_.unaryExpr([](S v) { return nn::sigmoid<S>(v); });
    return out_;
  }

 private:
  void decode(const nn::DecoderParams<S>& d, const Vec<S>& x, Vec<S>& out) {
    hidden_ = d.hidden.bias;
    hidden_.noalias() += d.hidden.weight * x;
    hidden_ = hidden_.cwiseMax(S(0));
    out = d.output.bias;
    out.noalias() += d.output.weight * hidden_;
  }

  ModelConfig cfg_;
  const Weights<S>* w_;
  std::vector<nn::LstmState<S>> shared_;
  std::array<std::vector<nn::LstmState<S>>, 3> viseme_;
  Vec<S> scratch_, hidden_, vin_, act_logits_;
  Output out_;
};

// ---------------------------------------------------------------------------
// Trained model bundle

/// Everything a trained model carries: weights, feature normalization, neutral face
/// and per-parameter activation thresholds.
struct ModelParams {
  ModelConfig config;
  Weights<float> weights;
  FeatureStats stats;
  Vec<float> neutral_face = Vec<float>::Zero(kLandmarkDim);
  Vec<float> thresholds = Vec<float>::Constant(kRigDim, 0.5f);

  void validate() const {
    config.validate();
    validate_weights(weights, config);
    require_shape(stats.mean.size() == kFeatureDim && stats.stddev.size() == kFeatureDim,
                  "feature statistics must be 65-dimensional");
    require_shape(neutral_face.size() == kLandmarkDim, "neutral face must be 76-dimensional");
    require_shape(thresholds.size() == kRigDim, "thresholds must cover 29 rig parameters");
    require((thresholds.array() > 0.0f).all() && (thresholds.array() < 1.0f).all(), ErrorCategory::kData,
            "activation thresholds must lie in (0, 1)");
    require(neutral_face.allFinite() && stats.mean.allFinite() && stats.stddev.allFinite(), ErrorCategory::kData,
            "model statistics contain non-finite values");
  }
};

inline ModelParams init_model_params(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.config = cfg;
  p.weights = init_weights<float>(cfg, rng);
  return p;
}

/// Per-frame viseme state as reported to consumers.
struct RigFrame {
  std::array<float, kRigDim> activation_probs{};
  std::array<bool, kRigDim> active{};
  std::array<float, kRigDim> rig{};  // 0 wherever inactive
  std::array<float, kJaliDim> jali{};
};

/// Applies thresholds (strict inequality) and the [0, 1] output clamp.
template <class S>
RigFrame make_rig_frame(const Vec<S>& activation_probs, const Vec<S>& rig, const Vec<S>& jali,
                        const Vec<float>& thresholds) {
  RigFrame f;
  for (int a = 0; a < kRigDim; ++a) {
    f.activation_probs[a] = static_cast<float>(activation_probs[a]);
    f.active[a] = f.activation_probs[a] > thresholds[a];
    f.rig[a] = f.active[a] ? std::clamp(static_cast<float>(rig[a]), 0.0f, 1.0f) : 0.0f;
  }
  for (int j = 0; j < kJaliDim; ++j) f.jali[j] = std::clamp(static_cast<float>(jali[j]), 0.0f, 1.0f);
  return f;
}

// ---------------------------------------------------------------------------
// Stage-level entry points (single sequence)

/// Phoneme-group logits and probabilities, one column per frame.
template <class S>
std::pair<Mat<S>, Mat<S>> phoneme_stage(const Mat<S>& contexts, const ModelConfig& cfg, const Weights<S>& w) {
  require(cfg.phoneme_stage, ErrorCategory::kInvalidArgument, "model has no phoneme stage");
  require(contexts.cols() > 0, ErrorCategory::kInvalidArgument, "phoneme stage needs at least one frame");
  const auto out = forward(cfg, w, contexts, Mat<S>(kFeatureDim, contexts.cols()), 1, false);
  return {out.phoneme_logits, out.phoneme_probs};
}

/// Landmark displacements relative to the neutral face, one column per frame.
template <class S>
Mat<S> landmark_stage(const Mat<S>& contexts, const ModelConfig& cfg, const Weights<S>& w) {
  require(cfg.landmark_stage, ErrorCategory::kInvalidArgument, "model has no landmark stage");
  require(contexts.cols() > 0, ErrorCategory::kInvalidArgument, "landmark stage needs at least one frame");
  return forward(cfg, w, contexts, Mat<S>(kFeatureDim, contexts.cols()), 1, false).landmarks;
}

/// Viseme stage over given logits, landmarks and frame features.
template <class S>
std::vector<RigFrame> viseme_stage(const Mat<S>& logits, const Mat<S>& landmarks, const Mat<S>& frames,
                                   const ModelConfig& cfg, const Weights<S>& w, const Vec<float>& thresholds) {
  require(frames.cols() > 0, ErrorCategory::kInvalidArgument, "viseme stage needs at least one frame");
  require_shape((!cfg.phoneme_stage || logits.cols() == frames.cols()) &&
                    (!cfg.landmark_stage || landmarks.cols() == frames.cols()),
                "viseme stage inputs differ in length");
  const Mat<S> vin = viseme_input(cfg, logits, landmarks, frames);
  const auto br = branches(w);
  std::array<Mat<S>, 3> heads;
  for (int k = 0; k < 3; ++k) {
    heads[k] = nn::decoder_forward(br[k]->decoder, nn::lstm_stack_forward<S>(br[k]->lstm, vin, 1));
  }
  const Mat<S> probs = nn::apply_head(heads[0], nn::Head::kSigmoid);
  std::vector<RigFrame> out;
  for (Eigen::Index t = 0; t < frames.cols(); ++t) {
    out.push_back(make_rig_frame<S>(probs.col(t), heads[1].col(t), heads[2].col(t), thresholds));
  }
  return out;
}

struct FullOutput {
  Mat<float> phoneme_probs;  // 20 x T (empty without a phoneme stage)
  Mat<float> landmarks;      // 76 x T displacements (empty without a landmark stage)
  std::vector<RigFrame> rig;

  std::size_t frames() const { return rig.size(); }
};

/// Runs the per-frame evaluator over already-normalized features (65 x T).
inline FullOutput full_forward_features(const Mat<float>& frames, const ModelParams& params) {
  require(frames.cols() > 0, ErrorCategory::kInvalidArgument, "no feature frames");
  FrameEvaluator<float> eval(params.config, params.weights);
  FullOutput out;
  const Eigen::Index T = frames.cols();
  if (params.config.phoneme_stage) out.phoneme_probs.resize(kPhonemeGroups, T);
  if (params.config.landmark_stage) out.landmarks.resize(kLandmarkDim, T);
  out.rig.reserve(static_cast<std::size_t>(T));
  Vec<float> ctx, frame;
  for (Eigen::Index t = 0; t < T; ++t) {
    stack_context_into<float>(frames, t, ctx);
    frame = frames.col(t);
    const auto& o = eval.step(ctx, frame);
    if (params.config.phoneme_stage) out.phoneme_probs.col(t) = o.phoneme_probs;
    if (params.config.landmark_stage) out.landmarks.col(t) = o.landmarks;
    out.rig.push_back(make_rig_frame<float>(o.activation_probs, o.rig, o.jali, params.thresholds));
  }
  return out;
}

/// extract_features -> normalize -> stack_context -> three stages.
inline FullOutput full_forward(const AudioClip& clip, const ModelParams& params) {
  return full_forward_features(network_features(clip, params.stats), params);
}

}  // namespace visemenet
