#pragma once

// Training objectives. Every loss takes one matrix per clip (rows = dimensions,
// columns = frames) and optionally accumulates `scale * d(loss)/d(input)` into a
// caller-provided gradient list. Cross-entropy terms return gradients with respect
// to the pre-activation logits (softmax / sigmoid fused into the backward pass).

#include "visemenet/common.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace visemenet::losses {

inline constexpr double kProbabilityEpsilon = 1e-7;

struct PretrainWeights {
  double phoneme = 0.75;          // cross-entropy on phoneme groups
  double landmark = 0.25;         // landmark L1
  double landmark_smooth = 0.1;   // landmark motion L1
};

struct JointWeights {
  double activation = 0.1;
  double rig = 0.2;
  double jali = 0.2;
  double rig_smooth = 0.15;
  double jali_smooth = 0.15;
};

namespace detail {

template <class S>
void ensure_grad(std::vector<Mat<S>>* grads, const std::vector<Mat<S>>& like) {
  if (!grads) return;
  if (grads->size() != like.size()) grads->resize(like.size());
  for (std::size_t n = 0; n < like.size(); ++n) {
    if ((*grads)[n].rows() != like[n].rows() || (*grads)[n].cols() != like[n].cols()) {
      (*grads)[n] = Mat<S>::Zero(like[n].rows(), like[n].cols());
    }
  }
}

template <class S>
S sign(S x) {
  return static_cast<S>((x > S(0)) - (x < S(0)));
}

inline void check_clip_count(std::size_t a, std::size_t b, const char* what) {
  require_shape(a == b, std::string(what) + ": prediction and target clip counts differ");
  require(a > 0, ErrorCategory::kInvalidArgument, std::string(what) + ": no clips");
}

template <class S, class T>
void check_same_shape(const Mat<S>& a, const T& b, const char* what) {
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), std::string(what) + ": shape mismatch");
}

}  // namespace detail

/// Temporal derivative per row: (s[t+1] - s[t-1]) / 2 inside, one-sided at the ends.
template <class S>
Mat<S> central_difference(const Mat<S>& s) {
  const Eigen::Index T = s.cols();
  Mat<S> d = Mat<S>::Zero(s.rows(), T);
  if (T < 2) return d;
  d.col(0) = s.col(1) - s.col(0);
  d.col(T - 1) = s.col(T - 1) - s.col(T - 2);
  for (Eigen::Index t = 1; t + 1 < T; ++t) d.col(t) = (s.col(t + 1) - s.col(t - 1)) / S(2);
  return d;
}

/// Transpose of central_difference (maps d(loss)/d(derivative) to d(loss)/d(sequence)).
template <class S>
Mat<S> central_difference_adjoint(const Mat<S>& g) {
  const Eigen::Index T = g.cols();
  Mat<S> out = Mat<S>::Zero(g.rows(), T);
  if (T < 2) return out;
  out.col(0) -= g.col(0);
  out.col(1) += g.col(0);
  out.col(T - 1) += g.col(T - 1);
  out.col(T - 2) -= g.col(T - 1);
  for (Eigen::Index t = 1; t + 1 < T; ++t) {
    out.col(t + 1) += g.col(t) / S(2);
    out.col(t - 1) -= g.col(t) / S(2);
  }
  return out;
}

/// Per-clip mean negative log-probability of the labelled group, averaged over clips.
/// Frames labelled -1 are ignored; the per-clip mean runs over labelled frames.
template <class S>
double phoneme_ce_loss(const std::vector<Mat<S>>& probs, const std::vector<std::vector<int>>& labels,
                       std::vector<Mat<S>>* d_logits = nullptr, S scale = S(1)) {
  detail::check_clip_count(probs.size(), labels.size(), "phoneme loss");
  detail::ensure_grad(d_logits, probs);
  const double N = static_cast<double>(probs.size());
  double total = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    const auto& p = probs[n];
    require_shape(static_cast<std::size_t>(p.cols()) == labels[n].size(), "phoneme loss: label count mismatch");
    double clip = 0.0;
    int counted = 0;
    for (Eigen::Index t = 0; t < p.cols(); ++t) {
      const int c = labels[n][static_cast<std::size_t>(t)];
      require(c >= -1 && c < p.rows(), ErrorCategory::kData,
              "phoneme label " + std::to_string(c) + " out of range");
      if (c < 0) continue;
      clip -= std::log(std::max(static_cast<double>(p(c, t)), kProbabilityEpsilon));
      ++counted;
    }
    if (counted == 0) continue;
    total += clip / counted;
    if (d_logits) {
      const S w = scale / static_cast<S>(N * counted);
      for (Eigen::Index t = 0; t < p.cols(); ++t) {
        const int c = labels[n][static_cast<std::size_t>(t)];
        if (c < 0) continue;
        (*d_logits)[n].col(t) += w * p.col(t);
        (*d_logits)[n](c, t) -= w;
      }
    }
  }
  return total / N;
}

/// (1/N)(1/M) sum_n (1/t_n) sum_t |q_t - target_t|_1.
template <class S>
double landmark_l1_loss(const std::vector<Mat<S>>& pred, const std::vector<Mat<S>>& target,
                        std::vector<Mat<S>>* d_pred = nullptr, S scale = S(1)) {
  detail::check_clip_count(pred.size(), target.size(), "landmark loss");
  detail::ensure_grad(d_pred, pred);
  const double N = static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    detail::check_same_shape(pred[n], target[n], "landmark loss");
    const double M = static_cast<double>(pred[n].rows());
    const double tn = static_cast<double>(pred[n].cols());
    if (tn == 0) continue;
    const Mat<S> diff = pred[n] - target[n];
    total += diff.template cast<double>().cwiseAbs().sum() / (M * tn);
    if (d_pred) (*d_pred)[n] += (scale / static_cast<S>(N * M * tn)) * diff.unaryExpr(&detail::sign<S>);
  }
  return total / N;
}

/// (1/N)(1/M) sum_n (1/t_n) sum_t |dq_t/dt|_1 with central differences.
template <class S>
double landmark_smoothness_loss(const std::vector<Mat<S>>& pred, std::vector<Mat<S>>* d_pred = nullptr,
                                S scale = S(1)) {
  require(!pred.empty(), ErrorCategory::kInvalidArgument, "landmark smoothness loss: no clips");
  detail::ensure_grad(d_pred, pred);
  const double N = static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    const double M = static_cast<double>(pred[n].rows());
    const double tn = static_cast<double>(pred[n].cols());
    if (tn == 0) continue;
    const Mat<S> d = central_difference(pred[n]);
    total += d.template cast<double>().cwiseAbs().sum() / (M * tn);
    if (d_pred) {
      (*d_pred)[n] += central_difference_adjoint<S>((scale / static_cast<S>(N * M * tn)) * d.unaryExpr(&detail::sign<S>));
    }
  }
  return total / N;
}

/// Sum of 29 per-parameter binary cross-entropies: for each clip and parameter the
/// active-frame and inactive-frame log terms are each divided by t_n and added,
/// then everything is averaged over parameters and clips.
template <class S>
double activation_bce_loss(const std::vector<Mat<S>>& probs, const std::vector<Mask>& active,
                           std::vector<Mat<S>>* d_logits = nullptr, S scale = S(1)) {
  detail::check_clip_count(probs.size(), active.size(), "activation loss");
  detail::ensure_grad(d_logits, probs);
  const double N = static_cast<double>(probs.size());
  double total = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    const auto& p = probs[n];
    detail::check_same_shape(p, active[n], "activation loss");
    const double A = static_cast<double>(p.rows());
    const double tn = static_cast<double>(p.cols());
    if (tn == 0) continue;
    double clip = 0.0;
    for (Eigen::Index t = 0; t < p.cols(); ++t) {
      for (Eigen::Index a = 0; a < p.rows(); ++a) {
        const double q = std::clamp(static_cast<double>(p(a, t)), kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
        clip -= active[n](a, t) ? std::log(q) : std::log(1.0 - q);
      }
    }
    total += clip / (A * tn);
    if (d_logits) {
      const S w = scale / static_cast<S>(N * A * tn);
      for (Eigen::Index t = 0; t < p.cols(); ++t) {
        for (Eigen::Index a = 0; a < p.rows(); ++a) {
          (*d_logits)[n](a, t) += w * (p(a, t) - (active[n](a, t) ? S(1) : S(0)));
        }
      }
    }
  }
  return total / N;
}

/// L1 on rig values over ground-truth-active frames only, normalized per parameter
/// by its active-frame count t_{n,a}. Parameters never active in a clip are left out
/// of that clip's parameter average; a clip with no active parameter contributes 0.
template <class S>
double masked_rig_l1_loss(const std::vector<Mat<S>>& pred, const std::vector<Mat<S>>& target,
                          const std::vector<Mask>& active, std::vector<Mat<S>>* d_pred = nullptr, S scale = S(1)) {
  detail::check_clip_count(pred.size(), target.size(), "rig loss");
  detail::check_clip_count(pred.size(), active.size(), "rig loss");
  detail::ensure_grad(d_pred, pred);
  const double N = static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    detail::check_same_shape(pred[n], target[n], "rig loss");
    detail::check_same_shape(pred[n], active[n], "rig loss");
    std::vector<int> counts(static_cast<std::size_t>(pred[n].rows()), 0);
    int params_active = 0;
    for (Eigen::Index a = 0; a < pred[n].rows(); ++a) {
      for (Eigen::Index t = 0; t < pred[n].cols(); ++t) counts[static_cast<std::size_t>(a)] += active[n](a, t) ? 1 : 0;
      params_active += counts[static_cast<std::size_t>(a)] > 0 ? 1 : 0;
    }
    if (params_active == 0) continue;
    double clip = 0.0;
    for (Eigen::Index a = 0; a < pred[n].rows(); ++a) {
      const int tna = counts[static_cast<std::size_t>(a)];
      if (tna == 0) continue;
      double sum = 0.0;
      const S w = scale / static_cast<S>(N * params_active * tna);
      for (Eigen::Index t = 0; t < pred[n].cols(); ++t) {
        if (!active[n](a, t)) continue;
        const S diff = pred[n](a, t) - target[n](a, t);
        sum += std::abs(static_cast<double>(diff));
        if (d_pred) (*d_pred)[n](a, t) += w * detail::sign(diff);
      }
      clip += sum / tna;
    }
    total += clip / params_active;
  }
  return total / N;
}

/// Central-difference magnitude of predicted rig values at frames t where t-1, t and
/// t+1 are all ground-truth active, averaged per parameter over those frames.
template <class S>
double rig_smoothness_loss(const std::vector<Mat<S>>& pred, const std::vector<Mask>& active,
                           std::vector<Mat<S>>* d_pred = nullptr, S scale = S(1)) {
  detail::check_clip_count(pred.size(), active.size(), "rig smoothness loss");
  detail::ensure_grad(d_pred, pred);
  const double N = static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    const auto& v = pred[n];
    const auto& m = active[n];
    detail::check_same_shape(v, m, "rig smoothness loss");
    const Eigen::Index T = v.cols();
    auto included = [&](Eigen::Index a, Eigen::Index t) { return m(a, t - 1) && m(a, t) && m(a, t + 1); };
    std::vector<int> counts(static_cast<std::size_t>(v.rows()), 0);
    int params = 0;
    for (Eigen::Index a = 0; a < v.rows(); ++a) {
      for (Eigen::Index t = 1; t + 1 < T; ++t) counts[static_cast<std::size_t>(a)] += included(a, t) ? 1 : 0;
      params += counts[static_cast<std::size_t>(a)] > 0 ? 1 : 0;
    }
    if (params == 0) continue;
    double clip = 0.0;
    for (Eigen::Index a = 0; a < v.rows(); ++a) {
      const int cnt = counts[static_cast<std::size_t>(a)];
      if (cnt == 0) continue;
      double sum = 0.0;
      const S w = scale / static_cast<S>(N * params * cnt);
      for (Eigen::Index t = 1; t + 1 < T; ++t) {
        if (!included(a, t)) continue;
        const S d = (v(a, t + 1) - v(a, t - 1)) / S(2);
        sum += std::abs(static_cast<double>(d));
        if (d_pred) {
          const S g = w * detail::sign(d) / S(2);
          (*d_pred)[n](a, t + 1) += g;
          (*d_pred)[n](a, t - 1) -= g;
        }
      }
      clip += sum / cnt;
    }
    total += clip / params;
  }
  return total / N;
}

/// (1/N) sum_n (1/t_n) sum_t |y_t - target_t|_1 over the two JALI field values.
template <class S>
double jali_l1_loss(const std::vector<Mat<S>>& pred, const std::vector<Mat<S>>& target,
                    std::vector<Mat<S>>* d_pred = nullptr, S scale = S(1)) {
  detail::check_clip_count(pred.size(), target.size(), "JALI loss");
  detail::ensure_grad(d_pred, pred);
  const double N = static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    detail::check_same_shape(pred[n], target[n], "JALI loss");
    const double tn = static_cast<double>(pred[n].cols());
    if (tn == 0) continue;
    const Mat<S> diff = pred[n] - target[n];
    total += diff.template cast<double>().cwiseAbs().sum() / tn;
    if (d_pred) (*d_pred)[n] += (scale / static_cast<S>(N * tn)) * diff.unaryExpr(&detail::sign<S>);
  }
  return total / N;
}

/// (1/N) sum_n (1/t_n) sum_t |dy_t/dt|_1.
template <class S>
double jali_smoothness_loss(const std::vector<Mat<S>>& pred, std::vector<Mat<S>>* d_pred = nullptr,
                            S scale = S(1)) {
  require(!pred.empty(), ErrorCategory::kInvalidArgument, "JALI smoothness loss: no clips");
  detail::ensure_grad(d_pred, pred);
  const double N = static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    const double tn = static_cast<double>(pred[n].cols());
    if (tn == 0) continue;
    const Mat<S> d = central_difference(pred[n]);
    total += d.template cast<double>().cwiseAbs().sum() / tn;
    if (d_pred) {
      (*d_pred)[n] += central_difference_adjoint<S>((scale / static_cast<S>(N * tn)) * d.unaryExpr(&detail::sign<S>));
    }
  }
  return total / N;
}

// ---------------------------------------------------------------------------
// Multi-task combinations

/// Network predictions per clip. Stages that were not evaluated stay empty.
template <class S>
struct Predictions {
  std::vector<Mat<S>> phoneme_probs;
  std::vector<Mat<S>> landmarks;
  std::vector<Mat<S>> activation_probs;
  std::vector<Mat<S>> rig;
  std::vector<Mat<S>> jali;
};

template <class S>
struct Targets {
  std::vector<std::vector<int>> phoneme;
  std::vector<Mat<S>> landmarks;
  std::vector<Mat<S>> rig;
  std::vector<Mask> active;
  std::vector<Mat<S>> jali;
};

/// Gradients with respect to the logits / raw outputs, per clip.
template <class S>
struct Gradients {
  std::vector<Mat<S>> phoneme_logits;
  std::vector<Mat<S>> landmarks;
  std::vector<Mat<S>> activation_logits;
  std::vector<Mat<S>> rig;
  std::vector<Mat<S>> jali;
};

struct LossBreakdown {
  double phoneme = 0;
  double landmark = 0;
  double landmark_smooth = 0;
  double activation = 0;
  double rig = 0;
  double rig_smooth = 0;
  double jali = 0;
  double jali_smooth = 0;
  double pretrain = 0;  // weighted phoneme + landmark terms
  double total = 0;
};

/// w_c L_c + w_q L_q + w_q' L_q'. Terms whose predictions are absent are skipped.
template <class S>
LossBreakdown pretrain_loss(const Predictions<S>& pred, const Targets<S>& target, const PretrainWeights& w,
                            Gradients<S>* grads = nullptr) {
  LossBreakdown out;
  if (!pred.phoneme_probs.empty()) {
    out.phoneme = phoneme_ce_loss(pred.phoneme_probs, target.phoneme, grads ? &grads->phoneme_logits : nullptr,
                                  static_cast<S>(w.phoneme));
  }
  if (!pred.landmarks.empty()) {
    out.landmark = landmark_l1_loss(pred.landmarks, target.landmarks, grads ? &grads->landmarks : nullptr,
                                    static_cast<S>(w.landmark));
    out.landmark_smooth = landmark_smoothness_loss(pred.landmarks, grads ? &grads->landmarks : nullptr,
                                                   static_cast<S>(w.landmark_smooth));
  }
  out.pretrain = w.phoneme * out.phoneme + w.landmark * out.landmark + w.landmark_smooth * out.landmark_smooth;
  out.total = out.pretrain;
  return out;
}

/// Pre-training loss plus the weighted viseme-stage terms.
template <class S>
LossBreakdown joint_loss(const Predictions<S>& pred, const Targets<S>& target, const PretrainWeights& w1,
                         const JointWeights& w2, Gradients<S>* grads = nullptr) {
  LossBreakdown out = pretrain_loss(pred, target, w1, grads);
  if (!pred.activation_probs.empty()) {
    out.activation = activation_bce_loss(pred.activation_probs, target.active,
                                         grads ? &grads->activation_logits : nullptr, static_cast<S>(w2.activation));
  }
  if (!pred.rig.empty()) {
    out.rig = masked_rig_l1_loss(pred.rig, target.rig, target.active, grads ? &grads->rig : nullptr,
                                 static_cast<S>(w2.rig));
    out.rig_smooth = rig_smoothness_loss(pred.rig, target.active, grads ? &grads->rig : nullptr,
                                         static_cast<S>(w2.rig_smooth));
  }
  if (!pred.jali.empty()) {
    out.jali = jali_l1_loss(pred.jali, target.jali, grads ? &grads->jali : nullptr, static_cast<S>(w2.jali));
    out.jali_smooth = jali_smoothness_loss(pred.jali, grads ? &grads->jali : nullptr, static_cast<S>(w2.jali_smooth));
  }
  out.total = out.pretrain + w2.activation * out.activation + w2.rig * out.rig + w2.jali * out.jali +
              w2.rig_smooth * out.rig_smooth + w2.jali_smooth * out.jali_smooth;
  return out;
}

}  // namespace visemenet::losses
