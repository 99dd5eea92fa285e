#pragma once

// Activation precision / recall, motion-curve difference, phoneme-group accuracy, and
// the ablation and leave-one-speaker-out harness built on them.

#include "visemenet/dataset.hpp"
#include "visemenet/inference.hpp"
#include "visemenet/model.hpp"
#include "visemenet/trainer.hpp"

#include <json.hpp>

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

namespace visemenet {

// ---------------------------------------------------------------------------
// Metrics

/// A percentage that is undefined when its denominator is empty.
struct Percent {
  double value = 0.0;
  bool defined = false;

  static Percent undefined() { return {}; }
  static Percent of(long long num, long long den) {
    if (den == 0) return undefined();
    return {100.0 * static_cast<double>(num) / static_cast<double>(den), true};
  }
};

struct ActivationCounts {
  long long true_positive = 0;
  long long predicted = 0;
  long long ground_truth = 0;

  ActivationCounts& operator+=(const ActivationCounts& o) {
    true_positive += o.true_positive;
    predicted += o.predicted;
    ground_truth += o.ground_truth;
    return *this;
  }
};

inline ActivationCounts activation_counts(const Mask& pred, const Mask& gt) {
  require_shape(pred.rows() == gt.rows() && pred.cols() == gt.cols(), "activation masks differ in shape");
  const auto p = (pred.array() != 0);
  const auto g = (gt.array() != 0);
  return {static_cast<long long>((p && g).count()), static_cast<long long>(p.count()),
          static_cast<long long>(g.count())};
}

inline ActivationCounts activation_counts(const std::vector<Mask>& pred, const std::vector<Mask>& gt) {
  require_shape(pred.size() == gt.size(), "activation mask clip counts differ");
  ActivationCounts c;
  for (std::size_t n = 0; n < pred.size(); ++n) c += activation_counts(pred[n], gt[n]);
  return c;
}

/// 100 * |pred and gt| / |pred|; undefined with no predicted activations.
inline Percent activation_precision(const std::vector<Mask>& pred, const std::vector<Mask>& gt) {
  const auto c = activation_counts(pred, gt);
  return Percent::of(c.true_positive, c.predicted);
}

/// 100 * |pred and gt| / |gt|; undefined with no ground-truth activations.
inline Percent activation_recall(const std::vector<Mask>& pred, const std::vector<Mask>& gt) {
  const auto c = activation_counts(pred, gt);
  return Percent::of(c.true_positive, c.ground_truth);
}

struct CurveDiffAccumulator {
  double abs_sum = 0.0;
  long long cells = 0;

  CurveDiffAccumulator& operator+=(const CurveDiffAccumulator& o) {
    abs_sum += o.abs_sum;
    cells += o.cells;
    return *this;
  }
  double percent() const { return cells == 0 ? 0.0 : 100.0 * abs_sum / static_cast<double>(cells); }
};

/// Sums |v - v_hat| over rig cells active in either mask and over every JALI cell.
inline CurveDiffAccumulator curve_diff_terms(const Mat<float>& pred_rig, const Mat<float>& gt_rig,
                                             const Mask& pred_mask, const Mask& gt_mask, const Mat<float>& pred_jali,
                                             const Mat<float>& gt_jali) {
  require_shape(pred_rig.rows() == gt_rig.rows() && pred_rig.cols() == gt_rig.cols() &&
                    pred_mask.rows() == gt_rig.rows() && pred_mask.cols() == gt_rig.cols() &&
                    gt_mask.rows() == gt_rig.rows() && gt_mask.cols() == gt_rig.cols(),
                "rig curves and masks differ in shape");
  require_shape(pred_jali.rows() == gt_jali.rows() && pred_jali.cols() == gt_jali.cols(),
                "JALI curves differ in shape");
  CurveDiffAccumulator acc;
  const auto unite = (pred_mask.array() != 0) || (gt_mask.array() != 0);
  const auto diff = (pred_rig.cast<double>() - gt_rig.cast<double>()).array().abs();
  acc.abs_sum = unite.select(diff, 0.0).sum();
  acc.cells = static_cast<long long>(unite.count());
  acc.abs_sum += (pred_jali.cast<double>() - gt_jali.cast<double>()).array().abs().sum();
  acc.cells += static_cast<long long>(gt_jali.size());
  return acc;
}

/// Mean of 100 |v - v_hat| over cells where the parameter is active in the prediction or
/// the ground truth, with JALI values counted as always active.
inline double motion_curve_difference(const std::vector<Mat<float>>& pred_rig, const std::vector<Mat<float>>& gt_rig,
                                      const std::vector<Mask>& pred_mask, const std::vector<Mask>& gt_mask,
                                      const std::vector<Mat<float>>& pred_jali,
                                      const std::vector<Mat<float>>& gt_jali) {
  const std::size_t n = gt_rig.size();
  require_shape(pred_rig.size() == n && pred_mask.size() == n && gt_mask.size() == n && pred_jali.size() == n &&
                    gt_jali.size() == n,
                "curve difference inputs differ in clip count");
  CurveDiffAccumulator acc;
  for (std::size_t k = 0; k < n; ++k) {
    acc += curve_diff_terms(pred_rig[k], gt_rig[k], pred_mask[k], gt_mask[k], pred_jali[k], gt_jali[k]);
  }
  return acc.percent();
}

struct AccuracyCounts {
  long long correct = 0;
  long long labelled = 0;
  Percent percent() const { return Percent::of(correct, labelled); }
};

/// Frames whose most probable group equals the label (unlabelled frames skipped).
inline AccuracyCounts phoneme_accuracy_counts(const Mat<float>& probs, const std::vector<int>& labels) {
  require_shape(static_cast<std::size_t>(probs.cols()) == labels.size(), "phoneme probabilities and labels differ");
  AccuracyCounts c;
  for (Eigen::Index t = 0; t < probs.cols(); ++t) {
    const int y = labels[static_cast<std::size_t>(t)];
    if (y < 0) continue;
    Eigen::Index best = 0;
    probs.col(t).maxCoeff(&best);
    c.correct += best == y;
    ++c.labelled;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Per-clip prediction bundle

struct ClipPrediction {
  Mat<float> rig;   // 29 x T, gated
  Mask active;      // 29 x T
  Mat<float> jali;  // 2 x T, clamped
  Mat<float> phoneme_probs;
};

inline ClipPrediction predict_clip(const AudioClip& clip, const ModelParams& params) {
  const auto out = full_forward(clip, params);
  const auto T = static_cast<Eigen::Index>(out.frames());
  ClipPrediction p;
  p.rig.resize(kRigDim, T);
  p.active.resize(kRigDim, T);
  p.jali.resize(kJaliDim, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& f = out.rig[static_cast<std::size_t>(t)];
    for (int a = 0; a < kRigDim; ++a) {
      p.rig(a, t) = f.rig[a];
      p.active(a, t) = f.active[a] ? 1 : 0;
    }
    for (int j = 0; j < kJaliDim; ++j) p.jali(j, t) = f.jali[j];
  }
  p.phoneme_probs = out.phoneme_probs;
  return p;
}

struct Scores {
  Percent precision;
  Percent recall;
  double curve_diff = 0.0;
  Percent phoneme_accuracy;
  double active_fraction = 0.0;  // predicted active cells / all rig cells
};

/// Pooled metrics of a model over fully labelled clips.
inline Scores score_clips(const ModelParams& params, const std::vector<ClipRecord>& clips) {
  require(!clips.empty(), ErrorCategory::kInvalidArgument, "no clips to score");
  require_joint_labels(clips);
  ActivationCounts counts;
  CurveDiffAccumulator diff;
  AccuracyCounts acc;
  long long cells = 0;
  for (const auto& c : clips) {
    const ClipPrediction p = predict_clip(c.audio, params);
    counts += activation_counts(p.active, *c.active);
    diff += curve_diff_terms(p.rig, *c.rig, p.active, *c.active, p.jali, *c.jali);
    if (p.phoneme_probs.size() > 0) {
      const auto a = phoneme_accuracy_counts(p.phoneme_probs, *c.phoneme);
      acc.correct += a.correct;
      acc.labelled += a.labelled;
    }
    cells += p.active.size();
  }
  Scores s;
  s.precision = Percent::of(counts.true_positive, counts.predicted);
  s.recall = Percent::of(counts.true_positive, counts.ground_truth);
  s.curve_diff = diff.percent();
  s.phoneme_accuracy = acc.percent();
  s.active_fraction = cells == 0 ? 0.0 : static_cast<double>(counts.predicted) / static_cast<double>(cells);
  return s;
}

// ---------------------------------------------------------------------------
// Conditions

enum class Condition { kFull, kLandmarkBased, kPhonemeBased, kAudioBased, kNoTransfer };

inline std::string to_string(Condition c) {
  switch (c) {
    case Condition::kFull: return "full";
    case Condition::kLandmarkBased: return "landmark-based";
    case Condition::kPhonemeBased: return "phoneme-based";
    case Condition::kAudioBased: return "audio-based";
    case Condition::kNoTransfer: return "no-transfer";
  }
  return "unknown";
}

inline Condition parse_condition(const std::string& s) {
  for (auto c : {Condition::kFull, Condition::kLandmarkBased, Condition::kPhonemeBased, Condition::kAudioBased,
                 Condition::kNoTransfer}) {
    if (to_string(c) == s) return c;
  }
  throw Error(ErrorCategory::kInvalidArgument,
              "unknown condition \"" + s + "\" (full, landmark-based, phoneme-based, audio-based, no-transfer)");
}

/// The architecture a condition trains: landmark-based drops the phoneme stage,
/// phoneme-based drops the landmark stage, audio-based drops both.
inline ModelConfig condition_model(Condition c, ModelConfig base) {
  base.phoneme_stage = c != Condition::kLandmarkBased && c != Condition::kAudioBased;
  base.landmark_stage = c != Condition::kPhonemeBased && c != Condition::kAudioBased;
  return base;
}

inline bool condition_pretrains(Condition c) { return c != Condition::kAudioBased && c != Condition::kNoTransfer; }

struct ConditionData {
  std::vector<ClipRecord> pretrain;  // phoneme + landmark labels
  std::vector<ClipRecord> joint;     // fully labelled
  std::vector<ClipRecord> test;      // fully labelled
  Vec<float> neutral_face = Vec<float>::Zero(kLandmarkDim);
};

struct ConditionRun {
  ModelParams params;
  Scores scores;
  bool calibrated_on_training = false;  // too few joint clips for a hold-out split
};

/// Trains the condition's architecture with `tc` and scores it on `data.test`.
inline ConditionRun run_condition_model(Condition condition, const ConditionData& data, const ModelConfig& base,
                                        const TrainConfig& tc) {
  require(!data.joint.empty(), ErrorCategory::kInvalidArgument, "no joint-training clips");
  require(!data.test.empty(), ErrorCategory::kInvalidArgument, "no test clips");
  const ModelConfig mc = condition_model(condition, base);
  const bool pre = condition_pretrains(condition);
  if (pre) require(!data.pretrain.empty(), ErrorCategory::kInvalidArgument, "no pre-training clips");

  ConditionRun run;
  std::vector<ClipRecord> train = data.joint, holdout;
  if (data.joint.size() >= 2) {
    std::tie(train, holdout) = holdout_split(data.joint, tc.holdout_fraction, tc.seed);
  } else {
    holdout = data.joint;
    run.calibrated_on_training = true;
  }
  run.params = prepare_model(mc, pre ? data.pretrain : train, data.neutral_face, tc.seed);
  if (pre) pretrain(run.params, data.pretrain, data.neutral_face, tc);
  joint_train(run.params, train, data.neutral_face, tc);
  run.params.thresholds = calibrate_thresholds(run.params, holdout);
  run.scores = score_clips(run.params, data.test);
  return run;
}

// ---------------------------------------------------------------------------
// Reports

struct ReportRow {
  std::string condition;
  std::string split;  // test speaker or "all"
  std::uint64_t seed = 0;
  Scores scores;
};

struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation across defined values
  int count = 0;
};

inline Aggregate aggregate(const std::vector<Percent>& values) {
  Aggregate a;
  double sum = 0.0;
  for (const auto& v : values) {
    if (!v.defined) continue;
    sum += v.value;
    ++a.count;
  }
  if (a.count == 0) return a;
  a.mean = sum / a.count;
  if (a.count > 1) {
    double sq = 0.0;
    for (const auto& v : values) {
      if (v.defined) sq += (v.value - a.mean) * (v.value - a.mean);
    }
    a.sd = std::sqrt(sq / (a.count - 1));
  }
  return a;
}

struct EvalReport {
  std::string condition;
  std::vector<ReportRow> rows;
  Aggregate precision, recall, curve_diff, phoneme_accuracy;

  void finalize() {
    std::vector<Percent> p, r, d, a;
    for (const auto& row : rows) {
      p.push_back(row.scores.precision);
      r.push_back(row.scores.recall);
      d.push_back({row.scores.curve_diff, true});
      a.push_back(row.scores.phoneme_accuracy);
    }
    precision = aggregate(p);
    recall = aggregate(r);
    curve_diff = aggregate(d);
    phoneme_accuracy = aggregate(a);
  }
};

inline EvalReport run_condition(Condition condition, const ConditionData& data, const ModelConfig& base,
                                const TrainConfig& tc) {
  EvalReport report;
  report.condition = to_string(condition);
  const auto run = run_condition_model(condition, data, base, tc);
  report.rows.push_back({report.condition, "all", tc.seed, run.scores});
  report.finalize();
  return report;
}

/// One split per speaker: the speaker's clips are the test set, every other clip trains
/// both phases (phoneme and landmark labels for pre-training, all labels for joint training).
inline EvalReport leave_one_speaker_out(Condition condition, const Dataset& corpus, const ModelConfig& base,
                                        const TrainConfig& tc) {
  const auto speakers = corpus.speakers();
  require(speakers.size() >= 2, ErrorCategory::kInvalidArgument,
          "leave-one-speaker-out needs at least two speakers, got " + std::to_string(speakers.size()));
  EvalReport report;
  report.condition = to_string(condition);
  for (const auto& s : speakers) {
    ConditionData data;
    data.neutral_face = corpus.neutral_face;
    for (const auto& c : corpus.clips) (c.speaker_id == s ? data.test : data.joint).push_back(c);
    data.pretrain = data.joint;
    const auto run = run_condition_model(condition, data, base, tc);
    report.rows.push_back({report.condition, s, tc.seed, run.scores});
  }
  report.finalize();
  return report;
}

inline std::string format_percent(const Percent& p) {
  if (!p.defined) return "undefined";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << p.value;
  return os.str();
}

inline void write_report_table(std::ostream& os, const std::vector<EvalReport>& reports) {
  os << std::left << std::setw(16) << "condition" << std::setw(10) << "split" << std::setw(8) << "seed"
     << std::setw(12) << "precision" << std::setw(12) << "recall" << std::setw(12) << "curve_diff" << "phoneme_acc\n";
  for (const auto& r : reports) {
    for (const auto& row : r.rows) {
      os << std::left << std::setw(16) << row.condition << std::setw(10) << row.split << std::setw(8) << row.seed
         << std::setw(12) << format_percent(row.scores.precision) << std::setw(12)
         << format_percent(row.scores.recall) << std::setw(12) << format_percent({row.scores.curve_diff, true})
         << format_percent(row.scores.phoneme_accuracy) << '\n';
    }
    auto agg = [](const Aggregate& a) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(2) << a.mean << "±" << a.sd;
      return s.str();
    };
    os << std::left << std::setw(16) << r.condition << std::setw(10) << "mean±sd" << std::setw(8) << "" << std::setw(13)
       << agg(r.precision) << std::setw(13) << agg(r.recall) << std::setw(13) << agg(r.curve_diff)
       << agg(r.phoneme_accuracy) << '\n';
  }
}

inline void write_report_csv(std::ostream& os, const std::vector<EvalReport>& reports) {
  os << "condition,split,seed,precision,recall,curve_diff,phoneme_accuracy,active_fraction\n";
  auto cell = [](const Percent& p) { return p.defined ? detail::format_double(p.value) : std::string("undefined"); };
  for (const auto& r : reports) {
    for (const auto& row : r.rows) {
      os << row.condition << ',' << row.split << ',' << row.seed << ',' << cell(row.scores.precision) << ','
         << cell(row.scores.recall) << ',' << detail::format_double(row.scores.curve_diff) << ','
         << cell(row.scores.phoneme_accuracy) << ',' << detail::format_double(row.scores.active_fraction) << '\n';
    }
  }
}

inline nlohmann::json report_json(const std::vector<EvalReport>& reports) {
  auto pct = [](const Percent& p) -> nlohmann::json { return p.defined ? nlohmann::json(p.value) : nlohmann::json(); };
  auto agg = [](const Aggregate& a) { return nlohmann::json{{"mean", a.mean}, {"sd", a.sd}, {"count", a.count}}; };
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
      rows.push_back({{"split", row.split},
                      {"seed", row.seed},
                      {"precision", pct(row.scores.precision)},
                      {"recall", pct(row.scores.recall)},
                      {"curve_diff", row.scores.curve_diff},
                      {"phoneme_accuracy", pct(row.scores.phoneme_accuracy)},
                      {"active_fraction", row.scores.active_fraction}});
    }
    j.push_back({{"condition", r.condition},
                 {"rows", rows},
                 {"precision", agg(r.precision)},
                 {"recall", agg(r.recall)},
                 {"curve_diff", agg(r.curve_diff)},
                 {"phoneme_accuracy", agg(r.phoneme_accuracy)}});
  }
  return j;
}

}  // namespace visemenet
