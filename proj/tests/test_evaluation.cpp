#include "visemenet/evaluation.hpp"
#include "visemenet/synth.hpp"

#include "metric_oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

namespace visemenet {
namespace {

TEST(Metrics, MatchScalarOracles) {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 200; ++i) {
    const auto x = testing::random_toy_instance(rng);
    const Percent p = activation_precision(x.pred_mask, x.gt_mask);
    const Percent r = activation_recall(x.pred_mask, x.gt_mask);
    const double np = testing::naive_precision(x), nr = testing::naive_recall(x);
    EXPECT_EQ(p.defined, !std::isnan(np));
    EXPECT_EQ(r.defined, !std::isnan(nr));
    if (p.defined) EXPECT_NEAR(p.value, np, 1e-10);
    if (r.defined) EXPECT_NEAR(r.value, nr, 1e-10);
    EXPECT_NEAR(motion_curve_difference(x.pred_rig, x.gt_rig, x.pred_mask, x.gt_mask, x.pred_jali, x.gt_jali),
                testing::naive_curve_difference(x), 1e-10);
  }
}

TEST(Metrics, UndefinedWhenNothingPredicted) {
  const std::vector<Mask> none{Mask::Zero(3, 4)}, some{Mask::Ones(3, 4)};
  EXPECT_FALSE(activation_precision(none, some).defined);
  EXPECT_TRUE(activation_recall(none, some).defined);
  EXPECT_DOUBLE_EQ(activation_recall(none, some).value, 0.0);
  EXPECT_FALSE(activation_recall(some, none).defined);
  EXPECT_THROW(activation_precision(none, {Mask::Zero(3, 5)}), Error);
}

TEST(Metrics, CurveDifferenceHandExample) {
  // One rig row over 4 frames, active in pred at {0, 1} and in truth at {1, 2}.
  Mat<float> pr(1, 4), gr(1, 4), pj = Mat<float>::Zero(2, 4), gj = Mat<float>::Zero(2, 4);
  pr << 0.5f, 0.25f, 0.0f, 0.0f;
  gr << 0.0f, 0.75f, 0.5f, 0.0f;
  Mask pm(1, 4), gm(1, 4);
  pm << 1, 1, 0, 0;
  gm << 0, 1, 1, 0;
  gj(0, 3) = 0.5f;
  // |diffs| on the union {0, 1, 2}: 0.5 + 0.5 + 0.5; JALI: 8 cells summing to 0.5.
  const auto acc = curve_diff_terms(pr, gr, pm, gm, pj, gj);
  EXPECT_EQ(acc.cells, 3 + 8);
  EXPECT_DOUBLE_EQ(acc.abs_sum, 2.0);
  EXPECT_DOUBLE_EQ(acc.percent(), 100.0 * 2.0 / 11.0);
}

TEST(Metrics, PhonemeAccuracySkipsUnlabelled) {
  Mat<float> probs = Mat<float>::Zero(20, 4);
  probs(3, 0) = probs(5, 1) = probs(7, 2) = probs(1, 3) = 1.0f;
  const auto c = phoneme_accuracy_counts(probs, {3, 6, -1, 1});
  EXPECT_EQ(c.correct, 2);
  EXPECT_EQ(c.labelled, 3);
  EXPECT_NEAR(c.percent().value, 200.0 / 3.0, 1e-12);
}

TEST(Aggregate, SampleStandardDeviationOverDefinedValues) {
  const auto a = aggregate({{1.0, true}, {}, {3.0, true}, {8.0, true}});
  EXPECT_EQ(a.count, 3);
  EXPECT_DOUBLE_EQ(a.mean, 4.0);
  EXPECT_NEAR(a.sd, std::sqrt((9.0 + 1.0 + 16.0) / 2.0), 1e-12);
  EXPECT_EQ(aggregate({{2.0, true}}).sd, 0.0);
  EXPECT_EQ(aggregate({{}, {}}).count, 0);
}

TEST(Conditions, NamesAndStages) {
  for (auto c : {Condition::kFull, Condition::kLandmarkBased, Condition::kPhonemeBased, Condition::kAudioBased,
                 Condition::kNoTransfer}) {
    EXPECT_EQ(parse_condition(to_string(c)), c);
  }
  EXPECT_THROW(parse_condition("everything"), Error);
  const ModelConfig base;
  EXPECT_TRUE(condition_model(Condition::kFull, base).phoneme_stage);
  EXPECT_TRUE(condition_model(Condition::kNoTransfer, base).landmark_stage);
  EXPECT_FALSE(condition_model(Condition::kLandmarkBased, base).phoneme_stage);
  EXPECT_FALSE(condition_model(Condition::kPhonemeBased, base).landmark_stage);
  EXPECT_FALSE(condition_model(Condition::kAudioBased, base).has_shared());
  EXPECT_TRUE(condition_pretrains(Condition::kPhonemeBased));
  EXPECT_FALSE(condition_pretrains(Condition::kNoTransfer));
  EXPECT_FALSE(condition_pretrains(Condition::kAudioBased));
}

ModelConfig tiny_model() {
  ModelConfig c;
  c.lstm_layers = 1;
  c.lstm_hidden = c.decoder_hidden = c.viseme_hidden = c.viseme_decoder_hidden = 6;
  return c;
}

TrainConfig tiny_train() {
  TrainConfig tc;
  tc.batch_size = 2;
  tc.subsequence_len = 40;
  tc.learning_rate = 0.05;
  tc.pretrain_iters = 3;
  tc.joint_iters = 3;
  tc.clip_norm = 1.0;
  return tc;
}

TEST(Conditions, EveryConditionRunsEndToEnd) {
  const Dataset d = synth::generate_dataset(2, 2, 3);
  ConditionData data;
  data.neutral_face = d.neutral_face;
  for (const auto& c : d.clips) (c.speaker_id == "spk01" ? data.test : data.joint).push_back(c);
  data.pretrain = data.joint;
  for (auto c : {Condition::kFull, Condition::kLandmarkBased, Condition::kPhonemeBased, Condition::kAudioBased,
                 Condition::kNoTransfer}) {
    const auto run = run_condition_model(c, data, tiny_model(), tiny_train());
    EXPECT_EQ(run.params.config.has_shared(), c != Condition::kAudioBased);
    EXPECT_EQ(run.scores.phoneme_accuracy.defined, run.params.config.phoneme_stage) << to_string(c);
    EXPECT_GE(run.scores.curve_diff, 0.0);
    EXPECT_GE(run.scores.active_fraction, 0.0);
    EXPECT_LE(run.scores.active_fraction, 1.0);
    EXPECT_FALSE(run.calibrated_on_training);
  }
}

TEST(Conditions, LeaveOneSpeakerOutHasOneRowPerSpeaker) {
  const Dataset d = synth::generate_dataset(3, 2, 4);
  const auto report = leave_one_speaker_out(Condition::kAudioBased, d, tiny_model(), tiny_train());
  ASSERT_EQ(report.rows.size(), 3u);
  EXPECT_EQ(report.rows[1].split, d.speakers()[1]);
  EXPECT_EQ(report.curve_diff.count, 3);

  Dataset one = synth::generate_dataset(1, 2, 4);
  EXPECT_THROW(leave_one_speaker_out(Condition::kFull, one, tiny_model(), tiny_train()), Error);
}

EvalReport fake_report() {
  EvalReport r;
  r.condition = "full";
  Scores a, b;
  a.precision = {80.0, true};
  a.recall = {70.0, true};
  a.curve_diff = 12.5;
  b.recall = {60.0, true};
  b.curve_diff = 7.5;
  r.rows = {{"full", "spk00", 1, a}, {"full", "spk01", 1, b}};
  r.finalize();
  return r;
}

TEST(Reports, Writers) {
  const std::vector<EvalReport> reports{fake_report()};
  EXPECT_EQ(reports[0].precision.count, 1);
  EXPECT_DOUBLE_EQ(reports[0].recall.mean, 65.0);
  EXPECT_DOUBLE_EQ(reports[0].curve_diff.mean, 10.0);

  std::ostringstream csv;
  write_report_csv(csv, reports);
  const std::string s = csv.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 3);
  EXPECT_NE(s.find("full,spk01,1,undefined,60,7.5,undefined,0\n"), std::string::npos);

  std::ostringstream table;
  write_report_table(table, reports);
  EXPECT_NE(table.str().find("undefined"), std::string::npos);
  EXPECT_NE(table.str().find("mean±sd"), std::string::npos);

  const auto j = report_json(reports);
  EXPECT_EQ(j[0]["condition"], "full");
  EXPECT_TRUE(j[0]["rows"][1]["precision"].is_null());
  EXPECT_DOUBLE_EQ(j[0]["rows"][0]["precision"].get<double>(), 80.0);
  EXPECT_EQ(j[0]["recall"]["count"], 2);
}

}  // namespace
}  // namespace visemenet
