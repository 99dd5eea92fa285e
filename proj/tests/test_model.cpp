#include "visemenet/checkpoint.hpp"
#include "visemenet/gradcheck.hpp"
#include "visemenet/model.hpp"

#include "model_fixtures.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

namespace visemenet {
namespace {

using testing::small_config;
using testing::small_model;

TEST(Model, DefaultArchitectureDimensions) {
  const ModelConfig cfg;
  EXPECT_EQ(cfg.lstm_layers, 3);
  EXPECT_EQ(cfg.lstm_hidden, 256);
  EXPECT_EQ(cfg.viseme_input_dim(), 20 + 76 + 65);
  std::mt19937_64 rng(1);
  const auto w = init_weights<float>(cfg, rng);
  ASSERT_EQ(w.shared.size(), 3u);
  EXPECT_EQ(w.shared[0].w_input.cols(), 1560);
  EXPECT_EQ(w.shared[1].w_input.cols(), 256);
  EXPECT_EQ(w.phoneme.output.weight.rows(), 20);
  EXPECT_EQ(w.landmark.output.weight.rows(), 76);
  EXPECT_EQ(w.activation.lstm.size(), 3u);
  EXPECT_EQ(w.activation.lstm[0].w_input.cols(), 161);
  EXPECT_EQ(w.activation.decoder.output.weight.rows(), 29);
  EXPECT_EQ(w.rig.decoder.output.weight.rows(), 29);
  EXPECT_EQ(w.jali.decoder.output.weight.rows(), 2);
}

TEST(Model, AblatedStagesShrinkTheVisemeInput) {
  ModelConfig c = small_config();
  c.phoneme_stage = false;
  EXPECT_EQ(c.viseme_input_dim(), 76 + 65);
  c.landmark_stage = false;
  EXPECT_FALSE(c.has_shared());
  EXPECT_EQ(c.viseme_input_dim(), 65);
  const auto p = init_model_params(c, 3);
  EXPECT_TRUE(p.weights.shared.empty());
  EXPECT_EQ(p.weights.activation.lstm[0].w_input.cols(), 65);
}

TEST(Model, FullForwardOutputDimensions) {
  const ModelParams p = small_model(small_config(), 2);
  const AudioClip clip = testing::noisy_tones(160 * 30 + 240, 4);
  const auto out = full_forward(clip, p);
  ASSERT_EQ(out.frames(), 30u);
  EXPECT_EQ(out.phoneme_probs.rows(), 20);
  EXPECT_EQ(out.phoneme_probs.cols(), 30);
  EXPECT_EQ(out.landmarks.rows(), 76);
  EXPECT_EQ(out.rig.front().activation_probs.size(), 29u);
  EXPECT_EQ(out.rig.front().rig.size(), 29u);
  EXPECT_EQ(out.rig.front().jali.size(), 2u);
  for (Eigen::Index t = 0; t < 30; ++t) EXPECT_NEAR(out.phoneme_probs.col(t).sum(), 1.0f, 1e-5f);
}

TEST(Model, PerFrameEvaluatorMatchesBatchedForward) {
  const ModelConfig cfg = small_config();
  std::mt19937_64 rng(5);
  Weights<double> w = init_weights<double>(cfg, rng);
  const int T = 12;
  const Mat<double> frames = gradcheck::detail::random_matrix(kFeatureDim, T, rng);
  const Mat<double> ctx = stack_all_contexts<double>(frames);
  const auto batch = forward(cfg, w, ctx, frames, 1, true);
  FrameEvaluator<double> eval(cfg, w);
  for (int t = 0; t < T; ++t) {
    const auto& o = eval.step(ctx.col(t), frames.col(t));
    EXPECT_LT((o.phoneme_probs - batch.phoneme_probs.col(t)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((o.landmarks - batch.landmarks.col(t)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((o.activation_probs - batch.activation_probs.col(t)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((o.rig - batch.rig.col(t)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((o.jali - batch.jali.col(t)).cwiseAbs().maxCoeff(), 1e-12);
  }
  // Stage entry points agree with the joint forward pass.
  const auto [logits, probs] = phoneme_stage(ctx, cfg, w);
  EXPECT_LT((probs - batch.phoneme_probs).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((landmark_stage(ctx, cfg, w) - batch.landmarks).cwiseAbs().maxCoeff(), 1e-15);
  const auto rig = viseme_stage(logits, batch.landmarks, frames, cfg, w, Vec<float>::Constant(29, 0.5f));
  ASSERT_EQ(rig.size(), static_cast<std::size_t>(T));
  EXPECT_NEAR(rig[3].activation_probs[7], batch.activation_probs(7, 3), 1e-6);
}

TEST(Model, BatchedSequencesAreIndependent) {
  const ModelConfig cfg = small_config();
  std::mt19937_64 rng(6);
  const Weights<double> w = init_weights<double>(cfg, rng);
  const int T = 6, B = 3;
  const Mat<double> frames = gradcheck::detail::random_matrix(kFeatureDim, T * B, rng);
  const Mat<double> ctx = gradcheck::detail::random_matrix(kContextDim, T * B, rng);
  const auto all = forward(cfg, w, ctx, frames, B, true);
  for (int b = 0; b < B; ++b) {
    const auto one = forward(cfg, w, detail::gather_sequence(ctx, B, b), detail::gather_sequence(frames, B, b), 1, true);
    EXPECT_LT((one.rig - detail::gather_sequence(all.rig, B, b)).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(Model, RigFrameGatingAndClamping) {
  Vec<float> probs = Vec<float>::Constant(29, 0.4f), rig = Vec<float>::Constant(29, 1.7f), jali(2);
  probs[0] = 0.6f;
  probs[1] = 0.5f;  // equal to the threshold: inactive (strict)
  rig[0] = 1.7f;
  rig[2] = -0.5f;
  jali << -1.0f, 0.25f;
  const auto f = make_rig_frame<float>(probs, rig, jali, Vec<float>::Constant(29, 0.5f));
  EXPECT_TRUE(f.active[0]);
  EXPECT_FALSE(f.active[1]);
  EXPECT_EQ(f.rig[0], 1.0f);
  EXPECT_EQ(f.rig[1], 0.0f);
  EXPECT_EQ(f.rig[2], 0.0f);
  EXPECT_EQ(f.jali[0], 0.0f);
  EXPECT_EQ(f.jali[1], 0.25f);
}

TEST(Model, InputShapeErrors) {
  const ModelParams p = small_model(small_config(), 7);
  FrameEvaluator<float> eval(p.config, p.weights);
  EXPECT_THROW(eval.step(Vec<float>::Zero(1560), Vec<float>::Zero(64)), Error);
  EXPECT_THROW(eval.step(Vec<float>::Zero(1559), Vec<float>::Zero(65)), Error);
  Weights<float> broken = p.weights;
  broken.jali.decoder.output.bias.resize(3);
  EXPECT_THROW(validate_weights(broken, p.config), Error);
}

TEST(Checkpoint, RoundTripIsExact) {
  ModelConfig cfg = small_config();
  cfg.landmark_stage = false;
  ModelParams p = small_model(cfg, 8);
  p.stats.mean.setLinSpaced(kFeatureDim, -1.0, 1.0);
  p.neutral_face.setLinSpaced(kLandmarkDim, 0.0f, 1.0f);
  p.thresholds.setLinSpaced(kRigDim, 0.1f, 0.9f);
  std::stringstream ss;
  write_checkpoint(ss, p);
  const ModelParams q = read_checkpoint(ss);
  EXPECT_EQ(q.config, p.config);
  EXPECT_EQ(q.stats.mean, p.stats.mean);
  EXPECT_EQ(q.thresholds, p.thresholds);
  EXPECT_EQ(q.neutral_face, p.neutral_face);
  const auto a = tensor_table(p.weights, cfg), b = tensor_table(q.weights, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].name, b[k].name);
    EXPECT_EQ(Vec<float>(a[k].flat()), Vec<float>(b[k].flat())) << a[k].name;
  }
  const AudioClip clip = testing::noisy_tones(3000, 9);
  const auto x = full_forward(clip, p), y = full_forward(clip, q);
  for (std::size_t t = 0; t < x.frames(); ++t) EXPECT_EQ(x.rig[t].activation_probs, y.rig[t].activation_probs);
}

TEST(Checkpoint, CorruptInputsAreRejected) {
  const ModelParams p = small_model(small_config(), 9);
  std::stringstream ss;
  write_checkpoint(ss, p);
  const std::string bytes = ss.str();
  std::stringstream bad_magic("XXXX" + bytes.substr(4));
  EXPECT_THROW(read_checkpoint(bad_magic), Error);
  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  try {
    read_checkpoint(truncated);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kFormat);
  }
}

// Finite differences through the whole network (tiny widths).
TEST(ModelGradients, PretrainJointAndAudioOnly) {
  std::mt19937_64 rng(41);
  const ModelConfig tiny = gradcheck::tiny_config();
  const auto pre = gradcheck::check_model(tiny, false, rng, "pretrain");
  EXPECT_LT(pre.error(), 1e-4);
  const auto joint = gradcheck::check_model(tiny, true, rng, "joint");
  EXPECT_LT(joint.error(), 1e-4);
  ModelConfig audio = tiny;
  audio.phoneme_stage = audio.landmark_stage = false;
  const auto a = gradcheck::check_model(audio, true, rng, "audio");
  EXPECT_LT(a.error(), 1e-4);
}

}  // namespace
}  // namespace visemenet
