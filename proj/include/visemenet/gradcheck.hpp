#pragma once

// Central finite-difference checks of every analytic gradient in double precision.

#include "visemenet/losses.hpp"
#include "visemenet/model.hpp"
#include "visemenet/net_core.hpp"
#include "visemenet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace visemenet::gradcheck {

inline constexpr double kStep = 1e-5;

namespace detail {
inline std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}
}  // namespace detail

/// |a - fd| / max(|a|, |fd|, 1e-8)
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

struct CheckResult {
  std::string name;
  double max_rel_error = 0.0;   // worst entry
  double norm_rel_error = 0.0;  // |a - fd| / max(|a|, |fd|, 1e-8) over the whole gradient vector
  std::size_t checked = 0;
  std::size_t skipped = 0;  // entries whose step crossed a kink
  std::string worst;  // tensor[index] of the largest error
  bool elementwise = true;  // which error the tolerance applies to

  double error() const { return elementwise ? max_rel_error : norm_rel_error; }
  bool passed(double tolerance) const { return checked > 0 && error() < tolerance; }
};

/// Signs of every quantity that enters the loss through a kink (ReLU, |x|).
using KinkSignature = std::vector<std::int8_t>;

/// Loss that can also report its kink signature.
using SignedLoss = std::function<double(KinkSignature*)>;

/// Compares analytic gradients with central differences of `loss` for every entry of
/// every tensor. `analytic[k]` must match `params[k]` in size. When the loss reports a
/// signature, entries whose +-step crosses a kink are not compared (the difference
/// quotient is meaningless there) and are counted in `skipped`.
inline CheckResult check(const std::string& name, const std::vector<nn::TensorRef<double>>& params,
                         const std::vector<nn::TensorRef<double>>& analytic, const SignedLoss& loss,
                         double step = kStep) {
  require_shape(params.size() == analytic.size(), "gradient check: tensor lists differ");
  CheckResult r;
  r.name = name;
  double diff_sq = 0.0, a_sq = 0.0, fd_sq = 0.0;
  KinkSignature base, up_sig, down_sig;
  loss(&base);
  const bool tracks_kinks = !base.empty();
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_shape(params[k].size() == analytic[k].size(), "gradient check: shape mismatch for " + params[k].name);
    auto p = params[k].flat();
    const auto g = analytic[k].flat();
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + step;
      const double up = loss(tracks_kinks ? &up_sig : nullptr);
      p[i] = saved - step;
      const double down = loss(tracks_kinks ? &down_sig : nullptr);
      p[i] = saved;
      if (tracks_kinks && (up_sig != base || down_sig != base)) {
        ++r.skipped;
        continue;
      }
      const double fd = (up - down) / (2.0 * step);
      const double err = relative_error(g[i], fd);
      diff_sq += (g[i] - fd) * (g[i] - fd);
      a_sq += g[i] * g[i];
      fd_sq += fd * fd;
      ++r.checked;
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst = params[k].name + "[" + std::to_string(i) + "] analytic " + detail::format_g(g[i]) + " numeric " +
                  detail::format_g(fd);
      }
    }
  }
  r.norm_rel_error = std::sqrt(diff_sq) / std::max({std::sqrt(a_sq), std::sqrt(fd_sq), 1e-8});
  return r;
}

inline CheckResult check(const std::string& name, const std::vector<nn::TensorRef<double>>& params,
                         const std::vector<nn::TensorRef<double>>& analytic, const std::function<double()>& loss,
                         double step = kStep) {
  return check(name, params, analytic, SignedLoss([&](KinkSignature*) { return loss(); }), step);
}

inline nn::TensorRef<double> ref(const std::string& name, Mat<double>& m) { return {name, m.data(), m.rows(), m.cols()}; }
inline nn::TensorRef<double> ref(const std::string& name, Vec<double>& v) { return {name, v.data(), v.rows(), 1}; }

namespace detail {

inline Mat<double> random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline Mask random_mask(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double p = 0.6) {
  std::bernoulli_distribution b(p);
  Mask m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = b(rng) ? 1 : 0;
  return m;
}

/// Rows whose steps alternate between magnitudes in [0.2, 0.4] and [0.6, 1.0] (times
/// `scale`) with random signs, so every central difference is at least 0.1 * scale away
/// from the L1 kink at zero.
inline Mat<double> kink_free_curves(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  Mat<double> m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    m(i, 0) = (2.0 * u(rng) - 1.0) * scale;
    for (Eigen::Index t = 1; t < c; ++t) {
      const double mag = t % 2 ? 0.2 + 0.2 * u(rng) : 0.6 + 0.4 * u(rng);
      m(i, t) = m(i, t - 1) + (coin(rng) ? mag : -mag) * scale;
    }
  }
  return m;
}

/// Targets displaced from `pred` by 0.2..1.0 times `scale` in a random direction.
inline Mat<double> offset_targets(const Mat<double>& pred, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::bernoulli_distribution coin(0.5);
  Mat<double> m = pred;
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += (coin(rng) ? 1.0 : -1.0) * u(rng) * scale;
  return m;
}

/// Shifts each hidden bias of `p` by the smallest amount that keeps every ReLU
/// pre-activation over `input` at least `margin` away from zero.
inline void clear_relu_kinks(nn::DecoderParams<double>& p, const Mat<double>& input, double margin = 0.01) {
  const Mat<double> pre = (p.hidden.weight * input).colwise() + p.hidden.bias;
  for (Eigen::Index j = 0; j < pre.rows(); ++j) {
    auto clear = [&](double shift) { return ((pre.row(j).array() + shift).abs() >= margin).all(); };
    std::vector<double> candidates = {0.0};
    for (Eigen::Index t = 0; t < pre.cols(); ++t) {
      candidates.push_back(-pre(j, t) + margin);
      candidates.push_back(-pre(j, t) - margin);
    }
    std::sort(candidates.begin(), candidates.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    for (double c : candidates) {
      if (clear(c)) {
        p.hidden.bias[j] += c;
        break;
      }
    }
  }
}

inline std::vector<int> random_labels(Eigen::Index T, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(-1, kPhonemeGroups - 1);
  std::vector<int> y(static_cast<std::size_t>(T));
  for (auto& v : y) v = u(rng);
  y[0] = std::max(y[0], 0);  // at least one labelled frame
  return y;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Layers

inline CheckResult check_dense(std::mt19937_64& rng) {
  nn::DenseParams<double> p = nn::init_dense<double>(4, 5, rng);
  p.bias = detail::random_matrix(4, 1, rng, 0.5);
  Mat<double> x = detail::random_matrix(5, 3, rng);
  const Mat<double> R = detail::random_matrix(4, 3, rng);
  auto g = nn::DenseParams<double>::zeros(4, 5);
  const Mat<double> dx = nn::dense_backward(p, x, R, g);
  Mat<double> gx = dx;
  auto loss = [&] { return (R.array() * nn::dense_forward(p, x).array()).sum(); };
  std::vector<nn::TensorRef<double>> params, grads;
  nn::append_tensors("dense", p, params);
  nn::append_tensors("dense", g, grads);
  params.push_back(ref("input", x));
  grads.push_back(ref("input", gx));
  return check("dense layer", params, grads, loss);
}

inline CheckResult check_lstm_layer(std::mt19937_64& rng) {
  const Eigen::Index in = 5, H = 4, B = 2, T = 3;
  nn::LstmLayerParams<double> p = nn::init_lstm<double>(H, in, rng);
  p.bias += detail::random_matrix(4 * H, 1, rng, 0.3);
  Mat<double> x = detail::random_matrix(in, B * T, rng);
  const Mat<double> R = detail::random_matrix(H, B * T, rng);
  nn::LstmCache<double> cache;
  nn::lstm_layer_forward(p, x, B, &cache);
  auto g = nn::LstmLayerParams<double>::zeros(H, in);
  Mat<double> gx = nn::lstm_layer_backward(p, cache, R, g, true);
  auto loss = [&] { return (R.array() * nn::lstm_layer_forward(p, x, B).array()).sum(); };
  std::vector<nn::TensorRef<double>> params, grads;
  nn::append_tensors("lstm", p, params);
  nn::append_tensors("lstm", g, grads);
  params.push_back(ref("input", x));
  grads.push_back(ref("input", gx));
  return check("lstm layer (BPTT)", params, grads, loss);
}

inline CheckResult check_lstm_stack(std::mt19937_64& rng) {
  const Eigen::Index in = 5, H = 4, B = 2, T = 3;
  std::vector<nn::LstmLayerParams<double>> layers(3), grads(3);
  for (int l = 0; l < 3; ++l) {
    layers[l] = nn::init_lstm<double>(H, l == 0 ? in : H, rng);
    grads[l] = nn::LstmLayerParams<double>::zeros(H, l == 0 ? in : H);
  }
  Mat<double> x = detail::random_matrix(in, B * T, rng);
  const Mat<double> R = detail::random_matrix(H, B * T, rng);
  nn::LstmStackCache<double> cache;
  nn::lstm_stack_forward<double>(std::span<const nn::LstmLayerParams<double>>(layers), x, B, &cache);
  Mat<double> gx = nn::lstm_stack_backward<double>(std::span<const nn::LstmLayerParams<double>>(layers), cache, R,
                                                  std::span<nn::LstmLayerParams<double>>(grads), true);
  auto loss = [&] { return (R.array() * nn::lstm_stack_forward<double>(std::span<const nn::LstmLayerParams<double>>(layers), x, B).array())
        .sum(); };
  std::vector<nn::TensorRef<double>> params, g;
  for (int l = 0; l < 3; ++l) {
    nn::append_tensors("lstm" + std::to_string(l), layers[l], params);
    nn::append_tensors("lstm" + std::to_string(l), grads[l], g);
  }
  params.push_back(ref("input", x));
  g.push_back(ref("input", gx));
  return check("3-layer lstm stack", params, g, loss);
}

inline CheckResult check_decoder(std::mt19937_64& rng) {
  nn::DecoderParams<double> p{nn::init_dense<double>(6, 4, rng), nn::init_dense<double>(3, 6, rng)};
  p.hidden.bias = detail::random_matrix(6, 1, rng, 0.5);
  nn::DecoderParams<double> g{nn::DenseParams<double>::zeros(6, 4), nn::DenseParams<double>::zeros(3, 6)};
  Mat<double> x = detail::random_matrix(4, 5, rng);
  detail::clear_relu_kinks(p, x);
  const Mat<double> R = detail::random_matrix(3, 5, rng);
  nn::DecoderCache<double> cache;
  nn::decoder_forward(p, x, &cache);
  Mat<double> gx = nn::decoder_backward(p, cache, R, g);
  auto loss = [&] { return (R.array() * nn::decoder_forward(p, x).array()).sum(); };
  std::vector<nn::TensorRef<double>> params, grads;
  nn::append_tensors("decoder", p, params);
  nn::append_tensors("decoder", g, grads);
  params.push_back(ref("input", x));
  grads.push_back(ref("input", gx));
  return check("decoder (relu + linear)", params, grads, loss);
}

// ---------------------------------------------------------------------------
// LSTM -> decoder -> softmax -> cross-entropy, end to end

inline CheckResult check_pipeline(std::mt19937_64& rng) {
  const Eigen::Index in = 6, H = 4, B = 2, T = 3;
  std::vector<nn::LstmLayerParams<double>> layers, lgrads;
  for (int l = 0; l < 1; ++l) {
    layers.push_back(nn::init_lstm<double>(H, l == 0 ? in : H, rng));
    lgrads.push_back(nn::LstmLayerParams<double>::zeros(H, l == 0 ? in : H));
  }
  nn::DecoderParams<double> dec{nn::init_dense<double>(H, H, rng), nn::init_dense<double>(kPhonemeGroups, H, rng)};
  dec.hidden.bias = detail::random_matrix(H, 1, rng, 0.5);
  nn::DecoderParams<double> dgrad{nn::DenseParams<double>::zeros(H, H), nn::DenseParams<double>::zeros(kPhonemeGroups, H)};
  const Mat<double> x = detail::random_matrix(in, B * T, rng);
  std::vector<std::vector<int>> labels;
  for (Eigen::Index b = 0; b < B; ++b) labels.push_back(detail::random_labels(T, rng));
  const std::span<const nn::LstmLayerParams<double>> stack(layers);

  auto per_sequence = [&](const Mat<double>& logits) {
    std::vector<Mat<double>> probs;
    const Mat<double> p = nn::apply_head(logits, nn::Head::kSoftmax);
    for (Eigen::Index b = 0; b < B; ++b) probs.push_back(visemenet::detail::gather_sequence(p, B, b));
    return probs;
  };
  nn::LstmStackCache<double> lcache;
  nn::DecoderCache<double> dcache;
  const Mat<double> h = nn::lstm_stack_forward(stack, x, B, &lcache);
  detail::clear_relu_kinks(dec, h);
  const Mat<double> logits = nn::decoder_forward(dec, h, &dcache);
  std::vector<Mat<double>> d_logits;
  losses::phoneme_ce_loss(per_sequence(logits), labels, &d_logits);
  const Mat<double> d_h = nn::decoder_backward(dec, dcache, visemenet::detail::scatter_all(d_logits, kPhonemeGroups, B, T), dgrad);
  nn::lstm_stack_backward(stack, lcache, d_h, std::span<nn::LstmLayerParams<double>>(lgrads), false);

  auto loss = [&] {
    return losses::phoneme_ce_loss(per_sequence(nn::decoder_forward(dec, nn::lstm_stack_forward(stack, x, B))), labels);
  };
  std::vector<nn::TensorRef<double>> params, grads;
  for (int l = 0; l < 1; ++l) {
    nn::append_tensors("lstm" + std::to_string(l), layers[l], params);
    nn::append_tensors("lstm" + std::to_string(l), lgrads[l], grads);
  }
  nn::append_tensors("decoder", dec, params);
  nn::append_tensors("decoder", dgrad, grads);
  return check("lstm + decoder + cross-entropy", params, grads, loss);
}

// ---------------------------------------------------------------------------
// Loss terms, each against its own input (logits for the softmax and sigmoid terms).
// Curves keep every L1 argument well clear of zero relative to the step. Their small
// scale leaves the L1 gradients unchanged while shrinking the rounding noise of the
// difference quotient, which matters where the exact gradient is zero.

inline std::vector<CheckResult> check_losses(std::mt19937_64& rng) {
  const std::vector<Eigen::Index> lengths = {4, 6, 5};
  const std::size_t N = lengths.size();
  const double curve_scale = 0.01;
  std::vector<Mat<double>> logits, act_logits, lm, lm_t, rig, rig_t, jali, jali_t;
  std::vector<std::vector<int>> labels;
  std::vector<Mask> mask;
  for (auto T : lengths) {
    logits.push_back(detail::random_matrix(kPhonemeGroups, T, rng, 2.0));
    act_logits.push_back(detail::random_matrix(kRigDim, T, rng, 2.0));
    lm.push_back(detail::kink_free_curves(kLandmarkDim, T, rng, curve_scale));
    lm_t.push_back(detail::offset_targets(lm.back(), rng, curve_scale));
    rig.push_back(detail::kink_free_curves(kRigDim, T, rng, curve_scale));
    rig_t.push_back(detail::offset_targets(rig.back(), rng, curve_scale));
    jali.push_back(detail::kink_free_curves(kJaliDim, T, rng, curve_scale));
    jali_t.push_back(detail::offset_targets(jali.back(), rng, curve_scale));
    labels.push_back(detail::random_labels(T, rng));
    mask.push_back(detail::random_mask(kRigDim, T, rng));
  }
  auto probs_of = [](const std::vector<Mat<double>>& z, nn::Head h) {
    std::vector<Mat<double>> p;
    for (const auto& m : z) p.push_back(nn::apply_head(m, h));
    return p;
  };

  std::vector<CheckResult> results;
  auto run = [&](const std::string& name, std::vector<Mat<double>>& input,
                 const std::function<double(std::vector<Mat<double>>*)>& f) {
    std::vector<Mat<double>> grad;
    f(&grad);
    std::vector<nn::TensorRef<double>> params, grads;
    for (std::size_t n = 0; n < N; ++n) {
      params.push_back(ref("clip" + std::to_string(n), input[n]));
      grads.push_back(ref("clip" + std::to_string(n), grad[n]));
    }
    results.push_back(check(name, params, grads, [&] { return f(nullptr); }));
  };

  run("loss: phoneme cross-entropy", logits, [&](std::vector<Mat<double>>* g) {
    return losses::phoneme_ce_loss(probs_of(logits, nn::Head::kSoftmax), labels, g);
  });
  run("loss: landmark l1", lm, [&](std::vector<Mat<double>>* g) { return losses::landmark_l1_loss(lm, lm_t, g); });
  run("loss: landmark smoothness", lm,
      [&](std::vector<Mat<double>>* g) { return losses::landmark_smoothness_loss(lm, g); });
  run("loss: activation bce", act_logits, [&](std::vector<Mat<double>>* g) {
    return losses::activation_bce_loss(probs_of(act_logits, nn::Head::kSigmoid), mask, g);
  });
  run("loss: masked rig l1", rig,
      [&](std::vector<Mat<double>>* g) { return losses::masked_rig_l1_loss(rig, rig_t, mask, g); });
  run("loss: rig smoothness", rig, [&](std::vector<Mat<double>>* g) { return losses::rig_smoothness_loss(rig, mask, g); });
  run("loss: jali l1", jali, [&](std::vector<Mat<double>>* g) { return losses::jali_l1_loss(jali, jali_t, g); });
  run("loss: jali smoothness", jali, [&](std::vector<Mat<double>>* g) { return losses::jali_smoothness_loss(jali, g); });
  return results;
}

// ---------------------------------------------------------------------------
// Whole network under the multi-task losses

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.lstm_hidden = 4;
  c.decoder_hidden = 4;
  c.viseme_hidden = 4;
  c.viseme_decoder_hidden = 4;
  return c;
}

/// Every parameter of the network against the pre-training loss (joint = false) or the
/// joint loss, over a batch of two 3-frame sequences.
inline CheckResult check_model(const ModelConfig& cfg, bool joint, std::mt19937_64& rng, const std::string& name) {
  const Eigen::Index B = 2, T = 3;
  Weights<double> w = init_weights<double>(cfg, rng);
  // Move biases off zero so ReLU units are not all at the same kink.
  for (auto& t : tensor_table(w, cfg)) {
    if (t.name.ends_with(".bias")) t.flat() += detail::random_matrix(t.size(), 1, rng, 0.3);
  }
  const Mat<double> frames = detail::random_matrix(kFeatureDim, B * T, rng);
  const Mat<double> contexts = detail::random_matrix(kContextDim, B * T, rng);
  ForwardCache<double> cache;
  forward(cfg, w, contexts, frames, B, true, &cache);
  if (cfg.phoneme_stage) detail::clear_relu_kinks(w.phoneme, cache.phoneme.input);
  if (cfg.landmark_stage) detail::clear_relu_kinks(w.landmark, cache.landmark.input);
  forward(cfg, w, contexts, frames, B, true, &cache);
  for (int k = 0; k < 3; ++k) detail::clear_relu_kinks(branches(w)[k]->decoder, cache.viseme_decoder[k].input);
  // L1 targets sit at least 0.02 away from the initial predictions.
  const Outputs<double> init = forward(cfg, w, contexts, frames, B, true);
  losses::Targets<double> target;
  for (Eigen::Index b = 0; b < B; ++b) {
    target.phoneme.push_back(detail::random_labels(T, rng));
    if (cfg.landmark_stage) {
      target.landmarks.push_back(detail::offset_targets(visemenet::detail::gather_sequence(init.landmarks, B, b), rng, 0.1));
    }
    target.rig.push_back(detail::offset_targets(visemenet::detail::gather_sequence(init.rig, B, b), rng, 0.1));
    target.active.push_back(detail::random_mask(kRigDim, T, rng));
    target.jali.push_back(detail::offset_targets(visemenet::detail::gather_sequence(init.jali, B, b), rng, 0.1));
  }
  const losses::PretrainWeights w1;
  const losses::JointWeights w2;
  Weights<double> grad = zeros_like(w, cfg);
  model_loss(cfg, w, contexts, frames, B, target, w1, w2, joint, &grad);
  // The reference loss is assembled from the forward outputs directly.
  auto loss = [&](KinkSignature* sig) {
    ForwardCache<double> c;
    const Outputs<double> o = forward(cfg, w, contexts, frames, B, joint, &c);
    losses::Predictions<double> pred;
    for (Eigen::Index b = 0; b < B; ++b) {
      auto seq = [&](const Mat<double>& m) { return visemenet::detail::gather_sequence(m, B, b); };
      if (cfg.phoneme_stage) pred.phoneme_probs.push_back(seq(o.phoneme_probs));
      if (cfg.landmark_stage) pred.landmarks.push_back(seq(o.landmarks));
      if (joint) {
        pred.activation_probs.push_back(seq(o.activation_probs));
        pred.rig.push_back(seq(o.rig));
        pred.jali.push_back(seq(o.jali));
      }
    }
    if (sig) {
      sig->clear();
      auto add = [&](const Mat<double>& m) {
        for (Eigen::Index i = 0; i < m.size(); ++i) sig->push_back(static_cast<std::int8_t>((m.data()[i] > 0) - (m.data()[i] < 0)));
      };
      for (const auto* d : {&c.phoneme, &c.landmark, &c.viseme_decoder[0], &c.viseme_decoder[1], &c.viseme_decoder[2]}) {
        if (d->valid) add(d->hidden);
      }
      for (std::size_t n = 0; n < pred.landmarks.size(); ++n) {
        add(losses::central_difference(pred.landmarks[n]));
        add(pred.landmarks[n] - target.landmarks[n]);
      }
      for (std::size_t n = 0; n < pred.rig.size(); ++n) {
        add(losses::central_difference(pred.rig[n]));
        add(pred.rig[n] - target.rig[n]);
        add(losses::central_difference(pred.jali[n]));
        add(pred.jali[n] - target.jali[n]);
      }
    }
    return joint ? losses::joint_loss(pred, target, w1, w2).total : losses::pretrain_loss(pred, target, w1).total;
  };
  CheckResult r = check(name, tensor_table(w, cfg), tensor_table(grad, cfg), SignedLoss(loss));
  r.elementwise = false;
  return r;
}

/// Every check run by the `gradcheck` command and the acceptance suite: each layer type
/// and each loss term elementwise, then the assembled network as a whole vector.
inline std::vector<CheckResult> run_all(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;
  out.push_back(check_dense(rng));
  out.push_back(check_lstm_layer(rng));
  out.push_back(check_lstm_stack(rng));
  out.push_back(check_decoder(rng));
  out.push_back(check_pipeline(rng));
  for (auto& r : check_losses(rng)) out.push_back(std::move(r));
  const ModelConfig full = tiny_config();
  out.push_back(check_model(full, false, rng, "network: pre-training loss"));
  out.push_back(check_model(full, true, rng, "network: joint loss"));
  ModelConfig audio = full;
  audio.phoneme_stage = audio.landmark_stage = false;
  out.push_back(check_model(audio, true, rng, "network: audio-only joint loss"));
  return out;
}

}  // namespace visemenet::gradcheck
