#include "cli.hpp"

#include "visemenet/visemenet.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace visemenet::cli {
namespace {

namespace fs = std::filesystem;

inline constexpr double kGradTolerance = 1e-4;

// ---------------------------------------------------------------------------
// Resolved configuration: defaults < config file < flags

class Settings {
 public:
  Settings() {
    for (const auto& [k, v] : to_key_values(ModelConfig{})) values_[k] = v;
    for (const auto& [k, v] : to_key_values(TrainConfig{})) values_[k] = v;
  }

  void set(const std::string& key, const std::string& value) {
    require(values_.count(key) > 0, ErrorCategory::kInvalidArgument, "unknown config key \"" + key + "\"");
    values_[key] = value;
  }

  void load_file(const fs::path& path) {
    for (const auto& [k, v] : load_key_values(path)) set(k, v);
  }

  ModelConfig model() const {
    ModelConfig c;
    apply_key_values(c, values_);
    c.validate();
    return c;
  }

  TrainConfig train() const {
    TrainConfig c;
    apply_key_values(c, values_);
    c.validate();
    return c;
  }

  void print(std::ostream& os, const KeyValues& extra, bool with_model, bool with_train) const {
    os << "# resolved config\n";
    KeyValues shown = extra;
    if (with_model) {
      const auto m = to_key_values(model());
      shown.insert(shown.end(), m.begin(), m.end());
    }
    if (with_train) {
      const auto t = to_key_values(train());
      shown.insert(shown.end(), t.begin(), t.end());
    }
    write_key_values(os, shown);
    os.flush();
  }

 private:
  std::map<std::string, std::string> values_;
};

/// Flags shared by every subcommand.
struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<bool> deterministic;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "key = value file (model.* and train.* keys)");
    app->add_option("--set", sets, "override one config key: key=value (repeatable)");
    app->add_option("--seed", seed, "seed for all randomness");
    app->add_option("--threads", threads, "cap on worker threads")->check(CLI::PositiveNumber);
    app->add_flag("--deterministic,!--no-deterministic", deterministic,
                  "single ordered reduction (default on; off allows --threads workers)");
  }

  void apply(Settings& s) const {
    if (!config.empty()) s.load_file(config);
    if (seed) s.set("train.seed", std::to_string(*seed));
    if (threads) s.set("train.threads", std::to_string(*threads));
    if (deterministic) s.set("train.deterministic", *deterministic ? "true" : "false");
  }

  void apply_sets(Settings& s) const {
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      require(eq != std::string::npos, ErrorCategory::kInvalidArgument, "--set expects key=value, got \"" + kv + "\"");
      s.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
  }
};

/// Shortcut flags for the training keys.
struct TrainFlags {
  std::optional<int> pretrain_iters, joint_iters, batch_size, subsequence_len, hidden, log_every;
  std::optional<double> learning_rate, clip_norm;

  void attach(CLI::App* app) {
    app->add_option("--pretrain-iters", pretrain_iters, "pre-training iterations");
    app->add_option("--joint-iters", joint_iters, "joint training iterations");
    app->add_option("--batch-size", batch_size, "sub-sequences per batch");
    app->add_option("--subsequence-len", subsequence_len, "frames per sub-sequence");
    app->add_option("--learning-rate", learning_rate, "SGD learning rate");
    app->add_option("--clip-norm", clip_norm, "global gradient norm cap (0 = off)");
    app->add_option("--hidden", hidden, "width of every LSTM and decoder layer");
    app->add_option("--log-every", log_every, "iterations between loss log lines");
  }

  void apply(Settings& s) const {
    auto num = [](auto v) {
      if constexpr (std::is_floating_point_v<decltype(v)>) return detail::format_double(v);
      else return std::to_string(v);
    };
    if (pretrain_iters) s.set("train.pretrain_iters", num(*pretrain_iters));
    if (joint_iters) s.set("train.joint_iters", num(*joint_iters));
    if (batch_size) s.set("train.batch_size", num(*batch_size));
    if (subsequence_len) s.set("train.subsequence_len", num(*subsequence_len));
    if (learning_rate) s.set("train.learning_rate", num(*learning_rate));
    if (clip_norm) s.set("train.clip_norm", num(*clip_norm));
    if (log_every) s.set("train.log_every", num(*log_every));
    if (hidden) {
      for (const char* k : {"model.lstm_hidden", "model.decoder_hidden", "model.viseme_hidden",
                            "model.viseme_decoder_hidden"}) {
        s.set(k, num(*hidden));
      }
    }
  }
};

std::vector<ClipRecord> with_pretrain_labels(const std::vector<ClipRecord>& clips) {
  std::vector<ClipRecord> out;
  for (const auto& c : clips) {
    if (c.has_pretrain_labels()) out.push_back(c);
  }
  return out;
}

std::vector<ClipRecord> with_joint_labels(const std::vector<ClipRecord>& clips) {
  std::vector<ClipRecord> out;
  for (const auto& c : clips) {
    if (c.has_pretrain_labels() && c.has_rig_labels()) out.push_back(c);
  }
  return out;
}

TrainHooks logging_hooks(std::ostream& out, const fs::path& run_dir, const char* phase) {
  TrainHooks hooks;
  hooks.run_dir = run_dir;
  hooks.on_log = [&out, phase](int iter, const losses::LossBreakdown& l) {
    out << phase << " iter " << iter << " loss " << l.total << '\n';
    out.flush();
  };
  return hooks;
}

std::string kv_str(double v) { return detail::format_double(v); }

// ---------------------------------------------------------------------------
// Subcommands

struct SynthCommand {
  std::string out_dir;
  int speakers = 8;
  int clips_per_speaker = 4;
  double min_seconds = 2.0, max_seconds = 3.5;
  bool audiovisual = false;

  void attach(CLI::App* app) {
    app->add_option("--out-dir", out_dir, "dataset directory to create")->required();
    app->add_option("--speakers", speakers, "number of synthetic speakers")->check(CLI::PositiveNumber);
    app->add_option("--clips-per-speaker", clips_per_speaker, "clips per speaker")->check(CLI::PositiveNumber);
    app->add_option("--min-seconds", min_seconds, "shortest clip length");
    app->add_option("--max-seconds", max_seconds, "longest clip length");
    app->add_flag("--audiovisual", audiovisual, "keep only phoneme and landmark labels");
  }

  int run(const Settings& s, std::ostream& out, std::ostream& err) const {
    synth::GenerateOptions opt;
    opt.num_speakers = speakers;
    opt.clips_per_speaker = clips_per_speaker;
    opt.seed = s.train().seed;
    opt.min_seconds = min_seconds;
    opt.max_seconds = max_seconds;
    s.print(err,
            {{"synth.out_dir", out_dir},
             {"synth.speakers", std::to_string(speakers)},
             {"synth.clips_per_speaker", std::to_string(clips_per_speaker)},
             {"synth.min_seconds", kv_str(min_seconds)},
             {"synth.max_seconds", kv_str(max_seconds)},
             {"synth.audiovisual", audiovisual ? "true" : "false"},
             {"synth.seed", std::to_string(opt.seed)}},
            false, false);
    Dataset ds = synth::generate_corpus(opt).dataset;
    if (audiovisual) ds = synth::strip_rig_labels(std::move(ds));
    save_dataset(out_dir, ds);
    std::size_t frames = 0;
    for (const auto& c : ds.clips) frames += c.num_frames();
    out << "wrote " << ds.clips.size() << " clips (" << frames << " frames) to " << out_dir << '\n';
    return 0;
  }
};

struct ExtractCommand {
  std::string audio, out_path;

  void attach(CLI::App* app) {
    app->add_option("--audio", audio, "16 kHz mono PCM16 WAV")->required();
    app->add_option("--out", out_path, "output: .csv for text, anything else for the binary dump")->required();
  }

  int run(const Settings& s, std::ostream& out, std::ostream& err) const {
    s.print(err, {{"extract.audio", audio}, {"extract.out", out_path}}, false, false);
    const AudioClip clip = read_wav(fs::path(audio));
    const Mat<double> f = feature_matrix(extract_features(clip));
    const bool csv = fs::path(out_path).extension() == ".csv";
    auto os = open_output(out_path, !csv);
    if (csv) write_feature_csv(os, f);
    else write_feature_dump(os, f);
    require(static_cast<bool>(os), ErrorCategory::kIo, "failed writing " + out_path);
    out << "wrote " << f.cols() << " frames x " << f.rows() << " features to " << out_path << '\n';
    return 0;
  }
};

struct PretrainCommand {
  std::string data, out_dir;

  void attach(CLI::App* app) {
    app->add_option("--data", data, "dataset directory")->required();
    app->add_option("--out-dir", out_dir, "run directory (checkpoint, loss log, config)")->required();
  }

  int run(const Settings& s, std::ostream& out, std::ostream& err) const {
    s.print(err, {{"pretrain.data", data}, {"pretrain.out_dir", out_dir}}, true, true);
    const ModelConfig mc = s.model();
    const TrainConfig tc = s.train();
    const Dataset ds = load_dataset(data);
    const auto clips = with_pretrain_labels(ds.clips);
    require(!clips.empty(), ErrorCategory::kData, "dataset has no clips with phoneme and landmark labels");
    ModelParams params = prepare_model(mc, clips, ds.neutral_face, tc.seed);
    pretrain(params, clips, ds.neutral_face, tc, logging_hooks(out, out_dir, "pretrain"));
    out << "wrote " << (fs::path(out_dir) / "pretrain_final.vnck").string() << '\n';
    return 0;
  }
};

struct TrainCommand {
  std::string data, out_dir, init;

  void attach(CLI::App* app) {
    app->add_option("--data", data, "dataset directory")->required();
    app->add_option("--out-dir", out_dir, "run directory (model.vnck, loss logs, config)")->required();
    app->add_option("--init", init, "start from this checkpoint and skip pre-training");
  }

  int run(const Settings& s, std::ostream& out, std::ostream& err) const {
    s.print(err, {{"train.data", data}, {"train.out_dir", out_dir}, {"train.init", init}}, init.empty(), true);
    const TrainConfig tc = s.train();
    const Dataset ds = load_dataset(data);
    const auto joint = with_joint_labels(ds.clips);
    require(!joint.empty(), ErrorCategory::kData, "dataset has no fully labelled clips for joint training");
    auto [train, holdout] = holdout_split(joint, tc.holdout_fraction, tc.seed);

    ModelParams params;
    if (!init.empty()) {
      params = load_checkpoint(init);
      out << "initialized from " << init << '\n';
    } else {
      const ModelConfig mc = s.model();
      const auto pre = with_pretrain_labels(ds.clips);
      params = prepare_model(mc, mc.has_shared() ? pre : train, ds.neutral_face, tc.seed);
      if (mc.has_shared() && tc.pretrain_iters > 0) {
        pretrain(params, pre, ds.neutral_face, tc, logging_hooks(out, out_dir, "pretrain"));
      }
    }
    joint_train(params, train, ds.neutral_face, tc, logging_hooks(out, out_dir, "joint"));
    params.thresholds = calibrate_thresholds(params, holdout);
    const fs::path model = fs::path(out_dir) / "model.vnck";
    save_checkpoint(model, params);
    out << "calibrated thresholds on " << holdout.size() << " hold-out clips\n";
    out << "wrote " << model.string() << '\n';
    return 0;
  }
};

struct CalibrateCommand {
  std::string model, data, out_path;

  void attach(CLI::App* app) {
    app->add_option("--model", model, "checkpoint")->required();
    app->add_option("--data", data, "dataset with activation labels")->required();
    app->add_option("--out", out_path, "calibrated checkpoint")->required();
  }

  int run(const Settings& s, std::ostream& out, std::ostream& err) const {
    s.print(err, {{"calibrate.model", model}, {"calibrate.data", data}, {"calibrate.out", out_path}}, false, false);
    ModelParams params = load_checkpoint(model);
    const Dataset ds = load_dataset(data);
    std::vector<ClipRecord> clips;
    for (const auto& c : ds.clips) {
      if (c.active) clips.push_back(c);
    }
    require(!clips.empty(), ErrorCategory::kData, "dataset has no clips with activation labels");
    params.thresholds = calibrate_thresholds(params, clips);
    save_checkpoint(out_path, params);
    out << "thresholds:";
    for (int a = 0; a < kRigDim; ++a) out << ' ' << params.thresholds[a];
    out << "\nwrote " << out_path << '\n';
    return 0;
  }
};

struct InferCommand {
  std::string model, audio, out_path, keyframes;
  int median = 0;

  void attach(CLI::App* app) {
    app->add_option("--model", model, "checkpoint")->required();
    app->add_option("--audio", audio, "16 kHz mono PCM16 WAV")->required();
    app->add_option("--out", out_path, "31-track curve CSV")->required();
    app->add_option("--keyframes", keyframes, "also write sparse keyframes as JSON");
    app->add_option("--median", median, "odd median-filter width (0 = off)")->check(CLI::NonNegativeNumber);
  }

  int run(const Settings& s, std::ostream& out, std::ostream& err) const {
    s.print(err,
            {{"infer.model", model},
             {"infer.audio", audio},
             {"infer.out", out_path},
             {"infer.keyframes", keyframes},
             {"infer.median", std::to_string(median)}},
            false, false);
    const ModelParams params = load_checkpoint(model);
    const AudioClip clip = read_wav(fs::path(audio));
    const auto tracks = infer_clip(clip, params, InferOptions{median});
    {
      auto os = open_output(out_path, false);
      write_curves_csv(os, tracks);
      require(static_cast<bool>(os), ErrorCategory::kIo, "failed writing " + out_path);
    }
    if (!keyframes.empty()) {
      auto os = open_output(keyframes, false);
      write_keyframes(os, tracks);
    }
    out << "wrote " << tracks.front().frames() << " frames to " << out_path << '\n';
    return 0;
  }
};

struct StreamCommand {
  std::string model;
  int chunk = kHopSamples;

  void attach(CLI::App* app) {
    app->add_option("--model", model, "checkpoint")->required();
    app->add_option("--chunk", chunk, "samples read per step")->check(CLI::PositiveNumber);
  }

  int run(const Settings& s, std::istream& in, std::ostream& out, std::ostream& err) const {
    s.print(err, {{"stream.model", model}, {"stream.chunk", std::to_string(chunk)}}, false, false);
    const ModelParams params = load_checkpoint(model);
    StreamState stream(params);
    write_curves_csv_header(out);
    std::vector<char> bytes(static_cast<std::size_t>(chunk) * 2);
    std::vector<std::int16_t> samples;
    bool odd_byte = false;
    char carry = 0;
    auto emit = [&](const std::vector<StreamFrame>& frames) {
      for (const auto& f : frames) write_curves_csv_row(out, static_cast<std::size_t>(f.index), f.rig);
      if (!frames.empty()) out.flush();
    };
    while (in) {
      in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      const std::size_t n = static_cast<std::size_t>(in.gcount());
      if (n == 0) break;
      samples.clear();
      std::size_t i = 0;
      if (odd_byte) {
        samples.push_back(static_cast<std::int16_t>(static_cast<std::uint8_t>(carry) |
                                                    (static_cast<std::uint16_t>(static_cast<std::uint8_t>(bytes[0])) << 8)));
        i = 1;
        odd_byte = false;
      }
      for (; i + 1 < n; i += 2) {
        samples.push_back(static_cast<std::int16_t>(static_cast<std::uint8_t>(bytes[i]) |
                                                    (static_cast<std::uint16_t>(static_cast<std::uint8_t>(bytes[i + 1])) << 8)));
      }
      if (i < n) {
        carry = bytes[i];
        odd_byte = true;
      }
      emit(stream.push(samples));
    }
    require(!odd_byte, ErrorCategory::kFormat, "stdin ended in the middle of a 16-bit sample");
    emit(stream.finish());
    err << "streamed " << stream.samples_consumed() << " samples, " << stream.frames_emitted() << " frames\n";
    return 0;
  }
};

struct EvalCommand {
  std::string data, test_speaker, format = "table", out_path;
  std::vector<std::string> conditions{"full"};
  int speakers = 9;
  int clips_per_speaker = 4;

  void attach(CLI::App* app) {
    app->add_option("--data", data, "dataset directory (default: generate a synthetic corpus)");
    app->add_option("--speakers", speakers, "synthetic speakers when --data is absent")->check(CLI::PositiveNumber);
    app->add_option("--clips-per-speaker", clips_per_speaker, "synthetic clips per speaker")
        ->check(CLI::PositiveNumber);
    app->add_option("--condition", conditions, "full, landmark-based, phoneme-based, audio-based, no-transfer or all");
    app->add_option("--test-speaker", test_speaker, "single split with this speaker held out (default: every speaker)");
    app->add_option("--format", format, "table, csv or json")->check(CLI::IsMember({"table", "csv", "json"}));
    app->add_option("--out", out_path, "report file (default: stdout)");
  }

  int run(const Settings& s, std::ostream& out, std::ostream& err) const {
    std::string joined;
    for (const auto& c : conditions) joined += (joined.empty() ? "" : ",") + c;
    s.print(err,
            {{"eval.data", data},
             {"eval.speakers", data.empty() ? std::to_string(speakers) : ""},
             {"eval.clips_per_speaker", data.empty() ? std::to_string(clips_per_speaker) : ""},
             {"eval.condition", joined},
             {"eval.test_speaker", test_speaker},
             {"eval.format", format}},
            true, true);
    const ModelConfig mc = s.model();
    const TrainConfig tc = s.train();
    std::vector<Condition> list;
    for (const auto& c : conditions) {
      if (c == "all") {
        for (auto k : {Condition::kFull, Condition::kLandmarkBased, Condition::kPhonemeBased, Condition::kAudioBased,
                       Condition::kNoTransfer}) {
          list.push_back(k);
        }
      } else {
        list.push_back(parse_condition(c));
      }
    }
    const Dataset corpus = data.empty() ? synth::generate_dataset(speakers, clips_per_speaker, tc.seed) : load_dataset(data);

    std::vector<EvalReport> reports;
    for (auto condition : list) {
      if (test_speaker.empty()) {
        reports.push_back(leave_one_speaker_out(condition, corpus, mc, tc));
      } else {
        ConditionData split;
        split.neutral_face = corpus.neutral_face;
        for (const auto& c : corpus.clips) (c.speaker_id == test_speaker ? split.test : split.joint).push_back(c);
        require(!split.test.empty(), ErrorCategory::kInvalidArgument, "no clips for speaker " + test_speaker);
        split.pretrain = split.joint;
        EvalReport r = run_condition(condition, split, mc, tc);
        for (auto& row : r.rows) row.split = test_speaker;
        reports.push_back(std::move(r));
      }
      err << "finished condition " << to_string(condition) << '\n';
    }

    std::ofstream file;
    if (!out_path.empty()) file = open_output(out_path, false);
    std::ostream& os = out_path.empty() ? out : file;
    if (format == "csv") write_report_csv(os, reports);
    else if (format == "json") os << report_json(reports).dump(2) << '\n';
    else write_report_table(os, reports);
    return 0;
  }
};

struct GradcheckCommand {
  std::string format = "table";

  void attach(CLI::App* app) {
    app->add_option("--format", format, "table or json")->check(CLI::IsMember({"table", "json"}));
  }

  int run(const Settings& s, std::ostream& out, std::ostream& err) const {
    const std::uint64_t seed = s.train().seed;
    s.print(err, {{"gradcheck.seed", std::to_string(seed)}, {"gradcheck.tolerance", kv_str(kGradTolerance)}}, false,
            false);
    const auto results = gradcheck::run_all(seed);
    bool ok = true;
    double worst = 0.0;
    for (const auto& r : results) {
      ok = ok && r.passed(kGradTolerance);
      worst = std::max(worst, r.error());
    }
    if (format == "json") {
      nlohmann::json j = nlohmann::json::array();
      for (const auto& r : results) {
        j.push_back({{"name", r.name},
                     {"measure", r.elementwise ? "max_elementwise" : "vector"},
                     {"error", r.error()},
                     {"max_rel_error", r.max_rel_error},
                     {"norm_rel_error", r.norm_rel_error},
                     {"checked", r.checked},
                     {"skipped", r.skipped},
                     {"passed", r.passed(kGradTolerance)}});
      }
      out << nlohmann::json{{"seed", seed}, {"max_relative_error", worst}, {"passed", ok}, {"checks", j}}.dump(2)
          << '\n';
    } else {
      for (const auto& r : results) {
        out << (r.passed(kGradTolerance) ? "ok    " : "FAIL  ") << std::left << std::setw(36) << r.name
            << (r.elementwise ? " max " : " vec ") << std::scientific << std::setprecision(3) << r.error()
            << std::defaultfloat << "  (" << r.checked << " entries";
        if (r.skipped) out << ", " << r.skipped << " at kinks";
        out << ")\n";
      }
      out << "max relative error: " << std::scientific << std::setprecision(3) << worst << std::defaultfloat
          << (ok ? "  (pass)" : "  (FAIL)") << '\n';
    }
    return ok ? 0 : 1;
  }
};

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audio to phoneme groups, landmarks and JALI viseme curves"};
  app.name("visemenet");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  CommonFlags common;
  TrainFlags train_flags;
  SynthCommand synth_cmd;
  ExtractCommand extract_cmd;
  PretrainCommand pretrain_cmd;
  TrainCommand train_cmd;
  CalibrateCommand calibrate_cmd;
  InferCommand infer_cmd;
  StreamCommand stream_cmd;
  EvalCommand eval_cmd;
  GradcheckCommand gradcheck_cmd;

  auto add = [&](const char* name, const char* help, bool training) {
    CLI::App* sub = app.add_subcommand(name, help);
    common.attach(sub);
    if (training) train_flags.attach(sub);
    return sub;
  };
  CLI::App* synth_app = add("synth-data", "generate a synthetic labelled corpus", false);
  synth_cmd.attach(synth_app);
  CLI::App* extract_app = add("extract-features", "write the 65-dim feature frames of a WAV file", false);
  extract_cmd.attach(extract_app);
  CLI::App* pretrain_app = add("pretrain", "train the phoneme-group and landmark stages", true);
  pretrain_cmd.attach(pretrain_app);
  CLI::App* train_app = add("train", "pre-train, train jointly and calibrate thresholds", true);
  train_cmd.attach(train_app);
  CLI::App* calibrate_app = add("calibrate", "re-calibrate activation thresholds on a dataset", false);
  calibrate_cmd.attach(calibrate_app);
  CLI::App* infer_app = add("infer", "curves for one WAV file", false);
  infer_cmd.attach(infer_app);
  CLI::App* stream_app = add("stream", "PCM16 little-endian on stdin to curve CSV on stdout", false);
  stream_cmd.attach(stream_app);
  CLI::App* eval_app = add("eval", "train and score ablation conditions per held-out speaker", true);
  eval_cmd.attach(eval_app);
  CLI::App* gradcheck_app = add("gradcheck", "finite-difference check of every gradient", false);
  gradcheck_cmd.attach(gradcheck_app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    Settings settings;
    common.apply(settings);
    train_flags.apply(settings);
    common.apply_sets(settings);
    settings.model();
    settings.train();

    if (synth_app->parsed()) return synth_cmd.run(settings, out, err);
    if (extract_app->parsed()) return extract_cmd.run(settings, out, err);
    if (pretrain_app->parsed()) return pretrain_cmd.run(settings, out, err);
    if (train_app->parsed()) return train_cmd.run(settings, out, err);
    if (calibrate_app->parsed()) return calibrate_cmd.run(settings, out, err);
    if (infer_app->parsed()) return infer_cmd.run(settings, out, err);
    if (stream_app->parsed()) return stream_cmd.run(settings, in, out, err);
    if (eval_app->parsed()) return eval_cmd.run(settings, out, err);
    if (gradcheck_app->parsed()) return gradcheck_cmd.run(settings, out, err);
  } catch (const Error& e) {
    err << "error: " << category_name(e.category()) << ": " << one_line(e.what()) << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: io: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: format: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 2;
}

}  // namespace visemenet::cli
