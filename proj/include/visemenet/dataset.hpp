#pragma once

// Phoneme-group table, in-memory clip records and the on-disk dataset layout.
//
// Dataset directory:
//   dataset.json            {"format": "visemenet-dataset", "version": 1,
//                            "neutral_face": [76 floats], "clips": ["<dir>", ...]}
//   <clip dir>/audio.wav    PCM16 mono 16 kHz
//   <clip dir>/labels.bin   see write_labels()
//   <clip dir>/meta.json    {"clip_id", "speaker_id", "style", "num_frames", "sections"}

#include "visemenet/audio_features.hpp"
#include "visemenet/common.hpp"
#include "visemenet/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace visemenet {

// ---------------------------------------------------------------------------
// Phoneme groups

struct PhonemeGroup {
  int id = 0;
  std::string name;
  std::vector<std::string> phonemes;  // IPA symbols
};

class PhonemeGroupTable {
 public:
  PhonemeGroupTable() = default;

  explicit PhonemeGroupTable(std::vector<PhonemeGroup> groups) : groups_(std::move(groups)) {
    require(static_cast<int>(groups_.size()) == kPhonemeGroups, ErrorCategory::kData,
            "phoneme table must have exactly 20 groups, got " + std::to_string(groups_.size()));
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      groups_[g].id = static_cast<int>(g);
      require(!groups_[g].phonemes.empty(), ErrorCategory::kData, "phoneme group " + groups_[g].name + " is empty");
      for (const auto& p : groups_[g].phonemes) {
        const auto [it, inserted] = index_.emplace(p, static_cast<int>(g));
        require(inserted, ErrorCategory::kData,
                "phoneme /" + p + "/ appears in both " + groups_[it->second].name + " and " + groups_[g].name);
      }
    }
  }

  /// Twenty viseme groups in the order of the viseme rig parameters. Membership is
  /// an editable default; supply a table file to override it.
  static PhonemeGroupTable default_table() {
    return PhonemeGroupTable({
        {0, "Ah", {"ɑ", "aɪ", "aʊ"}},
        {0, "Aa", {"æ", "a"}},
        {0, "Eh", {"ɛ", "eɪ", "e"}},
        {0, "Ee", {"i", "iː"}},
        {0, "Ih", {"ɪ"}},
        {0, "Oh", {"ɔ", "oʊ", "ɔɪ", "o"}},
        {0, "Uh", {"ʌ"}},
        {0, "U", {"u", "ʊ", "uː"}},
        {0, "Eu", {"ø", "œ", "y"}},
        {0, "Schwa", {"ə", "ɚ", "ɜ"}},
        {0, "R", {"r", "ɹ"}},
        {0, "S", {"s", "z"}},
        {0, "ShChZh", {"ʃ", "tʃ", "ʒ", "dʒ"}},
        {0, "Th", {"θ", "ð"}},
        {0, "JY", {"j"}},
        {0, "LNTD", {"l", "n", "t", "d"}},
        {0, "GK", {"g", "k", "ŋ", "h"}},
        {0, "MBP", {"m", "b", "p"}},
        {0, "FV", {"f", "v"}},
        {0, "WA_PEDAL", {"w"}},
    });
  }

  /// JSON: {"groups": [{"name": "...", "phonemes": ["...", ...]}, ...]}
  static PhonemeGroupTable from_json(const nlohmann::json& j) {
    require(j.contains("groups") && j["groups"].is_array(), ErrorCategory::kFormat,
            "phoneme table: missing \"groups\" array");
    std::vector<PhonemeGroup> groups;
    for (const auto& g : j["groups"]) {
      PhonemeGroup pg;
      pg.name = g.at("name").get<std::string>();
      pg.phonemes = g.at("phonemes").get<std::vector<std::string>>();
      groups.push_back(std::move(pg));
    }
    return PhonemeGroupTable(std::move(groups));
  }

  static PhonemeGroupTable load(const std::filesystem::path& path) {
    auto is = open_input(path, false);
    try {
      return from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCategory::kFormat, path.string() + ": " + e.what());
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : groups_) groups.push_back({{"name", g.name}, {"phonemes", g.phonemes}});
    return {{"groups", groups}};
  }

  std::size_t size() const { return groups_.size(); }
  const PhonemeGroup& operator[](std::size_t i) const { return groups_.at(i); }
  const std::vector<PhonemeGroup>& groups() const { return groups_; }

  /// Group id of an IPA symbol, or -1 if unknown.
  int group_of(const std::string& phoneme) const {
    const auto it = index_.find(phoneme);
    return it == index_.end() ? -1 : it->second;
  }

 private:
  std::vector<PhonemeGroup> groups_;
  std::map<std::string, int> index_;
};

/// Names of the 31 output tracks: 20 visemes, 9 co-articulation controls, JALI jaw/lip.
inline const std::array<std::string, kNumTracks>& track_names() {
  static const std::array<std::string, kNumTracks> names = [] {
    std::array<std::string, kNumTracks> n;
    const auto table = PhonemeGroupTable::default_table();
    for (int g = 0; g < kNumVisemes; ++g) n[g] = table[g].name;
    const char* classes[] = {"vowel", "labial", "lingual"};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) n[kNumVisemes + 3 * a + b] = std::string("coart_") + classes[a] + "_" + classes[b];
    }
    n[kRigDim] = "jali_jaw";
    n[kRigDim + 1] = "jali_lip";
    return n;
  }();
  return names;
}

// ---------------------------------------------------------------------------
// Clip records

enum class Style { kNeutral, kExpressive };

inline std::string to_string(Style s) { return s == Style::kNeutral ? "neutral" : "expressive"; }

inline Style parse_style(const std::string& s) {
  if (s == "neutral") return Style::kNeutral;
  if (s == "expressive") return Style::kExpressive;
  throw Error(ErrorCategory::kFormat, "unknown style tag \"" + s + "\"");
}

/// One clip with optional per-frame label sections at 100 FPS.
struct ClipRecord {
  std::string clip_id;
  std::string speaker_id;
  Style style = Style::kNeutral;
  AudioClip audio;
  std::optional<std::vector<int>> phoneme;  // group id or -1 (unlabelled)
  std::optional<Mat<float>> landmarks;      // 76 x T displacements
  std::optional<Mat<float>> rig;            // 29 x T in [0, 1]
  std::optional<Mask> active;               // 29 x T
  std::optional<Mat<float>> jali;           // 2 x T in [0, 1]

  Eigen::Index num_frames() const { return static_cast<Eigen::Index>(frame_count(audio.samples.size())); }

  bool has_pretrain_labels() const { return phoneme.has_value() && landmarks.has_value(); }
  bool has_rig_labels() const { return rig.has_value() && active.has_value() && jali.has_value(); }

  /// Activation bits derived from rig curves when a dataset provides only curves.
  static Mask derive_activations(const Mat<float>& rig) {
    return (rig.array() > static_cast<float>(kActivationEpsilon)).cast<std::uint8_t>().matrix();
  }

  void validate() const {
    const std::string who = "clip " + clip_id + ": ";
    try {
      audio.validate();
    } catch (const Error& e) {
      throw Error(e.category(), who + e.what());
    }
    const Eigen::Index T = num_frames();
    auto frames_ok = [&](Eigen::Index cols, const char* what) {
      require(cols == T, ErrorCategory::kData,
              who + what + " has " + std::to_string(cols) + " frames but the audio has " + std::to_string(T));
    };
    if (phoneme) {
      frames_ok(static_cast<Eigen::Index>(phoneme->size()), "phoneme section");
      for (int c : *phoneme) {
        require(c >= -1 && c < kPhonemeGroups, ErrorCategory::kData, who + "phoneme label out of range");
      }
    }
    if (landmarks) {
      require_shape(landmarks->rows() == kLandmarkDim, who + "landmarks must be 76-dimensional");
      frames_ok(landmarks->cols(), "landmark section");
      require(landmarks->allFinite(), ErrorCategory::kData, who + "non-finite landmark values");
    }
    if (rig) {
      require_shape(rig->rows() == kRigDim, who + "rig section must have 29 rows");
      frames_ok(rig->cols(), "rig section");
      require(rig->allFinite() && rig->minCoeff() >= 0.0f && rig->maxCoeff() <= 1.0f, ErrorCategory::kData,
              who + "rig values must lie in [0, 1]");
    }
    if (active) {
      require_shape(active->rows() == kRigDim, who + "activation section must have 29 rows");
      frames_ok(active->cols(), "activation section");
    }
    if (jali) {
      require_shape(jali->rows() == kJaliDim, who + "JALI section must have 2 rows");
      frames_ok(jali->cols(), "JALI section");
      require(jali->allFinite() && jali->minCoeff() >= 0.0f && jali->maxCoeff() <= 1.0f, ErrorCategory::kData,
              who + "JALI values must lie in [0, 1]");
    }
  }
};

struct Dataset {
  std::vector<ClipRecord> clips;
  Vec<float> neutral_face = Vec<float>::Zero(kLandmarkDim);  // coordinates the displacements are relative to

  std::vector<std::string> speakers() const {
    std::set<std::string> s;
    for (const auto& c : clips) s.insert(c.speaker_id);
    return {s.begin(), s.end()};
  }
};

inline void require_pretrain_labels(const std::vector<ClipRecord>& clips) {
  for (const auto& c : clips) {
    require(c.phoneme.has_value(), ErrorCategory::kData, "clip " + c.clip_id + " has no phoneme-group labels");
    require(c.landmarks.has_value(), ErrorCategory::kData, "clip " + c.clip_id + " has no landmark labels");
  }
}

inline void require_joint_labels(const std::vector<ClipRecord>& clips) {
  require_pretrain_labels(clips);
  for (const auto& c : clips) {
    require(c.rig.has_value(), ErrorCategory::kData, "clip " + c.clip_id + " has no rig labels");
    require(c.active.has_value(), ErrorCategory::kData, "clip " + c.clip_id + " has no activation labels");
    require(c.jali.has_value(), ErrorCategory::kData, "clip " + c.clip_id + " has no JALI labels");
  }
}

// ---------------------------------------------------------------------------
// labels.bin
//
//   "VNLB", u32 version (1), u32 num_frames, u32 section flags
//   then, for each present section in flag order:
//     phoneme      (bit 0): i32[T]
//     landmarks    (bit 1): f32[T][76]
//     rig          (bit 2): f32[T][29]
//     activations  (bit 3): u32[T], bit a set = parameter a active
//     jali         (bit 4): f32[T][2]

inline constexpr std::uint32_t kLabelsVersion = 1;

namespace section {
inline constexpr std::uint32_t kPhoneme = 1u << 0;
inline constexpr std::uint32_t kLandmarks = 1u << 1;
inline constexpr std::uint32_t kRig = 1u << 2;
inline constexpr std::uint32_t kActivations = 1u << 3;
inline constexpr std::uint32_t kJali = 1u << 4;
}  // namespace section

inline std::uint32_t section_flags(const ClipRecord& c) {
  return (c.phoneme ? section::kPhoneme : 0u) | (c.landmarks ? section::kLandmarks : 0u) |
         (c.rig ? section::kRig : 0u) | (c.active ? section::kActivations : 0u) | (c.jali ? section::kJali : 0u);
}

inline std::vector<std::string> section_names(std::uint32_t flags) {
  std::vector<std::string> out;
  if (flags & section::kPhoneme) out.emplace_back("phoneme");
  if (flags & section::kLandmarks) out.emplace_back("landmarks");
  if (flags & section::kRig) out.emplace_back("rig");
  if (flags & section::kActivations) out.emplace_back("activations");
  if (flags & section::kJali) out.emplace_back("jali");
  return out;
}

inline void write_labels(std::ostream& os, const ClipRecord& c) {
  const auto T = static_cast<std::uint32_t>(c.num_frames());
  binary::write_magic(os, "VNLB");
  binary::write<std::uint32_t>(os, kLabelsVersion);
  binary::write<std::uint32_t>(os, T);
  binary::write<std::uint32_t>(os, section_flags(c));
  auto write_rows = [&](const Mat<float>& m) {
    for (Eigen::Index t = 0; t < m.cols(); ++t) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) binary::write<float>(os, m(r, t));
    }
  };
  if (c.phoneme) {
    for (int v : *c.phoneme) binary::write<std::int32_t>(os, v);
  }
  if (c.landmarks) write_rows(*c.landmarks);
  if (c.rig) write_rows(*c.rig);
  if (c.active) {
    for (Eigen::Index t = 0; t < c.active->cols(); ++t) {
      std::uint32_t bits = 0;
      for (int a = 0; a < kRigDim; ++a) bits |= ((*c.active)(a, t) ? 1u : 0u) << a;
      binary::write<std::uint32_t>(os, bits);
    }
  }
  if (c.jali) write_rows(*c.jali);
}

/// Reads label sections into `c`. Returns the frame count stored in the header.
inline std::uint32_t read_labels(std::istream& is, ClipRecord& c, const std::string& name) {
  binary::expect_magic(is, "VNLB", name);
  const auto version = binary::read<std::uint32_t>(is, name);
  require(version == kLabelsVersion, ErrorCategory::kFormat, name + ": unsupported labels version");
  const auto T = binary::read<std::uint32_t>(is, name);
  const auto flags = binary::read<std::uint32_t>(is, name);
  auto read_rows = [&](Eigen::Index rows) {
    Mat<float> m(rows, T);
    for (std::uint32_t t = 0; t < T; ++t) {
      for (Eigen::Index r = 0; r < rows; ++r) m(r, t) = binary::read<float>(is, name);
    }
    return m;
  };
  if (flags & section::kPhoneme) {
    std::vector<int> p(T);
    for (auto& v : p) v = binary::read<std::int32_t>(is, name);
    c.phoneme = std::move(p);
  }
  if (flags & section::kLandmarks) c.landmarks = read_rows(kLandmarkDim);
  if (flags & section::kRig) c.rig = read_rows(kRigDim);
  if (flags & section::kActivations) {
    Mask m(kRigDim, T);
    for (std::uint32_t t = 0; t < T; ++t) {
      const auto bits = binary::read<std::uint32_t>(is, name);
      for (int a = 0; a < kRigDim; ++a) m(a, t) = static_cast<std::uint8_t>((bits >> a) & 1u);
    }
    c.active = std::move(m);
  }
  if (flags & section::kJali) c.jali = read_rows(kJaliDim);
  return T;
}

inline constexpr int kDatasetVersion = 1;

inline void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json index;
  index["format"] = "visemenet-dataset";
  index["version"] = kDatasetVersion;
  index["neutral_face"] = std::vector<float>(ds.neutral_face.data(), ds.neutral_face.data() + ds.neutral_face.size());
  index["clips"] = nlohmann::json::array();
  std::set<std::string> seen;
  for (const auto& c : ds.clips) {
    c.validate();
    require(!c.clip_id.empty() && c.clip_id.find('/') == std::string::npos && c.clip_id != "." && c.clip_id != "..",
            ErrorCategory::kData, "clip id \"" + c.clip_id + "\" is not a valid directory name");
    require(seen.insert(c.clip_id).second, ErrorCategory::kData, "duplicate clip id " + c.clip_id);
    const fs::path clip_dir = dir / c.clip_id;
    fs::create_directories(clip_dir);
    write_wav(clip_dir / "audio.wav", c.audio);
    {
      auto os = open_output(clip_dir / "labels.bin");
      write_labels(os, c);
      require(static_cast<bool>(os), ErrorCategory::kIo, "failed writing labels for " + c.clip_id);
    }
    nlohmann::json meta;
    meta["clip_id"] = c.clip_id;
    meta["speaker_id"] = c.speaker_id;
    meta["style"] = to_string(c.style);
    meta["num_frames"] = c.num_frames();
    meta["sample_rate"] = c.audio.sample_rate;
    meta["sections"] = section_names(section_flags(c));
    auto os = open_output(clip_dir / "meta.json", false);
    os << meta.dump(2) << '\n';
    index["clips"].push_back(c.clip_id);
  }
  auto os = open_output(dir / "dataset.json", false);
  os << index.dump(2) << '\n';
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  Dataset ds;
  nlohmann::json index;
  try {
    auto is = open_input(dir / "dataset.json", false);
    index = nlohmann::json::parse(is);
    require(index.value("format", "") == "visemenet-dataset", ErrorCategory::kFormat,
            (dir / "dataset.json").string() + ": not a dataset index");
    require(index.value("version", 0) == kDatasetVersion, ErrorCategory::kFormat,
            (dir / "dataset.json").string() + ": unsupported dataset version");
    if (index.contains("neutral_face")) {
      const auto nf = index["neutral_face"].get<std::vector<float>>();
      require_shape(nf.size() == static_cast<std::size_t>(kLandmarkDim), "neutral face must have 76 values");
      ds.neutral_face = Eigen::Map<const Vec<float>>(nf.data(), kLandmarkDim);
    }
    for (const auto& entry : index.at("clips")) {
      const fs::path clip_dir = dir / entry.get<std::string>();
      auto mis = open_input(clip_dir / "meta.json", false);
      const auto meta = nlohmann::json::parse(mis);
      ClipRecord c;
      c.clip_id = meta.at("clip_id").get<std::string>();
      c.speaker_id = meta.value("speaker_id", "");
      c.style = parse_style(meta.value("style", "neutral"));
      c.audio = read_wav(clip_dir / "audio.wav");
      auto lis = open_input(clip_dir / "labels.bin");
      const auto T = read_labels(lis, c, (clip_dir / "labels.bin").string());
      require(static_cast<Eigen::Index>(T) == c.num_frames(), ErrorCategory::kData,
              "clip " + c.clip_id + ": labels have " + std::to_string(T) + " frames but the audio has " +
                  std::to_string(c.num_frames()));
      if (c.rig && !c.active) c.active = ClipRecord::derive_activations(*c.rig);
      c.validate();
      ds.clips.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::kFormat, dir.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace visemenet
