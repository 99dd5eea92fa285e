#include "visemenet/dataset.hpp"
#include "visemenet/io.hpp"
#include "visemenet/synth.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <sstream>

namespace visemenet {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

TEST(Synth, RngIsPortable) {
  // First SplitMix64 output for state 0.
  synth::Rng rng(0);
  const std::uint64_t a = rng.next(), b = rng.next();
  EXPECT_NE(a, b);
  synth::Rng again(0);
  EXPECT_EQ(again.next(), a);
  EXPECT_EQ(synth::mix(0), 0xe220a8397b1dcdafULL);
}

TEST(Synth, FixedSeedIsByteIdentical) {
  testing::TempDir dir("synth");
  save_dataset(dir / "a", synth::generate_dataset(2, 2, 7));
  save_dataset(dir / "b", synth::generate_dataset(2, 2, 7));
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), dir / "a");
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 1u + 4u * 3u);
  EXPECT_NE(slurp(dir / "a" / "s00_c000" / "audio.wav"),
            [&] {
              save_dataset(dir / "c", synth::generate_dataset(2, 2, 8));
              return slurp(dir / "c" / "s00_c000" / "audio.wav");
            }());
}

class SynthCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    synth::GenerateOptions opt;
    opt.num_speakers = 3;
    opt.clips_per_speaker = 4;
    opt.seed = 11;
    corpus_ = new synth::Corpus(synth::generate_corpus(opt));
  }
  static void TearDownTestSuite() { delete corpus_; }
  static synth::Corpus* corpus_;
};

synth::Corpus* SynthCorpus::corpus_ = nullptr;

TEST_F(SynthCorpus, LabelsAreConsistent) {
  for (const auto& c : corpus_->dataset.clips) {
    ASSERT_NO_THROW(c.validate());
    ASSERT_TRUE(c.has_rig_labels() && c.has_pretrain_labels());
    EXPECT_GE(c.rig->minCoeff(), 0.0f);
    EXPECT_LE(c.rig->maxCoeff(), 1.0f);
    EXPECT_GE(c.jali->minCoeff(), 0.0f);
    EXPECT_LE(c.jali->maxCoeff(), 1.0f);
    for (Eigen::Index i = 0; i < c.rig->size(); ++i) {
      EXPECT_EQ((*c.active)(i) != 0, (*c.rig)(i) > 1e-3f);
    }
  }
  // Clips stop at the first segment boundary past their drawn length; each speaker's last
  // clip may run on until all 20 groups have appeared.
  for (std::size_t k = 0; k < corpus_->plans.size(); ++k) {
    const double seconds = corpus_->plans[k].num_frames / 100.0;
    EXPECT_GE(seconds, 2.0 - 0.01);
    if (k % 4 != 3) {
      EXPECT_LE(seconds, 3.5 + 0.33);
    }
  }
}

TEST_F(SynthCorpus, EverySpeakerCoversEveryGroup) {
  for (const auto& spk : corpus_->dataset.speakers()) {
    std::set<int> seen;
    for (const auto& c : corpus_->dataset.clips) {
      if (c.speaker_id != spk) continue;
      for (int g : *c.phoneme) {
        if (g >= 0) seen.insert(g);
      }
    }
    EXPECT_EQ(seen.size(), static_cast<std::size_t>(kPhonemeGroups)) << spk;
  }
}

TEST_F(SynthCorpus, SegmentsDriveLabelsAndVisemes) {
  ASSERT_EQ(corpus_->plans.size(), corpus_->dataset.clips.size());
  for (std::size_t k = 0; k < corpus_->plans.size(); ++k) {
    const auto& plan = corpus_->plans[k];
    const auto& clip = corpus_->dataset.clips[k];
    EXPECT_EQ(plan.clip_id, clip.clip_id);
    EXPECT_EQ(plan.num_frames, clip.num_frames());
    int prev_end = 0;
    for (const auto& s : plan.segments) {
      EXPECT_GE(s.start, prev_end);
      EXPECT_GE(s.end - s.start, 8);
      EXPECT_LE(s.end - s.start, 32);
      prev_end = s.end;
      const int mid = (s.start + s.end) / 2;
      EXPECT_EQ((*clip.phoneme)[mid], s.group);
      Eigen::Index dominant = 0;
      clip.rig->col(mid).head(kNumVisemes).maxCoeff(&dominant);
      EXPECT_EQ(dominant, s.group) << clip.clip_id << " frame " << mid;
    }
    // Leading silence is unlabelled and nothing is active there yet.
    EXPECT_EQ((*clip.phoneme)[0], -1);
    EXPECT_EQ(clip.active->col(0).cast<int>().sum(), 0);
  }
}

TEST_F(SynthCorpus, ClipIdsAndSpeakers) {
  const auto speakers = corpus_->dataset.speakers();
  EXPECT_EQ(speakers, (std::vector<std::string>{"spk00", "spk01", "spk02"}));
  EXPECT_EQ(corpus_->dataset.clips[5].clip_id, "s01_c001");
  EXPECT_EQ(corpus_->dataset.neutral_face.size(), kLandmarkDim);
}

TEST(Synth, StripRigLabels) {
  const Dataset d = synth::strip_rig_labels(synth::generate_dataset(1, 1, 2));
  EXPECT_TRUE(d.clips[0].has_pretrain_labels());
  EXPECT_FALSE(d.clips[0].rig || d.clips[0].active || d.clips[0].jali);
  EXPECT_THROW(require_joint_labels(d.clips), Error);
}

TEST(Dataset, SaveLoadRoundTrip) {
  testing::TempDir dir("dataset");
  Dataset d = synth::generate_dataset(2, 1, 3);
  d.clips[1].style = Style::kExpressive;
  d.clips[1].rig.reset();
  d.clips[1].active.reset();
  d.clips[1].jali.reset();
  save_dataset(dir.path(), d);
  const Dataset back = load_dataset(dir.path());
  ASSERT_EQ(back.clips.size(), 2u);
  EXPECT_EQ(back.neutral_face, d.neutral_face);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto &a = d.clips[k], &b = back.clips[k];
    EXPECT_EQ(a.clip_id, b.clip_id);
    EXPECT_EQ(a.speaker_id, b.speaker_id);
    EXPECT_EQ(a.style, b.style);
    EXPECT_EQ(a.audio.samples, b.audio.samples);
    EXPECT_EQ(a.phoneme, b.phoneme);
    EXPECT_EQ(*a.landmarks, *b.landmarks);
    EXPECT_EQ(a.has_rig_labels(), b.has_rig_labels());
    if (a.rig) {
      EXPECT_EQ(*a.rig, *b.rig);
      EXPECT_EQ(*a.active, *b.active);
      EXPECT_EQ(*a.jali, *b.jali);
    }
  }
}

TEST(Dataset, LoadErrors) {
  testing::TempDir dir("dataset_err");
  EXPECT_THROW(load_dataset(dir / "missing"), Error);

  const Dataset d = synth::generate_dataset(1, 1, 3);
  save_dataset(dir / "ds", d);
  // Audio shorter than the labels.
  AudioClip shorter = d.clips[0].audio;
  shorter.samples.resize(shorter.samples.size() - 1600);
  write_wav(dir / "ds" / d.clips[0].clip_id / "audio.wav", shorter);
  try {
    load_dataset(dir / "ds");
    FAIL() << "expected a frame-count error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kData);
  }

  std::ofstream(dir / "ds" / "dataset.json") << "{ not json";
  try {
    load_dataset(dir / "ds");
    FAIL() << "expected a format error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kFormat);
  }
}

TEST(Dataset, ValidateCatchesBadSections) {
  ClipRecord c = synth::generate_dataset(1, 1, 1).clips[0];
  c.jali->col(3).setConstant(1.5f);
  EXPECT_THROW(c.validate(), Error);
  c = synth::generate_dataset(1, 1, 1).clips[0];
  c.phoneme->pop_back();
  EXPECT_THROW(c.validate(), Error);
  c = synth::generate_dataset(1, 1, 1).clips[0];
  (*c.phoneme)[0] = 20;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Labels, StreamRoundTripKeepsSections) {
  ClipRecord c = synth::generate_dataset(1, 1, 4).clips[0];
  c.landmarks.reset();
  std::stringstream ss;
  write_labels(ss, c);
  ClipRecord back;
  EXPECT_EQ(read_labels(ss, back, "labels"), static_cast<std::uint32_t>(c.num_frames()));
  EXPECT_FALSE(back.landmarks);
  EXPECT_EQ(*back.active, *c.active);
  EXPECT_EQ(*back.rig, *c.rig);

  std::stringstream bad("VNLBxxxx");
  EXPECT_THROW(read_labels(bad, back, "bad"), Error);
}

TEST(Wav, RoundTripAndRejects) {
  const AudioClip clip = testing::noisy_tones(1234, 1);
  std::stringstream ss;
  write_wav(ss, clip);
  EXPECT_EQ(ss.str().size(), 44u + 2 * 1234);
  const AudioClip back = read_wav(ss);
  EXPECT_EQ(back.samples, clip.samples);
  EXPECT_EQ(back.sample_rate, 16000);

  AudioClip other_rate = clip;
  other_rate.sample_rate = 44100;
  std::stringstream s2;
  write_wav(s2, other_rate);
  EXPECT_EQ(read_wav(s2).sample_rate, 44100);  // read as stored; validate() rejects it
  std::stringstream junk("RIFX....");
  EXPECT_THROW(read_wav(junk), Error);
  std::string truncated = ss.str().substr(0, 60);
  std::stringstream s3(truncated);
  EXPECT_THROW(read_wav(s3), Error);
}

TEST(FeatureDump, RoundTripInFloat) {
  Mat<double> f = Mat<double>::Random(65, 7);
  std::stringstream ss;
  write_feature_dump(ss, f);
  const Mat<double> back = read_feature_dump(ss);
  EXPECT_EQ(back, f.cast<float>().cast<double>());
}

TEST(PhonemeTable, DefaultTable) {
  const auto t = PhonemeGroupTable::default_table();
  EXPECT_EQ(t.size(), 20u);
  EXPECT_EQ(t.group_of("f"), t.group_of("v"));
  EXPECT_EQ(t.group_of("m"), t.group_of("p"));
  EXPECT_NE(t.group_of("s"), t.group_of("ʃ"));
  EXPECT_EQ(t.group_of("?"), -1);
  for (std::size_t g = 0; g < t.size(); ++g) EXPECT_EQ(track_names()[g], t[g].name);

  const auto back = PhonemeGroupTable::from_json(t.to_json());
  EXPECT_EQ(back.group_of("θ"), t.group_of("θ"));
}

TEST(PhonemeTable, RejectsDuplicatesAndWrongSize) {
  auto j = PhonemeGroupTable::default_table().to_json();
  j["groups"][1]["phonemes"].push_back("f");
  EXPECT_THROW(PhonemeGroupTable::from_json(j), Error);
  auto k = PhonemeGroupTable::default_table().to_json();
  k["groups"].erase(0);
  EXPECT_THROW(PhonemeGroupTable::from_json(k), Error);
  EXPECT_THROW(PhonemeGroupTable::from_json(nlohmann::json::object()), Error);
}

}  // namespace
}  // namespace visemenet
