#pragma once

#include "visemenet/audio_features.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace visemenet::testing {

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "visemenet_" + tag;
    if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
    path_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

/// Noise plus a few tones, loud enough to keep every mel band above the energy floor.
inline AudioClip noisy_tones(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 400.0);
  std::uniform_real_distribution<double> freq(200.0, 6000.0);
  const double f1 = freq(rng), f2 = freq(rng);
  AudioClip clip;
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    const double s = 6000.0 * std::sin(2 * M_PI * f1 * t) + 3000.0 * std::sin(2 * M_PI * f2 * t) + noise(rng);
    clip.samples[i] = static_cast<std::int16_t>(std::lround(std::clamp(s, -32768.0, 32767.0)));
  }
  return clip;
}

}  // namespace visemenet::testing
