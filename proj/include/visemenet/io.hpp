#pragma once

// Little-endian binary helpers, RIFF/WAV PCM16 I/O and the feature dump format.

#include "visemenet/audio_features.hpp"
#include "visemenet/common.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace visemenet {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace binary {

template <class T>
void write(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read(std::istream& is, const std::string& what) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  require(static_cast<bool>(is), ErrorCategory::kFormat, "truncated input while reading " + what);
  return value;
}

inline void write_magic(std::ostream& os, const char (&magic)[5]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char (&magic)[5], const std::string& what) {
  char buf[4] = {};
  is.read(buf, 4);
  require(static_cast<bool>(is) && std::memcmp(buf, magic, 4) == 0, ErrorCategory::kFormat,
          what + ": bad magic, expected \"" + std::string(magic, 4) + "\"");
}

}  // namespace binary

inline std::ifstream open_input(const std::filesystem::path& path, bool binary_mode = true) {
  std::ifstream is(path, binary_mode ? std::ios::binary : std::ios::in);
  require(static_cast<bool>(is), ErrorCategory::kIo, "cannot open " + path.string() + " for reading");
  return is;
}

inline std::ofstream open_output(const std::filesystem::path& path, bool binary_mode = true) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, binary_mode ? std::ios::binary : std::ios::out);
  require(static_cast<bool>(os), ErrorCategory::kIo, "cannot open " + path.string() + " for writing");
  return os;
}

// ---------------------------------------------------------------------------
// WAV

inline void write_wav(std::ostream& os, const AudioClip& clip) {
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  binary::write_magic(os, "RIFF");
  binary::write<std::uint32_t>(os, 36 + data_bytes);
  binary::write_magic(os, "WAVE");
  binary::write_magic(os, "fmt ");
  binary::write<std::uint32_t>(os, 16);
  binary::write<std::uint16_t>(os, 1);  // PCM
  binary::write<std::uint16_t>(os, 1);  // mono
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(clip.sample_rate));
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(clip.sample_rate * 2));
  binary::write<std::uint16_t>(os, 2);
  binary::write<std::uint16_t>(os, 16);
  binary::write_magic(os, "data");
  binary::write<std::uint32_t>(os, data_bytes);
  os.write(reinterpret_cast<const char*>(clip.samples.data()), data_bytes);
}

inline void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  auto os = open_output(path);
  write_wav(os, clip);
  require(static_cast<bool>(os), ErrorCategory::kIo, "failed writing " + path.string());
}

/// Reads a PCM16 mono WAV. The sample rate is returned as stored; AudioClip::validate
/// rejects anything other than 16 kHz.
inline AudioClip read_wav(std::istream& is, const std::string& name = "wav") {
  binary::expect_magic(is, "RIFF", name);
  binary::read<std::uint32_t>(is, name);
  binary::expect_magic(is, "WAVE", name);
  AudioClip clip;
  bool have_fmt = false;
  while (true) {
    char id[4];
    is.read(id, 4);
    require(static_cast<bool>(is), ErrorCategory::kFormat, name + ": missing data chunk");
    const auto size = binary::read<std::uint32_t>(is, name);
    const std::string chunk(id, 4);
    if (chunk == "fmt ") {
      require(size >= 16, ErrorCategory::kFormat, name + ": short fmt chunk");
      const auto format = binary::read<std::uint16_t>(is, name);
      const auto channels = binary::read<std::uint16_t>(is, name);
      const auto rate = binary::read<std::uint32_t>(is, name);
      binary::read<std::uint32_t>(is, name);
      binary::read<std::uint16_t>(is, name);
      const auto bits = binary::read<std::uint16_t>(is, name);
      require(format == 1 && bits == 16, ErrorCategory::kFormat, name + ": only 16-bit PCM is supported");
      require(channels == 1, ErrorCategory::kFormat, name + ": only mono audio is supported");
      clip.sample_rate = static_cast<int>(rate);
      is.ignore(size - 16 + (size & 1));
      have_fmt = true;
    } else if (chunk == "data") {
      require(have_fmt, ErrorCategory::kFormat, name + ": data chunk before fmt chunk");
      clip.samples.resize(size / 2);
      is.read(reinterpret_cast<char*>(clip.samples.data()), static_cast<std::streamsize>(size / 2 * 2));
      require(static_cast<bool>(is), ErrorCategory::kFormat, name + ": truncated data chunk");
      return clip;
    } else {
      is.ignore(size + (size & 1));
    }
  }
}

inline AudioClip read_wav(const std::filesystem::path& path) {
  auto is = open_input(path);
  return read_wav(is, path.string());
}

// ---------------------------------------------------------------------------
// Feature dump: "VNFT", u32 version, u32 num_frames, u32 dim, f32 row-major [frame][dim].

inline constexpr std::uint32_t kFeatureDumpVersion = 1;

inline void write_feature_dump(std::ostream& os, const Mat<double>& features) {
  binary::write_magic(os, "VNFT");
  binary::write<std::uint32_t>(os, kFeatureDumpVersion);
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(features.cols()));
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(features.rows()));
  for (Eigen::Index t = 0; t < features.cols(); ++t) {
    for (Eigen::Index d = 0; d < features.rows(); ++d) {
      binary::write<float>(os, static_cast<float>(features(d, t)));
    }
  }
}

inline Mat<double> read_feature_dump(std::istream& is) {
  binary::expect_magic(is, "VNFT", "feature dump");
  const auto version = binary::read<std::uint32_t>(is, "feature dump");
  require(version == kFeatureDumpVersion, ErrorCategory::kFormat,
          "unsupported feature dump version " + std::to_string(version));
  const auto frames = binary::read<std::uint32_t>(is, "feature dump");
  const auto dim = binary::read<std::uint32_t>(is, "feature dump");
  Mat<double> m(dim, frames);
  for (std::uint32_t t = 0; t < frames; ++t) {
    for (std::uint32_t d = 0; d < dim; ++d) m(d, t) = binary::read<float>(is, "feature dump");
  }
  return m;
}

inline void write_feature_csv(std::ostream& os, const Mat<double>& features) {
  os << "frame_index";
  for (int i = 0; i < kNumMfcc; ++i) os << ",mfcc" << i;
  for (int i = 0; i < kNumMelBands; ++i) os << ",mfb" << i;
  for (int i = 0; i < kNumMelBands; ++i) os << ",ssc" << i;
  os << '\n' << std::setprecision(std::numeric_limits<float>::max_digits10);
  for (Eigen::Index t = 0; t < features.cols(); ++t) {
    os << t;
    for (Eigen::Index d = 0; d < features.rows(); ++d) os << ',' << static_cast<float>(features(d, t));
    os << '\n';
  }
}

}  // namespace visemenet
