#pragma once

// Model checkpoints.
//
//   "VNCK", u32 version, u32 tensor count, then per tensor:
//     u32 name length, UTF-8 name, u32 rank, u32 dims[rank], f32 data (row-major)
//
// Besides the weights the table carries "meta.config" (7 values), "meta.feature_mean",
// "meta.feature_std", "meta.neutral_face" and "meta.thresholds".

#include "visemenet/io.hpp"
#include "visemenet/model.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace visemenet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;  // row-major
};

using TensorMap = std::map<std::string, StoredTensor>;

namespace detail {

inline void write_tensor(std::ostream& os, const std::string& name, const std::vector<std::uint32_t>& dims,
                         const std::vector<float>& data) {
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) binary::write<std::uint32_t>(os, d);
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
}

template <class Derived>
std::vector<float> row_major(const Eigen::MatrixBase<Derived>& m) {
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(static_cast<float>(m(r, c)));
  }
  return out;
}

inline const StoredTensor& find_tensor(const TensorMap& tensors, const std::string& name, std::size_t count) {
  const auto it = tensors.find(name);
  require(it != tensors.end(), ErrorCategory::kFormat, "checkpoint is missing tensor " + name);
  require(it->second.data.size() == count, ErrorCategory::kShape,
          "checkpoint tensor " + name + " has " + std::to_string(it->second.data.size()) + " values, expected " +
              std::to_string(count));
  return it->second;
}

inline Vec<float> vector_tensor(const TensorMap& tensors, const std::string& name, Eigen::Index n) {
  const auto& t = find_tensor(tensors, name, static_cast<std::size_t>(n));
  return Eigen::Map<const Vec<float>>(t.data.data(), n);
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const ModelParams& p) {
  p.validate();
  const auto& c = p.config;
  std::vector<std::pair<std::string, std::pair<std::vector<std::uint32_t>, std::vector<float>>>> rows;
  const std::vector<float> config = {static_cast<float>(c.lstm_hidden),         static_cast<float>(c.lstm_layers),
                                     static_cast<float>(c.decoder_hidden),      static_cast<float>(c.viseme_hidden),
                                     static_cast<float>(c.viseme_decoder_hidden), c.phoneme_stage ? 1.0f : 0.0f,
                                     c.landmark_stage ? 1.0f : 0.0f};
  auto vec = [](const auto& v) {
    return std::pair{std::vector<std::uint32_t>{static_cast<std::uint32_t>(v.size())}, detail::row_major(v)};
  };
  rows.push_back({"meta.config", {{static_cast<std::uint32_t>(config.size())}, config}});
  rows.push_back({"meta.feature_mean", vec(p.stats.mean)});
  rows.push_back({"meta.feature_std", vec(p.stats.stddev)});
  rows.push_back({"meta.neutral_face", vec(p.neutral_face)});
  rows.push_back({"meta.thresholds", vec(p.thresholds)});
  for (const auto& t : tensor_table(p.weights, c)) {
    const Eigen::Map<const Mat<float>> m(t.data, t.rows, t.cols);
    std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(t.rows)};
    if (t.cols != 1) dims.push_back(static_cast<std::uint32_t>(t.cols));
    rows.push_back({t.name, {dims, detail::row_major(m)}});
  }
  binary::write_magic(os, "VNCK");
  binary::write<std::uint32_t>(os, kCheckpointVersion);
  binary::write<std::uint32_t>(os, static_cast<std::uint32_t>(rows.size()));
  for (const auto& [name, t] : rows) detail::write_tensor(os, name, t.first, t.second);
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelParams& p) {
  auto os = open_output(path);
  write_checkpoint(os, p);
  require(static_cast<bool>(os), ErrorCategory::kIo, "failed writing " + path.string());
}

inline TensorMap read_tensor_map(std::istream& is, const std::string& name) {
  binary::expect_magic(is, "VNCK", name);
  const auto version = binary::read<std::uint32_t>(is, name);
  require(version == kCheckpointVersion, ErrorCategory::kFormat,
          name + ": unsupported checkpoint version " + std::to_string(version));
  const auto count = binary::read<std::uint32_t>(is, name);
  TensorMap tensors;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = binary::read<std::uint32_t>(is, name);
    require(len < 4096, ErrorCategory::kFormat, name + ": implausible tensor name length");
    std::string tname(len, '\0');
    is.read(tname.data(), len);
    StoredTensor t;
    const auto rank = binary::read<std::uint32_t>(is, name);
    require(rank <= 4, ErrorCategory::kFormat, name + ": implausible tensor rank");
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.dims.push_back(binary::read<std::uint32_t>(is, name));
      n *= t.dims.back();
    }
    require(n < (std::size_t{1} << 30), ErrorCategory::kFormat, name + ": implausible tensor size");
    t.data.resize(n);
    is.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(n * sizeof(float)));
    require(static_cast<bool>(is), ErrorCategory::kFormat, name + ": truncated tensor " + tname);
    require(tensors.emplace(tname, std::move(t)).second, ErrorCategory::kFormat, name + ": duplicate tensor " + tname);
  }
  return tensors;
}

inline ModelParams read_checkpoint(std::istream& is, const std::string& name = "checkpoint") {
  const TensorMap tensors = read_tensor_map(is, name);
  const Vec<float> cv = detail::vector_tensor(tensors, "meta.config", 7);
  ModelParams p;
  p.config.lstm_hidden = static_cast<int>(cv[0]);
  p.config.lstm_layers = static_cast<int>(cv[1]);
  p.config.decoder_hidden = static_cast<int>(cv[2]);
  p.config.viseme_hidden = static_cast<int>(cv[3]);
  p.config.viseme_decoder_hidden = static_cast<int>(cv[4]);
  p.config.phoneme_stage = cv[5] != 0.0f;
  p.config.landmark_stage = cv[6] != 0.0f;
  p.config.validate();
  p.stats.mean = detail::vector_tensor(tensors, "meta.feature_mean", kFeatureDim).cast<double>();
  p.stats.stddev = detail::vector_tensor(tensors, "meta.feature_std", kFeatureDim).cast<double>();
  p.neutral_face = detail::vector_tensor(tensors, "meta.neutral_face", kLandmarkDim);
  p.thresholds = detail::vector_tensor(tensors, "meta.thresholds", kRigDim);
  std::mt19937_64 rng(0);
  p.weights = init_weights<float>(p.config, rng);
  std::size_t used = 5;
  for (auto& t : tensor_table(p.weights, p.config)) {
    const auto& st = detail::find_tensor(tensors, t.name, static_cast<std::size_t>(t.size()));
    Eigen::Map<Mat<float>> m(t.data, t.rows, t.cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < t.rows; ++r) {
      for (Eigen::Index c = 0; c < t.cols; ++c) m(r, c) = st.data[k++];
    }
    ++used;
  }
  require(used == tensors.size(), ErrorCategory::kFormat, name + ": checkpoint has unexpected extra tensors");
  p.validate();
  return p;
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
  auto is = open_input(path);
  return read_checkpoint(is, path.string());
}

}  // namespace visemenet
