// Copyright 2026 The Flower Authors
// SPDX-License-Identifier: Apache-2.0

#include "flower/autodiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace flower::ad {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw std::runtime_error("truncated checkpoint: " + path.string());
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + tmp);
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
      put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
      for (auto d : t.shape()) put<std::uint64_t>(os, d);
      for (double v : t.data()) put<double>(os, v);
    }
    if (!os) throw std::runtime_error("failed writing checkpoint: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw std::runtime_error("not a checkpoint file (bad magic): " + path.string());
  }
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(is, path);
  std::vector<NamedTensor> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = get<std::uint32_t>(is, path);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw std::runtime_error("truncated checkpoint: " + path.string());
    const auto rank = get<std::uint32_t>(is, path);
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(get<std::uint64_t>(is, path));
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = get<double>(is, path);
    out.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values))});
  }
  return out;
}

void restore_checkpoint(const std::filesystem::path& path, std::vector<NamedTensor>& targets) {
  std::map<std::string, Tensor> stored;
  for (auto& nt : load_checkpoint(path)) stored.emplace(nt.name, nt.tensor);
  for (auto& [name, t] : targets) {
    auto it = stored.find(name);
    if (it == stored.end()) throw std::runtime_error("checkpoint lacks tensor '" + name + "'");
    if (it->second.shape() != t.shape()) {
      throw std::runtime_error("checkpoint tensor '" + name + "' has shape " + shape_str(it->second.shape()) +
                               ", expected " + shape_str(t.shape()));
    }
    auto src = it->second.data();
    auto dst = t.mutable_data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace flower::ad
