// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace grabnas::ad {

namespace {

constexpr std::array<char, 12> kMagic{'G', 'R', 'A', 'B', 'N', 'A', 'S', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint64_t kMaxNameLength = 1 << 16;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw CheckpointError("truncated checkpoint");
  return value;
}

std::string get_string(std::istream& in, std::uint64_t limit) {
  const auto size = get<std::uint64_t>(in);
  if (size > limit) throw CheckpointError("implausible string length in checkpoint");
  std::string s(size, '\0');
  in.read(s.data(), static_cast<std::streamsize>(size));
  if (!in) throw CheckpointError("truncated checkpoint");
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ParamStore& params, const std::string& metadata) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, params.seed());
  put<std::uint64_t>(out, metadata.size());
  out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  put<std::uint64_t>(out, params.tensors().size());
  for (const auto& [name, m] : params.tensors()) {
    put<std::uint64_t>(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) put<double>(out, m(i, j));
  }
  if (!out) throw CheckpointError("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, kMagic.size()> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw CheckpointError("not a grabnas checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt{ParamStore(get<std::uint64_t>(in)), {}};
  ckpt.metadata = get_string(in, std::uint64_t{1} << 32);
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = get_string(in, kMaxNameLength);
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (rows > (1u << 24) || cols > (1u << 24)) throw CheckpointError("implausible tensor shape for '" + name + "'");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get<double>(in);
    if (ckpt.params.contains(name)) throw CheckpointError("duplicate tensor '" + name + "'");
    ckpt.params.set(name, std::move(m));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const std::string& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, params, metadata);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace grabnas::ad
