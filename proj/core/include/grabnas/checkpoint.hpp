// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary parameter container.
//
//   magic "GRABNASCKPT\0" (12 bytes)
//   u32 format version
//   u64 seed
//   u64 metadata length, metadata bytes (free-form text, JSON by convention)
//   u64 tensor count
//   per tensor: u64 name length, name bytes, u64 rows, u64 cols, rows*cols f64 row-major
//
// All integers and doubles are little-endian.

#pragma once

#include "grabnas/autodiff.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace grabnas::ad {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ParamStore params;
  std::string metadata;
};

void write_checkpoint(std::ostream& out, const ParamStore& params, const std::string& metadata = {});
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const std::string& metadata = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace grabnas::ad
