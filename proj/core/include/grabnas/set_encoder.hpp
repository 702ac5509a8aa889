// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset encoder: a Set Transformer turns each class's sampled instances into a
// prototype, and a second one pools the prototypes into a single dataset embedding.

#pragma once

#include "grabnas/autodiff.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace grabnas::dataset {

using ad::Matrix;
using ad::ParamStore;
using ad::RowVector;
using ad::Tape;
using ad::Var;

class TaskError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TaskSpec {
  std::string id;
  // One matrix per class, one row per instance.
  std::vector<Matrix> classes;

  Eigen::Index feature_dim() const { return classes.empty() ? 0 : classes.front().cols(); }
  std::size_t instance_count() const;
  // At least two classes, at least one instance each, uniform width.
  void validate() const;
};

// Header `task <id> classes=<C> dim=<d>`, then `<class-index> <v_0> ... <v_{d-1}>` per instance.
void write_task(std::ostream& out, const TaskSpec& task);
TaskSpec read_task(std::istream& in);
void save_task(const std::filesystem::path& path, const TaskSpec& task);
TaskSpec load_task(const std::filesystem::path& path);

struct DatasetEmbedding {
  RowVector values;
};

struct SetEncoderConfig {
  Eigen::Index input_dim = 8;
  Eigen::Index width = 56;
  Eigen::Index heads = 4;
  int sab_blocks = 2;
  std::size_t samples_per_class = 10;
};

class SetEncoder {
 public:
  explicit SetEncoder(SetEncoderConfig config, std::string prefix = "dataset");

  const SetEncoderConfig& config() const noexcept { return config_; }
  const std::string& prefix() const noexcept { return prefix_; }

  void init(ParamStore& params) const;

  // LN(H + MLP(H)) with H = LN(Y + MH(Y, Y, Y)).
  Var sab(Tape& tape, Var set, const ParamStore& params, const std::string& block) const;
  // LN(H + MLP(H)) with H = LN(R + MH(R, MLP(Y), MLP(Y))) and one seed vector R.
  Var pma(Tape& tape, Var set, const ParamStore& params, const std::string& block) const;
  Var multihead(Tape& tape, Var query, Var key, Var value, const ParamStore& params,
                const std::string& block) const;

  // Samples per class come from config().samples_per_class unless overridden. Classes
  // with fewer instances are sampled with replacement. Instances are put in a content
  // order before sampling, so the result does not depend on class or instance order.
  Var encode(Tape& tape, const TaskSpec& task, const ParamStore& params, std::uint64_t seed,
             std::size_t samples_per_class = 0) const;
  DatasetEmbedding encode(const TaskSpec& task, const ParamStore& params, std::uint64_t seed,
                          std::size_t samples_per_class = 0) const;

  // Block names used by encode(): instance-level blocks then class-level blocks.
  std::string instance_block(const std::string& name) const { return prefix_ + ".instance." + name; }
  std::string class_block(const std::string& name) const { return prefix_ + ".class." + name; }

  void init_sab(ParamStore& params, const std::string& block) const;
  void init_pma(ParamStore& params, const std::string& block) const;

 private:
  void init_multihead(ParamStore& params, const std::string& block) const;
  void init_feedforward(ParamStore& params, const std::string& block) const;
  void init_norm(ParamStore& params, const std::string& block) const;
  Var feedforward(Tape& tape, Var x, const ParamStore& params, const std::string& block) const;
  Var norm(Tape& tape, Var x, const ParamStore& params, const std::string& block) const;
  Matrix sample_class(const Matrix& instances, std::uint64_t seed, std::size_t samples) const;

  SetEncoderConfig config_;
  std::string prefix_;
};

}  // namespace grabnas::dataset
