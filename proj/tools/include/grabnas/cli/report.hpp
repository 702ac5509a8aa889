// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0
//
// Aggregation of search traces into per-method summaries and anytime curves.

#pragma once

#include "grabnas/search.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace grabnas::cli {

struct MethodSummary {
  std::string method;
  std::size_t traces = 0;
  // Final best across traces; the standard deviation is the sample one, 0 for one trace.
  double final_mean = 0.0;
  double final_std = 0.0;
  // Only when every trace of the method records its optimum.
  std::optional<double> median_regret;
  // Evaluated keys outside the enumerated space, summed over traces.
  std::size_t novel_evaluations = 0;
  // final best - remaining best, per trace; empty unless the traces are pruning runs.
  std::vector<double> deltas;
  // Entry i: median over traces of best-so-far after iteration i. A trace's value at
  // iteration i is its last row with iter <= i, so shorter traces carry forward.
  std::vector<double> curve;
};

// Median with the two middle values averaged for even counts.
double median(std::vector<double> values);

// Throws std::invalid_argument on an empty list, an empty trace, or a method whose
// traces disagree on whether they are pruning runs.
std::vector<MethodSummary> summarize(const std::vector<search::SearchTrace>& traces,
                                     const std::unordered_set<std::string>& space_keys);

// Canonical keys of the enumerated cell space.
std::unordered_set<std::string> space_key_set();

// Expands directories into their *.csv files (sorted) and reads every trace.
std::vector<search::SearchTrace> load_traces(const std::vector<std::filesystem::path>& inputs);

std::string summary_json(const std::vector<MethodSummary>& summaries);
// iter column, then one median column per method; blank past a method's last iteration.
void write_curves(std::ostream& out, const std::vector<MethodSummary>& summaries);

}  // namespace grabnas::cli
