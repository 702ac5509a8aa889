// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/cli/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace grabnas::cli {

namespace fs = std::filesystem;

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of nothing");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

namespace {

std::vector<double> best_by_iter(const search::SearchTrace& t, int last_iter) {
  std::vector<double> out(static_cast<std::size_t>(last_iter) + 1, std::nan(""));
  for (const auto& row : t.rows) out[static_cast<std::size_t>(row.iter)] = row.best_so_far;
  // Rows are in order, so the assignment above left the last row of each iteration.
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (std::isnan(out[i])) out[i] = out[i - 1];
  }
  return out;
}

MethodSummary summarize_method(const std::string& method, const std::vector<const search::SearchTrace*>& traces,
                               const std::unordered_set<std::string>& space_keys) {
  MethodSummary s;
  s.method = method;
  s.traces = traces.size();

  const bool pruned = traces.front()->remaining_best.has_value();
  bool all_optima = true;
  int last_iter = 0;
  std::vector<double> finals;
  std::vector<double> regrets;
  for (const auto* t : traces) {
    if (t->rows.empty()) throw std::invalid_argument("trace for " + method + " on " + t->task + " has no rows");
    if (t->remaining_best.has_value() != pruned) {
      throw std::invalid_argument("traces for " + method + " mix pruning and non-pruning runs");
    }
    finals.push_back(t->final_best());
    if (t->optimum) regrets.push_back(*t->optimum - t->final_best());
    else all_optima = false;
    if (pruned) s.deltas.push_back(t->final_best() - *t->remaining_best);
    for (const auto& row : t->rows) {
      if (!space_keys.count(row.key)) ++s.novel_evaluations;
      last_iter = std::max(last_iter, row.iter);
    }
  }

  const double n = static_cast<double>(finals.size());
  s.final_mean = std::accumulate(finals.begin(), finals.end(), 0.0) / n;
  if (finals.size() > 1) {
    double ss = 0.0;
    for (double f : finals) ss += (f - s.final_mean) * (f - s.final_mean);
    s.final_std = std::sqrt(ss / (n - 1.0));
  }
  if (all_optima) s.median_regret = median(regrets);

  std::vector<std::vector<double>> columns;
  for (const auto* t : traces) columns.push_back(best_by_iter(*t, last_iter));
  s.curve.resize(static_cast<std::size_t>(last_iter) + 1);
  for (std::size_t i = 0; i < s.curve.size(); ++i) {
    std::vector<double> at;
    for (const auto& c : columns) {
      if (!std::isnan(c[i])) at.push_back(c[i]);
    }
    s.curve[i] = at.empty() ? std::nan("") : median(at);
  }
  return s;
}

}  // namespace

std::vector<MethodSummary> summarize(const std::vector<search::SearchTrace>& traces,
                                     const std::unordered_set<std::string>& space_keys) {
  if (traces.empty()) throw std::invalid_argument("report needs at least one trace");
  std::map<std::string, std::vector<const search::SearchTrace*>> groups;
  for (const auto& t : traces) groups[t.method].push_back(&t);
  std::vector<MethodSummary> out;
  for (const auto& [method, members] : groups) out.push_back(summarize_method(method, members, space_keys));
  return out;
}

std::unordered_set<std::string> space_key_set() {
  std::unordered_set<std::string> keys;
  for (const auto& g : dag::enumerate_search_space()) keys.insert(dag::canonical_key(g));
  return keys;
}

std::vector<search::SearchTrace> load_traces(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& p : inputs) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(p)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  std::vector<search::SearchTrace> traces;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw std::runtime_error("cannot read " + f.string());
    traces.push_back(search::read_trace(in, f.string()));
  }
  return traces;
}

std::string summary_json(const std::vector<MethodSummary>& summaries) {
  nlohmann::json root = nlohmann::json::object();
  for (const auto& s : summaries) {
    nlohmann::json m = {{"traces", s.traces},
                        {"final_best_mean", s.final_mean},
                        {"final_best_std", s.final_std},
                        {"novel_evaluations", s.novel_evaluations}};
    if (s.median_regret) m["median_regret"] = *s.median_regret;
    if (!s.deltas.empty()) {
      m["delta"] = s.deltas;
      m["delta_positive"] = std::count_if(s.deltas.begin(), s.deltas.end(), [](double d) { return d > 0.0; });
    }
    root[s.method] = std::move(m);
  }
  return root.dump(2);
}

void write_curves(std::ostream& out, const std::vector<MethodSummary>& summaries) {
  std::size_t length = 0;
  out << "iter";
  for (const auto& s : summaries) {
    out << ',' << s.method;
    length = std::max(length, s.curve.size());
  }
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < length; ++i) {
    out << i;
    for (const auto& s : summaries) {
      out << ',';
      if (i < s.curve.size() && !std::isnan(s.curve[i])) {
        std::snprintf(buf, sizeof buf, "%.17g", s.curve[i]);
        out << buf;
      }
    }
    out << '\n';
  }
}

}  // namespace grabnas::cli
