// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "grabnas/autodiff.hpp"

#include <functional>
#include <string>

namespace grabnas::ad {

// Rescales all gradients so their joint L2 norm is at most max_norm. Returns the norm
// before clipping.
double clip_global_norm(GradMap& grads, double max_norm);

// Adam with a constant step size. Gradients are for a loss to be minimised.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Only parameters accepted by the filter (all by default) are updated.
  void step(ParamStore& params, const GradMap& grads);
  void set_filter(std::function<bool(const std::string&)> filter) { filter_ = std::move(filter); }
  long steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, Matrix> m_, v_;
  std::function<bool(const std::string&)> filter_;
};

}  // namespace grabnas::ad
