// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace grabnas {

// Worker count: GRABNAS_THREADS when set to a positive integer, else the hardware
// concurrency (at least 1).
std::size_t worker_count();

// Calls body(i) for every i in [0, n). Each index is handled exactly once; bodies
// must only write state owned by their index. The first exception is rethrown. Calls
// made from inside a body run serially on that worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace grabnas
