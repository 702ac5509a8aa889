// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace grabnas::cli {

// Entry point of the `grabnas` tool. Returns 0 on success, 2 for usage errors (after
// printing the usage text) and 1 for any other failure (after a one-line diagnostic).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace grabnas::cli
