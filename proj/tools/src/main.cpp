// Copyright (c) 2026 The grabnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "grabnas/cli/app.hpp"

#include <iostream>

int main(int argc, char** argv) { return grabnas::cli::run_cli(argc, argv, std::cout, std::cerr); }
