// Copyright 2026 The eqscene Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "eqscene/cli/cli.hpp"

int main(int argc, char** argv) { return eqscene::cli::main(argc, argv, std::cout, std::cerr); }
