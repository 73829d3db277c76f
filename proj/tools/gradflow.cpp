// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

int main(int argc, char** argv) { return gradflow::cli::run(argc, argv); }
