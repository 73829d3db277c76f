// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace gradflow::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInvalid = 1;         // validation or I/O error
inline constexpr int kCheckFailed = 2;     // --check and a predicate failed
inline constexpr int kUsage = 64;          // unknown subcommand or bad flags

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace gradflow::cli
