// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded random source with portable normal draws. std::normal_distribution
// is implementation-defined, so it is avoided for byte-reproducible output.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "gradflow/linalg.hpp"

namespace gradflow {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  Vector normal_vector(std::size_t n, double stddev = 1.0) {
    Vector v(n);
    for (double& e : v) e = stddev * normal();
    return v;
  }
  Matrix normal_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0) {
    return Matrix(rows, cols, normal_vector(rows * cols, stddev));
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gradflow
