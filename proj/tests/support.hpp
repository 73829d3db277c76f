// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by the test binaries. Oracles here are deliberately written
// without the library's own solvers.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "gradflow/linalg.hpp"
#include "gradflow/losses.hpp"
#include "gradflow/network.hpp"
#include "gradflow/random.hpp"

namespace gradflow::testing {

inline double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-300});
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline Matrix random_symmetric(std::size_t n, Rng& rng) {
  Matrix a = rng.normal_matrix(n, n);
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

// Gaussian elimination with partial pivoting; the system must be regular.
inline Vector solve_dense(Matrix a, Vector b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(a(r, c)) > std::fabs(a(p, c))) p = r;
    for (std::size_t j = 0; j < n; ++j) std::swap(a(c, j), a(p, j));
    std::swap(b[c], b[p]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      for (std::size_t j = c; j < n; ++j) a(r, j) -= f * a(c, j);
      b[r] -= f * b[c];
    }
  }
  Vector x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return x;
}

// det(A − μI) by elimination, for the characteristic-polynomial oracle.
inline double shifted_determinant(const Matrix& a, double mu) {
  const std::size_t n = a.rows();
  Matrix m = a;
  for (std::size_t i = 0; i < n; ++i) m(i, i) -= mu;
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(m(r, c)) > std::fabs(m(p, c))) p = r;
    if (m(p, c) == 0.0) return 0.0;
    if (p != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(c, j), m(p, j));
      det = -det;
    }
    det *= m(c, c);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = m(r, c) / m(c, c);
      for (std::size_t j = c; j < n; ++j) m(r, j) -= f * m(c, j);
    }
  }
  return det;
}

// Roots of det(A − μI) by scanning for sign changes and bisecting each one.
inline Vector characteristic_roots(const Matrix& a, std::size_t grid = 20000) {
  double bound = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) r += std::fabs(a(i, j));
    bound = std::max(bound, r);
  }
  bound += 1.0;
  Vector roots;
  double lo = -bound, flo = shifted_determinant(a, lo);
  for (std::size_t k = 1; k <= grid; ++k) {
    const double hi = -bound + 2.0 * bound * static_cast<double>(k) / static_cast<double>(grid);
    const double fhi = shifted_determinant(a, hi);
    if ((flo < 0) != (fhi < 0)) {
      double l = lo, h = hi, fl = flo;
      for (int it = 0; it < 200 && h - l > 1e-15 * std::max(1.0, std::fabs(l)); ++it) {
        const double m = 0.5 * (l + h);
        const double fm = shifted_determinant(a, m);
        if ((fm < 0) == (fl < 0)) {
          l = m;
          fl = fm;
        } else {
          h = m;
        }
      }
      roots.push_back(0.5 * (l + h));
    }
    lo = hi;
    flo = fhi;
  }
  std::sort(roots.begin(), roots.end(), std::greater<>());
  return roots;
}

inline Dataset regression_data(std::vector<Vector> xs, Vector ys) {
  Dataset d;
  d.inputs = std::move(xs);
  d.labels = std::move(ys);
  d.task = TaskKind::regression;
  return d;
}

inline Dataset binary_data(std::vector<Vector> xs, Vector ys) {
  Dataset d;
  d.inputs = std::move(xs);
  d.labels = std::move(ys);
  d.task = TaskKind::binary;
  return d;
}

// Random inputs with labels taken from the net itself: an interpolating
// square-loss minimum.
inline Dataset interpolated_by(const DeepNet& net, std::size_t n, Rng& rng) {
  Dataset d;
  d.task = TaskKind::regression;
  for (std::size_t i = 0; i < n; ++i) {
    d.inputs.push_back(rng.normal_vector(net.input_dim()));
    d.labels.push_back(forward(net, d.inputs.back()));
  }
  return d;
}

// Loss as a function of the flattened weights.
inline std::function<double(std::span<const double>)> loss_of_params(LossKind kind, const DeepNet& net,
                                                                     const Dataset& data) {
  return [kind, net, data](std::span<const double> p) {
    return loss(kind, net.with_layers(unflatten_like(net, p)), data).value;
  };
}

}  // namespace gradflow::testing
