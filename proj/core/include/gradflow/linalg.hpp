// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense real matrix/vector kernel: symmetric eigendecomposition by cyclic
// Jacobi rotations, minimum-norm least squares, norms.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gradflow {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  Vector column(std::size_t c) const;

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  Matrix transpose() const;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  bool operator==(const Matrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);
// aᵀx without materializing the transpose.
Vector matvec_transposed(const Matrix& a, std::span<const double> x);
Matrix outer(std::span<const double> u, std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double frobenius_norm(const Matrix& a);
// Frobenius inner product Σᵢⱼ aᵢⱼbᵢⱼ.
double frobenius_dot(const Matrix& a, const Matrix& b);
double trace(const Matrix& a);
double max_abs(std::span<const double> a);
double cosine(std::span<const double> a, std::span<const double> b);

// Thrown when an input violates a kernel precondition (shape, symmetry, rank).
class LinalgError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EigenDecomposition {
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // column i pairs with eigenvalues[i]
  int sweeps = 0;
};

// Cyclic Jacobi. Iterates until the off-diagonal Frobenius norm is at most
// tol·‖A‖_F. Ties in eigenvalue keep original diagonal order; each
// eigenvector is signed so its first nonzero component is positive.
EigenDecomposition symmetric_eig(const Matrix& a, double tol = 1e-14);

// max |aᵢⱼ − aⱼᵢ| / max(‖A‖_max, tiny).
double relative_asymmetry(const Matrix& a);

// Minimum-norm minimizer of ‖Xw − y‖ via w = Xᵀ(XXᵀ)⁺y; Gram eigenvalues
// below 1e-12·λ_max are dropped.
Vector min_norm_least_squares(const Matrix& x, std::span<const double> y);

struct MinNormResult {
  Vector w;
  std::size_t rank = 0;
  double gram_condition = 0.0;  // over the min(N, d) leading Gram eigenvalues; infinite below full rank
};
MinNormResult min_norm_solve(const Matrix& x, std::span<const double> y);

// Orthogonal projector onto the null space of X (d×d), built from the same
// truncated Gram pseudo-inverse as min_norm_least_squares.
Matrix null_space_projector(const Matrix& x);

// Numerical rank of X using the Gram cutoff above.
std::size_t numerical_rank(const Matrix& x);

}  // namespace gradflow
