// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradflow/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace gradflow {

namespace {

constexpr double kGramCutoff = 1e-12;

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << what << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
       << b.cols();
    throw LinalgError(os.str());
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw LinalgError("matrix data length " + std::to_string(data_.size()) + " != " +
                      std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw LinalgError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Vector Matrix::column(std::size_t c) const {
  Vector v(rows_);
  for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
  return v;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  require_same_shape(*this, o, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  require_same_shape(*this, o, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw LinalgError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                      std::to_string(b.rows()) + " differ");
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    throw LinalgError("matvec: matrix has " + std::to_string(a.cols()) + " columns, vector has " +
                      std::to_string(x.size()) + " entries");
  }
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) {
    throw LinalgError("matvec_transposed: matrix has " + std::to_string(a.rows()) +
                      " rows, vector has " + std::to_string(x.size()) + " entries");
  }
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += r[j] * xi;
  }
  return y;
}

Matrix outer(std::span<const double> u, std::span<const double> v) {
  Matrix m(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw LinalgError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) {
  // Scaled accumulation so tiny or huge entries neither underflow nor overflow.
  double scale = 0.0;
  double ssq = 1.0;
  for (double v : a) {
    if (v == 0.0) continue;
    const double av = std::fabs(v);
    if (scale < av) {
      ssq = 1.0 + ssq * (scale / av) * (scale / av);
      scale = av;
    } else {
      ssq += (av / scale) * (av / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

double frobenius_norm(const Matrix& a) { return norm2(a.data()); }

double frobenius_dot(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "frobenius_dot");
  return dot(a.data(), b.data());
}

double trace(const Matrix& a) {
  if (!a.square()) throw LinalgError("trace: non-square matrix");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
  return s;
}

double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::fabs(v));
  return m;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

double relative_asymmetry(const Matrix& a) {
  if (!a.square()) throw LinalgError("relative_asymmetry: non-square matrix");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      worst = std::max(worst, std::fabs(a(i, j) - a(j, i)));
  const double scale = max_abs(a.data());
  return scale > 0.0 ? worst / scale : 0.0;
}

EigenDecomposition symmetric_eig(const Matrix& a, double tol) {
  if (!a.square()) {
    throw LinalgError("symmetric_eig: matrix is " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + ", not square");
  }
  for (double v : a.data()) {
    if (!std::isfinite(v)) throw LinalgError("symmetric_eig: non-finite entry");
  }
  const double asym = relative_asymmetry(a);
  if (asym > 1e-12) {
    std::ostringstream os;
    os << "symmetric_eig: relative asymmetry " << asym << " exceeds 1e-12";
    throw LinalgError(os.str());
  }

  const std::size_t n = a.rows();
  Matrix m = a;
  // Work on the exactly symmetric average.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m(i, j) = m(j, i) = 0.5 * (a(i, j) + a(j, i));
  Matrix v = Matrix::identity(n);

  const double target = tol * frobenius_norm(a);
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * m(i, j) * m(i, j);
    return std::sqrt(s);
  };

  EigenDecomposition out;
  constexpr int kMaxSweeps = 100;
  while (off_norm() > target && out.sweeps < kMaxSweeps) {
    ++out.sweeps;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        // Rotation annihilating m(p,q) (Golub & Van Loan, sym.schur2).
        const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double mkp = m(k, p);
          const double mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double mpk = m(p, k);
          const double mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        m(p, q) = m(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return m(i, i) > m(j, j); });

  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t src = order[c];
    out.eigenvalues[c] = m(src, src);
    double vmax = 0.0;
    for (std::size_t r = 0; r < n; ++r) vmax = std::max(vmax, std::fabs(v(r, src)));
    double sign = 1.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (std::fabs(v(r, src)) > 1e-12 * vmax) {
        sign = v(r, src) < 0.0 ? -1.0 : 1.0;
        break;
      }
    }
    for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, c) = sign * v(r, src);
  }
  return out;
}

namespace {

struct GramPseudoInverse {
  std::vector<Vector> row_basis;  // orthonormal basis of the row space of X, each length d
  std::vector<Vector> gram_vecs;  // matching Gram eigenvectors, each length n
  Vector gram_vals;
  double gram_max = 0.0;
  double gram_min = 0.0;  // smallest Gram eigenvalue, including dropped ones
};

GramPseudoInverse gram_pinv(const Matrix& x) {
  if (x.rows() == 0 || x.cols() == 0) throw LinalgError("empty data matrix");
  if (max_abs(x.data()) == 0.0) throw LinalgError("data matrix is identically zero");
  const Matrix gram = matmul(x, x.transpose());
  const auto eig = symmetric_eig(gram);
  const double cut = kGramCutoff * std::max(eig.eigenvalues.front(), 0.0);
  GramPseudoInverse g;
  g.gram_max = eig.eigenvalues.front();
  g.gram_min = eig.eigenvalues.back();
  for (std::size_t i = 0; i < eig.eigenvalues.size(); ++i) {
    const double lam = eig.eigenvalues[i];
    if (!(lam > cut)) continue;
    Vector q = eig.eigenvectors.column(i);
    Vector u = matvec_transposed(x, q);
    const double inv = 1.0 / std::sqrt(lam);
    for (double& e : u) e *= inv;
    g.row_basis.push_back(std::move(u));
    g.gram_vecs.push_back(std::move(q));
    g.gram_vals.push_back(lam);
  }
  return g;
}

}  // namespace

MinNormResult min_norm_solve(const Matrix& x, std::span<const double> y) {
  if (y.size() != x.rows()) {
    throw LinalgError("min_norm_least_squares: " + std::to_string(x.rows()) + " rows but " +
                      std::to_string(y.size()) + " targets");
  }
  const auto g = gram_pinv(x);
  MinNormResult out;
  // w = Σᵢ uᵢ (qᵢᵀy)/√λᵢ with uᵢ = Xᵀqᵢ/√λᵢ.
  out.w.assign(x.cols(), 0.0);
  for (std::size_t i = 0; i < g.gram_vals.size(); ++i) {
    const double coef = dot(g.gram_vecs[i], y) / std::sqrt(g.gram_vals[i]);
    for (std::size_t j = 0; j < out.w.size(); ++j) out.w[j] += coef * g.row_basis[i][j];
  }
  out.rank = g.gram_vals.size();
  // XXᵀ and XᵀX share their nonzero spectrum; only a rank below min(N, d)
  // makes the problem singular.
  const bool full = out.rank == std::min(x.rows(), x.cols());
  out.gram_condition = full ? g.gram_max / g.gram_vals.back() : std::numeric_limits<double>::infinity();
  return out;
}

Vector min_norm_least_squares(const Matrix& x, std::span<const double> y) {
  return min_norm_solve(x, y).w;
}

Matrix null_space_projector(const Matrix& x) {
  const auto g = gram_pinv(x);
  Matrix p = Matrix::identity(x.cols());
  for (const auto& u : g.row_basis)
    for (std::size_t i = 0; i < u.size(); ++i)
      for (std::size_t j = 0; j < u.size(); ++j) p(i, j) -= u[i] * u[j];
  return p;
}

std::size_t numerical_rank(const Matrix& x) { return gram_pinv(x).gram_vals.size(); }

}  // namespace gradflow
