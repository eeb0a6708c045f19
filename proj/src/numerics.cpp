#include "dflbench/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

namespace dflbench {

Matrix::Matrix(std::size_t rows, std::size_t cols, Vector values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  require(values_.size() == rows_ * cols_, ErrorCode::kDimMismatch,
          "matrix " + std::to_string(rows_) + "x" + std::to_string(cols_) + " given " +
              std::to_string(values_.size()) + " values");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::kDimMismatch, "dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Vector operator+(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) fail(ErrorCode::kDimMismatch, "vector add: size mismatch");
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

Vector operator-(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) fail(ErrorCode::kDimMismatch, "vector subtract: size mismatch");
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

Vector operator*(double s, const Vector& v) {
  Vector r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r[i] = s * v[i];
  return r;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) fail(ErrorCode::kDimMismatch, "matvec: size mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) fail(ErrorCode::kDimMismatch, "matvec_transposed: size mismatch");
  Vector y(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) y[c] += row[c] * x[r];
  }
  return y;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) fail(ErrorCode::kDimMismatch, "matmul: inner dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

LuFactorization::LuFactorization(Matrix a, double pivot_tol) : lu_(std::move(a)) {
  const std::size_t n = lu_.rows();
  require(lu_.cols() == n, ErrorCode::kDimMismatch, "LU requires a square matrix");
  perm_.resize(n);
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(lu_(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(lu_(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (!(best >= pivot_tol))
      fail(ErrorCode::kSingularMatrix, "pivot " + std::to_string(best) + " at column " +
                                           std::to_string(k));
    if (p != k) {
      std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(), lu_.row(p).begin());
      std::swap(perm_[k], perm_[p]);
    }
    const double pivot = lu_(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu_(i, k) / pivot;
      lu_(i, k) = f;
      if (f == 0.0) continue;
      double* ri = lu_.row(i).data();
      const double* rk = lu_.row(k).data();
      for (std::size_t j = k + 1; j < n; ++j) ri[j] -= f * rk[j];
    }
  }
}

Vector LuFactorization::solve(std::span<const double> b) const {
  const std::size_t n = lu_.rows();
  require(b.size() == n, ErrorCode::kDimMismatch, "LU solve: rhs size mismatch");
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * x[j];
    x[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= lu_(i, j) * x[j];
    x[i] = s / lu_(i, i);
  }
  return x;
}

Vector LuFactorization::solve_transposed(std::span<const double> b) const {
  // P A = L U  =>  A^T = U^T L^T P, solve U^T w = b, L^T v = w, x = P^T v.
  const std::size_t n = lu_.rows();
  require(b.size() == n, ErrorCode::kDimMismatch, "LU solve: rhs size mismatch");
  Vector w(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = w[i];
    for (std::size_t j = 0; j < i; ++j) s -= lu_(j, i) * w[j];
    w[i] = s / lu_(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = w[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= lu_(j, i) * w[j];
    w[i] = s;
  }
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[perm_[i]] = w[i];
  return x;
}

Vector solve_linear_system(const Matrix& a, std::span<const double> b) {
  require(a.rows() == a.cols(), ErrorCode::kDimMismatch, "solve_linear_system: A not square");
  require(a.rows() == b.size(), ErrorCode::kDimMismatch, "solve_linear_system: b size mismatch");
  return LuFactorization(a).solve(b);
}

Matrix cholesky(const Matrix& a, double tol) {
  const std::size_t n = a.rows();
  require(a.cols() == n, ErrorCode::kDimMismatch, "cholesky requires a square matrix");
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > tol)) fail(ErrorCode::kSingularMatrix, "cholesky: non-positive pivot at " + std::to_string(j));
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

SphereProjection project_unit_sphere(std::span<const double> v) {
  SphereProjection out{Vector(v.begin(), v.end()), false};
  const double n = norm2(v);
  if (!(n > 1e-12)) {
    out.degenerate = true;
    return out;
  }
  for (double& x : out.v) x /= n;
  return out;
}

}  // namespace dflbench
