#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dflbench/error.hpp"

namespace dflbench {

using Vector = std::vector<double>;

// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, Vector values);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  const Vector& values() const noexcept { return values_; }
  Vector& values() noexcept { return values_; }

  Matrix transpose() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector values_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double norm_inf(std::span<const double> v);

Vector operator+(const Vector& a, const Vector& b);
Vector operator-(const Vector& a, const Vector& b);
Vector operator*(double s, const Vector& v);

// y = A x
Vector matvec(const Matrix& a, std::span<const double> x);
// y = A^T x
Vector matvec_transposed(const Matrix& a, std::span<const double> x);
Matrix matmul(const Matrix& a, const Matrix& b);

bool all_finite(std::span<const double> v);

// LU factorization with partial pivoting; reusable across right-hand sides.
class LuFactorization {
 public:
  // Throws kSingularMatrix when a pivot magnitude falls below pivot_tol.
  explicit LuFactorization(Matrix a, double pivot_tol = 1e-12);

  Vector solve(std::span<const double> b) const;
  // Solves A^T x = b with the same factors.
  Vector solve_transposed(std::span<const double> b) const;
  std::size_t size() const noexcept { return lu_.rows(); }

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
};

Vector solve_linear_system(const Matrix& a, std::span<const double> b);

// Lower-triangular L with A = L L^T, or kSingularMatrix if A is not positive definite
// (a diagonal entry of at most `tol` after elimination).
Matrix cholesky(const Matrix& a, double tol = 0.0);

struct SphereProjection {
  Vector v;
  bool degenerate = false;
};

SphereProjection project_unit_sphere(std::span<const double> v);

}  // namespace dflbench
