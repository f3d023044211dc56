#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "idl/errors.hpp"

namespace idl {

using Vector = std::vector<double>;

inline constexpr double kDefaultTol = 1e-10;
inline constexpr std::size_t kDefaultMaxIter = 10000;

/// Dense row-major matrix of 64-bit reals. Constructors reject NaN/Inf.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix diag(const Vector& d);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  bool operator==(const Matrix& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

void require_finite(std::span<const double> v, const char* what);

// ---- elementwise and structural helpers ----

Matrix transpose(const Matrix& m);
Matrix abs(const Matrix& m);
Vector abs(const Vector& v);
Matrix sign(const Matrix& m);  // entrywise, sign(0) = 0
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& m);
Vector operator+(const Vector& a, const Vector& b);
Vector operator-(const Vector& a, const Vector& b);
Vector operator*(double s, const Vector& v);

// ---- products ----

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // aᵀ b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a bᵀ
Vector matvec(const Matrix& a, const Vector& x);
Vector matvec_t(const Matrix& a, const Vector& x);  // aᵀ x
Matrix outer(const Vector& a, const Vector& b);
double dot(const Vector& a, const Vector& b);

// ---- norms ----

double norm_inf(const Vector& v);
double norm_1(const Vector& v);
double norm_2(const Vector& v);
double norm_inf_op(const Matrix& m);  // max absolute row sum
double norm_fro(const Matrix& m);

enum class Lp { One, Two, Inf };
double vector_norm(std::span<const double> v, Lp p);
Lp dual_index(Lp p);

struct NormValue {
  double value;
  bool exact;  // false: certified upper bound on the true induced norm
};

/// Induced operator norm from the l_p to the l_q unit ball. Exact for the
/// pairs that reduce to row or column vector norms and for the spectral
/// norm; the remaining pairs return a documented upper bound.
NormValue induced_norm(const Matrix& m, Lp from, Lp to,
                       double tol = kDefaultTol, std::size_t max_iter = kDefaultMaxIter);

// ---- spectral helpers ----

struct PfResult {
  double lambda;
  Vector eigvec;  // nonnegative, normalized to unit sup norm
  std::size_t iterations;
  double residual;
};

/// Dominant eigenvalue of an entrywise nonnegative square matrix by shifted
/// power iteration. Nilpotent matrices short-circuit to lambda = 0 with the
/// all-ones vector.
PfResult pf_eigen(const Matrix& m, double tol = kDefaultTol,
                  std::size_t max_iter = kDefaultMaxIter);

double topk_sum(const Vector& v, std::size_t k);

/// Solves sigma = M sigma + b for nonnegative M with spectral radius < 1 and
/// b >= 0 by forward iteration from zero. The returned residual satisfies
/// |sigma - (M sigma + b)|_inf <= tol.
Vector nonneg_resolvent(const Matrix& m, const Vector& b,
                        double tol = kDefaultTol, std::size_t max_iter = kDefaultMaxIter);

/// Same iteration without the sign restriction on b; converges whenever the
/// spectral radius of the nonnegative matrix m is below one.
Vector resolvent_apply(const Matrix& m, const Vector& b,
                       double tol = kDefaultTol, std::size_t max_iter = kDefaultMaxIter);

struct SvdFactors {
  Matrix left;   // rows x k
  Matrix right;  // cols x k, orthonormal columns
};

/// Best-effort rank-k factorization m ~= left * rightᵀ via orthogonal
/// subspace iteration with re-orthonormalization at every step.
SvdFactors truncated_svd(const Matrix& m, std::size_t k,
                         double tol = kDefaultTol, std::size_t max_iter = kDefaultMaxIter);

/// Cholesky solve for symmetric positive definite g; rhs may have many columns.
Matrix solve_spd(Matrix g, const Matrix& rhs);

}  // namespace idl
