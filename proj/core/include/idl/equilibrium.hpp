#pragma once

#include "idl/activation.hpp"
#include "idl/tensor.hpp"

namespace idl {

struct SolveOptions {
  double tol = kDefaultTol;
  std::size_t max_iter = kDefaultMaxIter;
  const Vector* warm_start = nullptr;  // defaults to the zero vector
};

struct EquilibriumResult {
  Vector x;
  std::size_t iterations;
  double residual;  // |x - phi(Ax + b)|_inf
};

/// Fixed-point iteration x <- phi(Ax + b). Stops once successive iterates
/// and the recomputed residual both fall below tol.
EquilibriumResult picard_solve(const Matrix& a, const Vector& b, const BlockStructure& s,
                               const SolveOptions& opts = {});

struct BatchEquilibriumResult {
  Matrix x;  // n x m
  std::size_t iterations;
  double residual;
};

/// Columnwise Picard iteration: column j of the result solves
/// x = phi(Ax + b_j) for the j-th column of b.
BatchEquilibriumResult picard_solve_batch(const Matrix& a, const Matrix& b,
                                          const BlockStructure& s, const SolveOptions& opts = {});

/// Exact solve for strictly block upper-triangular A via backward block
/// substitution, or for scalar upper-triangular A under a componentwise
/// ReLU structure with diag(A) < 1.
Vector triangular_solve(const Matrix& a, const Vector& b, const BlockStructure& s);

struct LowRankResult {
  Vector z;  // k
  Vector x;  // n
  std::size_t iterations;
  double residual;  // |z - Rᵀ phi(Lz + Bu)|_inf
};

/// Reduced fixed point z = Rᵀ phi(Lz + Bu) for a rank-k factorization
/// A = L Rᵀ; each sweep costs O(nk) instead of O(n²).
LowRankResult lowrank_solve(const Matrix& l, const Matrix& r, const Matrix& b,
                            const Vector& u, const BlockStructure& s,
                            const SolveOptions& opts = {});

}  // namespace idl
