#pragma once

#include <optional>

#include "idl/model.hpp"

namespace idl {

enum class ReductionMode { Identity, RowSparse, ColSparse, FullRowReduce, FullColReduce };

/// Result of a sparsity-driven reduction. The permutation reorders the
/// original states so the closed-form block sits last; predict() evaluates
/// the reduced rule exactly.
struct ReductionReport {
  std::size_t original_n;
  std::size_t reduced_n;
  ReductionMode mode;
  std::vector<std::size_t> permutation;       // new index -> original index
  std::optional<ImplicitModel> reduced_model;  // present for full reductions
  ImplicitModel permuted;                      // full model in the new ordering

  Vector predict(const Vector& u, const SolveOptions& opts = {}) const;
};

/// Rows of A that are entirely zero make their states closed-form; when the
/// matching rows of B are zero too the state disappears altogether.
ReductionReport reduce_rows(const ImplicitModel& m, double zero_tol = 0.0);

/// Columns of A that are entirely zero feed nothing back; when the matching
/// columns of C are zero too the state disappears altogether.
ReductionReport reduce_columns(const ImplicitModel& m, double zero_tol = 0.0);

struct LowRankReport {
  Matrix left;    // n x k
  Matrix right;   // n x k
  Matrix error;   // |A - left rightᵀ|
  double lambda_reduced;      // spectral radius of |right|ᵀ |left|
  bool reduced_wellposed;     // above < 1
  double lambda_full;         // spectral radius of |left rightᵀ| + error
  bool bound_available;       // above < 1, so error bounds exist

  /// Componentwise bound on |x - x_compressed| at the compressed state x0.
  Vector error_bound(const Vector& x0) const;
};

/// Rank-k factorization of A with a certified componentwise error envelope
/// for the states of the compressed rule.
LowRankReport lowrank_compress(const ImplicitModel& m, std::size_t k,
                               double tol = kDefaultTol, std::size_t max_iter = kDefaultMaxIter);

/// Column norms of (B; D); a zero score proves the feature is inert.
Vector feature_selection_scores(const ImplicitModel& m);

/// Relabels the states: entry i of the new state is entry perm[i] of the
/// old one. Componentwise structures only.
ImplicitModel permute_states(const ImplicitModel& m, const std::vector<std::size_t>& perm);

std::string render_reduction(const ReductionReport& r);

}  // namespace idl
