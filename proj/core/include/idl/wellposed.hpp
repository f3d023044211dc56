#pragma once

#include <string>
#include <vector>

#include "idl/model.hpp"

namespace idl {

enum class WpMethod { ConePF, BlipPF, Structural };

struct SccReport {
  std::vector<std::size_t> members;  // state or block indices, granularity per method
  double lambda;                     // spectral radius bound used for this component
  bool certified;
  bool exact_scalar;  // 1x1 ReLU component tested by the exact diagonal condition
};

struct WellPosednessReport {
  WpMethod method;
  bool certified;
  double lambda;  // spectral radius estimate; for Structural the max over components
  double margin;
  std::vector<SccReport> components;  // Structural only, in topological order
  std::string note;
};

inline constexpr double kCertMargin = 1e-9;

/// Sufficient test for componentwise non-expansive activations: the spectral
/// radius of |A| below one guarantees a unique equilibrium for every bias.
WellPosednessReport check_cone_pf(const Matrix& a, double margin = kCertMargin,
                                  double tol = kDefaultTol, std::size_t max_iter = kDefaultMaxIter);

struct NormMatrixSet {
  Matrix na;                    // L x L, block-to-block induced norms of A
  Matrix nb;                    // L x p, per-block column norms of B
  Matrix nc;                    // q x L, dual-norm row norms of C
  std::vector<bool> na_exact;   // row-major flags for na entries
};

NormMatrixSet norm_matrices(const ImplicitModel& m);

/// Blockwise Lipschitz test: spectral radius of diag(gamma) * N(A) below one.
/// Inexact norm entries are upper bounds, so certification stays sound.
WellPosednessReport check_blip_pf(const ImplicitModel& m, double margin = kCertMargin);

/// Decomposes the dependency graph of A into strongly connected components
/// and certifies each diagonal component separately; the triangular
/// structure between components costs nothing. Exact for 1x1 ReLU
/// components, where A_ii < 1 is necessary and sufficient.
WellPosednessReport check_structural(const Matrix& a, const BlockStructure& s,
                                     double margin = kCertMargin);

/// Diagonal similarity scaling: for a positively homogeneous componentwise
/// activation with lambda_pf(|A|) < 1, returns an equivalent model with
/// |A'|_inf pushed down to the spectral radius. Predictions are preserved.
ImplicitModel rescale(const ImplicitModel& m);

/// Input-output Lipschitz bound |B||C|/(1-|A|) + |D| in sup norms.
double lipschitz_kappa(const ImplicitModel& m);

/// Convex overestimate of lipschitz_kappa used as a training penalty.
double robust_penalty(const ImplicitModel& m);

std::string render_report(const WellPosednessReport& r);

}  // namespace idl
