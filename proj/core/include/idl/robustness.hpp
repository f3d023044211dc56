#pragma once

#include <cstdint>
#include <optional>
#include <variant>

#include "idl/model.hpp"

namespace idl {

/// Componentwise interval |u - u0| <= sigma_u around a nominal input.
struct BoxUncertainty {
  Vector u0;
  Vector sigma_u;  // entrywise >= 0
};

/// Box restricted to at most k changed coordinates.
struct CardUncertainty {
  Vector u0;
  Vector sigma_u;
  std::size_t k;
};

using Uncertainty = std::variant<BoxUncertainty, CardUncertainty>;

enum class SensMethod { Cone, Blip };

struct SensitivityReport {
  Matrix s;        // q x p, nonnegative
  double kappa;    // sup-norm Lipschitz bound; +inf when |A|_inf >= 1
  Vector sigma_x;  // filled when a box is supplied
  Vector sigma_y;
  SensMethod method;
};

/// Scalar sup-norm bound on the state deviation over the uncertainty set.
double state_norm_bound(const ImplicitModel& m, const Uncertainty& u);

/// Componentwise state envelope (I - |A|)^{-1} |B| sigma_u.
Vector state_box_bound(const ImplicitModel& m, const BoxUncertainty& box);

/// Per-block norm envelope for blockwise Lipschitz structures, one entry per
/// block of the model.
Vector state_norm_bound_blip(const ImplicitModel& m, const BoxUncertainty& box);

/// Nonnegative matrix S with |y(u) - y(u0)| <= S |u - u0| for all pairs.
SensitivityReport sensitivity(const ImplicitModel& m, SensMethod method,
                              const BoxUncertainty* box = nullptr);

/// sigma_y = S sigma_u, using the blockwise method when the structure is
/// not componentwise.
Vector output_box_bound(const ImplicitModel& m, const BoxUncertainty& box);

double worstcase_squared_loss(const Vector& y, const Vector& yhat0, const Vector& sigma_y);
double worstcase_crossentropy(const Vector& y, const Vector& yhat0, const Vector& sigma_y);
double worstcase_crossentropy_normball(const Vector& y, const Vector& yhat0, double rho,
                                       const Matrix& c);

/// max over the uncertainty set of b.u; closed forms for both set kinds.
double support_function(const Uncertainty& u, const Vector& b);

struct AttackResult {
  Vector u_adv;
  double upper_bound;
  double objective_achieved;
  bool feasible;
};

/// Relaxation of max c.x over the uncertainty set for ReLU models: the
/// equilibrium is relaxed to x >= Ax + Bu, x >= 0 inside the state envelope
/// sigma_x. The LP optimum certifies an upper bound and its u part is
/// evaluated as a concrete attack.
AttackResult lp_attack(const ImplicitModel& m, const Uncertainty& u, const Vector& c,
                       const Vector* sigma_x = nullptr, const SolveOptions& opts = {});

/// Iterated linearization of the squared state discrepancy; each step calls
/// lp_attack on the gradient at the best iterate. The reported upper bound
/// belongs to the final linearized objective, not the quadratic one.
AttackResult discrepancy_attack(const ImplicitModel& m, const Uncertainty& u,
                                const Vector* sigma_x, std::size_t iters, std::uint64_t seed,
                                const SolveOptions& opts = {});

/// Perturbs the input coordinates that the sensitivity matrix ranks highest,
/// pushing each toward the farther face of [lo, hi] by the given magnitude.
Vector sensitivity_attack(const ImplicitModel& m, const Vector& u0, double fraction,
                          const Vector& magnitude,
                          std::optional<std::size_t> target_row = std::nullopt,
                          const Vector* lo = nullptr, const Vector* hi = nullptr);

/// Componentwise bound on the state shift caused by replacing A0 with any A
/// inside the envelope |A - A0| <= E; x0 is the state of the A0 model.
Vector perturbation_error_bound(const Matrix& a0, const Matrix& e, const Vector& x0);

}  // namespace idl
