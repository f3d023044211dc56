#pragma once

#include <vector>

#include "idl/tensor.hpp"

namespace idl {

enum class Rel { Le, Ge, Eq };

struct LPRow {
  Vector a;
  Rel rel;
  double rhs;
};

/// Maximize c.x subject to general rows and per-variable bounds; bounds may
/// be infinite on either side.
struct LPProblem {
  Vector c;
  std::vector<LPRow> rows;
  Vector lower;  // -inf allowed
  Vector upper;  // +inf allowed

  std::size_t num_vars() const { return c.size(); }
  void add_row(Vector a, Rel rel, double rhs) { rows.push_back({std::move(a), rel, rhs}); }
};

enum class LPStatus { Optimal, Infeasible, Unbounded };

struct LPSolution {
  LPStatus status;
  Vector x;
  double objective;
};

/// Dense two-phase primal simplex with Bland's anti-cycling rule. Finite
/// lower bounds are shifted away, free variables split, and upper bounds
/// turned into rows. Optimal solutions are re-verified against every
/// constraint at 1e-7 before being returned.
LPSolution solve_lp(const LPProblem& p);

}  // namespace idl
