#pragma once

#include <iosfwd>
#include <string>

#include "idl/activation.hpp"
#include "idl/equilibrium.hpp"
#include "idl/tensor.hpp"

namespace idl {

/// Prediction rule y = Cx + Du whose state solves x = phi(Ax + Bu).
/// Immutable after construction; all entries are finite and the four
/// matrices agree on (n, p, q).
class ImplicitModel {
 public:
  ImplicitModel(Matrix a, Matrix b, Matrix c, Matrix d, BlockStructure structure);

  const Matrix& a() const noexcept { return a_; }
  const Matrix& b() const noexcept { return b_; }
  const Matrix& c() const noexcept { return c_; }
  const Matrix& d() const noexcept { return d_; }
  const BlockStructure& structure() const noexcept { return structure_; }

  std::size_t state_dim() const noexcept { return a_.rows(); }
  std::size_t input_dim() const noexcept { return b_.cols(); }
  std::size_t output_dim() const noexcept { return c_.rows(); }

  bool operator==(const ImplicitModel&) const = default;

 private:
  Matrix a_, b_, c_, d_;
  BlockStructure structure_;
};

struct Prediction {
  Vector y;
  Vector x;
};

Prediction predict(const ImplicitModel& m, const Vector& u, const SolveOptions& opts = {});
Matrix predict_batch(const ImplicitModel& m, const Matrix& u, const SolveOptions& opts = {});

/// Absorbs an output activation into the state: the new model has state
/// (y, x) and predicts phi_o(Cx + Du) through an identity readout.
ImplicitModel lift_output_activation(const ImplicitModel& m, const ActivationKind& out_act);

/// Folds state bias b and output bias d into an extra input coordinate;
/// the result predicts on (u, 1).
ImplicitModel lift_affine(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& d,
                          const Vector& state_bias, const Vector& out_bias,
                          const BlockStructure& structure);

/// Rewrites a componentwise model whose activation does not vanish at zero
/// (sigmoid) over the state x - phi(0), with the constant routed through an
/// augmented input (u, 1). Predictions are unchanged.
ImplicitModel shift_activation(const ImplicitModel& m);

void save_model(std::ostream& os, const ImplicitModel& m);
void save_model_file(const std::string& path, const ImplicitModel& m);
ImplicitModel load_model(std::istream& is);
ImplicitModel load_model_file(const std::string& path);

}  // namespace idl
