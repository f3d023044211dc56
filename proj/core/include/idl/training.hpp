#pragma once

#include <cstdint>

#include "idl/model.hpp"

namespace idl {

enum class LossKind { SquaredFrobenius, CrossEntropySoftmax };

struct LossSpec {
  LossKind kind = LossKind::SquaredFrobenius;
};

struct LossResult {
  double value;  // summed over columns
  Matrix grad;   // d value / d yhat, q x m
};

LossResult loss_value_grad(const LossSpec& spec, const Matrix& y, const Matrix& yhat);

struct GradientBundle {
  Matrix da, db, dc, dd;
  Matrix du;  // p x m
  double loss;
};

/// Gradients of the summed loss through the equilibrium: the forward pass
/// solves X = phi(AX + BU) and the adjoint pass solves the fixed point
/// V = J_phi(Z) (Aᵀ V + Cᵀ L) column by column.
GradientBundle implicit_gradients(const ImplicitModel& m, const Matrix& u, const Matrix& y,
                                  const LossSpec& spec, const SolveOptions& opts = {});

/// Rowwise Euclidean projection onto the set of matrices with max absolute
/// row sum at most kappa, via bisection on each row's dual multiplier.
Matrix project_linf_ball(const Matrix& a0, double kappa, double tol = 1e-14);

/// Closed-form maximizer of Tr(Gᵀ A) over the kappa row-sum ball: each row
/// concentrates its mass on the entry with the largest gradient magnitude,
/// lowest index on ties; zero gradient rows stay zero.
Matrix frank_wolfe_lmo(const Matrix& g, double kappa);

/// Nonnegative coupling divergence for the ReLU map, summed over entries;
/// zero exactly when x equals the positive part of z.
double fenchel_divergence_relu(const Matrix& x, const Matrix& z);

/// Gradients of the scalar penalty y.(|C|(I-|A|)^{-1}|B| + |D|).z with the
/// entrywise sign chain rule; zero entries get a zero subgradient.
GradientBundle robust_penalty_gradients(const Matrix& a, const Matrix& b, const Matrix& c,
                                        const Matrix& d, const Vector& y, const Vector& z);

struct TrainConfig {
  double kappa = 0.5;  // row-sum budget for A, strictly below one
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  double tol = 1e-8;  // equilibrium and adjoint tolerance during training
  std::size_t max_iter = kDefaultMaxIter;
  double l1_penalty = 0.0;  // proximal shrinkage on every parameter entry
  bool two_stage = false;   // gradient steps on (A, B) only, then a least-squares readout
  double ridge = 1e-6;      // regularization of the readout solve
};

struct EpochStats {
  std::size_t epoch;
  double loss;  // mean per-sample loss accumulated over the epoch
  double a_norm_inf;
  double wall_ms;
};

struct TrainResult {
  ImplicitModel model;
  std::vector<EpochStats> history;
};

/// Projected stochastic gradient descent on (A, B, C, D); A is projected
/// back onto the kappa ball after every step. With two_stage set, (C, D)
/// are refit by ridge regression on the equilibrium features afterwards.
TrainResult sgd_train(const ImplicitModel& m0, const Matrix& u, const Matrix& y,
                      const LossSpec& spec, const TrainConfig& cfg);

/// Entries uniform in [-1,1]/sqrt(n) with A projected into the kappa ball.
ImplicitModel init_model(std::size_t n, std::size_t p, std::size_t q, const ActivationKind& act,
                         double kappa, std::uint64_t seed);

/// Ridge least-squares refit of (C, D) on features (X; U); the rest of the
/// model is untouched.
ImplicitModel fit_readout(const ImplicitModel& m, const Matrix& u, const Matrix& y, double ridge,
                          const SolveOptions& opts = {});

}  // namespace idl
