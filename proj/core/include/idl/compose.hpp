#pragma once

#include <iosfwd>
#include <variant>
#include <vector>

#include "idl/model.hpp"

namespace idl {

/// Feeds the output of m1 into the input of m2. The composite state is
/// (x2, x1) and its A matrix is block upper-triangular, so well-posedness
/// of the parts carries over.
ImplicitModel cascade(const ImplicitModel& m1, const ImplicitModel& m2);

/// Weighted sum of two prediction rules. With shared_input both models read
/// the same u; otherwise the composite input is (u1, u2).
ImplicitModel parallel_sum(const ImplicitModel& m1, const ImplicitModel& m2, bool shared_input,
                           double w1 = 1.0, double w2 = 1.0);

/// Stacks the two outputs instead of summing them.
ImplicitModel concat_outputs(const ImplicitModel& m1, const ImplicitModel& m2, bool shared_input);

struct FeedbackResult {
  ImplicitModel model;
  std::string warning;  // the loop can destroy well-posedness; always re-check
};

/// Closes the loop u1 = u + y2, u2 = y1 for two models without feedthrough.
FeedbackResult feedback(const ImplicitModel& m1, const ImplicitModel& m2);

/// Fully connected network y = W_last phi(... phi(W_0 u)) as an implicit
/// model with strictly block upper-triangular A; acts has one entry per
/// hidden layer.
ImplicitModel import_feedforward(const std::vector<Matrix>& weights,
                                 const std::vector<ActivationKind>& acts);

/// Matrix of the valid (no padding) single-channel 2-D convolution acting on
/// row-major vectorized images.
Matrix conv2d_matrix(const Matrix& kernel, std::size_t in_h, std::size_t in_w, std::size_t stride);

struct MaxPoolImport {
  Matrix b;  // stacked region selectors
  Matrix c;  // picks the group maxima
  BlockStructure structure;
  ImplicitModel model;  // y = C phi(B u)
};

/// Pooling over an arbitrary partition of the input indices.
MaxPoolImport import_maxpool(std::size_t inputs, const std::vector<std::vector<std::size_t>>& regions);

/// Regular ph x pw tiling of an h x w image, regions ordered row-major.
std::vector<std::vector<std::size_t>> pool_regions(std::size_t h, std::size_t w, std::size_t ph,
                                                   std::size_t pw);

/// Residual block y = phi2(u + W2 phi1(W1 u)).
ImplicitModel import_residual(const Matrix& w1, const Matrix& w2, const ActivationKind& phi1,
                              const ActivationKind& phi2);

/// Unrolled recurrent network over t_steps inputs, state (h_T, ..., h_0);
/// phi_h must vanish at zero so the h_0 block is exactly zero.
ImplicitModel import_rnn(const Matrix& wh, const Matrix& wi, const Matrix& wo,
                         std::size_t t_steps, const ActivationKind& phi_h,
                         const ActivationKind& phi_o);

/// Normalization u -> (u - mean) / sigma as an affine model on (u, 1).
ImplicitModel import_batchnorm(const Vector& mean, const Vector& sigma);

// ---- network description files ----

struct DenseLayer { Matrix w; };
struct Conv2DLayer { Matrix kernel; std::size_t in_h, in_w, stride; };
struct MaxPoolLayer { std::size_t in_h, in_w, pool_h, pool_w; };
struct BatchNormLayer { Vector mean, sigma; };
struct ActivationLayer { ActivationKind act; };

using LayerSpec = std::variant<DenseLayer, Conv2DLayer, MaxPoolLayer, BatchNormLayer, ActivationLayer>;

std::vector<LayerSpec> read_nnspec(std::istream& is);
std::vector<LayerSpec> read_nnspec_file(const std::string& path);
void write_nnspec(std::ostream& os, const std::vector<LayerSpec>& layers);

struct NetworkImport {
  ImplicitModel model;   // takes (u, 1); the constant input feeds bias terms
  std::size_t raw_inputs;  // p of the source network
};

/// Builds one implicit model for a whole layer stack by cascading per-layer
/// models. The composite reads the augmented input (u, 1).
NetworkImport build_network_model(const std::vector<LayerSpec>& layers);

/// Layerwise reference evaluation of the stack on a raw input.
Vector evaluate_layers(const std::vector<LayerSpec>& layers, const Vector& u);

}  // namespace idl
