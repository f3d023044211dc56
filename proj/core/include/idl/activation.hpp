#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "idl/tensor.hpp"

namespace idl {

enum class Act { Relu, LeakyRelu, Tanh, Sigmoid, Softmax, MaxPoolGroups, Identity };

/// One activation map together with the norm index and Lipschitz constant it
/// contributes to blockwise analysis. Componentwise kinds are 1-Lipschitz in
/// the sup norm; softmax is 1-Lipschitz in the l1 norm; grouped max pooling
/// is 1-Lipschitz in the sup norm but not componentwise.
struct ActivationKind {
  Act kind = Act::Relu;
  double slope = 0.01;                 // LeakyRelu only, in (0,1)
  std::vector<std::size_t> groups;     // MaxPoolGroups only
  bool zero_shifted = false;           // evaluate phi(z) - phi(0)

  static ActivationKind relu() { return {Act::Relu}; }
  static ActivationKind leaky_relu(double slope);
  static ActivationKind tanh() { return {Act::Tanh}; }
  static ActivationKind sigmoid() { return {Act::Sigmoid}; }
  static ActivationKind softmax() { return {Act::Softmax}; }
  static ActivationKind maxpool(std::vector<std::size_t> groups);
  static ActivationKind identity() { return {Act::Identity}; }

  bool componentwise() const;
  double lipschitz() const { return 1.0; }
  Lp norm_index() const { return kind == Act::Softmax ? Lp::One : Lp::Inf; }
  bool zero_at_zero() const;
  bool positively_homogeneous() const;
  std::string name() const;

  bool operator==(const ActivationKind&) const = default;
};

struct Block {
  std::size_t size;
  ActivationKind act;
  bool operator==(const Block&) const = default;
};

/// Partition of the state vector into activation blocks.
class BlockStructure {
 public:
  BlockStructure() = default;
  explicit BlockStructure(std::vector<Block> blocks);
  static BlockStructure single(std::size_t n, ActivationKind act);

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }
  std::size_t block_offset(std::size_t l) const { return offsets_[l]; }
  bool all_componentwise() const;
  bool all_of(Act kind) const;

  /// Splits componentwise blocks into unit blocks; blockwise analysis at
  /// unit granularity recovers entrywise quantities exactly.
  BlockStructure scalarized() const;

  /// The per-state componentwise kind; fails on softmax or pooling blocks.
  ActivationKind kind_at(std::size_t state) const;

  bool operator==(const BlockStructure&) const = default;

 private:
  std::vector<Block> blocks_;
  std::vector<std::size_t> offsets_;
  std::size_t dim_ = 0;
};

BlockStructure concat(const BlockStructure& a, const BlockStructure& b);

// Componentwise scalar evaluations (no shift applied).
double scalar_activation(const ActivationKind& a, double z);
double scalar_activation_derivative(const ActivationKind& a, double z);

void apply_activation_inplace(const BlockStructure& s, std::span<double> z);
Vector apply_activation(const BlockStructure& s, Vector z);

/// Block-diagonal Jacobian at z. Componentwise kinds give a diagonal;
/// softmax blocks give diag(s) - s sᵀ. Pooling blocks are refused when a
/// group maximum is tied, and are otherwise a 0/1 selector.
Matrix activation_jacobian(const BlockStructure& s, const Vector& z);

/// w <- J_phi(z) w without materializing the Jacobian.
void apply_jacobian_inplace(const BlockStructure& s, std::span<const double> z, std::span<double> w);

}  // namespace idl
