#include "idl/activation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace idl {

ActivationKind ActivationKind::leaky_relu(double slope) {
  if (!(slope > 0.0 && slope < 1.0)) fail(Err::InvalidArgument, "leaky slope must lie in (0,1)");
  ActivationKind a{Act::LeakyRelu};
  a.slope = slope;
  return a;
}

ActivationKind ActivationKind::maxpool(std::vector<std::size_t> groups) {
  if (groups.empty()) fail(Err::InvalidArgument, "maxpool needs at least one group");
  for (auto g : groups)
    if (g == 0) fail(Err::InvalidArgument, "maxpool group size zero");
  ActivationKind a{Act::MaxPoolGroups};
  a.groups = std::move(groups);
  return a;
}

bool ActivationKind::componentwise() const {
  switch (kind) {
    case Act::Relu:
    case Act::LeakyRelu:
    case Act::Tanh:
    case Act::Sigmoid:
    case Act::Identity:
      return true;
    default:
      return false;
  }
}

bool ActivationKind::zero_at_zero() const {
  if (zero_shifted) return true;
  switch (kind) {
    case Act::Sigmoid:
    case Act::Softmax:
      return false;
    default:
      return true;
  }
}

bool ActivationKind::positively_homogeneous() const {
  switch (kind) {
    case Act::Relu:
    case Act::LeakyRelu:
    case Act::Identity:
      return true;
    default:
      return false;
  }
}

std::string ActivationKind::name() const {
  switch (kind) {
    case Act::Relu: return "relu";
    case Act::LeakyRelu: return "leakyrelu";
    case Act::Tanh: return "tanh";
    case Act::Sigmoid: return "sigmoid";
    case Act::Softmax: return "softmax";
    case Act::MaxPoolGroups: return "maxpool";
    case Act::Identity: return "identity";
  }
  return "?";
}

BlockStructure::BlockStructure(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
  offsets_.reserve(blocks_.size());
  for (const Block& b : blocks_) {
    if (b.size == 0) fail(Err::InvalidArgument, "zero-sized activation block");
    if (b.act.kind == Act::MaxPoolGroups) {
      std::size_t total = std::accumulate(b.act.groups.begin(), b.act.groups.end(), std::size_t{0});
      if (total != b.size) fail(Err::InvalidArgument, "maxpool group sizes must sum to the block size");
    }
    offsets_.push_back(dim_);
    dim_ += b.size;
  }
}

BlockStructure BlockStructure::single(std::size_t n, ActivationKind act) {
  if (n == 0) return BlockStructure();
  return BlockStructure({Block{n, std::move(act)}});
}

bool BlockStructure::all_componentwise() const {
  return std::all_of(blocks_.begin(), blocks_.end(),
                     [](const Block& b) { return b.act.componentwise(); });
}

bool BlockStructure::all_of(Act kind) const {
  return std::all_of(blocks_.begin(), blocks_.end(),
                     [kind](const Block& b) { return b.act.kind == kind; });
}

BlockStructure BlockStructure::scalarized() const {
  std::vector<Block> out;
  out.reserve(dim_);
  for (const Block& b : blocks_) {
    if (b.act.componentwise()) {
      for (std::size_t i = 0; i < b.size; ++i) out.push_back(Block{1, b.act});
    } else {
      out.push_back(b);
    }
  }
  return BlockStructure(std::move(out));
}

ActivationKind BlockStructure::kind_at(std::size_t state) const {
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    if (state < offsets_[l] + blocks_[l].size) {
      if (!blocks_[l].act.componentwise())
        fail(Err::BlockwiseActivation, "state belongs to a non-componentwise block");
      return blocks_[l].act;
    }
  }
  fail(Err::InvalidArgument, "state index out of range");
}

BlockStructure concat(const BlockStructure& a, const BlockStructure& b) {
  std::vector<Block> blocks = a.blocks();
  blocks.insert(blocks.end(), b.blocks().begin(), b.blocks().end());
  return BlockStructure(std::move(blocks));
}

double scalar_activation(const ActivationKind& a, double z) {
  switch (a.kind) {
    case Act::Relu: return z > 0.0 ? z : 0.0;
    case Act::LeakyRelu: return z > 0.0 ? z : a.slope * z;
    case Act::Tanh: return std::tanh(z);
    case Act::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Act::Identity: return z;
    default: fail(Err::InvalidArgument, "scalar_activation on a blockwise kind");
  }
}

double scalar_activation_derivative(const ActivationKind& a, double z) {
  switch (a.kind) {
    case Act::Relu: return z > 0.0 ? 1.0 : 0.0;  // subgradient 0 at the kink
    case Act::LeakyRelu: return z > 0.0 ? 1.0 : a.slope;
    case Act::Tanh: {
      double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Act::Sigmoid: {
      double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
    case Act::Identity: return 1.0;
    default: fail(Err::InvalidArgument, "derivative of a blockwise kind");
  }
}

namespace {

void softmax_inplace(std::span<double> z) {
  double mx = z[0];
  for (double x : z) mx = std::max(mx, x);
  double sum = 0.0;
  for (double& x : z) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : z) x /= sum;
}

void maxpool_inplace(const std::vector<std::size_t>& groups, std::span<double> z) {
  std::size_t read = 0, write = 0;
  for (std::size_t g : groups) {
    double mx = z[read];
    for (std::size_t i = 1; i < g; ++i) mx = std::max(mx, z[read + i]);
    read += g;
    z[write++] = mx;
  }
  // group maxima first, zero padding after
  for (; write < z.size(); ++write) z[write] = 0.0;
}

}  // namespace

void apply_activation_inplace(const BlockStructure& s, std::span<double> z) {
  if (z.size() != s.dim()) fail(Err::DimMismatch, "apply_activation");
  for (std::size_t l = 0; l < s.blocks().size(); ++l) {
    const Block& b = s.blocks()[l];
    std::span<double> part = z.subspan(s.block_offset(l), b.size);
    switch (b.act.kind) {
      case Act::Softmax:
        softmax_inplace(part);
        break;
      case Act::MaxPoolGroups:
        maxpool_inplace(b.act.groups, part);
        break;
      default: {
        if (b.act.zero_shifted) {
          const double at0 = scalar_activation(b.act, 0.0);
          for (double& x : part) x = scalar_activation(b.act, x) - at0;
        } else {
          for (double& x : part) x = scalar_activation(b.act, x);
        }
      }
    }
  }
}

Vector apply_activation(const BlockStructure& s, Vector z) {
  apply_activation_inplace(s, z);
  return z;
}

Matrix activation_jacobian(const BlockStructure& s, const Vector& z) {
  if (z.size() != s.dim()) fail(Err::DimMismatch, "activation_jacobian");
  Matrix jac(s.dim(), s.dim());
  for (std::size_t l = 0; l < s.blocks().size(); ++l) {
    const Block& b = s.blocks()[l];
    const std::size_t off = s.block_offset(l);
    switch (b.act.kind) {
      case Act::Softmax: {
        Vector sm(z.begin() + off, z.begin() + off + b.size);
        softmax_inplace(sm);
        for (std::size_t i = 0; i < b.size; ++i)
          for (std::size_t j = 0; j < b.size; ++j)
            jac(off + i, off + j) = (i == j ? sm[i] : 0.0) - sm[i] * sm[j];
        break;
      }
      case Act::MaxPoolGroups: {
        std::size_t read = off, write = off;
        for (std::size_t g : b.act.groups) {
          std::size_t arg = read;
          for (std::size_t i = 1; i < g; ++i)
            if (z[read + i] > z[arg]) arg = read + i;
          for (std::size_t i = 0; i < g; ++i) {
            if (read + i != arg && z[read + i] == z[arg])
              fail(Err::Unsupported, "pooling Jacobian undefined at a tied group maximum");
          }
          jac(write, arg) = 1.0;
          read += g;
          ++write;
        }
        break;
      }
      default:
        for (std::size_t i = 0; i < b.size; ++i)
          jac(off + i, off + i) = scalar_activation_derivative(b.act, z[off + i]);
    }
  }
  return jac;
}

void apply_jacobian_inplace(const BlockStructure& s, std::span<const double> z, std::span<double> w) {
  if (z.size() != s.dim() || w.size() != s.dim()) fail(Err::DimMismatch, "apply_jacobian");
  for (std::size_t l = 0; l < s.blocks().size(); ++l) {
    const Block& b = s.blocks()[l];
    const std::size_t off = s.block_offset(l);
    switch (b.act.kind) {
      case Act::Softmax: {
        Vector sm(z.begin() + off, z.begin() + off + b.size);
        softmax_inplace(sm);
        double sw = 0.0;
        for (std::size_t i = 0; i < b.size; ++i) sw += sm[i] * w[off + i];
        for (std::size_t i = 0; i < b.size; ++i) w[off + i] = sm[i] * (w[off + i] - sw);
        break;
      }
      case Act::MaxPoolGroups: {
        // fall back to the explicit selector so ties are reported
        BlockStructure one(std::vector<Block>{b});
        Vector zi(z.begin() + off, z.begin() + off + b.size);
        Matrix jac = activation_jacobian(one, zi);
        Vector wi(w.begin() + off, w.begin() + off + b.size);
        Vector out = matvec(jac, wi);
        std::copy(out.begin(), out.end(), w.begin() + off);
        break;
      }
      default:
        for (std::size_t i = 0; i < b.size; ++i)
          w[off + i] *= scalar_activation_derivative(b.act, z[off + i]);
    }
  }
}

}  // namespace idl
