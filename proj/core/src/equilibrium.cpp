#include "idl/equilibrium.hpp"

#include <algorithm>
#include <cmath>

namespace idl {

EquilibriumResult picard_solve(const Matrix& a, const Vector& b, const BlockStructure& s,
                               const SolveOptions& opts) {
  const std::size_t n = s.dim();
  if (a.rows() != n || a.cols() != n || b.size() != n) fail(Err::DimMismatch, "picard_solve");
  Vector x = opts.warm_start ? *opts.warm_start : Vector(n, 0.0);
  if (x.size() != n) fail(Err::DimMismatch, "picard_solve warm start");

  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    Vector next = matvec(a, x);
    for (std::size_t i = 0; i < n; ++i) next[i] += b[i];
    apply_activation_inplace(s, next);
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::fabs(next[i] - x[i]));
    x = std::move(next);
    if (diff <= opts.tol) {
      Vector probe = matvec(a, x);
      for (std::size_t i = 0; i < n; ++i) probe[i] += b[i];
      apply_activation_inplace(s, probe);
      double residual = 0.0;
      for (std::size_t i = 0; i < n; ++i) residual = std::max(residual, std::fabs(probe[i] - x[i]));
      if (residual <= opts.tol) return {std::move(x), it, residual};
    }
  }
  throw Error(Err::NonConvergence, "picard_solve").with_iterate(x);
}

BatchEquilibriumResult picard_solve_batch(const Matrix& a, const Matrix& b,
                                          const BlockStructure& s, const SolveOptions& opts) {
  const std::size_t n = s.dim(), m = b.cols();
  if (a.rows() != n || a.cols() != n || b.rows() != n) fail(Err::DimMismatch, "picard_solve_batch");
  Matrix x(n, m);

  auto sweep = [&](const Matrix& cur) {
    Matrix next = matmul(a, cur);
    for (std::size_t i = 0; i < next.size(); ++i) next.data()[i] += b.data()[i];
    // activation acts per column
    Vector col(n);
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) col[i] = next(i, j);
      apply_activation_inplace(s, col);
      for (std::size_t i = 0; i < n; ++i) next(i, j) = col[i];
    }
    return next;
  };

  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    Matrix next = sweep(x);
    double diff = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i)
      diff = std::max(diff, std::fabs(next.data()[i] - x.data()[i]));
    x = std::move(next);
    if (diff <= opts.tol) {
      Matrix probe = sweep(x);
      double residual = 0.0;
      for (std::size_t i = 0; i < probe.size(); ++i)
        residual = std::max(residual, std::fabs(probe.data()[i] - x.data()[i]));
      if (residual <= opts.tol) return {std::move(x), it, residual};
    }
  }
  throw Error(Err::NonConvergence, "picard_solve_batch");
}

namespace {

bool strictly_block_upper(const Matrix& a, const BlockStructure& s) {
  const auto& blocks = s.blocks();
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const std::size_t ro = s.block_offset(l);
    for (std::size_t h = 0; h <= l; ++h) {
      const std::size_t co = s.block_offset(h);
      for (std::size_t i = 0; i < blocks[l].size; ++i)
        for (std::size_t j = 0; j < blocks[h].size; ++j)
          if (a(ro + i, co + j) != 0.0) return false;
    }
  }
  return true;
}

bool scalar_upper(const Matrix& a) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (a(i, j) != 0.0) return false;
  return true;
}

}  // namespace

Vector triangular_solve(const Matrix& a, const Vector& b, const BlockStructure& s) {
  const std::size_t n = s.dim();
  if (a.rows() != n || a.cols() != n || b.size() != n) fail(Err::DimMismatch, "triangular_solve");

  if (strictly_block_upper(a, s)) {
    Vector x(n, 0.0);
    const auto& blocks = s.blocks();
    for (std::size_t l = blocks.size(); l-- > 0;) {
      const std::size_t off = s.block_offset(l), sz = blocks[l].size;
      Vector z(sz, 0.0);
      for (std::size_t i = 0; i < sz; ++i) {
        double acc = b[off + i];
        for (std::size_t j = off + sz; j < n; ++j) acc += a(off + i, j) * x[j];
        z[i] = acc;
      }
      BlockStructure one(std::vector<Block>{blocks[l]});
      apply_activation_inplace(one, z);
      std::copy(z.begin(), z.end(), x.begin() + off);
    }
    return x;
  }

  if (s.all_of(Act::Relu) && scalar_upper(a)) {
    for (std::size_t i = 0; i < n; ++i) {
      if (a(i, i) >= 1.0)
        fail(Err::DiagonalNotWellPosed,
             "diagonal entry " + std::to_string(a(i, i)) + " >= 1 at state " + std::to_string(i));
    }
    Vector x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
      double acc = b[i];
      for (std::size_t j = i + 1; j < n; ++j) acc += a(i, j) * x[j];
      x[i] = std::max(acc, 0.0) / (1.0 - a(i, i));
    }
    return x;
  }

  fail(Err::NotTriangular, "matrix is neither strictly block upper-triangular nor scalar ReLU triangular");
}

LowRankResult lowrank_solve(const Matrix& l, const Matrix& r, const Matrix& b,
                            const Vector& u, const BlockStructure& s, const SolveOptions& opts) {
  const std::size_t n = s.dim();
  const std::size_t k = l.cols();
  if (l.rows() != n || r.rows() != n || r.cols() != k) fail(Err::DimMismatch, "lowrank_solve factors");
  if (b.rows() != n || b.cols() != u.size()) fail(Err::DimMismatch, "lowrank_solve input");

  const Vector w = matvec(b, u);
  Vector z(k, 0.0);

  auto step = [&](const Vector& cur) {
    Vector inner = matvec(l, cur);
    for (std::size_t i = 0; i < n; ++i) inner[i] += w[i];
    apply_activation_inplace(s, inner);
    return std::pair<Vector, Vector>(matvec_t(r, inner), std::move(inner));
  };

  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    auto [next, x] = step(z);
    double diff = 0.0;
    for (std::size_t i = 0; i < k; ++i) diff = std::max(diff, std::fabs(next[i] - z[i]));
    z = std::move(next);
    if (diff <= opts.tol) {
      auto [probe, xfinal] = step(z);
      double residual = 0.0;
      for (std::size_t i = 0; i < k; ++i) residual = std::max(residual, std::fabs(probe[i] - z[i]));
      if (residual <= opts.tol) return {std::move(z), std::move(xfinal), it, residual};
    }
  }
  throw Error(Err::NonConvergence, "lowrank_solve").with_iterate(z);
}

}  // namespace idl
