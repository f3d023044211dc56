#include "idl/compress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "idl/equilibrium.hpp"
#include "idl/robustness.hpp"

namespace idl {

namespace {

// Rebuild a block structure from per-state componentwise kinds by grouping
// consecutive equal kinds.
BlockStructure structure_from_kinds(const std::vector<ActivationKind>& kinds) {
  std::vector<Block> blocks;
  for (const ActivationKind& k : kinds) {
    if (!blocks.empty() && blocks.back().act == k) {
      ++blocks.back().size;
    } else {
      blocks.push_back(Block{1, k});
    }
  }
  return blocks.empty() ? BlockStructure() : BlockStructure(std::move(blocks));
}

std::vector<ActivationKind> per_state_kinds(const ImplicitModel& m) {
  std::vector<ActivationKind> kinds;
  kinds.reserve(m.state_dim());
  for (const Block& b : m.structure().blocks())
    for (std::size_t i = 0; i < b.size; ++i) kinds.push_back(b.act);
  return kinds;
}

BlockStructure slice_structure(const std::vector<ActivationKind>& kinds, std::size_t start,
                               std::size_t len) {
  std::vector<ActivationKind> part(kinds.begin() + start, kinds.begin() + start + len);
  return structure_from_kinds(part);
}

Matrix slice(const Matrix& m, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  Matrix out(r1 - r0, c1 - c0);
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t j = c0; j < c1; ++j) out(i - r0, j - c0) = m(i, j);
  return out;
}

bool all_zero(const Matrix& m, double tol) {
  for (std::size_t i = 0; i < m.size(); ++i)
    if (std::fabs(m.data()[i]) > tol) return false;
  return true;
}

}  // namespace

ImplicitModel permute_states(const ImplicitModel& m, const std::vector<std::size_t>& perm) {
  if (!m.structure().all_componentwise())
    fail(Err::BlockwiseActivation, "state permutation needs a componentwise structure");
  const std::size_t n = m.state_dim();
  if (perm.size() != n) fail(Err::DimMismatch, "permutation length");
  std::vector<bool> seen(n, false);
  for (std::size_t i : perm) {
    if (i >= n || seen[i]) fail(Err::InvalidArgument, "not a permutation");
    seen[i] = true;
  }

  Matrix a(n, n), b(n, m.input_dim()), c(m.output_dim(), n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = m.a()(perm[i], perm[j]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m.input_dim(); ++j) b(i, j) = m.b()(perm[i], j);
  for (std::size_t i = 0; i < m.output_dim(); ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = m.c()(i, perm[j]);

  std::vector<ActivationKind> kinds = per_state_kinds(m);
  std::vector<ActivationKind> permuted_kinds(n);
  for (std::size_t i = 0; i < n; ++i) permuted_kinds[i] = kinds[perm[i]];
  return ImplicitModel(std::move(a), std::move(b), std::move(c), m.d(),
                       structure_from_kinds(permuted_kinds));
}

Vector ReductionReport::predict(const Vector& u, const SolveOptions& opts) const {
  if (reduced_model) {
    return idl::predict(*reduced_model, u, opts).y;
  }
  if (mode == ReductionMode::Identity) {
    return idl::predict(permuted, u, opts).y;
  }

  const std::size_t n = permuted.state_dim(), n1 = reduced_n;
  std::vector<ActivationKind> kinds;
  kinds.reserve(n);
  for (const Block& blk : permuted.structure().blocks())
    for (std::size_t i = 0; i < blk.size; ++i) kinds.push_back(blk.act);
  BlockStructure head = slice_structure(kinds, 0, n1);
  BlockStructure tail = slice_structure(kinds, n1, n - n1);

  Matrix a11 = slice(permuted.a(), 0, n1, 0, n1);
  Matrix b1 = slice(permuted.b(), 0, n1, 0, permuted.input_dim());
  Matrix b2 = slice(permuted.b(), n1, n, 0, permuted.input_dim());
  Matrix c1 = slice(permuted.c(), 0, permuted.output_dim(), 0, n1);
  Matrix c2 = slice(permuted.c(), 0, permuted.output_dim(), n1, n);

  Vector x1, x2;
  if (mode == ReductionMode::RowSparse) {
    // trailing states are a closed form of the input alone
    x2 = apply_activation(tail, matvec(b2, u));
    Matrix a12 = slice(permuted.a(), 0, n1, n1, n);
    Vector bias = matvec(a12, x2) + matvec(b1, u);
    x1 = picard_solve(a11, bias, head, opts).x;
  } else {
    // ColSparse: leading states close among themselves, trailing follow
    x1 = picard_solve(a11, matvec(b1, u), head, opts).x;
    Matrix a21 = slice(permuted.a(), n1, n, 0, n1);
    x2 = apply_activation(tail, matvec(a21, x1) + matvec(b2, u));
  }
  Vector y = matvec(c1, x1) + matvec(c2, x2) + matvec(permuted.d(), u);
  return y;
}

namespace {

ReductionReport make_identity_report(const ImplicitModel& m) {
  std::vector<std::size_t> perm(m.state_dim());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  return {m.state_dim(), m.state_dim(), ReductionMode::Identity, std::move(perm), std::nullopt, m};
}

}  // namespace

ReductionReport reduce_rows(const ImplicitModel& m, double zero_tol) {
  if (!m.structure().all_componentwise())
    fail(Err::BlockwiseActivation, "row reduction needs a componentwise structure");
  const std::size_t n = m.state_dim();

  std::vector<std::size_t> live, dropped;
  for (std::size_t i = 0; i < n; ++i) {
    bool zero = true;
    for (std::size_t j = 0; j < n && zero; ++j)
      if (std::fabs(m.a()(i, j)) > zero_tol) zero = false;
    (zero ? dropped : live).push_back(i);
  }
  if (dropped.empty()) return make_identity_report(m);

  std::vector<std::size_t> perm = live;
  perm.insert(perm.end(), dropped.begin(), dropped.end());
  ImplicitModel permuted = permute_states(m, perm);
  const std::size_t n1 = live.size();

  bool b_rows_zero = all_zero(slice(permuted.b(), n1, n, 0, permuted.input_dim()), zero_tol);
  std::vector<ActivationKind> kinds = per_state_kinds(permuted);
  bool tail_zero_at_zero = true;
  for (std::size_t i = n1; i < n; ++i) tail_zero_at_zero &= kinds[i].zero_at_zero();

  if (b_rows_zero && tail_zero_at_zero) {
    // the dropped states rest at zero for every input
    ImplicitModel reduced(slice(permuted.a(), 0, n1, 0, n1),
                          slice(permuted.b(), 0, n1, 0, permuted.input_dim()),
                          slice(permuted.c(), 0, permuted.output_dim(), 0, n1), permuted.d(),
                          slice_structure(kinds, 0, n1));
    return {n, n1, ReductionMode::FullRowReduce, std::move(perm), std::move(reduced),
            std::move(permuted)};
  }
  return {n, n1, ReductionMode::RowSparse, std::move(perm), std::nullopt, std::move(permuted)};
}

ReductionReport reduce_columns(const ImplicitModel& m, double zero_tol) {
  if (!m.structure().all_componentwise())
    fail(Err::BlockwiseActivation, "column reduction needs a componentwise structure");
  const std::size_t n = m.state_dim();

  std::vector<std::size_t> live, dropped;
  for (std::size_t j = 0; j < n; ++j) {
    bool zero = true;
    for (std::size_t i = 0; i < n && zero; ++i)
      if (std::fabs(m.a()(i, j)) > zero_tol) zero = false;
    (zero ? dropped : live).push_back(j);
  }
  if (dropped.empty()) return make_identity_report(m);

  std::vector<std::size_t> perm = live;
  perm.insert(perm.end(), dropped.begin(), dropped.end());
  ImplicitModel permuted = permute_states(m, perm);
  const std::size_t n1 = live.size();

  bool c_cols_zero = all_zero(slice(permuted.c(), 0, permuted.output_dim(), n1, n), zero_tol);
  if (c_cols_zero) {
    std::vector<ActivationKind> kinds = per_state_kinds(permuted);
    ImplicitModel reduced(slice(permuted.a(), 0, n1, 0, n1),
                          slice(permuted.b(), 0, n1, 0, permuted.input_dim()),
                          slice(permuted.c(), 0, permuted.output_dim(), 0, n1), permuted.d(),
                          slice_structure(kinds, 0, n1));
    return {n, n1, ReductionMode::FullColReduce, std::move(perm), std::move(reduced),
            std::move(permuted)};
  }
  return {n, n1, ReductionMode::ColSparse, std::move(perm), std::nullopt, std::move(permuted)};
}

Vector LowRankReport::error_bound(const Vector& x0) const {
  if (!bound_available)
    fail(Err::IllPosed, "no error bound: the grown envelope has spectral radius >= 1");
  return perturbation_error_bound(matmul_nt(left, right), error, x0);
}

LowRankReport lowrank_compress(const ImplicitModel& m, std::size_t k, double tol,
                               std::size_t max_iter) {
  SvdFactors f = truncated_svd(m.a(), k, tol, max_iter);
  LowRankReport rep;
  rep.left = std::move(f.left);
  rep.right = std::move(f.right);
  Matrix approx = matmul_nt(rep.left, rep.right);
  rep.error = abs(m.a() - approx);
  rep.lambda_reduced = pf_eigen(matmul_tn(abs(rep.right), abs(rep.left))).lambda;
  rep.reduced_wellposed = rep.lambda_reduced < 1.0;
  rep.lambda_full = pf_eigen(abs(approx) + rep.error).lambda;
  rep.bound_available = rep.lambda_full < 1.0;
  return rep;
}

Vector feature_selection_scores(const ImplicitModel& m) {
  const std::size_t p = m.input_dim();
  Vector scores(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m.b().rows(); ++i) acc += m.b()(i, j) * m.b()(i, j);
    for (std::size_t i = 0; i < m.d().rows(); ++i) acc += m.d()(i, j) * m.d()(i, j);
    scores[j] = std::sqrt(acc);
  }
  return scores;
}

std::string render_reduction(const ReductionReport& r) {
  std::ostringstream os;
  const char* mode = r.mode == ReductionMode::Identity        ? "identity"
                     : r.mode == ReductionMode::RowSparse     ? "row-sparse"
                     : r.mode == ReductionMode::ColSparse     ? "col-sparse"
                     : r.mode == ReductionMode::FullRowReduce ? "full-row-reduce"
                                                              : "full-col-reduce";
  os << "mode: " << mode << '\n';
  os << "original_n: " << r.original_n << '\n';
  os << "reduced_n: " << r.reduced_n << '\n';
  return os.str();
}

}  // namespace idl
