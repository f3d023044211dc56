#include "idl/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace idl {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kVerifyTol = 1e-7;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Classic dense tableau over equality rows with rhs >= 0. Column layout:
// structural columns first, then slack/surplus, then artificials.
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : m_(rows), n_(cols), t_((rows + 1) * (cols + 1)) {}

  double& at(std::size_t i, std::size_t j) { return t_[i * (n_ + 1) + j]; }
  double at(std::size_t i, std::size_t j) const { return t_[i * (n_ + 1) + j]; }
  double& rhs(std::size_t i) { return at(i, n_); }
  double& obj(std::size_t j) { return at(m_, j); }

  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }

  void pivot(std::size_t r, std::size_t c) {
    const double inv = 1.0 / at(r, c);
    for (std::size_t j = 0; j <= n_; ++j) at(r, j) *= inv;
    at(r, c) = 1.0;
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const double f = at(i, c);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= n_; ++j) at(i, j) -= f * at(r, j);
      at(i, c) = 0.0;
    }
  }

 private:
  std::size_t m_, n_;
  std::vector<double> t_;
};

enum class RunResult { Done, Unbounded };

// Minimization step loop under Bland's rule: entering column is the lowest
// index with a negative reduced cost, leaving row breaks ratio ties by the
// lowest basic variable index.
RunResult run_simplex(Tableau& t, std::vector<std::size_t>& basis,
                      const std::vector<bool>& allowed) {
  for (;;) {
    std::size_t enter = t.cols();
    for (std::size_t j = 0; j < t.cols(); ++j) {
      if (allowed[j] && t.obj(j) < -kPivotTol) {
        enter = j;
        break;
      }
    }
    if (enter == t.cols()) return RunResult::Done;

    std::size_t leave = t.rows();
    double best_ratio = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
      const double a = t.at(i, enter);
      if (a <= kPivotTol) continue;
      const double ratio = t.rhs(i) / a;
      if (leave == t.rows() || ratio < best_ratio - kPivotTol ||
          (std::fabs(ratio - best_ratio) <= kPivotTol && basis[i] < basis[leave])) {
        leave = i;
        best_ratio = ratio;
      }
    }
    if (leave == t.rows()) return RunResult::Unbounded;
    t.pivot(leave, enter);
    basis[leave] = enter;
  }
}

}  // namespace

LPSolution solve_lp(const LPProblem& p) {
  const std::size_t nv = p.num_vars();
  if (p.lower.size() != nv || p.upper.size() != nv) fail(Err::DimMismatch, "lp bounds");
  for (const LPRow& row : p.rows)
    if (row.a.size() != nv) fail(Err::DimMismatch, "lp row width");

  // Internal variables: shifted where a finite lower bound exists, split
  // into a difference of nonnegatives otherwise.
  struct VarMap {
    std::size_t pos;             // column of the shifted or positive part
    std::size_t neg = SIZE_MAX;  // column of the negative part when split
    double shift = 0.0;
  };
  std::vector<VarMap> vmap(nv);
  std::size_t ncols = 0;
  for (std::size_t j = 0; j < nv; ++j) {
    if (std::isfinite(p.lower[j])) {
      vmap[j] = {ncols++, SIZE_MAX, p.lower[j]};
    } else {
      vmap[j].pos = ncols++;
      vmap[j].neg = ncols++;
    }
  }

  // Assemble rows in internal coordinates; upper bounds become rows.
  struct IRow {
    Vector a;
    Rel rel;
    double rhs;
  };
  std::vector<IRow> irows;
  auto convert_row = [&](const Vector& a, Rel rel, double rhs) {
    Vector ia(ncols, 0.0);
    double r = rhs;
    for (std::size_t j = 0; j < nv; ++j) {
      if (a[j] == 0.0) continue;
      ia[vmap[j].pos] += a[j];
      if (vmap[j].neg != SIZE_MAX) ia[vmap[j].neg] -= a[j];
      r -= a[j] * vmap[j].shift;
    }
    irows.push_back({std::move(ia), rel, r});
  };
  for (const LPRow& row : p.rows) convert_row(row.a, row.rel, row.rhs);
  for (std::size_t j = 0; j < nv; ++j) {
    if (!std::isfinite(p.upper[j])) continue;
    Vector a(nv, 0.0);
    a[j] = 1.0;
    convert_row(a, Rel::Le, p.upper[j]);
    if (std::isfinite(p.lower[j]) && p.upper[j] < p.lower[j])
      return {LPStatus::Infeasible, {}, 0.0};
  }

  // Normalize to rhs >= 0, then count slack and artificial columns.
  for (IRow& row : irows) {
    if (row.rhs < 0.0) {
      for (double& v : row.a) v = -v;
      row.rhs = -row.rhs;
      row.rel = row.rel == Rel::Le ? Rel::Ge : (row.rel == Rel::Ge ? Rel::Le : Rel::Eq);
    }
  }
  const std::size_t m = irows.size();
  std::size_t nslack = 0, nart = 0;
  for (const IRow& row : irows) {
    if (row.rel != Rel::Eq) ++nslack;
    if (row.rel != Rel::Le) ++nart;
  }

  const std::size_t total = ncols + nslack + nart;
  Tableau t(m, total);
  std::vector<std::size_t> basis(m);
  std::vector<bool> allowed(total, true);
  std::size_t scol = ncols, acol = ncols + nslack;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < ncols; ++j) t.at(i, j) = irows[i].a[j];
    t.rhs(i) = irows[i].rhs;
    switch (irows[i].rel) {
      case Rel::Le:
        t.at(i, scol) = 1.0;
        basis[i] = scol++;
        break;
      case Rel::Ge:
        t.at(i, scol) = -1.0;
        ++scol;
        t.at(i, acol) = 1.0;
        basis[i] = acol++;
        break;
      case Rel::Eq:
        t.at(i, acol) = 1.0;
        basis[i] = acol++;
        break;
    }
  }

  // Phase 1: minimize the sum of artificials. The objective row starts as
  // minus the sum of artificial rows so basic columns stay reduced.
  if (nart > 0) {
    for (std::size_t i = 0; i < m; ++i) {
      if (basis[i] < ncols + nslack) continue;
      for (std::size_t j = 0; j <= total; ++j) t.at(m, j) -= t.at(i, j);
    }
    for (std::size_t j = ncols + nslack; j < total; ++j) t.obj(j) = 0.0;

    if (run_simplex(t, basis, allowed) == RunResult::Unbounded)
      fail(Err::NonConvergence, "phase one cannot be unbounded");
    // objective row rhs carries the negated artificial sum
    if (t.at(m, total) < -1e-7) return {LPStatus::Infeasible, {}, 0.0};

    // drive leftover artificials out of the basis where possible
    for (std::size_t i = 0; i < m; ++i) {
      if (basis[i] < ncols + nslack) continue;
      for (std::size_t j = 0; j < ncols + nslack; ++j) {
        if (std::fabs(t.at(i, j)) > kPivotTol) {
          t.pivot(i, j);
          basis[i] = j;
          break;
        }
      }
    }
    for (std::size_t j = ncols + nslack; j < total; ++j) allowed[j] = false;
  }

  // Phase 2: minimize -c over the internal columns.
  for (std::size_t j = 0; j <= total; ++j) t.obj(j) = 0.0;
  for (std::size_t j = 0; j < nv; ++j) {
    t.obj(vmap[j].pos) -= p.c[j];
    if (vmap[j].neg != SIZE_MAX) t.obj(vmap[j].neg) += p.c[j];
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double f = t.obj(basis[i]);
    if (f == 0.0) continue;
    for (std::size_t j = 0; j <= total; ++j) t.at(m, j) -= f * t.at(i, j);
  }
  if (run_simplex(t, basis, allowed) == RunResult::Unbounded)
    return {LPStatus::Unbounded, {}, kInf};

  Vector internal(total, 0.0);
  for (std::size_t i = 0; i < m; ++i) internal[basis[i]] = t.rhs(i);

  Vector x(nv, 0.0);
  for (std::size_t j = 0; j < nv; ++j) {
    x[j] = vmap[j].shift + internal[vmap[j].pos];
    if (vmap[j].neg != SIZE_MAX) x[j] -= internal[vmap[j].neg];
  }

  double objective = 0.0;
  for (std::size_t j = 0; j < nv; ++j) objective += p.c[j] * x[j];

  // final feasibility audit
  auto violated = [&]() {
    for (std::size_t j = 0; j < nv; ++j) {
      if (x[j] < p.lower[j] - kVerifyTol || x[j] > p.upper[j] + kVerifyTol) return true;
    }
    for (const LPRow& row : p.rows) {
      double lhs = dot(row.a, x);
      if (row.rel == Rel::Le && lhs > row.rhs + kVerifyTol) return true;
      if (row.rel == Rel::Ge && lhs < row.rhs - kVerifyTol) return true;
      if (row.rel == Rel::Eq && std::fabs(lhs - row.rhs) > kVerifyTol) return true;
    }
    return false;
  };
  if (violated()) fail(Err::NonConvergence, "simplex result failed the feasibility audit");
  return {LPStatus::Optimal, std::move(x), objective};
}

}  // namespace idl
