#include "idl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "idl/rng.hpp"

namespace idl {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) fail(Err::NonFiniteEntry, std::string("non-finite value in ") + what);
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) fail(Err::DimMismatch, "matrix data length");
  require_finite(data_, "matrix");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(Err::DimMismatch, "ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::diag(const Vector& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

Matrix abs(const Matrix& m) {
  Matrix r = m;
  for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] = std::fabs(r.data()[i]);
  return r;
}

Vector abs(const Vector& v) {
  Vector r = v;
  for (double& x : r) x = std::fabs(x);
  return r;
}

Matrix sign(const Matrix& m) {
  Matrix r = m;
  for (std::size_t i = 0; i < r.size(); ++i) {
    double x = r.data()[i];
    r.data()[i] = x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
  }
  return r;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) fail(Err::DimMismatch, "hadamard");
  Matrix r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] *= b.data()[i];
  return r;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) fail(Err::DimMismatch, "matrix add");
  Matrix r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] += b.data()[i];
  return r;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) fail(Err::DimMismatch, "matrix sub");
  Matrix r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] -= b.data()[i];
  return r;
}

Matrix operator*(double s, const Matrix& m) {
  Matrix r = m;
  for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] *= s;
  return r;
}

Vector operator+(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) fail(Err::DimMismatch, "vector add");
  Vector r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

Vector operator-(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) fail(Err::DimMismatch, "vector sub");
  Vector r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

Vector operator*(double s, const Vector& v) {
  Vector r = v;
  for (double& x : r) x *= s;
  return r;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) fail(Err::DimMismatch, "matmul");
  Matrix c(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c.data() + i * m;
    const double* ai = a.data() + i * k;
    for (std::size_t l = 0; l < k; ++l) {
      const double ail = ai[l];
      if (ail == 0.0) continue;
      const double* bl = b.data() + l * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += ail * bl[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) fail(Err::DimMismatch, "matmul_tn");
  Matrix c(a.cols(), b.cols());
  const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
  for (std::size_t l = 0; l < k; ++l) {
    const double* al = a.data() + l * n;
    const double* bl = b.data() + l * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double ali = al[i];
      if (ali == 0.0) continue;
      double* ci = c.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += ali * bl[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) fail(Err::DimMismatch, "matmul_nt");
  Matrix c(a.rows(), b.rows());
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.data() + i * k;
    double* ci = c.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b.data() + j * k;
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += ai[l] * bj[l];
      ci[j] = s;
    }
  }
  return c;
}

Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) fail(Err::DimMismatch, "matvec");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.data() + i * a.cols();
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += ai[j] * x[j];
    y[i] = s;
  }
  return y;
}

Vector matvec_t(const Matrix& a, const Vector& x) {
  if (a.rows() != x.size()) fail(Err::DimMismatch, "matvec_t");
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* ai = a.data() + i * a.cols();
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += ai[j] * xi;
  }
  return y;
}

Matrix outer(const Vector& a, const Vector& b) {
  Matrix m(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
  return m;
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) fail(Err::DimMismatch, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_inf(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

double norm_1(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += std::fabs(x);
  return s;
}

double norm_2(const Vector& v) { return std::sqrt(dot(v, v)); }

double norm_inf_op(const Matrix& m) {
  double best = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (double x : m.row(i)) s += std::fabs(x);
    best = std::max(best, s);
  }
  return best;
}

double norm_fro(const Matrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
  return std::sqrt(s);
}

double vector_norm(std::span<const double> v, Lp p) {
  switch (p) {
    case Lp::One: {
      double s = 0.0;
      for (double x : v) s += std::fabs(x);
      return s;
    }
    case Lp::Two: {
      double s = 0.0;
      for (double x : v) s += x * x;
      return std::sqrt(s);
    }
    case Lp::Inf: {
      double m = 0.0;
      for (double x : v) m = std::max(m, std::fabs(x));
      return m;
    }
  }
  return 0.0;
}

Lp dual_index(Lp p) {
  switch (p) {
    case Lp::One: return Lp::Inf;
    case Lp::Two: return Lp::Two;
    case Lp::Inf: return Lp::One;
  }
  return Lp::Two;
}

namespace {

// Largest eigenvalue of the PSD matrix mᵀm by power iteration with a
// Rayleigh quotient estimate; used for the spectral norm.
double spectral_norm(const Matrix& m, double tol, std::size_t max_iter) {
  const std::size_t n = m.cols();
  if (n == 0 || m.rows() == 0) return 0.0;
  Vector v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector w = matvec_t(m, matvec(m, v));
    lambda = dot(v, w);
    Vector r = w - lambda * v;
    if (norm_2(r) <= tol * std::max(lambda, 1.0)) return std::sqrt(std::max(lambda, 0.0));
    double nw = norm_2(w);
    if (nw == 0.0) return 0.0;
    for (double& x : w) x /= nw;
    v = std::move(w);
  }
  throw Error(Err::NonConvergence, "spectral norm power iteration");
}

}  // namespace

NormValue induced_norm(const Matrix& m, Lp from, Lp to, double tol, std::size_t max_iter) {
  if (m.rows() == 0 || m.cols() == 0) return {0.0, true};
  // max column q-norm
  if (from == Lp::One) {
    Matrix t = transpose(m);
    double best = 0.0;
    for (std::size_t j = 0; j < t.rows(); ++j) best = std::max(best, vector_norm(t.row(j), to));
    return {best, true};
  }
  // max row dual-norm
  if (to == Lp::Inf) {
    double best = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
      best = std::max(best, vector_norm(m.row(i), dual_index(from)));
    return {best, true};
  }
  if (from == Lp::Two && to == Lp::Two) return {spectral_norm(m, tol, max_iter), true};

  // Remaining pairs are NP-hard or have no convenient exact form; return
  // certified upper bounds.
  if (from == Lp::Inf && to == Lp::One) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += std::fabs(m.data()[i]);
    return {s, false};
  }
  if (from == Lp::Inf && to == Lp::Two) {
    double inf_one = induced_norm(m, Lp::Inf, Lp::One, tol, max_iter).value;
    double inf_inf = induced_norm(m, Lp::Inf, Lp::Inf, tol, max_iter).value;
    return {std::sqrt(inf_one * inf_inf), false};
  }
  if (from == Lp::Two && to == Lp::One) {
    double two_two = spectral_norm(m, tol, max_iter);
    return {std::sqrt(static_cast<double>(m.rows())) * two_two, false};
  }
  fail(Err::InvalidArgument, "unsupported norm pair");
}

PfResult pf_eigen(const Matrix& m, double tol, std::size_t max_iter) {
  if (m.rows() != m.cols()) fail(Err::DimMismatch, "pf_eigen requires a square matrix");
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.data()[i] < 0.0) fail(Err::NegativeEntry, "pf_eigen requires a nonnegative matrix");
  }
  if (tol <= 0.0) fail(Err::InvalidArgument, "pf_eigen tol must be positive");
  if (n == 0) return {0.0, {}, 0, 0.0};

  // Nilpotent sweep: the iterate of a nilpotent matrix hits exactly zero
  // within n steps, and the shifted iteration below would never detect that.
  {
    Vector v(n, 1.0);
    for (std::size_t t = 0; t <= n; ++t) {
      v = matvec(m, v);
      double mx = norm_inf(v);
      if (mx == 0.0) return {0.0, Vector(n, 1.0), t + 1, 0.0};
      for (double& x : v) x /= mx;
    }
  }

  // Shift breaks the cycling of periodic nonnegative matrices without
  // changing eigenvectors; the residual is identical for m and m + cI.
  double max_entry = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) max_entry = std::max(max_entry, m.data()[i]);
  const double shift = 0.05 * std::max(1.0, max_entry);

  Vector v(n, 1.0);
  double lambda = 0.0;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    Vector w = matvec(m, v);
    for (std::size_t i = 0; i < n; ++i) w[i] += shift * v[i];
    double shifted_lambda = norm_inf(w);
    if (shifted_lambda == 0.0) return {0.0, Vector(n, 1.0), it, 0.0};
    lambda = shifted_lambda - shift;
    // Residual is measured at v, so v is what gets returned on success.
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      residual = std::max(residual, std::fabs(w[i] - shifted_lambda * v[i]));
    if (residual <= tol * std::max(lambda, 1.0)) {
      return {std::max(lambda, 0.0), std::move(v), it, residual};
    }
    for (double& x : w) x /= shifted_lambda;
    v = std::move(w);
  }
  throw Error(Err::NonConvergence, "pf_eigen power iteration").with_iterate(v);
}

double topk_sum(const Vector& v, std::size_t k) {
  if (k > v.size()) fail(Err::InvalidArgument, "topk_sum: k exceeds vector length");
  if (k == 0) return 0.0;
  Vector sorted = v;
  std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end(), std::greater<>());
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += sorted[i];
  return s;
}

namespace {

Vector resolvent_iterate(const Matrix& m, const Vector& b, double tol, std::size_t max_iter) {
  if (m.rows() != m.cols() || m.rows() != b.size()) fail(Err::DimMismatch, "resolvent");
  Vector sigma(b.size(), 0.0);
  for (std::size_t it = 0; it <= max_iter; ++it) {
    Vector next = matvec(m, sigma);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += b[i];
    double residual = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i)
      residual = std::max(residual, std::fabs(next[i] - sigma[i]));
    if (residual <= tol) return sigma;
    sigma = std::move(next);
  }
  throw Error(Err::NonConvergence, "resolvent fixed point").with_iterate(sigma);
}

}  // namespace

Vector nonneg_resolvent(const Matrix& m, const Vector& b, double tol, std::size_t max_iter) {
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.data()[i] < 0.0) fail(Err::NegativeEntry, "nonneg_resolvent matrix");
  for (double x : b)
    if (x < 0.0) fail(Err::NegativeEntry, "nonneg_resolvent rhs");
  PfResult pf = pf_eigen(m, std::max(tol, 1e-12), max_iter);
  if (pf.lambda >= 1.0) {
    fail(Err::IllPosed, "nonneg_resolvent: spectral radius " + std::to_string(pf.lambda) + " >= 1");
  }
  return resolvent_iterate(m, b, tol, max_iter);
}

Vector resolvent_apply(const Matrix& m, const Vector& b, double tol, std::size_t max_iter) {
  return resolvent_iterate(m, b, tol, max_iter);
}

namespace {

// Modified Gram-Schmidt, run twice. Columns that collapse are replaced with
// canonical basis vectors so the basis stays full rank for rank-deficient
// inputs.
void orthonormalize_columns(Matrix& v) {
  const std::size_t n = v.rows(), k = v.cols();
  for (std::size_t j = 0; j < k; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t l = 0; l < j; ++l) {
        double proj = 0.0;
        for (std::size_t i = 0; i < n; ++i) proj += v(i, l) * v(i, j);
        for (std::size_t i = 0; i < n; ++i) v(i, j) -= proj * v(i, l);
      }
    }
    double nrm = 0.0;
    for (std::size_t i = 0; i < n; ++i) nrm += v(i, j) * v(i, j);
    nrm = std::sqrt(nrm);
    if (nrm > 1e-12) {
      for (std::size_t i = 0; i < n; ++i) v(i, j) /= nrm;
      continue;
    }
    // replace with the first basis vector not already spanned
    bool placed = false;
    for (std::size_t e = 0; e < n && !placed; ++e) {
      for (std::size_t i = 0; i < n; ++i) v(i, j) = (i == e) ? 1.0 : 0.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t l = 0; l < j; ++l) {
          double proj = 0.0;
          for (std::size_t i = 0; i < n; ++i) proj += v(i, l) * v(i, j);
          for (std::size_t i = 0; i < n; ++i) v(i, j) -= proj * v(i, l);
        }
      }
      double rn = 0.0;
      for (std::size_t i = 0; i < n; ++i) rn += v(i, j) * v(i, j);
      rn = std::sqrt(rn);
      if (rn > 0.5) {
        for (std::size_t i = 0; i < n; ++i) v(i, j) /= rn;
        placed = true;
      }
    }
    if (!placed) fail(Err::NonConvergence, "orthonormalization collapsed");
  }
}

}  // namespace

SvdFactors truncated_svd(const Matrix& m, std::size_t k, double tol, std::size_t max_iter) {
  const std::size_t n = m.rows(), c = m.cols();
  if (k < 1 || k > std::min(n, c)) fail(Err::InvalidArgument, "truncated_svd rank");

  auto rng = make_rng(0x7c3d9e1fULL, "truncated_svd");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Matrix v(c, k);
  for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = unit(rng);
  orthonormalize_columns(v);

  for (std::size_t it = 0; it < max_iter; ++it) {
    Matrix w = matmul(m, v);          // n x k
    Matrix v_next = matmul_tn(m, w);  // c x k
    orthonormalize_columns(v_next);
    // movement of the new basis out of the previous subspace; invariant to
    // rotations inside the subspace
    Matrix overlap = matmul_tn(v, v_next);        // k x k
    Matrix projected = matmul(v, overlap);        // c x k
    double movement = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < c; ++i) {
        double d = v_next(i, j) - projected(i, j);
        s += d * d;
      }
      movement = std::max(movement, std::sqrt(s));
    }
    v = std::move(v_next);
    if (it >= 1 && movement <= tol) {
      return {matmul(m, v), std::move(v)};
    }
  }
  throw Error(Err::NonConvergence, "truncated_svd subspace iteration");
}

Matrix solve_spd(Matrix g, const Matrix& rhs) {
  const std::size_t n = g.rows();
  if (g.cols() != n || rhs.rows() != n) fail(Err::DimMismatch, "solve_spd");
  // in-place lower Cholesky
  for (std::size_t j = 0; j < n; ++j) {
    double d = g(j, j);
    for (std::size_t l = 0; l < j; ++l) d -= g(j, l) * g(j, l);
    if (d <= 0.0) fail(Err::InvalidArgument, "solve_spd: matrix not positive definite");
    d = std::sqrt(d);
    g(j, j) = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = g(i, j);
      for (std::size_t l = 0; l < j; ++l) s -= g(i, l) * g(j, l);
      g(i, j) = s / d;
    }
  }
  Matrix x = rhs;
  const std::size_t m = rhs.cols();
  // forward then backward substitution per column
  for (std::size_t jcol = 0; jcol < m; ++jcol) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, jcol);
      for (std::size_t l = 0; l < i; ++l) s -= g(i, l) * x(l, jcol);
      x(i, jcol) = s / g(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x(ii, jcol);
      for (std::size_t l = ii + 1; l < n; ++l) s -= g(l, ii) * x(l, jcol);
      x(ii, jcol) = s / g(ii, ii);
    }
  }
  return x;
}

}  // namespace idl
