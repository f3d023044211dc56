#include "idl/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "idl/equilibrium.hpp"
#include "idl/rng.hpp"

namespace idl {

LossResult loss_value_grad(const LossSpec& spec, const Matrix& y, const Matrix& yhat) {
  if (y.rows() != yhat.rows() || y.cols() != yhat.cols())
    fail(Err::DimMismatch, "loss_value_grad");
  const std::size_t q = y.rows(), m = y.cols();

  if (spec.kind == LossKind::SquaredFrobenius) {
    Matrix g = yhat - y;
    double value = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) value += g.data()[i] * g.data()[i];
    return {0.5 * value, std::move(g)};
  }

  // cross entropy against the softmax of yhat, summed over columns
  Matrix g(q, m);
  double value = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double colsum = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      const double v = y(i, j);
      if (v < -1e-12) fail(Err::NotSimplex, "target column " + std::to_string(j));
      colsum += v;
    }
    if (std::fabs(colsum - 1.0) > 1e-9)
      fail(Err::NotSimplex, "target column " + std::to_string(j) + " does not sum to one");

    double mx = yhat(0, j);
    for (std::size_t i = 1; i < q; ++i) mx = std::max(mx, yhat(i, j));
    double lse = 0.0;
    for (std::size_t i = 0; i < q; ++i) lse += std::exp(yhat(i, j) - mx);
    lse = mx + std::log(lse);
    for (std::size_t i = 0; i < q; ++i) {
      value += y(i, j) * (lse - yhat(i, j));
      g(i, j) = std::exp(yhat(i, j) - lse) - y(i, j);
    }
  }
  return {value, std::move(g)};
}

GradientBundle implicit_gradients(const ImplicitModel& m, const Matrix& u, const Matrix& y,
                                  const LossSpec& spec, const SolveOptions& opts) {
  if (u.rows() != m.input_dim()) fail(Err::DimMismatch, "implicit_gradients input");
  if (y.cols() != u.cols() || y.rows() != m.output_dim())
    fail(Err::DimMismatch, "implicit_gradients targets");
  const std::size_t n = m.state_dim(), cols = u.cols();
  const BlockStructure& s = m.structure();

  Matrix bu = matmul(m.b(), u);
  BatchEquilibriumResult eq = picard_solve_batch(m.a(), bu, s, opts);
  const Matrix& x = eq.x;
  Matrix z = matmul(m.a(), x);
  for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] += bu.data()[i];

  Matrix yhat = matmul(m.c(), x);
  {
    Matrix du = matmul(m.d(), u);
    for (std::size_t i = 0; i < yhat.size(); ++i) yhat.data()[i] += du.data()[i];
  }
  LossResult loss = loss_value_grad(spec, y, yhat);
  const Matrix& l = loss.grad;
  Matrix ctl = matmul_tn(m.c(), l);  // n x cols

  // adjoint fixed point from zero
  Matrix v(n, cols);
  Vector zcol(n), wcol(n);
  auto sweep = [&](const Matrix& cur) {
    Matrix next = matmul_tn(m.a(), cur);
    for (std::size_t i = 0; i < next.size(); ++i) next.data()[i] += ctl.data()[i];
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        zcol[i] = z(i, j);
        wcol[i] = next(i, j);
      }
      apply_jacobian_inplace(s, zcol, wcol);
      for (std::size_t i = 0; i < n; ++i) next(i, j) = wcol[i];
    }
    return next;
  };
  bool converged = false;
  for (std::size_t it = 1; it <= opts.max_iter && !converged; ++it) {
    Matrix next = sweep(v);
    double diff = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i)
      diff = std::max(diff, std::fabs(next.data()[i] - v.data()[i]));
    v = std::move(next);
    converged = diff <= opts.tol;
  }
  if (!converged) throw Error(Err::NonConvergence, "adjoint fixed point");

  GradientBundle g;
  g.da = matmul_nt(v, x);
  g.db = matmul_nt(v, u);
  g.dc = matmul_nt(l, x);
  g.dd = matmul_nt(l, u);
  g.du = matmul_tn(m.b(), v) + matmul_tn(m.d(), l);
  g.loss = loss.value;
  return g;
}

namespace {

// Shrink one row onto the l1 ball of radius kappa; lam_hi is bisected down
// until the soft threshold lands inside the ball.
void project_row(const double* src, double* dst, std::size_t width, double kappa, double tol) {
  double l1 = 0.0, sq = 0.0;
  for (std::size_t j = 0; j < width; ++j) {
    l1 += std::fabs(src[j]);
    sq += src[j] * src[j];
  }
  if (l1 <= kappa) {
    std::copy(src, src + width, dst);
    return;
  }
  auto excess = [&](double lam) {
    double acc = -kappa;
    for (std::size_t j = 0; j < width; ++j) acc += std::max(std::fabs(src[j]) - lam, 0.0);
    return acc;
  };
  double lo = 0.0, hi = 0.5 * sq / kappa;
  while (excess(hi) > 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > tol * std::max(hi, 1.0); ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > 0.0 ? lo : hi) = mid;
  }
  for (std::size_t j = 0; j < width; ++j) {
    const double mag = std::max(std::fabs(src[j]) - hi, 0.0);
    dst[j] = src[j] >= 0.0 ? mag : -mag;
  }
}

}  // namespace

Matrix project_linf_ball(const Matrix& a0, double kappa, double tol) {
  if (!(kappa > 0.0)) fail(Err::InvalidArgument, "projection radius must be positive");
  Matrix out(a0.rows(), a0.cols());
  for (std::size_t i = 0; i < a0.rows(); ++i)
    project_row(a0.data() + i * a0.cols(), out.data() + i * a0.cols(), a0.cols(), kappa, tol);
  return out;
}

Matrix frank_wolfe_lmo(const Matrix& g, double kappa) {
  if (!(kappa > 0.0)) fail(Err::InvalidArgument, "ball radius must be positive");
  Matrix out(g.rows(), g.cols());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    std::size_t arg = 0;
    double best = 0.0;
    for (std::size_t j = 0; j < g.cols(); ++j) {
      const double mag = std::fabs(g(i, j));
      if (mag > best) {
        best = mag;
        arg = j;
      }
    }
    if (best > 0.0) out(i, arg) = g(i, arg) > 0.0 ? kappa : -kappa;
  }
  return out;
}

double fenchel_divergence_relu(const Matrix& x, const Matrix& z) {
  if (x.rows() != z.rows() || x.cols() != z.cols()) fail(Err::DimMismatch, "fenchel divergence");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x.data()[i];
    if (xi < 0.0) fail(Err::NegativeState, "first argument must be nonnegative");
    const double zp = std::max(z.data()[i], 0.0);
    acc += 0.5 * xi * xi + 0.5 * zp * zp - xi * z.data()[i];
  }
  return acc;
}

GradientBundle robust_penalty_gradients(const Matrix& a, const Matrix& b, const Matrix& c,
                                        const Matrix& d, const Vector& y, const Vector& z) {
  const std::size_t n = a.rows(), p = b.cols(), q = c.rows();
  if (a.cols() != n || b.rows() != n || c.cols() != n || d.rows() != q || d.cols() != p)
    fail(Err::DimMismatch, "robust_penalty_gradients shapes");
  if (y.size() != q || z.size() != p) fail(Err::DimMismatch, "robust_penalty_gradients probes");

  Matrix aa = abs(a);
  if (pf_eigen(aa).lambda >= 1.0) fail(Err::IllPosed, "penalty needs spectral radius below one");

  const Vector bz = matvec(abs(b), z);
  const Vector cty = matvec_t(abs(c), y);
  const Vector r = resolvent_apply(aa, bz);              // (I-|A|)^{-1} |B| z
  const Vector qvec = resolvent_apply(transpose(aa), cty);  // (I-|A|)^{-T} |C|ᵀ y

  GradientBundle g;
  g.da = hadamard(outer(qvec, r), sign(a));
  g.db = hadamard(outer(qvec, z), sign(b));
  g.dc = hadamard(outer(y, r), sign(c));
  g.dd = hadamard(outer(y, z), sign(d));
  g.loss = dot(cty, r) + dot(y, matvec(abs(d), z));
  return g;
}

ImplicitModel init_model(std::size_t n, std::size_t p, std::size_t q, const ActivationKind& act,
                         double kappa, std::uint64_t seed) {
  auto rng = make_rng(seed, "init_model");
  const double scale = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(n, 1)));
  std::uniform_real_distribution<double> unit(-scale, scale);
  auto fill = [&](std::size_t r, std::size_t cc) {
    Matrix m(r, cc);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = unit(rng);
    return m;
  };
  Matrix a = project_linf_ball(fill(n, n), kappa);
  return ImplicitModel(std::move(a), fill(n, p), fill(q, n), fill(q, p),
                       BlockStructure::single(n, act));
}

ImplicitModel fit_readout(const ImplicitModel& m, const Matrix& u, const Matrix& y, double ridge,
                          const SolveOptions& opts) {
  const std::size_t n = m.state_dim(), p = m.input_dim(), q = m.output_dim();
  const std::size_t cols = u.cols();
  Matrix bu = matmul(m.b(), u);
  BatchEquilibriumResult eq = picard_solve_batch(m.a(), bu, m.structure(), opts);

  // features (X; U), normal equations with a ridge
  Matrix f(n + p, cols);
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t i = 0; i < n; ++i) f(i, j) = eq.x(i, j);
    for (std::size_t i = 0; i < p; ++i) f(n + i, j) = u(i, j);
  }
  Matrix gram = matmul_nt(f, f);
  for (std::size_t i = 0; i < n + p; ++i) gram(i, i) += ridge;
  Matrix rhs = matmul_nt(f, y);  // (n+p) x q
  Matrix w = solve_spd(std::move(gram), rhs);

  Matrix c(q, n), d(q, p);
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < n; ++j) c(i, j) = w(j, i);
    for (std::size_t j = 0; j < p; ++j) d(i, j) = w(n + j, i);
  }
  return ImplicitModel(m.a(), m.b(), std::move(c), std::move(d), m.structure());
}

namespace {

void soft_threshold_inplace(Matrix& m, double amount) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double v = m.data()[i];
    const double mag = std::max(std::fabs(v) - amount, 0.0);
    m.data()[i] = v >= 0.0 ? mag : -mag;
  }
}

}  // namespace

TrainResult sgd_train(const ImplicitModel& m0, const Matrix& u, const Matrix& y,
                      const LossSpec& spec, const TrainConfig& cfg) {
  if (!(cfg.kappa > 0.0 && cfg.kappa < 1.0)) fail(Err::InvalidArgument, "kappa must be in (0,1)");
  if (cfg.batch_size == 0) fail(Err::InvalidArgument, "batch size");
  if (u.cols() != y.cols()) fail(Err::DimMismatch, "sgd_train data");

  const std::size_t samples = u.cols();
  Matrix a = norm_inf_op(m0.a()) <= cfg.kappa ? m0.a() : project_linf_ball(m0.a(), cfg.kappa);
  Matrix b = m0.b(), c = m0.c(), d = m0.d();
  const BlockStructure& s = m0.structure();

  SolveOptions opts;
  opts.tol = cfg.tol;
  opts.max_iter = cfg.max_iter;

  auto rng = make_rng(cfg.seed, "sgd.shuffle");
  std::vector<std::size_t> order(samples);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<EpochStats> history;
  const auto t0 = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < samples; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, samples - start);
      Matrix ub(u.rows(), count), yb(y.rows(), count);
      for (std::size_t j = 0; j < count; ++j) {
        const std::size_t src = order[start + j];
        for (std::size_t i = 0; i < u.rows(); ++i) ub(i, j) = u(i, src);
        for (std::size_t i = 0; i < y.rows(); ++i) yb(i, j) = y(i, src);
      }

      ImplicitModel cur(a, b, c, d, s);
      GradientBundle g = implicit_gradients(cur, ub, yb, spec, opts);
      loss_sum += g.loss;

      const double step = cfg.learning_rate / static_cast<double>(count);
      for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] -= step * g.da.data()[i];
      for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] -= step * g.db.data()[i];
      if (!cfg.two_stage) {
        for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= step * g.dc.data()[i];
        for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] -= step * g.dd.data()[i];
      }
      if (cfg.l1_penalty > 0.0) {
        const double amount = cfg.learning_rate * cfg.l1_penalty;
        soft_threshold_inplace(a, amount);
        soft_threshold_inplace(b, amount);
        if (!cfg.two_stage) {
          soft_threshold_inplace(c, amount);
          soft_threshold_inplace(d, amount);
        }
      }
      a = project_linf_ball(a, cfg.kappa);
    }
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    history.push_back({epoch, loss_sum / static_cast<double>(samples), norm_inf_op(a), ms});
  }

  ImplicitModel trained(std::move(a), std::move(b), std::move(c), std::move(d), s);
  if (cfg.two_stage) {
    trained = fit_readout(trained, u, y, cfg.ridge, opts);
    LossResult final_loss = loss_value_grad(spec, y, predict_batch(trained, u, opts));
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    history.push_back({cfg.epochs + 1, final_loss.value / static_cast<double>(samples),
                       norm_inf_op(trained.a()), ms});
  }
  return {std::move(trained), std::move(history)};
}

}  // namespace idl
