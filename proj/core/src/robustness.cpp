#include "idl/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "idl/lp.hpp"
#include "idl/rng.hpp"
#include "idl/wellposed.hpp"

namespace idl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

BoxUncertainty box_part(const Uncertainty& u) {
  if (const auto* b = std::get_if<BoxUncertainty>(&u)) return *b;
  const auto& c = std::get<CardUncertainty>(u);
  return BoxUncertainty{c.u0, c.sigma_u};
}

void check_uncertainty(const ImplicitModel& m, const Vector& u0, const Vector& sigma_u) {
  if (u0.size() != m.input_dim() || sigma_u.size() != m.input_dim())
    fail(Err::DimMismatch, "uncertainty set dimensions");
  for (double s : sigma_u)
    if (s < 0.0) fail(Err::NegativeEntry, "uncertainty radius");
}

void require_cone(const ImplicitModel& m, const char* what) {
  if (!m.structure().all_componentwise())
    fail(Err::BlockwiseActivation, std::string(what) + " needs a componentwise activation");
}

void require_relu(const ImplicitModel& m, const char* what) {
  if (!m.structure().all_of(Act::Relu))
    fail(Err::Unsupported, std::string(what) + " is defined for ReLU activations");
}

double checked_contraction_norm(const ImplicitModel& m, const char* what) {
  const double na = norm_inf_op(m.a());
  if (na >= 1.0) fail(Err::IllPosed, std::string(what) + ": |A|_inf >= 1");
  return na;
}

// Gamma N(A) and Gamma N(B) for the model's declared blocks.
std::pair<Matrix, Matrix> blip_norms(const ImplicitModel& m) {
  NormMatrixSet nm = norm_matrices(m);
  const auto& blocks = m.structure().blocks();
  Matrix na = nm.na, nb = nm.nb;
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const double gamma = blocks[l].act.lipschitz();
    for (std::size_t h = 0; h < na.cols(); ++h) na(l, h) *= gamma;
    for (std::size_t i = 0; i < nb.cols(); ++i) nb(l, i) *= gamma;
  }
  return {std::move(na), std::move(nb)};
}

void ensure_stable(const Matrix& nonneg, const char* what) {
  if (pf_eigen(nonneg).lambda >= 1.0)
    fail(Err::IllPosed, std::string(what) + ": spectral radius >= 1");
}

}  // namespace

double state_norm_bound(const ImplicitModel& m, const Uncertainty& u) {
  require_cone(m, "state_norm_bound");
  const double na = checked_contraction_norm(m, "state_norm_bound");
  const Matrix babs = abs(m.b());

  if (const auto* box = std::get_if<BoxUncertainty>(&u)) {
    check_uncertainty(m, box->u0, box->sigma_u);
    return norm_inf(matvec(babs, box->sigma_u)) / (1.0 - na);
  }
  const auto& card = std::get<CardUncertainty>(u);
  check_uncertainty(m, card.u0, card.sigma_u);
  if (card.k > card.sigma_u.size()) fail(Err::InvalidArgument, "cardinality budget exceeds inputs");
  double delta = 0.0;
  for (std::size_t i = 0; i < babs.rows(); ++i) {
    Vector weighted(babs.cols());
    for (std::size_t j = 0; j < babs.cols(); ++j) weighted[j] = card.sigma_u[j] * babs(i, j);
    delta = std::max(delta, topk_sum(weighted, card.k));
  }
  return delta / (1.0 - na);
}

Vector state_box_bound(const ImplicitModel& m, const BoxUncertainty& box) {
  require_cone(m, "state_box_bound");
  check_uncertainty(m, box.u0, box.sigma_u);
  return nonneg_resolvent(abs(m.a()), matvec(abs(m.b()), box.sigma_u));
}

Vector state_norm_bound_blip(const ImplicitModel& m, const BoxUncertainty& box) {
  check_uncertainty(m, box.u0, box.sigma_u);
  auto [na, nb] = blip_norms(m);
  return nonneg_resolvent(na, matvec(nb, box.sigma_u));
}

SensitivityReport sensitivity(const ImplicitModel& m, SensMethod method,
                              const BoxUncertainty* box) {
  SensitivityReport rep;
  rep.method = method;
  const std::size_t p = m.input_dim();

  if (method == SensMethod::Cone) {
    require_cone(m, "sensitivity");
    Matrix aa = abs(m.a()), ba = abs(m.b());
    ensure_stable(aa, "sensitivity");
    // (I - |A|)^{-1} |B| column by column, then one |C| product
    Matrix resolvent_b(m.state_dim(), p);
    Vector col(m.state_dim());
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t i = 0; i < m.state_dim(); ++i) col[i] = ba(i, j);
      Vector solved = resolvent_apply(aa, col);
      for (std::size_t i = 0; i < m.state_dim(); ++i) resolvent_b(i, j) = solved[i];
    }
    rep.s = matmul(abs(m.c()), resolvent_b) + abs(m.d());
  } else {
    auto [na, nb] = blip_norms(m);
    ensure_stable(na, "sensitivity");
    NormMatrixSet nm = norm_matrices(m);
    const std::size_t nblocks = na.rows();
    Matrix resolvent_nb(nblocks, p);
    Vector col(nblocks);
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t i = 0; i < nblocks; ++i) col[i] = nb(i, j);
      Vector solved = resolvent_apply(na, col);
      for (std::size_t i = 0; i < nblocks; ++i) resolvent_nb(i, j) = solved[i];
    }
    rep.s = matmul(nm.nc, resolvent_nb) + abs(m.d());
  }

  rep.kappa = norm_inf_op(m.a()) < 1.0 ? lipschitz_kappa(m) : kInf;
  if (box != nullptr) {
    check_uncertainty(m, box->u0, box->sigma_u);
    rep.sigma_y = matvec(rep.s, box->sigma_u);
    if (method == SensMethod::Cone) rep.sigma_x = state_box_bound(m, *box);
  }
  return rep;
}

Vector output_box_bound(const ImplicitModel& m, const BoxUncertainty& box) {
  const SensMethod method =
      m.structure().all_componentwise() ? SensMethod::Cone : SensMethod::Blip;
  return matvec(sensitivity(m, method).s, box.sigma_u);
}

double worstcase_squared_loss(const Vector& y, const Vector& yhat0, const Vector& sigma_y) {
  if (y.size() != yhat0.size() || y.size() != sigma_y.size())
    fail(Err::DimMismatch, "worstcase_squared_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = std::fabs(y[i] - yhat0[i]) + sigma_y[i];
    acc += v * v;
  }
  return acc;
}

namespace {

void check_simplex_target(const Vector& y) {
  double sum = 0.0;
  for (double v : y) {
    if (v < -1e-12) fail(Err::NotSimplex, "target has a negative entry");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-9) fail(Err::NotSimplex, "target does not sum to one");
}

double log_sum_exp(const Vector& z) {
  double mx = -kInf;
  for (double v : z) mx = std::max(mx, v);
  double acc = 0.0;
  for (double v : z) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

}  // namespace

double worstcase_crossentropy(const Vector& y, const Vector& yhat0, const Vector& sigma_y) {
  if (y.size() != yhat0.size() || y.size() != sigma_y.size())
    fail(Err::DimMismatch, "worstcase_crossentropy");
  check_simplex_target(y);
  Vector bumped = yhat0 + sigma_y;
  return log_sum_exp(bumped) - dot(y, yhat0) + dot(y, sigma_y);
}

double worstcase_crossentropy_normball(const Vector& y, const Vector& yhat0, double rho,
                                       const Matrix& c) {
  if (y.size() != yhat0.size()) fail(Err::DimMismatch, "worstcase_crossentropy_normball");
  check_simplex_target(y);
  const double plain = log_sum_exp(yhat0) - dot(y, yhat0);
  return plain + 2.0 * rho * norm_inf_op(c);
}

double support_function(const Uncertainty& u, const Vector& b) {
  if (const auto* box = std::get_if<BoxUncertainty>(&u)) {
    if (b.size() != box->u0.size()) fail(Err::DimMismatch, "support_function");
    double acc = dot(b, box->u0);
    for (std::size_t i = 0; i < b.size(); ++i) acc += box->sigma_u[i] * std::fabs(b[i]);
    return acc;
  }
  const auto& card = std::get<CardUncertainty>(u);
  if (b.size() != card.u0.size()) fail(Err::DimMismatch, "support_function");
  Vector weighted(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) weighted[i] = card.sigma_u[i] * std::fabs(b[i]);
  return dot(b, card.u0) + topk_sum(weighted, std::min(card.k, weighted.size()));
}

AttackResult lp_attack(const ImplicitModel& m, const Uncertainty& u, const Vector& c,
                       const Vector* sigma_x, const SolveOptions& opts) {
  require_relu(m, "lp_attack");
  const BoxUncertainty box = box_part(u);
  check_uncertainty(m, box.u0, box.sigma_u);
  const std::size_t n = m.state_dim(), p = m.input_dim();
  if (c.size() != n) fail(Err::DimMismatch, "lp_attack objective");

  const Vector x0 = predict(m, box.u0, opts).x;
  const Vector sx = sigma_x ? *sigma_x : state_box_bound(m, box);
  if (sx.size() != n) fail(Err::DimMismatch, "lp_attack state envelope");

  const auto* card = std::get_if<CardUncertainty>(&u);
  const std::size_t extra = card ? 2 * p : 0;  // split of u - u0 for the l1 budget

  LPProblem lp;
  lp.c.assign(n + p + extra, 0.0);
  std::copy(c.begin(), c.end(), lp.c.begin());
  lp.lower.assign(n + p + extra, 0.0);
  lp.upper.assign(n + p + extra, kInf);
  for (std::size_t i = 0; i < n; ++i) {
    lp.lower[i] = std::max(x0[i] - sx[i], 0.0);
    lp.upper[i] = x0[i] + sx[i];
  }
  for (std::size_t j = 0; j < p; ++j) {
    lp.lower[n + j] = box.u0[j] - box.sigma_u[j];
    lp.upper[n + j] = box.u0[j] + box.sigma_u[j];
  }

  // relaxed equilibrium x >= Ax + Bu, one row per state
  for (std::size_t i = 0; i < n; ++i) {
    Vector row(n + p + extra, 0.0);
    for (std::size_t j = 0; j < n; ++j) row[j] = (i == j ? 1.0 : 0.0) - m.a()(i, j);
    for (std::size_t j = 0; j < p; ++j) row[n + j] = -m.b()(i, j);
    lp.add_row(std::move(row), Rel::Ge, 0.0);
  }

  if (card) {
    // u - u0 = s+ - s-, both parts bounded by sigma, weighted l1 within k
    for (std::size_t j = 0; j < p; ++j) {
      lp.upper[n + p + j] = box.sigma_u[j];
      lp.upper[n + p + p + j] = box.sigma_u[j];
      Vector row(n + p + extra, 0.0);
      row[n + j] = 1.0;
      row[n + p + j] = -1.0;
      row[n + p + p + j] = 1.0;
      lp.add_row(std::move(row), Rel::Eq, box.u0[j]);
    }
    Vector budget(n + p + extra, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
      const double w = box.sigma_u[j] > 0.0 ? 1.0 / box.sigma_u[j] : 0.0;
      budget[n + p + j] = w;
      budget[n + p + p + j] = w;
    }
    lp.add_row(std::move(budget), Rel::Le, static_cast<double>(card->k));
  }

  LPSolution sol = solve_lp(lp);
  if (sol.status == LPStatus::Infeasible)
    fail(Err::LPInfeasible, "lp_attack relaxation infeasible; the state envelope is inconsistent");
  if (sol.status != LPStatus::Optimal) fail(Err::NonConvergence, "lp_attack relaxation unbounded");
  const double certified = sol.objective;

  // The relaxation often leaves u free on the optimal face. Re-solve with a
  // tiny pull of Ax + Bu toward the objective-weighted states so the
  // extracted u actually drives them; the certified bound stays the pure
  // LP's optimum.
  {
    const Vector atc = matvec_t(m.a(), c);
    const Vector btc = matvec_t(m.b(), c);
    double span = 1.0;
    for (std::size_t i = 0; i < n; ++i)
      span = std::max(span, std::fabs(atc[i]) * (std::fabs(lp.upper[i]) + std::fabs(lp.lower[i])));
    for (std::size_t j = 0; j < p; ++j)
      span = std::max(span, std::fabs(btc[j]) *
                                (std::fabs(box.u0[j]) + box.sigma_u[j]));
    const double eps = 1e-6 * std::max(norm_inf(c), 1.0) / span;
    for (std::size_t i = 0; i < n; ++i) lp.c[i] += eps * atc[i];
    for (std::size_t j = 0; j < p; ++j) lp.c[n + j] += eps * btc[j];
    LPSolution nudged = solve_lp(lp);
    if (nudged.status == LPStatus::Optimal) sol = std::move(nudged);
  }

  Vector u_adv(p);
  for (std::size_t j = 0; j < p; ++j) {
    u_adv[j] = std::clamp(sol.x[n + j], box.u0[j] - box.sigma_u[j], box.u0[j] + box.sigma_u[j]);
  }
  if (card) {
    // keep only the k largest weighted moves so the attack stays in the set
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Vector score(p);
    for (std::size_t j = 0; j < p; ++j)
      score[j] = box.sigma_u[j] > 0.0 ? std::fabs(u_adv[j] - box.u0[j]) / box.sigma_u[j] : 0.0;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    for (std::size_t r = card->k; r < p; ++r) u_adv[order[r]] = box.u0[order[r]];
  }

  const Vector x_true = predict(m, u_adv, opts).x;
  return {std::move(u_adv), certified, dot(c, x_true), true};
}

AttackResult discrepancy_attack(const ImplicitModel& m, const Uncertainty& u,
                                const Vector* sigma_x, std::size_t iters, std::uint64_t seed,
                                const SolveOptions& opts) {
  require_relu(m, "discrepancy_attack");
  const BoxUncertainty box = box_part(u);
  check_uncertainty(m, box.u0, box.sigma_u);
  const std::size_t n = m.state_dim();
  const Vector x0 = predict(m, box.u0, opts).x;
  const Vector sx = sigma_x ? *sigma_x : state_box_bound(m, box);

  // The iterated linearization climbs to a vertex of its own basin, so a
  // single start can stall on a poor corner. The schedule below spends the
  // budget on one seeded random direction, then signed coordinate
  // directions, then gradient refinements from the best point found.
  auto rng = make_rng(seed, "discrepancy_attack.seed");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Vector> starts;
  {
    Vector c0(n);
    for (double& v : c0) v = unit(rng);
    double nc = norm_2(c0);
    if (nc == 0.0) c0.assign(n, 1.0);
    else
      for (double& v : c0) v /= nc;
    starts.push_back(std::move(c0));
    for (std::size_t i = 0; i < n; ++i) {
      Vector e(n, 0.0);
      e[i] = 1.0;
      starts.push_back(e);
      e[i] = -1.0;
      starts.push_back(e);
    }
  }

  AttackResult best{box.u0, 0.0, 0.0, true};
  Vector x_best = x0;
  const std::size_t budget = std::max<std::size_t>(iters, 1);
  for (std::size_t it = 0; it < budget; ++it) {
    Vector c;
    if (it < starts.size()) {
      c = starts[it];
    } else {
      c.resize(n);
      for (std::size_t i = 0; i < n; ++i) c[i] = 2.0 * (x_best[i] - x0[i]);
      if (norm_2(c) == 0.0) break;  // stuck at the nominal state
    }
    AttackResult step = lp_attack(m, u, c, &sx, opts);
    const Vector x = predict(m, step.u_adv, opts).x;
    double achieved = 0.0;
    for (std::size_t i = 0; i < n; ++i) achieved += (x[i] - x0[i]) * (x[i] - x0[i]);
    if (achieved >= best.objective_achieved) {
      best.u_adv = step.u_adv;
      best.objective_achieved = achieved;
      x_best = x;
    }
    best.upper_bound = step.upper_bound;
  }
  return best;
}

Vector sensitivity_attack(const ImplicitModel& m, const Vector& u0, double fraction,
                          const Vector& magnitude, std::optional<std::size_t> target_row,
                          const Vector* lo, const Vector* hi) {
  if (u0.size() != m.input_dim()) fail(Err::DimMismatch, "sensitivity_attack input");
  if (magnitude.size() != u0.size()) fail(Err::DimMismatch, "sensitivity_attack magnitude");
  if (fraction < 0.0 || fraction > 1.0) fail(Err::InvalidArgument, "fraction must be in [0,1]");
  const std::size_t p = u0.size();

  const SensMethod method =
      m.structure().all_componentwise() ? SensMethod::Cone : SensMethod::Blip;
  const Matrix s = sensitivity(m, method).s;
  if (target_row && *target_row >= s.rows()) fail(Err::InvalidArgument, "target row out of range");

  Vector score(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    if (target_row) {
      score[j] = s(*target_row, j);
    } else {
      for (std::size_t i = 0; i < s.rows(); ++i) score[j] = std::max(score[j], s(i, j));
    }
  }

  const std::size_t count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(p)));
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

  Vector u_adv = u0;
  for (std::size_t r = 0; r < std::min(count, p); ++r) {
    const std::size_t j = order[r];
    const double low = lo ? (*lo)[j] : -kInf;
    const double high = hi ? (*hi)[j] : kInf;
    // push toward the farther face
    const double up_room = high - u0[j], down_room = u0[j] - low;
    double dir;
    if (std::isinf(up_room) && std::isinf(down_room)) dir = 1.0;
    else dir = up_room >= down_room ? 1.0 : -1.0;
    u_adv[j] = std::clamp(u0[j] + dir * magnitude[j], low, high);
  }
  return u_adv;
}

Vector perturbation_error_bound(const Matrix& a0, const Matrix& e, const Vector& x0) {
  if (a0.rows() != a0.cols() || e.rows() != a0.rows() || e.cols() != a0.cols())
    fail(Err::DimMismatch, "perturbation_error_bound");
  if (x0.size() != a0.rows()) fail(Err::DimMismatch, "perturbation_error_bound state");
  for (std::size_t i = 0; i < e.size(); ++i)
    if (e.data()[i] < 0.0) fail(Err::NegativeEntry, "perturbation envelope");
  Matrix grown = abs(a0) + e;
  return nonneg_resolvent(grown, matvec(e, abs(x0)));
}

}  // namespace idl
