// Acceptance gate: one self-contained check per release criterion, each
// printing a single PASS/FAIL line. Run a single criterion by number or
// everything with "all".

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <random>
#include <string>

#include "idl/compose.hpp"
#include "idl/compress.hpp"
#include "idl/dataset.hpp"
#include "idl/lp.hpp"
#include "idl/rng.hpp"
#include "idl/robustness.hpp"
#include "idl/training.hpp"
#include "idl/wellposed.hpp"
#include "oracles.hpp"

using namespace idl;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

Matrix with_ones(const Matrix& u) {
  Matrix out(u.rows() + 1, u.cols());
  for (std::size_t j = 0; j < u.cols(); ++j) {
    for (std::size_t i = 0; i < u.rows(); ++i) out(i, j) = u(i, j);
    out(u.rows(), j) = 1.0;
  }
  return out;
}

Matrix take_cols(const Matrix& m, std::size_t from, std::size_t to) {
  Matrix out(m.rows(), to - from);
  for (std::size_t j = from; j < to; ++j)
    for (std::size_t i = 0; i < m.rows(); ++i) out(i, j - from) = m(i, j);
  return out;
}

std::size_t argmax_col(const Matrix& y, std::size_t j) {
  std::size_t a = 0;
  for (std::size_t i = 1; i < y.rows(); ++i)
    if (y(i, j) > y(a, j)) a = i;
  return a;
}

double rmse(const Matrix& yhat, const Matrix& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = yhat.data()[i] - y.data()[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(y.cols()));
}

double accuracy(const Matrix& yhat, const Matrix& y) {
  std::size_t hits = 0;
  for (std::size_t j = 0; j < y.cols(); ++j) hits += argmax_col(yhat, j) == argmax_col(y, j);
  return static_cast<double>(hits) / static_cast<double>(y.cols());
}

// ---- criterion 1: noisy damped-cosine regression, two-stage training ----

Outcome criterion_regression() {
  Dataset train = generate_synthetic(DatasetKind::Regression, 200, 7001);
  Dataset test = generate_synthetic(DatasetKind::Regression, 1000, 8001);
  Matrix u = with_ones(train.u), ut = with_ones(test.u);

  TrainConfig tc;
  tc.kappa = 0.5;
  tc.learning_rate = 0.02;
  tc.batch_size = 20;
  tc.epochs = 10;
  tc.seed = 303;
  tc.two_stage = true;
  tc.ridge = 1e-4;
  tc.tol = 1e-8;
  ImplicitModel m0 = init_model(75, 2, 1, ActivationKind::relu(), tc.kappa, 41);
  TrainResult r = sgd_train(m0, u, train.y, {LossKind::SquaredFrobenius}, tc);

  const double err = rmse(predict_batch(r.model, ut, {.tol = 1e-8}), test.y);
  return {err <= 0.80, fmt("test rmse %.3f (limit 0.80, noise floor ~0.577)", err)};
}

// ---- criterion 2: digit classification from flattened delimiter files ----

Outcome criterion_mnist() {
  const char* train_env = std::getenv("IDL_MNIST_TRAIN");
  const char* test_env = std::getenv("IDL_MNIST_TEST");
  const std::string train_path = train_env ? train_env : "data/mnist_train.csv";
  const std::string test_path = test_env ? test_env : "data/mnist_test.csv";

  Dataset train, test;
  try {
    LoadSchema schema{{"label"}, DatasetKind::Classification};
    train = load_dataset_file(train_path, schema);
    test = load_dataset_file(test_path, schema);
  } catch (const Error& e) {
    return {false, std::string("digit data unavailable (") + e.what() +
                       "); provide flattened csv files via IDL_MNIST_TRAIN/IDL_MNIST_TEST, "
                       "see tools/mnist_to_csv.py"};
  }
  if (train.u.cols() < 10000 || test.u.cols() < 2000)
    return {false, "need at least 10000 train and 2000 test samples"};

  Matrix utr = take_cols(train.u, 0, 10000), ytr = take_cols(train.y, 0, 10000);
  Matrix ute = take_cols(test.u, 0, 2000), yte = take_cols(test.y, 0, 2000);
  double mx = 0.0;
  for (std::size_t i = 0; i < utr.size(); ++i) mx = std::max(mx, utr.data()[i]);
  if (mx > 2.0) {
    const double inv = 1.0 / 255.0;
    for (std::size_t i = 0; i < utr.size(); ++i) utr.data()[i] *= inv;
    for (std::size_t i = 0; i < ute.size(); ++i) ute.data()[i] *= inv;
  }
  Matrix u = with_ones(utr), ut = with_ones(ute);

  TrainConfig tc;
  tc.kappa = 0.5;
  tc.learning_rate = 0.1;
  tc.batch_size = 100;
  tc.epochs = 12;
  tc.seed = 17;
  tc.tol = 1e-7;
  ImplicitModel m0 = init_model(100, u.rows(), ytr.rows(), ActivationKind::relu(), tc.kappa, 19);
  TrainResult r = sgd_train(m0, u, ytr, {LossKind::CrossEntropySoftmax}, tc);

  const double acc = accuracy(predict_batch(r.model, ut, {.tol = 1e-7}), yte);
  return {acc >= 0.90, fmt("test accuracy %.4f (limit 0.90)", acc)};
}

// ---- criterion 3: certified bound containment under Monte-Carlo sampling ----

Outcome criterion_containment() {
  constexpr double slack = 1e-8;
  std::size_t violations = 0, models = 0, samples_total = 0;

  for (std::uint64_t i = 0; i < 50; ++i) {
    const std::size_t n = 2 + (i * 7) % 19;
    const std::size_t p = 1 + i % 6;
    const std::size_t q = 1 + i % 4;
    const double target = 0.3 + 0.5 * static_cast<double>(i % 5) / 4.0;
    const bool blip_kind = i % 3 == 2 && n >= 4;

    auto rng = make_rng(3000 + i, "acceptance.containment");
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto fill = [&](std::size_t r, std::size_t c) {
      Matrix m(r, c);
      for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] = unit(rng);
      return m;
    };

    BlockStructure s = blip_kind
                           ? BlockStructure(std::vector<Block>{{2, ActivationKind::softmax()},
                                                               {n - 2, ActivationKind::relu()}})
                           : BlockStructure::single(
                                 n, i % 3 == 0 ? ActivationKind::tanh() : ActivationKind::relu());
    Matrix a = fill(n, n);
    ImplicitModel probe(a, fill(n, p), fill(q, n), fill(q, p), s);
    // scale A so the applicable certificate lands at the target level
    const double lam = blip_kind ? check_blip_pf(probe).lambda : pf_eigen(abs(a)).lambda;
    if (lam > 0) a = (target / lam) * a;
    ImplicitModel m(a, probe.b(), probe.c(), probe.d(), s);
    ++models;

    BoxUncertainty box;
    box.u0 = oracles::random_vector(p, -1, 1, 3100 + i);
    box.sigma_u.assign(p, 0.05 + 0.25 * static_cast<double>(i % 4) / 3.0);

    SolveOptions opts;
    opts.tol = 1e-10;
    const Vector x0 = predict(m, box.u0, opts).x;
    const Vector y0 = predict(m, box.u0, opts).y;

    // componentwise models exercise the blockwise machinery at unit-block
    // granularity, where the norm matrix reduces to |A| and the hypothesis
    // holds whenever the componentwise one does
    BlockStructure eta_structure = blip_kind ? s : s.scalarized();
    ImplicitModel eta_model(m.a(), m.b(), m.c(), m.d(), eta_structure);
    Vector sx, eta, sy;
    eta = state_norm_bound_blip(eta_model, box);
    if (!blip_kind) {
      sx = state_box_bound(m, box);
      sy = matvec(sensitivity(m, SensMethod::Cone).s, box.sigma_u);
    } else {
      sy = matvec(sensitivity(m, SensMethod::Blip).s, box.sigma_u);
    }

    // perturbation envelope checked on the componentwise models
    Matrix e(n, n);
    Vector pert_cap;
    if (!blip_kind) {
      auto erng = make_rng(3200 + i, "acceptance.envelope");
      std::uniform_real_distribution<double> mag(0.0, 0.02);
      for (std::size_t k = 0; k < e.size(); ++k) e.data()[k] = mag(erng);
      pert_cap = perturbation_error_bound(m.a(), e, x0);
    }

    auto mc = make_rng(3300 + i, "acceptance.samples");
    std::uniform_real_distribution<double> coin(-1.0, 1.0);
    const std::size_t trials = 10000;
    for (std::size_t t = 0; t < trials; ++t) {
      Vector u2 = box.u0;
      for (std::size_t k = 0; k < p; ++k) u2[k] += box.sigma_u[k] * coin(mc);
      Prediction pred = predict(m, u2, opts);
      ++samples_total;

      // blockwise norm envelope
      for (std::size_t l = 0; l < eta_structure.blocks().size(); ++l) {
        const std::size_t off = eta_structure.block_offset(l);
        const std::size_t len = eta_structure.blocks()[l].size;
        Vector d(len);
        for (std::size_t k = 0; k < len; ++k) d[k] = pred.x[off + k] - x0[off + k];
        if (vector_norm(d, eta_structure.blocks()[l].act.norm_index()) > eta[l] + slack)
          ++violations;
      }
      for (std::size_t k = 0; k < q; ++k)
        if (std::fabs(pred.y[k] - y0[k]) > sy[k] + slack) ++violations;
      if (!blip_kind) {
        for (std::size_t k = 0; k < n; ++k)
          if (std::fabs(pred.x[k] - x0[k]) > sx[k] + slack) ++violations;
        if (t % 10 == 0) {
          Matrix a2 = m.a();
          for (std::size_t k = 0; k < a2.size(); ++k) a2.data()[k] += e.data()[k] * coin(mc);
          ImplicitModel pm(a2, m.b(), m.c(), m.d(), s);
          Vector xp = predict(pm, box.u0, opts).x;
          for (std::size_t k = 0; k < n; ++k)
            if (std::fabs(xp[k] - x0[k]) > pert_cap[k] + slack) ++violations;
        }
      }
    }
  }
  return {violations == 0,
          fmt("%.0f models, %.0f samples, %.0f violations", static_cast<double>(models),
              static_cast<double>(samples_total), static_cast<double>(violations))};
}

// ---- criterion 4: gradient fidelity ----

Outcome criterion_gradients() {
  double worst_rel = 0.0;

  for (std::uint64_t i = 0; i < 20; ++i) {
    const std::size_t n = 3 + i % 6, p = 2 + i % 3, q = 1 + i % 3, cols = 3;
    ActivationKind act = i % 2 ? ActivationKind::sigmoid() : ActivationKind::tanh();
    auto m = oracles::random_model(n, p, q, 0.3 + 0.4 * static_cast<double>(i) / 19.0, act,
                                   4000 + i);
    auto rng = make_rng(4100 + i, "acceptance.grad.data");
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Matrix u(p, cols), y(q, cols);
    for (std::size_t k = 0; k < u.size(); ++k) u.data()[k] = unit(rng);
    const bool ce = i % 4 == 1 && q >= 2;
    if (ce) {
      for (std::size_t j = 0; j < cols; ++j) {
        double sum = 0.0;
        Vector raw(q);
        for (auto& v : raw) {
          v = std::exp(unit(rng));
          sum += v;
        }
        for (std::size_t k = 0; k < q; ++k) y(k, j) = raw[k] / sum;
      }
    } else {
      for (std::size_t k = 0; k < y.size(); ++k) y.data()[k] = unit(rng);
    }
    LossSpec spec{ce ? LossKind::CrossEntropySoftmax : LossKind::SquaredFrobenius};
    SolveOptions opts;
    opts.tol = 1e-12;
    GradientBundle g = implicit_gradients(m, u, y, spec, opts);

    auto loss_at = [&](const ImplicitModel& probe) {
      return loss_value_grad(spec, y, predict_batch(probe, u, opts)).value;
    };
    const double h = 1e-6;
    auto check_entry = [&](double grad, auto rebuild) {
      const double fd = (loss_at(rebuild(h)) - loss_at(rebuild(-h))) / (2.0 * h);
      const double rel = std::fabs(grad - fd) / std::max({1.0, std::fabs(fd), std::fabs(grad)});
      worst_rel = std::max(worst_rel, rel);
    };
    for (std::size_t r = 0; r < n; r += 2)
      for (std::size_t c = 0; c < n; c += 2)
        check_entry(g.da(r, c), [&](double v) {
          Matrix a = m.a();
          a(r, c) += v;
          return ImplicitModel(a, m.b(), m.c(), m.d(), m.structure());
        });
    for (std::size_t r = 0; r < n; r += 2)
      for (std::size_t c = 0; c < p; ++c)
        check_entry(g.db(r, c), [&](double v) {
          Matrix b = m.b();
          b(r, c) += v;
          return ImplicitModel(m.a(), b, m.c(), m.d(), m.structure());
        });
    for (std::size_t r = 0; r < q; ++r)
      for (std::size_t c = 0; c < n; c += 2)
        check_entry(g.dc(r, c), [&](double v) {
          Matrix c2 = m.c();
          c2(r, c) += v;
          return ImplicitModel(m.a(), m.b(), c2, m.d(), m.structure());
        });
    for (std::size_t r = 0; r < q; ++r)
      for (std::size_t c = 0; c < p; ++c)
        check_entry(g.dd(r, c), [&](double v) {
          Matrix d = m.d();
          d(r, c) += v;
          return ImplicitModel(m.a(), m.b(), m.c(), d, m.structure());
        });
  }

  // scalar penalty gradients, probed away from sign kinks
  for (std::uint64_t i = 0; i < 20; ++i) {
    const std::size_t n = 3 + i % 3, p = 2, q = 2;
    auto rng = make_rng(4200 + i, "acceptance.penalty");
    std::uniform_real_distribution<double> unit(0.1, 1.0);
    std::uniform_int_distribution<int> flip(0, 1);
    auto fill = [&](std::size_t r, std::size_t c) {
      Matrix m(r, c);
      for (std::size_t k = 0; k < m.size(); ++k)
        m.data()[k] = (flip(rng) ? 1.0 : -1.0) * unit(rng);
      return m;
    };
    Matrix a = fill(n, n);
    a = (0.6 / norm_inf_op(a)) * a;
    Matrix b = fill(n, p), c = fill(q, n), d = fill(q, p);
    Vector yv = oracles::random_vector(q, 0.2, 1.0, 4300 + i);
    Vector zv = oracles::random_vector(p, 0.2, 1.0, 4400 + i);
    GradientBundle g = robust_penalty_gradients(a, b, c, d, yv, zv);
    const double h = 1e-7;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t cc = 0; cc < n; cc += 2) {
        Matrix lo = a, hi = a;
        lo(r, cc) -= h;
        hi(r, cc) += h;
        const double fd = (robust_penalty_gradients(hi, b, c, d, yv, zv).loss -
                           robust_penalty_gradients(lo, b, c, d, yv, zv).loss) /
                          (2.0 * h);
        worst_rel = std::max(worst_rel, std::fabs(g.da(r, cc) - fd) /
                                            std::max({1.0, std::fabs(fd), std::fabs(g.da(r, cc))}));
      }
  }

  // layerwise backpropagation agreement on an imported network
  double worst_bp = 0.0;
  {
    auto rng = make_rng(4500, "acceptance.backprop");
    std::uniform_real_distribution<double> unit(-0.8, 0.8);
    std::vector<std::size_t> dims{3, 5, 4, 2};
    std::vector<Matrix> w;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      Matrix wl(dims[l + 1], dims[l]);
      for (std::size_t k = 0; k < wl.size(); ++k) wl.data()[k] = unit(rng);
      w.push_back(wl);
    }
    auto m = import_feedforward(w, {ActivationKind::tanh(), ActivationKind::tanh()});
    Matrix u(3, 5), y(2, 5);
    for (std::size_t k = 0; k < u.size(); ++k) u.data()[k] = unit(rng);
    for (std::size_t k = 0; k < y.size(); ++k) y.data()[k] = unit(rng);
    GradientBundle g = implicit_gradients(m, u, y, {LossKind::SquaredFrobenius}, {.tol = 1e-13});

    Matrix x1 = matmul(w[0], u);
    for (std::size_t k = 0; k < x1.size(); ++k) x1.data()[k] = std::tanh(x1.data()[k]);
    Matrix x2 = matmul(w[1], x1);
    for (std::size_t k = 0; k < x2.size(); ++k) x2.data()[k] = std::tanh(x2.data()[k]);
    Matrix l = matmul(w[2], x2) - y;
    Matrix dw2 = matmul_nt(l, x2);
    Matrix g2 = matmul_tn(w[2], l);
    for (std::size_t k = 0; k < g2.size(); ++k) g2.data()[k] *= 1.0 - x2.data()[k] * x2.data()[k];
    Matrix dw1 = matmul_nt(g2, x1);
    Matrix g1 = matmul_tn(w[1], g2);
    for (std::size_t k = 0; k < g1.size(); ++k) g1.data()[k] *= 1.0 - x1.data()[k] * x1.data()[k];
    Matrix dw0 = matmul_nt(g1, u);

    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 4; ++c)
        worst_bp = std::max(worst_bp, std::fabs(g.dc(r, c) - dw2(r, c)));
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 5; ++c)
        worst_bp = std::max(worst_bp, std::fabs(g.da(r, 4 + c) - dw1(r, c)));
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t c = 0; c < 3; ++c)
        worst_bp = std::max(worst_bp, std::fabs(g.db(4 + r, c) - dw0(r, c)));
  }

  const bool pass = worst_rel <= 1e-5 && worst_bp <= 1e-8;
  return {pass, fmt("finite-difference rel err %.2e (limit 1e-5), backprop gap %.2e (limit 1e-8)",
                    worst_rel, worst_bp)};
}

// ---- criterion 5: projection and linear-oracle closed forms ----

Outcome criterion_projection_lmo() {
  auto rng = make_rng(5000, "acceptance.projection");
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  std::uniform_real_distribution<double> radius(0.2, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t width = 1 + trial % 15;
    Vector row(width);
    for (double& v : row) v = unit(rng);
    const double kappa = radius(rng);
    Matrix got = project_linf_ball(Matrix(1, width, row), kappa);
    Vector expect = oracles::l1_ball_projection_sorted(row, kappa);
    double l1 = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      worst = std::max(worst, std::fabs(got(0, j) - expect[j]));
      l1 += std::fabs(got(0, j));
    }
    if (l1 > kappa * (1.0 + 1e-9)) worst = 1.0;
  }
  if (worst > 1e-6) return {false, fmt("projection gap %.2e (limit 1e-6)", worst)};

  double worst_fw = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix g(3, 3);
    for (std::size_t k = 0; k < g.size(); ++k) g.data()[k] = unit(rng);
    const double kappa = radius(rng);
    Matrix v = frank_wolfe_lmo(g, kappa);
    double got = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) got += g.data()[k] * v.data()[k];
    double best = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      double row_best = 0.0;
      for (std::size_t j = 0; j < 3; ++j) row_best = std::max(row_best, kappa * std::fabs(g(i, j)));
      best += row_best;
    }
    worst_fw = std::max(worst_fw, std::fabs(got - best));
  }
  if (worst_fw > 1e-12) return {false, fmt("linear oracle gap %.2e", worst_fw)};
  return {true, fmt("projection gap %.2e, oracle gap %.2e", worst, worst_fw)};
}

// ---- criterion 6: LP relaxation soundness against grid enumeration ----

Outcome criterion_lp_soundness() {
  // the scalar instance where the relaxation is exact
  {
    ImplicitModel toy(Matrix::from_rows({{0.5}}), Matrix::from_rows({{1.0}}),
                      Matrix::from_rows({{1.0}}), Matrix::from_rows({{0.0}}),
                      BlockStructure::single(1, ActivationKind::relu()));
    Vector sx{2.0};
    auto res = lp_attack(toy, BoxUncertainty{{0.0}, {1.0}}, {1.0}, &sx);
    double grid_best = -1e300;
    for (int i = 0; i <= 10000; ++i) {
      const double u = -1.0 + 2.0 * i / 10000.0;
      grid_best = std::max(grid_best, predict(toy, {u}).x[0]);
    }
    if (std::fabs(res.upper_bound - 2.0) > 1e-6 || std::fabs(grid_best - 2.0) > 1e-6)
      return {false, fmt("toy bound %.6f vs true %.6f (want both 2)", res.upper_bound, grid_best)};
  }

  double worst_gap = -1e300;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const std::size_t n = 1 + i % 3, p = 1 + i % 2;
    auto m = oracles::random_model(n, p, 1, 0.4 + 0.4 * static_cast<double>(i) / 19.0,
                                   ActivationKind::relu(), 6000 + i);
    BoxUncertainty box;
    box.u0 = oracles::random_vector(p, -0.5, 0.5, 6100 + i);
    box.sigma_u.assign(p, 0.2 + 0.3 * static_cast<double>(i % 3) / 2.0);
    Vector c = oracles::random_vector(n, -1, 1, 6200 + i);
    auto res = lp_attack(m, box, c);

    double best = -1e300;
    if (p == 1) {
      for (int g = 0; g <= 10000; ++g) {
        Vector u{box.u0[0] + box.sigma_u[0] * (-1.0 + 2.0 * g / 10000.0)};
        best = std::max(best, dot(c, predict(m, u).x));
      }
    } else {
      for (int g1 = 0; g1 <= 100; ++g1)
        for (int g2 = 0; g2 <= 100; ++g2) {
          Vector u{box.u0[0] + box.sigma_u[0] * (-1.0 + 2.0 * g1 / 100.0),
                   box.u0[1] + box.sigma_u[1] * (-1.0 + 2.0 * g2 / 100.0)};
          best = std::max(best, dot(c, predict(m, u).x));
        }
    }
    worst_gap = std::max(worst_gap, best - res.upper_bound);
    if (res.objective_achieved > res.upper_bound + 1e-7)
      return {false, "achieved value escaped the certified bound"};
  }
  return {worst_gap <= 1e-7,
          fmt("max grid excess over the bound %.2e (limit 1e-7)", worst_gap)};
}

// ---- criterion 7: importer equivalence with direct evaluations ----

Outcome criterion_imports() {
  double worst = 0.0;
  auto rng = make_rng(7000, "acceptance.imports");
  std::uniform_real_distribution<double> unit(-0.8, 0.8);

  {  // fully connected
    std::vector<std::size_t> dims{4, 6, 5, 3};
    std::vector<Matrix> w;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      Matrix wl(dims[l + 1], dims[l]);
      for (std::size_t k = 0; k < wl.size(); ++k) wl.data()[k] = unit(rng);
      w.push_back(wl);
    }
    std::vector<ActivationKind> acts{ActivationKind::relu(), ActivationKind::tanh()};
    auto m = import_feedforward(w, acts);
    for (std::uint64_t s = 0; s < 100; ++s) {
      Vector u = oracles::random_vector(4, -2, 2, 7100 + s);
      worst = std::max(worst, norm_inf(predict(m, u).y - oracles::mlp_forward(w, acts, u)));
    }
  }

  {  // convolution, including the worked 4x9 matrix
    const double k1 = 0.3, k2 = -1.1, k3 = 0.7, k4 = 2.0;
    Matrix d = conv2d_matrix(Matrix::from_rows({{k1, k2}, {k3, k4}}), 3, 3, 1);
    Matrix expect = Matrix::from_rows({
        {k1, k2, 0, k3, k4, 0, 0, 0, 0},
        {0, k1, k2, 0, k3, k4, 0, 0, 0},
        {0, 0, 0, k1, k2, 0, k3, k4, 0},
        {0, 0, 0, 0, k1, k2, 0, k3, k4},
    });
    if (!(d == expect)) return {false, "worked convolution matrix mismatch"};

    Matrix kernel(3, 2);
    for (std::size_t k = 0; k < kernel.size(); ++k) kernel.data()[k] = unit(rng);
    Matrix conv = conv2d_matrix(kernel, 6, 7, 2);
    for (std::uint64_t s = 0; s < 100; ++s) {
      Matrix image(6, 7);
      auto irng = make_rng(7200 + s, "acceptance.conv");
      for (std::size_t k = 0; k < image.size(); ++k) image.data()[k] = unit(irng);
      Vector flat(image.data(), image.data() + image.size());
      Matrix direct = oracles::conv2d_direct(kernel, image, 2);
      Vector direct_flat(direct.data(), direct.data() + direct.size());
      worst = std::max(worst, norm_inf(matvec(conv, flat) - direct_flat));
    }
  }

  {  // pooling, including the worked 16x16 selector
    auto imp = import_maxpool(16, pool_regions(4, 4, 2, 2));
    Matrix m8(8, 8);
    auto put_i2 = [&](std::size_t r, std::size_t c) {
      m8(r, c) = 1.0;
      m8(r + 1, c + 1) = 1.0;
    };
    put_i2(0, 0);
    put_i2(2, 4);
    put_i2(4, 2);
    put_i2(6, 6);
    Matrix expect(16, 16);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) {
        expect(i, j) = m8(i, j);
        expect(8 + i, 8 + j) = m8(i, j);
      }
    if (!(imp.b == expect)) return {false, "worked pooling selector mismatch"};
    auto regions = pool_regions(4, 4, 2, 2);
    for (std::uint64_t s = 0; s < 100; ++s) {
      Vector u = oracles::random_vector(16, -2, 2, 7300 + s);
      worst = std::max(worst, norm_inf(predict(imp.model, u).y - oracles::maxpool_direct(regions, u)));
    }
  }

  {  // residual block
    Matrix w1(5, 3), w2(3, 5);
    for (std::size_t k = 0; k < w1.size(); ++k) w1.data()[k] = unit(rng);
    for (std::size_t k = 0; k < w2.size(); ++k) w2.data()[k] = unit(rng);
    auto m = import_residual(w1, w2, ActivationKind::relu(), ActivationKind::tanh());
    for (std::uint64_t s = 0; s < 100; ++s) {
      Vector u = oracles::random_vector(3, -1, 1, 7400 + s);
      worst = std::max(worst, norm_inf(predict(m, u).y -
                                       oracles::residual_direct(w1, w2, ActivationKind::relu(),
                                                                ActivationKind::tanh(), u)));
    }
  }

  {  // unrolled recurrence
    const std::size_t nh = 3, pin = 2, t_steps = 4;
    Matrix wh(nh, nh), wi(nh, pin), wo(2, nh);
    for (std::size_t k = 0; k < wh.size(); ++k) wh.data()[k] = 0.6 * unit(rng);
    for (std::size_t k = 0; k < wi.size(); ++k) wi.data()[k] = unit(rng);
    for (std::size_t k = 0; k < wo.size(); ++k) wo.data()[k] = unit(rng);
    auto m = import_rnn(wh, wi, wo, t_steps, ActivationKind::tanh(), ActivationKind::identity());
    for (std::uint64_t s = 0; s < 100; ++s) {
      std::vector<Vector> inputs;
      for (std::size_t t = 0; t < t_steps; ++t)
        inputs.push_back(oracles::random_vector(pin, -1, 1, 7500 + 10 * s + t));
      Vector u;
      for (std::size_t t = t_steps; t-- > 0;) u.insert(u.end(), inputs[t].begin(), inputs[t].end());
      Vector expect = oracles::rnn_direct(wh, wi, wo, t_steps, ActivationKind::tanh(),
                                          ActivationKind::identity(), inputs);
      worst = std::max(worst, norm_inf(predict(m, u).y - expect));
    }
  }

  return {worst <= 1e-12, fmt("max import deviation %.2e (limit 1e-12)", worst)};
}

// ---- criterion 8: diagonal rescaling ----

Outcome criterion_rescale() {
  double worst_norm = -1e300, worst_pred = 0.0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const std::size_t n = 4 + i % 7;
    const double target = 0.2 + 0.6 * static_cast<double>(i) / 19.0;
    auto m0 = oracles::random_model(n, 3, 2, 1.0, ActivationKind::relu(), 8000 + i);
    Matrix a = m0.a();
    const double lam0 = pf_eigen(abs(a)).lambda;
    a = (target / lam0) * a;
    ImplicitModel m(a, m0.b(), m0.c(), m0.d(), m0.structure());
    const double lam = pf_eigen(abs(a), 1e-12, 100000).lambda;

    ImplicitModel scaled = rescale(m);
    worst_norm = std::max(worst_norm, norm_inf_op(scaled.a()) - lam);
    for (std::uint64_t s = 0; s < 5; ++s) {
      Vector u = oracles::random_vector(3, -1, 1, 8100 + 10 * i + s);
      worst_pred = std::max(worst_pred, norm_inf(predict(scaled, u).y - predict(m, u).y));
    }
  }
  const bool pass = worst_norm <= 1e-6 && worst_pred <= 1e-8;
  return {pass, fmt("norm excess %.2e (limit 1e-6), prediction gap %.2e (limit 1e-8)",
                    worst_norm, worst_pred)};
}

// ---- criterion 9: certificates imply convergent, unique equilibria ----

Outcome criterion_certification_chain() {
  std::size_t certified = 0;
  double worst_spread = 0.0;
  const double tol = 1e-10;

  for (std::uint64_t i = 0; i < 50; ++i) {
    Matrix a;
    BlockStructure s;
    Vector b;
    bool ok = false;

    if (i % 5 == 4) {
      // triangular loop with a large negative diagonal: the entrywise
      // spectral radius is 5 yet the structural certificate accepts it
      a = Matrix::from_rows({{-5.0, 1.0}, {0.0, 0.5}});
      s = BlockStructure::single(2, ActivationKind::relu());
      b = {-3.0, 1.0};
      auto rep = check_structural(a, s);
      ok = rep.certified && check_cone_pf(a).lambda > 1.0;
    } else if (i % 5 == 3) {
      // upper triangular, moderate diagonal, large off-diagonal entries
      auto rng = make_rng(9000 + i, "acceptance.chain.tri");
      std::uniform_real_distribution<double> unit(-1.0, 1.0);
      const std::size_t n = 3 + i % 4;
      a = Matrix(n, n);
      for (std::size_t r = 0; r < n; ++r) {
        a(r, r) = 0.4 * unit(rng);
        for (std::size_t c = r + 1; c < n; ++c) a(r, c) = 2.0 * unit(rng);
      }
      s = BlockStructure::single(n, ActivationKind::relu());
      b = oracles::random_vector(n, -1, 1, 9100 + i);
      ok = check_structural(a, s).certified;
    } else if (i % 5 == 2) {
      auto rng = make_rng(9200 + i, "acceptance.chain.blip");
      std::uniform_real_distribution<double> unit(-1.0, 1.0);
      const std::size_t n = 5 + i % 4;
      a = Matrix(n, n);
      for (std::size_t k = 0; k < a.size(); ++k) a.data()[k] = unit(rng);
      s = BlockStructure(std::vector<Block>{{2, ActivationKind::softmax()},
                                            {n - 2, ActivationKind::relu()}});
      ImplicitModel probe(a, Matrix(n, 1), Matrix(1, n), Matrix(1, 1), s);
      const double lam = check_blip_pf(probe).lambda;
      a = (0.7 / lam) * a;
      ImplicitModel scaled(a, Matrix(n, 1), Matrix(1, n), Matrix(1, 1), s);
      b = oracles::random_vector(n, -1, 1, 9300 + i);
      ok = check_blip_pf(scaled).certified;
    } else {
      const std::size_t n = 3 + i % 8;
      auto m = oracles::random_model(n, 1, 1, 0.85, ActivationKind::relu(), 9400 + i);
      a = m.a();
      s = m.structure();
      b = oracles::random_vector(n, -2, 2, 9500 + i);
      ok = check_cone_pf(a).certified;
    }
    if (!ok) return {false, fmt("instance %.0f failed its certificate", static_cast<double>(i))};
    ++certified;

    Vector reference;
    for (std::uint64_t start = 0; start < 10; ++start) {
      Vector x0 = oracles::random_vector(s.dim(), -4, 4, 9600 + 100 * i + start);
      SolveOptions opts;
      opts.tol = tol;
      opts.max_iter = 200000;
      opts.warm_start = &x0;
      EquilibriumResult r = picard_solve(a, b, s, opts);
      if (start == 0) {
        reference = r.x;
      } else {
        worst_spread = std::max(worst_spread, norm_inf(r.x - reference));
      }
    }
  }
  const bool pass = certified == 50 && worst_spread <= 10 * tol;
  return {pass, fmt("%.0f certified instances, multistart spread %.2e (limit 1e-9)",
                    static_cast<double>(certified), worst_spread)};
}

// ---- criterion 10: sensitivity-ranked attack on a trained toy classifier ----

Outcome criterion_sensitivity_attack() {
  Dataset all = generate_synthetic(DatasetKind::Classification, 1000, 101);
  Matrix utr = take_cols(all.u, 0, 500), ytr = take_cols(all.y, 0, 500);
  Matrix ute = take_cols(all.u, 500, 1000), yte = take_cols(all.y, 500, 1000);

  TrainConfig tc;
  tc.kappa = 0.9;
  tc.learning_rate = 0.2;
  tc.batch_size = 25;
  tc.epochs = 150;
  tc.seed = 11;
  tc.tol = 1e-8;
  ImplicitModel m0 = init_model(10, 5, 2, ActivationKind::relu(), tc.kappa, 21);
  TrainResult r = sgd_train(m0, utr, ytr, {LossKind::CrossEntropySoftmax}, tc);

  Matrix clean = predict_batch(r.model, ute);
  const double acc = accuracy(clean, yte);
  if (acc < 0.95) return {false, fmt("clean accuracy %.3f below the 0.95 gate", acc)};

  Vector mag(5, 2.0), lo(5, -1.0), hi(5, 1.0);
  std::size_t flips = 0;
  for (std::size_t j = 0; j < 500; ++j) {
    Vector u0(5);
    for (std::size_t i = 0; i < 5; ++i) u0[i] = ute(i, j);
    Vector adv = sensitivity_attack(r.model, u0, 0.2, mag, std::nullopt, &lo, &hi);
    Vector ya = predict(r.model, adv).y;
    const std::size_t before = argmax_col(clean, j);
    const std::size_t after = ya[0] >= ya[1] ? 0 : 1;
    flips += before != after;
  }
  const double rate = static_cast<double>(flips) / 500.0;
  return {rate >= 0.30, fmt("clean accuracy %.3f, flip rate %.3f (limit 0.30)", acc, rate)};
}

using CriterionFn = std::function<Outcome()>;

struct Criterion {
  int number;
  const char* name;
  CriterionFn run;
};

const Criterion kCriteria[] = {
    {1, "regression reproduction", criterion_regression},
    {2, "digit classification at desk scale", criterion_mnist},
    {3, "bound containment", criterion_containment},
    {4, "gradient fidelity", criterion_gradients},
    {5, "projection and linear oracles", criterion_projection_lmo},
    {6, "lp relaxation soundness", criterion_lp_soundness},
    {7, "import equivalence", criterion_imports},
    {8, "scaling invariance", criterion_rescale},
    {9, "certification chain", criterion_certification_chain},
    {10, "sensitivity attack efficacy", criterion_sensitivity_attack},
};

}  // namespace

int main(int argc, char** argv) {
  const std::string which = argc > 1 ? argv[1] : "all";
  int failures = 0;
  for (const Criterion& c : kCriteria) {
    if (which != "all" && which != std::to_string(c.number)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d (%s): %s [%.1fs]\n", out.pass ? "PASS" : "FAIL", c.number,
                c.name, out.detail.c_str(), secs);
    failures += out.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
