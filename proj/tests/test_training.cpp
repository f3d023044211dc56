#include <cmath>
#include <random>

#include "doctest.h"
#include "idl/compose.hpp"
#include "idl/rng.hpp"
#include "idl/training.hpp"
#include "oracles.hpp"

using namespace idl;

TEST_CASE("squared loss value and gradient") {
  Matrix y = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  auto at_target = loss_value_grad({LossKind::SquaredFrobenius}, y, y);
  CHECK(at_target.value == 0.0);
  CHECK(norm_fro(at_target.grad) == 0.0);

  Matrix yhat = Matrix::from_rows({{2.0, 2.0}, {3.0, 2.0}});
  auto r = loss_value_grad({LossKind::SquaredFrobenius}, y, yhat);
  CHECK(r.value == doctest::Approx(0.5 * (1.0 + 4.0)));
  CHECK(r.grad(0, 0) == doctest::Approx(1.0));
  CHECK(r.grad(1, 1) == doctest::Approx(-2.0));
}

TEST_CASE("cross entropy at zero scores is log q per column") {
  Matrix y(4, 3);
  y(0, 0) = 1.0;
  y(2, 1) = 1.0;
  y(3, 2) = 1.0;
  Matrix yhat(4, 3);
  auto r = loss_value_grad({LossKind::CrossEntropySoftmax}, y, yhat);
  CHECK(r.value == doctest::Approx(3.0 * std::log(4.0)));
  CHECK_THROWS_WITH_AS(loss_value_grad({LossKind::CrossEntropySoftmax}, Matrix(2, 1), Matrix(2, 1)),
                       doctest::Contains("NotSimplex"), Error);
}

TEST_CASE("loss gradients match finite differences") {
  auto rng = make_rng(601, "test.loss.fd");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (LossKind kind : {LossKind::SquaredFrobenius, LossKind::CrossEntropySoftmax}) {
    Matrix y(3, 4), yhat(3, 4);
    for (std::size_t j = 0; j < 4; ++j) {
      // simplex targets work for both kinds
      double sum = 0.0;
      Vector raw(3);
      for (auto& v : raw) {
        v = std::exp(unit(rng));
        sum += v;
      }
      for (std::size_t i = 0; i < 3; ++i) y(i, j) = raw[i] / sum;
      for (std::size_t i = 0; i < 3; ++i) yhat(i, j) = unit(rng);
    }
    LossSpec spec{kind};
    auto r = loss_value_grad(spec, y, yhat);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        double fd = oracles::central_difference(
            [&](double v) {
              Matrix probe = yhat;
              probe(i, j) = v;
              return loss_value_grad(spec, y, probe).value;
            },
            yhat(i, j), 1e-6);
        CHECK(r.grad(i, j) == doctest::Approx(fd).epsilon(1e-6));
      }
  }
}

TEST_CASE("zero readout kills the state gradients") {
  // with C = 0 the loss never sees x, so the adjoint V vanishes and the
  // state-side gradients with it; the readout gradient itself stays live
  auto m0 = oracles::random_model(4, 2, 2, 0.6, ActivationKind::tanh(), 602);
  ImplicitModel m(m0.a(), m0.b(), Matrix(2, 4), m0.d(), m0.structure());
  Matrix u(2, 3), y(2, 3);
  auto rng = make_rng(603, "test.zero.readout");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t i = 0; i < u.size(); ++i) u.data()[i] = unit(rng);
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = unit(rng);
  auto g = implicit_gradients(m, u, y, {LossKind::SquaredFrobenius});
  CHECK(norm_fro(g.da) == 0.0);
  CHECK(norm_fro(g.db) == 0.0);
  // the input gradient collapses to the feedthrough path
  Matrix l = predict_batch(m, u) - y;
  CHECK(norm_fro(g.du - matmul_tn(m.d(), l)) <= 1e-12);
}

TEST_CASE("no recurrence reduces to the one-layer chain rule") {
  auto m = oracles::random_model(4, 3, 2, 0.0, ActivationKind::tanh(), 604);
  Matrix u(3, 2), y(2, 2);
  auto rng = make_rng(605, "test.onelayer");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t i = 0; i < u.size(); ++i) u.data()[i] = unit(rng);
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = unit(rng);

  auto g = implicit_gradients(m, u, y, {LossKind::SquaredFrobenius});

  // by hand: x = phi(Bu), yhat = Cx + Du, l = yhat - y, v = phi'(Bu) o (C^T l)
  Matrix bu = matmul(m.b(), u);
  Matrix x = bu;
  Vector col(4);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t i = 0; i < 4; ++i) col[i] = x(i, j);
    apply_activation_inplace(m.structure(), col);
    for (std::size_t i = 0; i < 4; ++i) x(i, j) = col[i];
  }
  Matrix yhat = matmul(m.c(), x) + matmul(m.d(), u);
  Matrix l = yhat - y;
  Matrix v = matmul_tn(m.c(), l);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t i = 0; i < 4; ++i) {
      double t = std::tanh(bu(i, j));
      v(i, j) *= 1.0 - t * t;
    }
  CHECK(norm_fro(g.db - matmul_nt(v, u)) <= 1e-10);
  CHECK(norm_fro(g.dc - matmul_nt(l, x)) <= 1e-10);
  CHECK(norm_fro(g.dd - matmul_nt(l, u)) <= 1e-10);
  CHECK(norm_fro(g.da - matmul_nt(v, x)) <= 1e-10);
}

TEST_CASE("implicit gradients match finite differences on a tanh model") {
  auto m = oracles::random_model(6, 3, 2, 0.7, ActivationKind::tanh(), 606);
  Matrix u(3, 4), y(2, 4);
  auto rng = make_rng(607, "test.fd.data");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t i = 0; i < u.size(); ++i) u.data()[i] = unit(rng);
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = unit(rng);
  LossSpec spec{LossKind::SquaredFrobenius};
  SolveOptions opts;
  opts.tol = 1e-12;

  auto g = implicit_gradients(m, u, y, spec, opts);

  auto loss_at = [&](const ImplicitModel& probe) {
    return loss_value_grad(spec, y, predict_batch(probe, u, opts)).value;
  };
  const double h = 1e-6;
  auto check_matrix = [&](const Matrix& grad, auto rebuild) {
    for (std::size_t i = 0; i < grad.rows(); i += 2)
      for (std::size_t j = 0; j < grad.cols(); j += 2) {
        double fd = oracles::central_difference(
            [&](double v) { return loss_at(rebuild(i, j, v)); },
            0.0, h);
        const double scale = std::max({1.0, std::fabs(fd), std::fabs(grad(i, j))});
        CHECK(std::fabs(grad(i, j) - fd) / scale <= 1e-5);
      }
  };
  check_matrix(g.da, [&](std::size_t i, std::size_t j, double v) {
    Matrix a = m.a();
    a(i, j) += v;
    return ImplicitModel(a, m.b(), m.c(), m.d(), m.structure());
  });
  check_matrix(g.db, [&](std::size_t i, std::size_t j, double v) {
    Matrix b = m.b();
    b(i, j) += v;
    return ImplicitModel(m.a(), b, m.c(), m.d(), m.structure());
  });
  check_matrix(g.dc, [&](std::size_t i, std::size_t j, double v) {
    Matrix c = m.c();
    c(i, j) += v;
    return ImplicitModel(m.a(), m.b(), c, m.d(), m.structure());
  });
  check_matrix(g.dd, [&](std::size_t i, std::size_t j, double v) {
    Matrix d = m.d();
    d(i, j) += v;
    return ImplicitModel(m.a(), m.b(), m.c(), d, m.structure());
  });

  // input gradients by perturbing one input entry
  for (std::size_t i = 0; i < 3; ++i) {
    double fd = oracles::central_difference(
        [&](double v) {
          Matrix u2 = u;
          u2(i, 1) += v;
          return loss_value_grad(spec, y, predict_batch(m, u2, opts)).value;
        },
        0.0, h);
    const double scale = std::max({1.0, std::fabs(fd), std::fabs(g.du(i, 1))});
    CHECK(std::fabs(g.du(i, 1) - fd) / scale <= 1e-5);
  }
}

TEST_CASE("implicit gradients agree with layerwise backpropagation") {
  auto rng = make_rng(608, "test.backprop");
  std::uniform_real_distribution<double> unit(-0.8, 0.8);
  std::vector<std::size_t> dims{3, 5, 4, 2};
  std::vector<Matrix> w;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Matrix wl(dims[l + 1], dims[l]);
    for (std::size_t i = 0; i < wl.size(); ++i) wl.data()[i] = unit(rng);
    w.push_back(wl);
  }
  std::vector<ActivationKind> acts(2, ActivationKind::tanh());
  auto m = import_feedforward(w, acts);

  Matrix u(3, 5), y(2, 5);
  for (std::size_t i = 0; i < u.size(); ++i) u.data()[i] = unit(rng);
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = unit(rng);
  SolveOptions opts;
  opts.tol = 1e-13;
  auto g = implicit_gradients(m, u, y, {LossKind::SquaredFrobenius}, opts);

  // direct backprop through the two hidden layers
  Matrix z1 = matmul(w[0], u);
  Matrix x1 = z1;
  for (std::size_t i = 0; i < x1.size(); ++i) x1.data()[i] = std::tanh(x1.data()[i]);
  Matrix z2 = matmul(w[1], x1);
  Matrix x2 = z2;
  for (std::size_t i = 0; i < x2.size(); ++i) x2.data()[i] = std::tanh(x2.data()[i]);
  Matrix yhat = matmul(w[2], x2);
  Matrix l = yhat - y;

  Matrix dw2 = matmul_nt(l, x2);
  Matrix g2 = matmul_tn(w[2], l);
  for (std::size_t i = 0; i < g2.size(); ++i)
    g2.data()[i] *= 1.0 - x2.data()[i] * x2.data()[i];
  Matrix dw1 = matmul_nt(g2, x1);
  Matrix g1 = matmul_tn(w[1], g2);
  for (std::size_t i = 0; i < g1.size(); ++i)
    g1.data()[i] *= 1.0 - x1.data()[i] * x1.data()[i];
  Matrix dw0 = matmul_nt(g1, u);

  // dW2 sits in C over the first block, dW1 in A block (0, 1), dW0 in B's last block
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(g.dc(i, j) == doctest::Approx(dw2(i, j)).epsilon(1e-8));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(g.da(i, 4 + j) == doctest::Approx(dw1(i, j)).epsilon(1e-8));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(g.db(4 + i, j) == doctest::Approx(dw0(i, j)).epsilon(1e-8));
}

TEST_CASE("projection onto the row-sum ball") {
  Matrix inside = Matrix::from_rows({{0.2, -0.3}, {0.1, 0.0}});
  CHECK(project_linf_ball(inside, 1.0) == inside);

  Matrix one = project_linf_ball(Matrix::from_rows({{2.0, 0.0}}), 1.0);
  CHECK(one(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(one(0, 1) == doctest::Approx(0.0));

  Matrix two = project_linf_ball(Matrix::from_rows({{1.0, 1.0}}), 1.0);
  CHECK(two(0, 0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(two(0, 1) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("projection matches the sorting rule on random rows") {
  auto rng = make_rng(609, "test.proj");
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  std::uniform_real_distribution<double> radius(0.2, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t width = 1 + trial % 12;
    Vector row(width);
    for (double& v : row) v = unit(rng);
    const double kappa = radius(rng);
    Matrix a(1, width, row);
    Matrix got = project_linf_ball(a, kappa);
    Vector expect = oracles::l1_ball_projection_sorted(row, kappa);
    for (std::size_t j = 0; j < width; ++j)
      CHECK(std::fabs(got(0, j) - expect[j]) <= 1e-6);
    double l1 = 0.0;
    for (std::size_t j = 0; j < width; ++j) l1 += std::fabs(got(0, j));
    CHECK(l1 <= kappa * (1.0 + 1e-9));
  }
}

TEST_CASE("frank-wolfe oracle closed form") {
  Matrix g = Matrix::from_rows({{1.0, -3.0}, {0.0, 2.0}});
  Matrix v = frank_wolfe_lmo(g, 1.0);
  CHECK(v == Matrix::from_rows({{0.0, -1.0}, {0.0, 1.0}}));
  double obj = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) obj += g.data()[i] * v.data()[i];
  CHECK(obj == doctest::Approx(5.0));

  CHECK(frank_wolfe_lmo(Matrix(2, 2), 1.0) == Matrix(2, 2));
}

TEST_CASE("frank-wolfe matches vertex enumeration") {
  auto rng = make_rng(610, "test.fw");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix g(3, 3);
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = unit(rng);
    const double kappa = 0.7;
    Matrix v = frank_wolfe_lmo(g, kappa);
    double got = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) got += g.data()[i] * v.data()[i];

    // per-row extreme points are +-kappa at a single coordinate
    double best = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      double row_best = 0.0;
      for (std::size_t j = 0; j < 3; ++j)
        row_best = std::max(row_best, kappa * std::fabs(g(i, j)));
      best += row_best;
    }
    CHECK(got == doctest::Approx(best).epsilon(1e-12));
    // vertex property: at most one nonzero of magnitude kappa per row
    for (std::size_t i = 0; i < 3; ++i) {
      int nonzeros = 0;
      for (std::size_t j = 0; j < 3; ++j) {
        if (v(i, j) != 0.0) {
          ++nonzeros;
          CHECK(std::fabs(v(i, j)) == doctest::Approx(kappa));
        }
      }
      CHECK(nonzeros <= 1);
    }
  }
}

TEST_CASE("relu coupling divergence") {
  Matrix z = Matrix::from_rows({{1.0, -2.0}, {0.5, 0.0}});
  Matrix x = z;
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = std::max(x.data()[i], 0.0);
  CHECK(fenchel_divergence_relu(x, z) == doctest::Approx(0.0));

  CHECK(fenchel_divergence_relu(Matrix::from_rows({{1.0}}), Matrix::from_rows({{-1.0}})) ==
        doctest::Approx(1.5));
  CHECK_THROWS_WITH_AS(fenchel_divergence_relu(Matrix::from_rows({{-1.0}}), Matrix(1, 1)),
                       doctest::Contains("NegativeState"), Error);

  auto rng = make_rng(611, "test.fenchel");
  std::uniform_real_distribution<double> pos(0.0, 2.0), any(-2.0, 2.0);
  for (int trial = 0; trial < 10000; ++trial) {
    Matrix x1(1, 3), z1(1, 3);
    for (std::size_t i = 0; i < 3; ++i) {
      x1.data()[i] = pos(rng);
      z1.data()[i] = any(rng);
    }
    double v = fenchel_divergence_relu(x1, z1);
    CHECK(v >= 0.0);
    bool matches = true;
    for (std::size_t i = 0; i < 3; ++i)
      matches &= std::fabs(x1.data()[i] - std::max(z1.data()[i], 0.0)) <= 1e-12;
    if (matches) CHECK(v <= 1e-12);
    if (v == 0.0) {
      for (std::size_t i = 0; i < 3; ++i)
        CHECK(std::fabs(x1.data()[i] - std::max(z1.data()[i], 0.0)) <= 1e-12);
    }
  }
}

TEST_CASE("penalty gradients vanish with zero probes") {
  auto m = oracles::random_model(4, 3, 2, 0.6, ActivationKind::relu(), 612);
  auto g = robust_penalty_gradients(m.a(), m.b(), m.c(), m.d(), Vector(2, 0.0), Vector(3, 0.0));
  CHECK(norm_fro(g.da) == 0.0);
  CHECK(norm_fro(g.db) == 0.0);
  CHECK(norm_fro(g.dc) == 0.0);
  CHECK(norm_fro(g.dd) == 0.0);
  CHECK(g.loss == 0.0);
}

TEST_CASE("penalty gradients match finite differences away from zeros") {
  auto rng = make_rng(613, "test.penalty.fd");
  std::uniform_real_distribution<double> unit(0.1, 1.0);
  std::uniform_int_distribution<int> flip(0, 1);
  const std::size_t n = 5, p = 3, q = 2;
  auto fill = [&](std::size_t r, std::size_t c2) {
    Matrix m(r, c2);
    for (std::size_t i = 0; i < m.size(); ++i)
      m.data()[i] = (flip(rng) ? 1.0 : -1.0) * unit(rng);
    return m;
  };
  Matrix a = fill(n, n);
  a = (0.6 / norm_inf_op(a)) * a;
  Matrix b = fill(n, p), c = fill(q, n), d = fill(q, p);
  Vector y = oracles::random_vector(q, 0.2, 1.0, 614);
  Vector z = oracles::random_vector(p, 0.2, 1.0, 615);

  auto g = robust_penalty_gradients(a, b, c, d, y, z);

  auto value = [&](const Matrix& a2, const Matrix& b2, const Matrix& c2, const Matrix& d2) {
    return robust_penalty_gradients(a2, b2, c2, d2, y, z).loss;
  };
  const double h = 1e-7;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; j += 2) {
      Matrix lo = a, hi = a;
      lo(i, j) -= h;
      hi(i, j) += h;
      double fd = (value(hi, b, c, d) - value(lo, b, c, d)) / (2.0 * h);
      const double scale = std::max({1.0, std::fabs(fd)});
      CHECK(std::fabs(g.da(i, j) - fd) / scale <= 1e-5);
    }
  for (std::size_t i = 0; i < n; i += 2)
    for (std::size_t j = 0; j < p; ++j) {
      Matrix lo = b, hi = b;
      lo(i, j) -= h;
      hi(i, j) += h;
      double fd = (value(a, hi, c, d) - value(a, lo, c, d)) / (2.0 * h);
      CHECK(std::fabs(g.db(i, j) - fd) / std::max(1.0, std::fabs(fd)) <= 1e-5);
    }
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < n; j += 2) {
      Matrix lo = c, hi = c;
      lo(i, j) -= h;
      hi(i, j) += h;
      double fd = (value(a, b, hi, d) - value(a, b, lo, d)) / (2.0 * h);
      CHECK(std::fabs(g.dc(i, j) - fd) / std::max(1.0, std::fabs(fd)) <= 1e-5);
    }

  // zero entries carry a zero subgradient
  Matrix a0 = a;
  a0(1, 2) = 0.0;
  auto g0 = robust_penalty_gradients(a0, b, c, d, y, z);
  CHECK(g0.da(1, 2) == 0.0);
}

TEST_CASE("zero learning rate leaves the model untouched") {
  auto m0 = init_model(4, 2, 2, ActivationKind::relu(), 0.5, 616);
  Matrix u(2, 8), y(2, 8);
  auto rng = make_rng(617, "test.sgd.zero");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t i = 0; i < u.size(); ++i) u.data()[i] = unit(rng);
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = unit(rng);

  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  auto r = sgd_train(m0, u, y, {LossKind::SquaredFrobenius}, cfg);
  CHECK(r.model.a() == m0.a());
  CHECK(r.model.b() == m0.b());
  REQUIRE(r.history.size() == 3);
  CHECK(r.history[0].loss == doctest::Approx(r.history[2].loss));
}

TEST_CASE("training drives down a separable toy loss") {
  // two gaussian-ish blobs labeled by the sign of the first coordinate
  auto rng = make_rng(618, "test.sgd.toy");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const std::size_t samples = 60;
  Matrix u(2, samples), y(2, samples);
  for (std::size_t j = 0; j < samples; ++j) {
    const double x0 = unit(rng), x1 = unit(rng);
    u(0, j) = x0 + (x0 > 0 ? 0.5 : -0.5);
    u(1, j) = x1;
    y(x0 > 0 ? 0 : 1, j) = 1.0;
  }
  auto m0 = init_model(6, 2, 2, ActivationKind::relu(), 0.5, 619);
  TrainConfig cfg;
  cfg.learning_rate = 0.2;
  cfg.batch_size = 10;
  cfg.epochs = 10;
  cfg.kappa = 0.5;
  cfg.seed = 620;
  auto r = sgd_train(m0, u, y, {LossKind::CrossEntropySoftmax}, cfg);
  REQUIRE(r.history.size() == 10);
  for (std::size_t e = 1; e < r.history.size(); ++e)
    CHECK(r.history[e].loss < r.history[e - 1].loss);
  for (const EpochStats& s : r.history) CHECK(s.a_norm_inf <= cfg.kappa + 1e-8);
}

TEST_CASE("two-stage training refits the readout") {
  auto data = oracles::random_model(3, 2, 1, 0.5, ActivationKind::relu(), 621);
  Matrix u(2, 40);
  auto rng = make_rng(622, "test.twostage");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t i = 0; i < u.size(); ++i) u.data()[i] = unit(rng);
  Matrix y = predict_batch(data, u);

  auto m0 = init_model(8, 2, 1, ActivationKind::relu(), 0.5, 623);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 10;
  cfg.epochs = 5;
  cfg.two_stage = true;
  cfg.seed = 624;
  auto r = sgd_train(m0, u, y, {LossKind::SquaredFrobenius}, cfg);
  REQUIRE(r.history.size() == 6);  // epochs plus the readout refit entry
  CHECK(r.history.back().loss <= r.history[4].loss + 1e-12);
  CHECK(norm_inf_op(r.model.a()) <= cfg.kappa + 1e-8);
}
