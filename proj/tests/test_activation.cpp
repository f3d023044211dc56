#include <cmath>
#include <random>

#include "doctest.h"
#include "idl/activation.hpp"
#include "idl/rng.hpp"

using namespace idl;

TEST_CASE("componentwise application") {
  BlockStructure s = BlockStructure::single(2, ActivationKind::relu());
  CHECK(apply_activation(s, {-1.0, 2.0}) == Vector{0.0, 2.0});
}

TEST_CASE("softmax block") {
  BlockStructure s = BlockStructure::single(2, ActivationKind::softmax());
  Vector y = apply_activation(s, {0.0, 0.0});
  CHECK(y[0] == doctest::Approx(0.5));
  CHECK(y[1] == doctest::Approx(0.5));
}

TEST_CASE("maxpool groups emit maxima then padding") {
  BlockStructure s = BlockStructure::single(4, ActivationKind::maxpool({2, 2}));
  CHECK(apply_activation(s, {1.0, 3.0, 2.0, 0.0}) == Vector{3.0, 2.0, 0.0, 0.0});
}

TEST_CASE("jacobian diagonals") {
  BlockStructure relu2 = BlockStructure::single(2, ActivationKind::relu());
  Matrix j = activation_jacobian(relu2, {-1.0, 2.0});
  CHECK(j(0, 0) == 0.0);
  CHECK(j(1, 1) == 1.0);
  CHECK(j(0, 1) == 0.0);

  BlockStructure sig = BlockStructure::single(1, ActivationKind::sigmoid());
  CHECK(activation_jacobian(sig, {0.0})(0, 0) == doctest::Approx(0.25));

  BlockStructure th = BlockStructure::single(1, ActivationKind::tanh());
  CHECK(activation_jacobian(th, {0.0})(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("relu subgradient at the kink is zero") {
  BlockStructure s = BlockStructure::single(1, ActivationKind::relu());
  CHECK(activation_jacobian(s, {0.0})(0, 0) == 0.0);
}

TEST_CASE("maxpool jacobian refuses ties") {
  BlockStructure s = BlockStructure::single(4, ActivationKind::maxpool({2, 2}));
  CHECK_THROWS_WITH_AS(activation_jacobian(s, {1.0, 1.0, 2.0, 0.0}),
                       doctest::Contains("Unsupported"), Error);
  Matrix j = activation_jacobian(s, {1.0, 3.0, 2.0, 0.0});
  CHECK(j(0, 1) == 1.0);
  CHECK(j(1, 2) == 1.0);
  // padded rows carry no derivative
  CHECK(j(2, 0) == 0.0);
  CHECK(j(3, 3) == 0.0);
}

TEST_CASE("softmax jacobian matches diag(s) - s s^T") {
  BlockStructure s = BlockStructure::single(3, ActivationKind::softmax());
  Vector z{0.3, -0.7, 1.1};
  Vector sm = apply_activation(s, z);
  Matrix j = activation_jacobian(s, z);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(j(i, k) == doctest::Approx((i == k ? sm[i] : 0.0) - sm[i] * sm[k]));
}

TEST_CASE("cone property on random pairs") {
  auto rng = make_rng(21, "test.cone");
  std::uniform_real_distribution<double> unit(-3.0, 3.0);
  for (ActivationKind kind : {ActivationKind::relu(), ActivationKind::leaky_relu(0.2),
                              ActivationKind::tanh(), ActivationKind::sigmoid()}) {
    BlockStructure s = BlockStructure::single(6, kind);
    for (int trial = 0; trial < 200; ++trial) {
      Vector u(6), v(6);
      for (auto& x : u) x = unit(rng);
      for (auto& x : v) x = unit(rng);
      Vector fu = apply_activation(s, u), fv = apply_activation(s, v);
      for (std::size_t i = 0; i < 6; ++i)
        CHECK(std::fabs(fu[i] - fv[i]) <= std::fabs(u[i] - v[i]) + 1e-15);
    }
  }
}

TEST_CASE("softmax is l1 nonexpansive and lands on the simplex") {
  auto rng = make_rng(22, "test.softmax");
  std::uniform_real_distribution<double> unit(-4.0, 4.0);
  BlockStructure s = BlockStructure::single(5, ActivationKind::softmax());
  for (int trial = 0; trial < 200; ++trial) {
    Vector u(5), v(5);
    for (auto& x : u) x = unit(rng);
    for (auto& x : v) x = unit(rng);
    Vector fu = apply_activation(s, u), fv = apply_activation(s, v);
    double sum = 0.0;
    for (double x : fu) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(norm_1(fu - fv) <= norm_1(u - v) + 1e-12);
  }
}

TEST_CASE("maxpool is sup-norm nonexpansive") {
  auto rng = make_rng(23, "test.maxpool");
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  BlockStructure s = BlockStructure::single(6, ActivationKind::maxpool({3, 2, 1}));
  for (int trial = 0; trial < 200; ++trial) {
    Vector u(6), v(6);
    for (auto& x : u) x = unit(rng);
    for (auto& x : v) x = unit(rng);
    Vector fu = apply_activation(s, u), fv = apply_activation(s, v);
    CHECK(norm_inf(fu - fv) <= norm_inf(u - v) + 1e-15);
  }
}

TEST_CASE("apply_jacobian_inplace agrees with the dense jacobian") {
  auto rng = make_rng(24, "test.jac");
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  BlockStructure s(std::vector<Block>{{3, ActivationKind::tanh()}, {3, ActivationKind::softmax()}});
  for (int trial = 0; trial < 50; ++trial) {
    Vector z(6), w(6);
    for (auto& x : z) x = unit(rng);
    for (auto& x : w) x = unit(rng);
    Matrix j = activation_jacobian(s, z);
    Vector dense = matvec(j, w);
    Vector fast = w;
    apply_jacobian_inplace(s, z, fast);
    for (std::size_t i = 0; i < 6; ++i) CHECK(fast[i] == doctest::Approx(dense[i]).epsilon(1e-12));
  }
}

TEST_CASE("scalarized splits componentwise blocks only") {
  BlockStructure s(std::vector<Block>{{2, ActivationKind::relu()}, {3, ActivationKind::softmax()}});
  BlockStructure sc = s.scalarized();
  CHECK(sc.blocks().size() == 3);
  CHECK(sc.blocks()[0].size == 1);
  CHECK(sc.blocks()[2].size == 3);
  CHECK(sc.dim() == s.dim());
}

TEST_CASE("maxpool group sizes must cover the block") {
  CHECK_THROWS_AS(BlockStructure(std::vector<Block>{{5, ActivationKind::maxpool({2, 2})}}), Error);
}
