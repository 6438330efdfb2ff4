#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "smpc/model.hpp"

using namespace smpc;

namespace {

MatrixXd paper_shape() {
  MatrixXd W(2, 2);
  W << 10.9264, -3.7386, -3.7386, 3.8143;
  return W;
}

Polytope box(double half_width) {
  MatrixXd H(4, 2);
  H << 1, 0, -1, 0, 0, 1, 0, -1;
  return Polytope(H, VectorXd::Constant(4, half_width));
}

MatrixXd random_spd(int n, std::mt19937& gen) {
  std::normal_distribution<double> g;
  MatrixXd S(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) S(i, j) = g(gen);
  return S * S.transpose() + double(n) * MatrixXd::Identity(n, n);
}

}  // namespace

TEST_CASE("linear system validates its blocks") {
  MatrixXd A(2, 2), B(2, 1), Gw(2, 2);
  A << 1, 1, 0, 1;
  B << 0.5, 1;
  Gw << 0.1, 0.05, 0.05, 0.1;

  LinearSystem sys(A, B, Gw);
  CHECK(sys.n() == 2);
  CHECK(sys.m() == 1);

  SUBCASE("rectangular A is rejected") {
    CHECK_THROWS_AS(LinearSystem(MatrixXd::Zero(2, 3), B, Gw), std::invalid_argument);
  }
  SUBCASE("B row count must match") {
    CHECK_THROWS_AS(LinearSystem(A, MatrixXd::Zero(3, 1), Gw), std::invalid_argument);
  }
  SUBCASE("asymmetric covariance is rejected") {
    MatrixXd bad = Gw;
    bad(0, 1) = 0.2;
    CHECK_THROWS_AS(LinearSystem(A, B, bad), std::invalid_argument);
  }
  SUBCASE("indefinite covariance is rejected") {
    MatrixXd bad(2, 2);
    bad << 1, 0, 0, -1;
    CHECK_THROWS_AS(LinearSystem(A, B, bad), std::invalid_argument);
  }
  SUBCASE("a zero covariance is fine, the plant is then deterministic") {
    CHECK_NOTHROW(LinearSystem(A, B, MatrixXd::Zero(2, 2)));
  }
}

TEST_CASE("polytope offsets must be strictly positive") {
  MatrixXd H(2, 1);
  H << 1, -1;
  CHECK_NOTHROW(Polytope(H, VectorXd::Constant(2, 10.0)));

  VectorXd h(2);
  h << 10, 0;
  CHECK_THROWS_AS(Polytope(H, h), std::invalid_argument);
  h << 10, -1;
  CHECK_THROWS_AS(Polytope(H, h), std::invalid_argument);
  CHECK_THROWS_AS(Polytope(H, VectorXd::Constant(3, 1.0)), std::invalid_argument);

  MatrixXd with_zero_row(2, 1);
  with_zero_row << 1, 0;
  CHECK_THROWS_AS(Polytope(with_zero_row, VectorXd::Constant(2, 1.0)),
                  std::invalid_argument);
}

TEST_CASE("ellipsoid membership and weighted norm") {
  MatrixXd W(2, 2);
  W << 4, 0, 0, 1;
  Ellipsoid e(W, 1.0);

  VectorXd x(2);
  x << 2, 0;
  CHECK(shape_norm(W, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ellipsoid_contains(e, x));  // boundary counts as inside

  x << 1.9, 0;
  CHECK(ellipsoid_contains(e, x));
  x << 2.1, 0;
  CHECK_FALSE(ellipsoid_contains(e, x));

  CHECK(shape_norm(W, VectorXd::Zero(2)) == 0.0);

  SUBCASE("degenerate shapes are rejected") {
    CHECK_THROWS_AS(Ellipsoid(MatrixXd::Zero(2, 2), 1.0), std::invalid_argument);
    CHECK_THROWS_AS(Ellipsoid(W, -0.5), std::invalid_argument);
  }
}

TEST_CASE("inscribed radius of a box") {
  MatrixXd W(2, 2);
  W << 4, 0, 0, 1;
  CHECK(inscribed_radius(W, box(2.0)) == doctest::Approx(1.0).epsilon(1e-12));

  SUBCASE("radius scales linearly with the box") {
    for (double c : {0.5, 3.0, 17.0}) {
      CHECK(inscribed_radius(W, box(2.0 * c)) == doctest::Approx(c).epsilon(1e-12));
    }
  }

  SUBCASE("published shape in the +-40 box") {
    CHECK(inscribed_radius(paper_shape(), box(40.0)) ==
          doctest::Approx(12.101005090718449).epsilon(1e-12));
  }
}

TEST_CASE("largest inscribed ellipsoid touches the box but stays inside") {
  const MatrixXd W = paper_shape();
  const Polytope X = box(40.0);
  const double r = inscribed_radius(W, X);
  const Eigen::LLT<MatrixXd> llt(W);
  const MatrixXd L = llt.matrixL();

  double worst = -1e300;
  for (int i = 0; i < 256; ++i) {
    const double th = 2.0 * M_PI * i / 256;
    VectorXd dir(2);
    dir << std::cos(th), std::sin(th);
    const VectorXd x = r * (L * dir);
    CHECK(ellipsoid_contains(Ellipsoid(W, r), x));
    worst = std::max(worst, (X.H * x - X.h).maxCoeff());
  }
  CHECK(worst <= 1e-9);      // never leaves the box
  CHECK(worst >= -1e-3);     // and some direction comes within sampling error of a face

  // inflating by 1 percent must poke through a face somewhere
  double inflated = -1e300;
  for (int i = 0; i < 256; ++i) {
    const double th = 2.0 * M_PI * i / 256;
    VectorXd dir(2);
    dir << std::cos(th), std::sin(th);
    inflated = std::max(inflated, (X.H * (1.01 * r * (L * dir)) - X.h).maxCoeff());
  }
  CHECK(inflated > 0.0);
}

TEST_CASE("difference of ellipsoids sharing a shape is a radius difference") {
  CHECK(same_shape_difference(5.0, 3.0) == doctest::Approx(2.0));
  CHECK(same_shape_difference(3.0, 5.0) == 0.0);
  CHECK(same_shape_difference(3.0, 3.0) == 0.0);
  CHECK_THROWS_AS(same_shape_difference(-1.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(same_shape_difference(2.0, -1.0), std::invalid_argument);
}

TEST_CASE("plant step is affine in state, input, and noise") {
  std::mt19937 gen(7);
  std::normal_distribution<double> g;
  MatrixXd A(3, 3), B(3, 2), Gw = MatrixXd::Identity(3, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) A(i, j) = g(gen);
    for (int j = 0; j < 2; ++j) B(i, j) = g(gen);
  }
  LinearSystem sys(A, B, Gw);

  VectorXd x(3), u(2), w(3);
  for (int i = 0; i < 3; ++i) x(i) = g(gen);
  for (int i = 0; i < 2; ++i) u(i) = g(gen);
  for (int i = 0; i < 3; ++i) w(i) = g(gen);

  const VectorXd direct = simulate_step(sys, x, u, w);
  CHECK((direct - (A * x + B * u + w)).norm() == doctest::Approx(0.0).epsilon(1e-14));

  const VectorXd parts = simulate_step(sys, x, VectorXd::Zero(2), VectorXd::Zero(3)) +
                         simulate_step(sys, VectorXd::Zero(3), u, VectorXd::Zero(3)) +
                         simulate_step(sys, VectorXd::Zero(3), VectorXd::Zero(2), w);
  CHECK((direct - parts).norm() <= 1e-12);
}

TEST_CASE("inverse square root inverts the shape") {
  MatrixXd W(2, 2);
  W << 4, 0, 0, 9;
  const MatrixXd S = inv_sqrt(W);
  CHECK(S(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(S(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(S(0, 1) == doctest::Approx(0.0));

  std::mt19937 gen(11);
  for (int trial = 0; trial < 5; ++trial) {
    const MatrixXd Wr = random_spd(4, gen);
    const MatrixXd Sr = inv_sqrt(Wr);
    CHECK(is_symmetric(Sr));
    CHECK((Sr * Wr * Sr - MatrixXd::Identity(4, 4)).norm() <= 1e-9);
  }
}

TEST_CASE("symmetry predicate uses a relative tolerance") {
  MatrixXd M(2, 2);
  M << 1e6, 3.0, 3.0, 2e6;
  CHECK(is_symmetric(M));
  M(0, 1) += 1e-5;  // absolute blip, negligible against the scale
  CHECK(is_symmetric(M));
  M(0, 1) = 4.0;
  CHECK_FALSE(is_symmetric(M));
}
