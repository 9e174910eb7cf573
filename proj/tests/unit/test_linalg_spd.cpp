#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "wls/error.hpp"
#include "wls/linalg_spd.hpp"

using namespace wls;
using wls::test::rel_frob;

TEST_CASE("spd_sqrt examples") {
  const MatrixXd d = Eigen::Vector2d(4, 9).asDiagonal();
  CHECK(rel_frob(spd_sqrt(d), Eigen::Vector2d(2, 3).asDiagonal().toDenseMatrix()) < 1e-12);
  CHECK(rel_frob(spd_sqrt(MatrixXd::Identity(3, 3)), MatrixXd::Identity(3, 3)) < 1e-12);

  // eigenpairs (3, (1,1)/sqrt2) and (1, (1,-1)/sqrt2)
  MatrixXd a(2, 2);
  a << 2, 1, 1, 2;
  const double r3 = std::sqrt(3.0);
  MatrixXd expect(2, 2);
  expect << (r3 + 1) / 2, (r3 - 1) / 2, (r3 - 1) / 2, (r3 + 1) / 2;
  const MatrixXd r = spd_sqrt(SpdMatrix(a)).matrix();
  CHECK(rel_frob(r, expect) < 1e-12);
  CHECK(rel_frob(r * r, a) < 1e-8);
}

TEST_CASE("spd_sqrt rejects non-finite input") {
  MatrixXd a = MatrixXd::Identity(2, 2);
  a(0, 0) = NAN;
  CHECK_THROWS_AS(spd_sqrt(a), InputError);
  CHECK_THROWS_AS(SpdMatrix{a}, InputError);
}

TEST_CASE("SpdMatrix invariants") {
  MatrixXd asym(2, 2);
  asym << 1, 0.5, 0.4, 1;
  CHECK_THROWS_AS(SpdMatrix{asym}, InputError);

  MatrixXd neg(2, 2);
  neg << 1, 0, 0, -0.5;
  CHECK_THROWS_AS(SpdMatrix{neg}, InputError);

  // tiny negative eigenvalue is clamped to zero
  MatrixXd near(2, 2);
  near << 1, 0, 0, -1e-13;
  const SpdMatrix s(near);
  CHECK(sym_eigen(s.matrix()).values.minCoeff() >= 0.0);
  CHECK_THROWS_AS(SpdMatrix{MatrixXd(2, 3)}, InputError);
}

TEST_CASE("spd_sqrt squares back on random SPD matrices") {
  std::mt19937_64 rng(11);
  for (int d = 1; d <= 20; ++d) {
    const MatrixXd a = test::random_spd(rng, d);
    const MatrixXd s = spd_sqrt(SpdMatrix(a)).matrix();
    CHECK((s * s - a).norm() / a.norm() < 1e-8);
    CHECK((s - s.transpose()).norm() == 0.0);
    CHECK(sym_eigen(s).values.minCoeff() >= 0.0);
  }
}

TEST_CASE("spd_sqrt of a singular matrix") {
  MatrixXd a(2, 2);
  a << 1, 1, 1, 1;
  const MatrixXd s = spd_sqrt(a);
  CHECK((s * s - a).norm() < 1e-8);
}

TEST_CASE("pinv examples") {
  CHECK(rel_frob(pinv(MatrixXd::Identity(3, 3)), MatrixXd::Identity(3, 3)) < 1e-14);
  const MatrixXd z = pinv(MatrixXd::Zero(2, 3));
  CHECK(z.rows() == 3);
  CHECK(z.cols() == 2);
  CHECK(z.norm() == 0.0);
  const MatrixXd col = MatrixXd::Ones(2, 1);
  const MatrixXd p = pinv(col);
  REQUIRE(p.rows() == 1);
  CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(p(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("pinv Penrose identities and involution") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index r = 1 + trial % 6;
    const Eigen::Index c = 1 + (trial * 7) % 5;
    MatrixXd a = test::random_matrix(rng, r, c);
    if (trial % 3 == 0 && c > 1) a.col(c - 1) = a.col(0);  // rank deficient
    const MatrixXd p = pinv(a);
    CHECK((a * p * a - a).norm() < 1e-8 * std::max(1.0, a.norm()));
    CHECK((p * a * p - p).norm() < 1e-8 * std::max(1.0, p.norm()));
    CHECK(((a * p).transpose() - a * p).norm() < 1e-8);
    CHECK(((p * a).transpose() - p * a).norm() < 1e-8);
    CHECK((pinv(p) - a).norm() < 1e-8 * std::max(1.0, a.norm()));
  }
}

TEST_CASE("pinv rejects non-finite input") {
  MatrixXd a = MatrixXd::Ones(2, 2);
  a(1, 0) = INFINITY;
  CHECK_THROWS_AS(pinv(a), InputError);
}

TEST_CASE("kron examples") {
  CHECK(kron(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)) == MatrixXd::Identity(4, 4));
  std::mt19937_64 rng(3);
  const MatrixXd b = test::random_matrix(rng, 2, 3);
  CHECK(kron(MatrixXd::Constant(1, 1, 2.0), b) == 2.0 * b);
  const Eigen::Vector2d x(1, 1);
  const MatrixXd lhs = kron(x.transpose(), MatrixXd::Identity(2, 2)) * MatrixXd::Identity(4, 4) *
                       kron(x, MatrixXd::Identity(2, 2));
  CHECK(rel_frob(lhs, 2.0 * MatrixXd::Identity(2, 2)) < 1e-14);
}

TEST_CASE("kron mixed product and vec identity") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd a = test::random_matrix(rng, 2, 3);
    const MatrixXd b = test::random_matrix(rng, 3, 4);
    const MatrixXd c = test::random_matrix(rng, 4, 2);
    const MatrixXd d = test::random_matrix(rng, 2, 3);
    CHECK(rel_frob(kron(a, c) * kron(b, d), kron(a * b, c * d)) < 1e-12);
    CHECK((vec(a * b * c) - kron(c.transpose(), a) * vec(b)).norm() < 1e-10);
  }
}

TEST_CASE("vec stacks columns") {
  MatrixXd a(2, 2);
  a << 1, 2, 3, 4;
  CHECK(vec(a) == Eigen::Vector4d(1, 3, 2, 4));
  CHECK(unvec(vec(a), 2, 2) == a);
  CHECK_THROWS_AS(unvec(vec(a), 3, 2), InputError);
}

TEST_CASE("psd_clip zeroes negative eigenvalues") {
  MatrixXd a(2, 2);
  a << 1, 2, 2, 1;  // eigenvalues 3, -1
  const MatrixXd c = psd_clip(a);
  CHECK(sym_eigen(c).values.minCoeff() > -1e-14);
  CHECK(rel_frob(c, 1.5 * MatrixXd::Ones(2, 2)) < 1e-12);
}
