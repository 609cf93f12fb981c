#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "qoc/transmon.hpp"

using namespace qoc;
using Catch::Matchers::WithinAbs;

namespace {

// Truncated annihilation operator, built independently of the library.
Eigen::MatrixXcd lowering(int n) {
  Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(n, n);
  for (int k = 1; k < n; ++k) b(k - 1, k) = std::sqrt(static_cast<double>(k));
  return b;
}

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

}  // namespace

TEST_CASE("unit conversion") {
  CHECK_THAT(mhz_to_angular(1000.0), WithinAbs(ghz_to_angular(1.0), 1e-15));
  CHECK_THAT(ghz_to_angular(1.0), WithinAbs(2 * std::numbers::pi, 1e-15));
  CHECK_THAT(angular_to_mhz(mhz_to_angular(35.0)), WithinAbs(35.0, 1e-12));
  const TransmonParams p = TransmonParams::reference(5);
  CHECK_THAT(p.w1, WithinAbs(ghz_to_angular(4.380), 1e-12));
  CHECK_THAT(p.w2, WithinAbs(ghz_to_angular(4.614), 1e-12));
  CHECK_THAT(p.wd, WithinAbs(ghz_to_angular(4.498), 1e-12));
  CHECK_THAT(p.alpha1, WithinAbs(mhz_to_angular(210.0), 1e-12));
  CHECK_THAT(p.alpha2, WithinAbs(mhz_to_angular(215.0), 1e-12));
  CHECK_THAT(p.J, WithinAbs(mhz_to_angular(-3.0), 1e-12));
  CHECK(p.lambda == 1.03);
}

TEST_CASE("transmon Hamiltonian against a dense ladder-operator build") {
  for (int nq : {2, 3, 5}) {
    const TransmonParams p = TransmonParams::reference(nq);
    const ControlGenerator gen = build_transmon(p);
    REQUIRE(gen.dim() == nq * nq);
    REQUIRE(gen.num_controls() == 2);
    CHECK(gen.hermitian());
    CHECK(gen.drift().hermitian_defect() < 1e-12);
    CHECK(gen.control(0).hermitian_defect() < 1e-12);
    CHECK(gen.control(1).hermitian_defect() < 1e-12);

    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(nq, nq);
    const Eigen::MatrixXcd b1 = kron(lowering(nq), I), b2 = kron(I, lowering(nq));
    const Eigen::MatrixXcd n1 = b1.adjoint() * b1, n2 = b2.adjoint() * b2;
    const Eigen::MatrixXcd H0 = (p.w1 - p.wd + p.alpha1 / 2) * n1 - p.alpha1 / 2 * n1 * n1 +
                                (p.w2 - p.wd + p.alpha2 / 2) * n2 - p.alpha2 / 2 * n2 * n2 +
                                p.J * (b1.adjoint() * b2 + b1 * b2.adjoint());
    const Eigen::MatrixXcd Hre =
        0.5 * ((b1.adjoint() + b1) + p.lambda * (b2.adjoint() + b2));
    const Eigen::MatrixXcd Him =
        cplx(0, 0.5) * ((b1.adjoint() - b1) + p.lambda * (b2.adjoint() - b2));
    CHECK((gen.drift().dense() - H0).norm() < 1e-12);
    CHECK((gen.control(0).dense() - Hre).norm() < 1e-12);
    CHECK((gen.control(1).dense() - Him).norm() < 1e-12);
  }
}

TEST_CASE("transmon matrix elements and structure") {
  const TransmonParams p = TransmonParams::reference(5);
  const ControlGenerator gen = build_transmon(p);
  const Eigen::MatrixXcd H0 = gen.drift().dense();
  const Index i11 = 1 * 5 + 1;
  CHECK_THAT(H0(i11, i11).real(), WithinAbs((p.w1 - p.wd) + (p.w2 - p.wd), 1e-12));

  // drift couples |n1,n2⟩ only to |n1±1,n2∓1⟩
  for (Index r = 0; r < 25; ++r) {
    for (Index c = 0; c < 25; ++c) {
      if (r == c || H0(r, c) == cplx(0.0)) continue;
      const Index dn1 = r / 5 - c / 5, dn2 = r % 5 - c % 5;
      CHECK(std::abs(dn1) == 1);
      CHECK(dn1 == -dn2);
    }
  }
  // controls change one excitation number by one
  for (Index l = 0; l < 2; ++l) {
    const Eigen::MatrixXcd H = gen.control(l).dense();
    for (Index r = 0; r < 25; ++r) {
      for (Index c = 0; c < 25; ++c) {
        if (H(r, c) == cplx(0.0)) continue;
        const Index dn1 = std::abs(r / 5 - c / 5), dn2 = std::abs(r % 5 - c % 5);
        CHECK(dn1 + dn2 == 1);
      }
    }
  }

  SECTION("decoupled qubit truncation") {
    TransmonParams q = TransmonParams::reference(2);
    q.lambda = 0.0;
    q.J = 0.0;
    const ControlGenerator g2 = build_transmon(q);
    Eigen::Matrix2cd sx;
    sx << 0, 1, 1, 0;
    CHECK((g2.control(0).dense() - 0.5 * kron(sx, Eigen::Matrix2cd::Identity())).norm() < 1e-15);
  }
  CHECK_THROWS_AS(build_transmon(TransmonParams::reference(1)), ValueError);
}

TEST_CASE("logical basis") {
  const auto b2 = logical_basis(2);
  for (int k = 0; k < 4; ++k) CHECK((b2[static_cast<std::size_t>(k)] - StateVector::Unit(4, k)).norm() == 0.0);
  for (int nq : {3, 6}) {
    const auto b = logical_basis(nq);
    CHECK(b[1](1) == cplx(1.0));
    CHECK(b[2](nq) == cplx(1.0));
    CHECK(b[3](nq + 1) == cplx(1.0));
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(b[i].dot(b[j]) - (i == j ? 1.0 : 0.0)) < 1e-15);
  }
}

TEST_CASE("guess pulses") {
  const TimeGrid g = make_time_grid(100.0, 0.1);
  const Eigen::VectorXd c = guess_pulse("const", 0.3, g);
  CHECK((c.array() == 0.3).all());
  CHECK(std::abs(envelope("blackman", 0.0, 100.0)) < 1e-15);
  CHECK(std::abs(envelope("blackman", 100.0, 100.0)) < 1e-15);
  CHECK_THAT(envelope("blackman", 50.0, 100.0), WithinAbs(1.0, 1e-15));
  const Eigen::VectorXd f = guess_pulse("flattop", 2.0, g);
  CHECK_THAT(f.sum() * 0.1, WithinAbs(0.9 * 2.0 * 100.0, 0.02 * 0.9 * 2.0 * 100.0));
  CHECK(f.maxCoeff() == 2.0);
  CHECK_THROWS_AS(guess_pulse("gauss", 1.0, g), ValueError);
  CHECK_THROWS_AS(guess_pulse("const", std::nan(""), g), ValueError);
}

TEST_CASE("sqrt(iSWAP) target") {
  const GateMatrix U = target_gate_sqrt_iswap();
  CHECK((U.adjoint() * U - GateMatrix::Identity()).norm() < 1e-15);
  GateMatrix iswap = GateMatrix::Identity();
  iswap(1, 1) = iswap(2, 2) = 0.0;
  iswap(1, 2) = iswap(2, 1) = cplx(0.0, 1.0);
  CHECK((U * U - iswap).norm() < 1e-15);
  const WeylPoint c = weyl_coordinates(U);
  CHECK_THAT(c.c1, WithinAbs(std::numbers::pi / 4, 1e-9));
  CHECK_THAT(c.c2, WithinAbs(std::numbers::pi / 4, 1e-9));
  CHECK_THAT(c.c3, WithinAbs(0.0, 1e-9));
  CHECK(gate_concurrence(c) == 1.0);
}

TEST_CASE("forbidden-level projector") {
  const Operator D = forbidden_projector(3, {2});
  const Eigen::MatrixXcd d = D.dense();
  CHECK((d * d - d).norm() == 0.0);
  // levels with n1 = 2 or n2 = 2: 5 of 9 states
  CHECK(d.trace().real() == 5.0);
  CHECK(d(8, 8) == cplx(1.0));
  CHECK(d(4, 4) == cplx(0.0));
  for (const auto& v : logical_basis(3)) CHECK((D.matrix() * v).norm() == 0.0);
}
