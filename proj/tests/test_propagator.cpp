#include <catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "qoc/propagator.hpp"

using namespace qoc;
using Catch::Matchers::WithinAbs;

namespace {

ControlGenerator random_generator(int n, int L, std::mt19937_64& rng) {
  std::vector<Operator> ctrl;
  for (int l = 0; l < L; ++l) ctrl.push_back(oracle::to_op(oracle::random_hermitian(n, rng, 0.3), true));
  return ControlGenerator(oracle::to_op(oracle::random_hermitian(n, rng), true), std::move(ctrl));
}

}  // namespace

TEST_CASE("Gershgorin bounds") {
  Eigen::Matrix3cd d = Eigen::Matrix3cd::Zero();
  d.diagonal() << 0.0, 1.0, 2.0;
  const SpectralBounds b = spectral_bounds(Operator::from_dense(d, true), 0.0);
  CHECK(b.E_min == 0.0);
  CHECK(b.E_max == 2.0);

  Eigen::Matrix2cd sx;
  sx << 0, 1, 1, 0;
  const SpectralBounds bx = spectral_bounds(Operator::from_dense(sx, true), 0.0);
  CHECK(bx.E_min == -1.0);
  CHECK(bx.E_max == 1.0);

  std::mt19937_64 rng(10);
  const Eigen::MatrixXcd h = oracle::random_hermitian(32, rng);
  const SpectralBounds br = spectral_bounds(Operator::from_dense(h, true));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  CHECK(es.eigenvalues().minCoeff() >= br.E_min);
  CHECK(es.eigenvalues().maxCoeff() <= br.E_max);

  Eigen::Matrix2cd nh;
  nh << 0, 1, 0, 0;
  CHECK_THROWS_AS(spectral_bounds(Operator::from_dense(nh, false)), SpectralRangeError);
}

TEST_CASE("generator bounds cover every interval") {
  std::mt19937_64 rng(11);
  const ControlGenerator gen = random_generator(12, 2, rng);
  Eigen::MatrixXd vals = Eigen::MatrixXd::Random(15, 2) * 3.0;
  const PiecewiseControls c(vals);
  const SpectralBounds b = spectral_bounds(gen, c);
  for (Index i = 0; i < 15; ++i) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gen.evaluate(c.row(i)).dense());
    CHECK(es.eigenvalues().minCoeff() >= b.E_min);
    CHECK(es.eigenvalues().maxCoeff() <= b.E_max);
  }
}

TEST_CASE("Chebychev coefficients") {
  SECTION("zero-step limit") {
    const ChebyCoeffs c = cheby_coeffs({-1e-9, 1e-9}, 1e-6);
    CHECK(std::abs(c.a[0] - 1.0) < 1e-14);
    for (std::size_t m = 1; m < c.a.size(); ++m) CHECK(std::abs(c.a[m]) < 1e-14);
  }
  SECTION("reproduce the scalar exponential") {
    // ΔE·dt = 10
    const SpectralBounds b{-2.0, 3.0};
    const double dt = 2.0;
    const ChebyCoeffs c = cheby_coeffs(b, dt);
    double worst = 0.0;
    for (int s = 0; s < 1000; ++s) {
      const double x = b.E_min + (b.E_max - b.E_min) * s / 999.0;
      const double y = (x - c.center) / c.half_width;
      cplx sum = 0.0;
      const double theta = std::acos(std::clamp(y, -1.0, 1.0));
      for (std::size_t m = 0; m < c.a.size(); ++m) {
        sum += c.a[m] * std::pow(cplx(0, -1), static_cast<double>(m)) * std::cos(m * theta);
      }
      worst = std::max(worst, std::abs(sum - std::exp(cplx(0, -x * dt))));
    }
    CHECK(worst < 1e-13);
    // truncation criterion
    double biggest = 0.0;
    for (const cplx& a : c.a) biggest = std::max(biggest, std::abs(a));
    CHECK(std::abs(c.a.back()) >= 1e-15 * biggest);
  }
  SECTION("cutoff grows linearly") {
    const double m1 = static_cast<double>(cheby_coeffs({-1.0, 1.0}, 50.0).cutoff());
    const double m2 = static_cast<double>(cheby_coeffs({-1.0, 1.0}, 100.0).cutoff());
    CHECK(m2 / m1 > 2.0 * 0.7);
    CHECK(m2 / m1 < 2.0 * 1.3);
  }
  SECTION("negative time step gives the conjugate expansion") {
    const ChebyCoeffs f = cheby_coeffs({-1.0, 2.0}, 0.7);
    const ChebyCoeffs b = cheby_coeffs({-1.0, 2.0}, -0.7);
    REQUIRE(f.a.size() == b.a.size());
    for (std::size_t m = 0; m < f.a.size(); ++m) {
      const double sign = m % 2 ? -1.0 : 1.0;
      CHECK(std::abs(b.a[m] - sign * std::conj(f.a[m])) < 1e-15);
    }
  }
  SECTION("invalid arguments") {
    CHECK_THROWS_AS(cheby_coeffs({-1.0, 1.0}, 1.0, 1e-17), ValueError);
    CHECK_THROWS_AS(cheby_coeffs({-1.0, 1.0}, 0.0), ValueError);
  }
}

TEST_CASE("Chebychev step against dense exponential") {
  std::mt19937_64 rng(12);
  SECTION("zero generator") {
    const Operator Z = Operator::zero(5);
    const StateVector v = oracle::random_state(5, rng);
    const StateVector out = cheby_step(Z, v, cheby_coeffs(spectral_bounds(Z), 0.5));
    CHECK((out - v).norm() < 1e-15);
  }
  SECTION("eigenstate acquires a phase") {
    const Eigen::MatrixXcd h = oracle::random_hermitian(6, rng);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    const StateVector v = es.eigenvectors().col(2);
    const Operator H = oracle::to_op(h, true);
    const StateVector out = cheby_step(H, v, cheby_coeffs(spectral_bounds(H), 0.4));
    CHECK((out - std::exp(cplx(0, -es.eigenvalues()(2) * 0.4)) * v).norm() < 1e-13);
  }
  SECTION("random 16x16") {
    const Eigen::MatrixXcd h = oracle::random_hermitian(16, rng);
    const Operator H = oracle::to_op(h, true);
    const StateVector v = oracle::random_state(16, rng);
    const StateVector out = cheby_step(H, v, cheby_coeffs(spectral_bounds(H), 0.3));
    CHECK((out - oracle::expm_hermitian(h, 0.3) * v).norm() < 1e-12);
    CHECK(std::abs(out.norm() - 1.0) < 1e-12);
  }
  SECTION("larger margin does not change the result") {
    const Eigen::MatrixXcd h = oracle::random_hermitian(10, rng);
    const Operator H = oracle::to_op(h, true);
    const StateVector v = oracle::random_state(10, rng);
    const StateVector a = cheby_step(H, v, cheby_coeffs(spectral_bounds(H, 0.05), 0.8));
    const StateVector b = cheby_step(H, v, cheby_coeffs(spectral_bounds(H, 0.5), 0.8));
    CHECK((a - b).norm() < 1e-12);
  }
  SECTION("too narrow a range is detected") {
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2, 2);
    h(0, 0) = 50.0;
    h(1, 1) = -50.0;
    StateVector v(2);
    v << 1.0, 1.0;
    CHECK_THROWS_AS(cheby_step(oracle::to_op(h, true), v, cheby_coeffs({-1.0, 1.0}, 2.0)),
                    SpectralRangeError);
  }
}

TEST_CASE("ODE step") {
  std::mt19937_64 rng(13);
  SECTION("zero generator") {
    const StateVector v = oracle::random_state(4, rng);
    CHECK((ode_step(Operator::zero(4), v, 1.0) - v).norm() == 0.0);
  }
  SECTION("agrees with Chebychev on a Hermitian problem") {
    const Operator H = oracle::to_op(oracle::random_hermitian(12, rng), true);
    const StateVector v = oracle::random_state(12, rng);
    const double tol = 1e-10;
    const StateVector a = ode_step(H, v, 0.7, tol);
    const StateVector b = cheby_step(H, v, cheby_coeffs(spectral_bounds(H), 0.7));
    CHECK((a - b).lpNorm<Eigen::Infinity>() < 10 * tol);
  }
  SECTION("non-Hermitian decay") {
    Eigen::Matrix2cd a = Eigen::Matrix2cd::Zero();
    a(1, 1) = cplx(0, -1.0);
    StateVector v(2);
    v << 0.0, 1.0;
    const StateVector out = ode_step(Operator::from_dense(a), v, 1.0, 1e-10);
    CHECK(std::abs(out(0)) == 0.0);
    CHECK_THAT(out(1).real(), WithinAbs(std::exp(-1.0), 1e-10));
    CHECK_THAT(out(1).imag(), WithinAbs(0.0, 1e-10));
  }
  SECTION("backward direction") {
    const Eigen::MatrixXcd h = oracle::random_hermitian(6, rng);
    const StateVector v = oracle::random_state(6, rng);
    const StateVector out = ode_step(oracle::to_op(h, true), v, -0.5, 1e-11);
    CHECK((out - oracle::expm_hermitian(h, -0.5) * v).norm() < 1e-9);
  }
}

TEST_CASE("trajectory propagation") {
  std::mt19937_64 rng(14);
  const ControlGenerator gen = random_generator(8, 2, rng);
  const StateVector v0 = oracle::random_state(8, rng);

  SECTION("single interval equals one step") {
    const TimeGrid g = make_time_grid(0.5, 0.5);
    const PiecewiseControls c(Eigen::MatrixXd::Constant(1, 2, 0.4));
    const Trajectory t = propagate(gen, c, g, v0, Direction::forward, false);
    const Operator H = gen.evaluate(c.row(0));
    const StateVector ref = cheby_step(H, v0, cheby_coeffs(spectral_bounds(H), 0.5));
    CHECK(t.size() == 1);
    CHECK((t.state(0) - ref).norm() < 1e-13);
  }

  const TimeGrid g = make_time_grid(5.0, 0.05);
  const PiecewiseControls c(Eigen::MatrixXd::Random(g.num_intervals(), 2));

  SECTION("storage, unitarity and dense reference") {
    const Trajectory t = propagate(gen, c, g, v0, Direction::forward, true);
    REQUIRE(t.size() == g.num_intervals() + 1);
    CHECK((t.state(0) - v0).norm() == 0.0);
    StateVector ref = v0;
    for (Index i = 0; i < g.num_intervals(); ++i) {
      ref = oracle::expm_hermitian(gen.evaluate(c.row(i)).dense(), g.dt(i)) * ref;
      CHECK((t.state(i + 1) - ref).norm() < 1e-11);
    }
    CHECK(std::abs(t.state(g.num_intervals()).norm() - 1.0) < 1e-11);
  }

  SECTION("forward then backward returns the initial state") {
    const StateVector T = propagate(gen, c, g, v0, Direction::forward, false).state(0);
    const Trajectory back = propagate(gen, c, g, T, Direction::backward, true);
    CHECK((back.state(0) - v0).norm() < 1e-11);
    CHECK((back.state(g.num_intervals()) - T).norm() == 0.0);
  }

  SECTION("Chebychev and ODE agree") {
    PropagatorOptions ode;
    ode.kind = PropagatorKind::ode;
    const StateVector a = propagate(gen, c, g, v0, Direction::forward, false).state(0);
    const StateVector b = propagate(gen, c, g, v0, Direction::forward, false, ode).state(0);
    CHECK((a - b).lpNorm<Eigen::Infinity>() < 1e-9);
  }

  SECTION("unitarity over 1000 steps") {
    const TimeGrid g2 = make_time_grid(100.0, 0.1);
    const PiecewiseControls c2(Eigen::MatrixXd::Random(1000, 2));
    const StateVector T = propagate(gen, c2, g2, v0, Direction::forward, false).state(0);
    CHECK(std::abs(T.norm() - 1.0) < 1e-11);
  }

  SECTION("shape errors") {
    const PiecewiseControls wrong(Eigen::MatrixXd::Zero(3, 2));
    CHECK_THROWS_AS(propagate(gen, wrong, g, v0, Direction::forward, false), DimensionError);
    CHECK_THROWS_AS(propagate(gen, c, g, StateVector::Zero(3), Direction::forward, false),
                    DimensionError);
  }
}

TEST_CASE("non-Hermitian generators propagate by ODE in both directions") {
  std::mt19937_64 rng(15);
  Eigen::MatrixXcd drift = oracle::random_hermitian(4, rng);
  drift(3, 3) += cplx(0, -0.5);
  const ControlGenerator gen(Operator::from_dense(drift),
                             {oracle::to_op(oracle::random_hermitian(4, rng, 0.2), true)});
  const TimeGrid g = make_time_grid(1.0, 0.1);
  const PiecewiseControls c(Eigen::MatrixXd::Random(10, 1));
  const StateVector v0 = oracle::random_state(4, rng);
  const StateVector T = propagate(gen, c, g, v0, Direction::forward, false).state(0);
  StateVector ref = v0;
  for (Index i = 0; i < 10; ++i) ref = oracle::expm_general(gen.evaluate(c.row(i)).dense(), 0.1) * ref;
  CHECK((T - ref).norm() < 1e-9);
  CHECK(T.norm() < 1.0);

  // backward applies U† at every step
  const StateVector B = propagate(gen, c, g, v0, Direction::backward, false).state(0);
  StateVector refb = v0;
  for (Index i = 9; i >= 0; --i) {
    refb = oracle::expm_general(gen.evaluate(c.row(i)).dense(), 0.1).adjoint() * refb;
  }
  CHECK((B - refb).norm() < 1e-9);

  PropagatorOptions cheby;
  cheby.kind = PropagatorKind::cheby;
  CHECK_THROWS_AS(Propagator(gen, g, c, cheby), SpectralRangeError);
}
