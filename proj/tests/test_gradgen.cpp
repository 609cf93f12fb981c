#include <catch_amalgamated.hpp>

#include <algorithm>

#include <unsupported/Eigen/MatrixFunctions>

#include "oracles.hpp"
#include "qoc/gradgen.hpp"

using namespace qoc;

namespace {

struct Fixture {
  Eigen::MatrixXcd h;
  std::vector<Eigen::MatrixXcd> hl;
  Operator H;
  std::vector<Operator> ops;

  Fixture(int n, int L, std::mt19937_64& rng) {
    h = oracle::random_hermitian(n, rng);
    H = oracle::to_op(h, true);
    for (int l = 0; l < L; ++l) {
      hl.push_back(oracle::random_hermitian(n, rng, 0.5));
      ops.push_back(oracle::to_op(hl.back(), true));
    }
  }
};

StateVector stacked(const ExtendedState& x) {
  return Eigen::Map<const StateVector>(x.blocks().data(), x.blocks().size());
}

}  // namespace

TEST_CASE("extended state layout") {
  std::mt19937_64 rng(20);
  const StateVector psi = oracle::random_state(5, rng);
  ExtendedState x = ExtendedState::from_base(psi, 3);
  CHECK(x.dim() == 5);
  CHECK(x.num_controls() == 3);
  CHECK((x.base() - psi).norm() == 0.0);
  for (Index l = 0; l < 3; ++l) CHECK(x.grad_block(l).norm() == 0.0);
  x.grad_block(1).setOnes();
  zero_grad_blocks(x);
  CHECK(x.blocks().leftCols(3).norm() == 0.0);
  CHECK((x.base() - psi).norm() == 0.0);
}

TEST_CASE("gradient generator matches its dense block form") {
  std::mt19937_64 rng(21);
  const Fixture f(6, 2, rng);
  const GradGenerator G(f.H, f.ops);
  const Eigen::MatrixXcd D = G.dense();
  REQUIRE(D.rows() == 18);
  // block (l,l) = H, block (l,L) = H_l, zero elsewhere
  for (Index r = 0; r < 3; ++r) {
    for (Index c = 0; c < 3; ++c) {
      const Eigen::MatrixXcd blk = D.block(6 * r, 6 * c, 6, 6);
      if (r == c) {
        CHECK((blk - f.h).norm() == 0.0);
      } else if (c == 2) {
        CHECK((blk - f.hl[static_cast<std::size_t>(r)]).norm() == 0.0);
      } else {
        CHECK(blk.norm() == 0.0);
      }
    }
  }
  ExtendedState x(6, 2);
  x.blocks() = Eigen::MatrixXcd::Random(6, 3);
  const ExtendedState y = apply_gradgen(G, x);
  CHECK((stacked(y) - D * stacked(x)).norm() < 1e-13);
}

TEST_CASE("extended generator has the spectrum of H") {
  std::mt19937_64 rng(22);
  const Fixture f(5, 2, rng);
  const GradGenerator G(f.H, f.ops);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eg(G.dense(), false);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eh(f.h);
  std::vector<double> got, want;
  for (Index k = 0; k < eg.eigenvalues().size(); ++k) {
    CHECK(std::abs(eg.eigenvalues()(k).imag()) < 1e-6);
    got.push_back(eg.eigenvalues()(k).real());
  }
  for (int rep = 0; rep < 3; ++rep) {
    for (Index k = 0; k < 5; ++k) want.push_back(eh.eigenvalues()(k));
  }
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  for (std::size_t k = 0; k < got.size(); ++k) CHECK(std::abs(got[k] - want[k]) < 1e-6);
}

TEST_CASE("gradient step against the dense exponential") {
  std::mt19937_64 rng(23);
  const Fixture f(8, 3, rng);
  const GradGenerator G(f.H, f.ops);
  const StateVector psi = oracle::random_state(8, rng);
  const double dt = 0.6;
  const ExtendedState x = grad_step(G, psi, cheby_coeffs(spectral_bounds(f.H), dt));

  const Eigen::MatrixXcd E = (cplx(0.0, -dt) * G.dense()).exp();
  const StateVector ref = E * stacked(ExtendedState::from_base(psi, 3));
  CHECK((stacked(x) - ref).norm() < 1e-12);
  CHECK((x.base() - oracle::expm_hermitian(f.h, dt) * psi).norm() < 1e-12);

  SECTION("blocks are derivatives of the step") {
    const double h = 1e-5;
    for (Index l = 0; l < 3; ++l) {
      const auto& hl = f.hl[static_cast<std::size_t>(l)];
      const StateVector fd = (oracle::expm_hermitian(f.h + h * hl, dt) * psi -
                              oracle::expm_hermitian(f.h - h * hl, dt) * psi) /
                             (2 * h);
      CHECK((x.grad_block(l) - fd).lpNorm<Eigen::Infinity>() < 1e-9);
    }
  }
  SECTION("ODE integration agrees") {
    const ExtendedState y = grad_step_ode(G, psi, dt, 1e-12);
    CHECK((y.blocks() - x.blocks()).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("commuting control has a closed-form derivative") {
  std::mt19937_64 rng(24);
  const Eigen::MatrixXcd U = oracle::random_unitary(6, rng);
  Eigen::VectorXd e0 = Eigen::VectorXd::Random(6), e1 = Eigen::VectorXd::Random(6);
  const Eigen::MatrixXcd h = U * e0.cast<cplx>().asDiagonal() * U.adjoint();
  Eigen::MatrixXcd h1 = U * e1.cast<cplx>().asDiagonal() * U.adjoint();
  h1 = 0.5 * (h1 + h1.adjoint()).eval();
  Eigen::MatrixXcd hh = 0.5 * (h + h.adjoint());
  const Operator H = oracle::to_op(hh, true);
  const std::vector<Operator> ops{oracle::to_op(h1, true)};
  const GradGenerator G(H, ops);
  const StateVector psi = oracle::random_state(6, rng);
  const double dt = 1.3;
  const ExtendedState x = grad_step(G, psi, cheby_coeffs(spectral_bounds(H), dt));
  const StateVector want = cplx(0.0, -dt) * h1 * (oracle::expm_hermitian(hh, dt) * psi);
  CHECK((x.grad_block(0) - want).norm() < 1e-11);
}

TEST_CASE("propagator-driven gradient steps") {
  std::mt19937_64 rng(25);
  const Fixture f(6, 2, rng);
  const ControlGenerator gen(f.H, f.ops);
  const TimeGrid grid = make_time_grid(1.0, 0.25);
  const PiecewiseControls c(Eigen::MatrixXd::Random(4, 2));
  const Propagator prop(gen, grid, c);
  auto ws = prop.make_workspace();
  const StateVector psi = oracle::random_state(6, rng);
  const Index i = 2;
  const auto eps = c.row(i);
  const Eigen::MatrixXcd Hi = gen.evaluate(eps).dense();

  for (Direction dir : {Direction::forward, Direction::backward}) {
    const double sdt = dir == Direction::forward ? 0.25 : -0.25;
    ExtendedState x = ExtendedState::from_base(psi, 2);
    grad_step(prop, ws, i, eps, dir, x);
    CHECK((x.base() - oracle::expm_hermitian(Hi, sdt) * psi).norm() < 1e-12);
    const double h = 1e-5;
    for (Index l = 0; l < 2; ++l) {
      const auto& hl = f.hl[static_cast<std::size_t>(l)];
      const StateVector fd = (oracle::expm_hermitian(Hi + h * hl, sdt) * psi -
                              oracle::expm_hermitian(Hi - h * hl, sdt) * psi) /
                             (2 * h);
      CHECK((x.grad_block(l) - fd).lpNorm<Eigen::Infinity>() < 1e-9);
    }
  }

  SECTION("controls off the reference grid fall back to local coefficients") {
    std::vector<double> big{40.0, -40.0};
    ExtendedState x = ExtendedState::from_base(psi, 2);
    grad_step(prop, ws, 0, big, Direction::forward, x);
    const Eigen::MatrixXcd Hb = gen.evaluate(big).dense();
    CHECK((x.base() - oracle::expm_hermitian(Hb, 0.25) * psi).norm() < 1e-11);
  }
}
