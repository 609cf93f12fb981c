#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "qoc/optim.hpp"

using namespace qoc;

namespace {

// f = ½(x − x*)ᵀA(x − x*), minimum value exactly zero so that f keeps full
// relative precision down to tiny gradients.
struct Quadratic {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;  // x*

  explicit Quadratic(int n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = d(rng);
    A = M.transpose() * M / n + Eigen::MatrixXd::Identity(n, n);
    b = Eigen::VectorXd::NullaryExpr(n, [&] { return d(rng); });
  }

  ValueGrad fn() const {
    return [this](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
      const Eigen::VectorXd r = x - b;
      g = A * r;
      return 0.5 * r.dot(g);
    };
  }
};

double rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
  const double a = x(1) - x(0) * x(0);
  const double b = 1.0 - x(0);
  g(0) = -400.0 * x(0) * a - 2.0 * b;
  g(1) = 200.0 * a;
  return 100.0 * a * a + b * b;
}

// The last step of a failed search is the best point found, not a Wolfe point.
void check_wolfe(const OptimResult& r, double c1, double c2) {
  std::size_t count = r.steps.size();
  if (r.status == OptimStatus::linesearch_failed && count > 0) --count;
  for (std::size_t k = 0; k < count; ++k) {
    const auto& s = r.steps[k];
    CHECK(s.dphi0 < 0.0);
    if (s.curvature_checked) {
      CHECK(s.phi <= s.phi0 + c1 * s.alpha * s.dphi0);
      CHECK(std::abs(s.dphi) <= c2 * std::abs(s.dphi0));
    } else {
      CHECK(s.phi < s.phi0);
    }
  }
}

void check_monotone(const OptimResult& r) {
  for (std::size_t k = 1; k < r.f_history.size(); ++k) {
    CHECK(r.f_history[k] <= r.f_history[k - 1]);
  }
}

}  // namespace

TEST_CASE("L-BFGS on a convex quadratic") {
  const Quadratic q(50, 1);
  LbfgsOptions o;
  o.max_iters = 60;
  o.grad_tol = 1e-11;
  const OptimResult r = lbfgs_minimize(q.fn(), Eigen::VectorXd::Zero(50), o);
  CHECK(r.grad.norm() < 1e-10);
  CHECK(r.iterations <= 60);
  CHECK((r.x - q.b).norm() < 1e-9);
  check_wolfe(r, o.c1, o.c2);
  check_monotone(r);
}

TEST_CASE("L-BFGS on Rosenbrock") {
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  LbfgsOptions o;
  o.max_iters = 100;
  o.f_target = 1e-8;
  const OptimResult r = lbfgs_minimize(rosenbrock, x0, o);
  CHECK(r.f < 1e-8);
  CHECK(r.iterations <= 100);
  check_wolfe(r, o.c1, o.c2);
  check_monotone(r);
  CHECK(r.f_history.size() == static_cast<std::size_t>(r.iterations) + 1);
}

TEST_CASE("first iteration is a steepest-descent step") {
  const Quadratic q(8, 2);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(8);
  Eigen::VectorXd g0(8);
  q.fn()(x0, g0);
  LbfgsOptions o;
  o.max_iters = 1;
  const OptimResult r = lbfgs_minimize(q.fn(), x0, o);
  REQUIRE(r.steps.size() == 1);
  const Eigen::VectorXd step = r.x - x0;
  CHECK((step + r.steps[0].alpha * g0).norm() < 1e-14 * g0.norm());
  CHECK(r.steps[0].dphi0 == Catch::Approx(-g0.squaredNorm()).epsilon(1e-14));
  CHECK(r.status == OptimStatus::max_iters);
}

TEST_CASE("bounds are respected") {
  const Quadratic q(20, 3);
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(20, -0.1);
  const Eigen::VectorXd hi = Eigen::VectorXd::Constant(20, 0.1);
  LbfgsOptions o;
  o.lower = lo;
  o.upper = hi;
  o.max_iters = 200;
  o.grad_tol = 1e-10;
  std::vector<Eigen::VectorXd> visited;
  auto fn = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    visited.push_back(x);
    return q.fn()(x, g);
  };
  const OptimResult r = lbfgs_minimize(fn, Eigen::VectorXd::Zero(20), o);
  for (const auto& x : visited) {
    CHECK((x.array() >= lo.array()).all());
    CHECK((x.array() <= hi.array()).all());
  }
  check_wolfe(r, o.c1, o.c2);
  check_monotone(r);
  // the solution must sit at some bound where the unconstrained optimum is outside
  const Eigen::VectorXd& xs = q.b;
  if (xs.cwiseAbs().maxCoeff() > 0.1) CHECK(r.x.cwiseAbs().maxCoeff() == Catch::Approx(0.1));
  // projected gradient is small at the result
  Eigen::VectorXd pg = r.grad;
  for (int i = 0; i < 20; ++i) {
    if ((r.x(i) <= lo(i) && pg(i) > 0) || (r.x(i) >= hi(i) && pg(i) < 0)) pg(i) = 0;
  }
  CHECK(pg.lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("stopping reasons") {
  const Quadratic q(5, 4);
  SECTION("objective target") {
    LbfgsOptions o;
    o.f_target = 1e300;
    const OptimResult r = lbfgs_minimize(q.fn(), Eigen::VectorXd::Zero(5), o);
    CHECK(r.status == OptimStatus::f_target);
    CHECK(r.iterations == 0);
    CHECK(r.evaluations == 1);
  }
  SECTION("callback") {
    LbfgsOptions o;
    int calls = 0;
    o.on_iteration = [&](const IterationInfo& info) {
      CHECK(info.iteration == calls);
      return ++calls < 3;
    };
    const OptimResult r = lbfgs_minimize(q.fn(), Eigen::VectorXd::Zero(5), o);
    CHECK(r.status == OptimStatus::stopped);
    CHECK(r.iterations == 2);
  }
  SECTION("line search failure keeps the best point") {
    // gradient points the wrong way, so no step decreases f along -g
    auto liar = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
      g = -x - Eigen::VectorXd::Ones(x.size());
      return x.squaredNorm();
    };
    LbfgsOptions o;
    const OptimResult r = lbfgs_minimize(liar, Eigen::VectorXd::Zero(3), o);
    CHECK(r.status == OptimStatus::linesearch_failed);
    CHECK(r.f == 0.0);
    CHECK(r.x.norm() == 0.0);
  }
  CHECK(to_string(OptimStatus::grad_tol) == "grad_tol");
}
