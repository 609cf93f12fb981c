#include "qoc/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "qoc/error.hpp"

namespace qoc {

using Index = Eigen::Index;

std::string to_string(OptimStatus s) {
  switch (s) {
    case OptimStatus::max_iters:
      return "max_iters";
    case OptimStatus::grad_tol:
      return "grad_tol";
    case OptimStatus::f_target:
      return "f_target";
    case OptimStatus::linesearch_failed:
      return "linesearch_failed";
    case OptimStatus::stopped:
      return "stopped";
  }
  return "unknown";
}

namespace {

struct Bounds {
  const Eigen::VectorXd* lo = nullptr;
  const Eigen::VectorXd* hi = nullptr;

  bool active() const { return lo || hi; }

  static bool near(double x, double bound) {
    return std::abs(x - bound) <= 1e-12 * (1.0 + std::abs(bound));
  }

  // Clips into the box and snaps components within rounding of a bound onto
  // it, so that a step cut at the box leaves them exactly active.
  void clip(Eigen::VectorXd& x) const {
    for (Index i = 0; i < x.size(); ++i) {
      if (lo && (x(i) < (*lo)(i) || near(x(i), (*lo)(i)))) x(i) = (*lo)(i);
      if (hi && (x(i) > (*hi)(i) || near(x(i), (*hi)(i)))) x(i) = (*hi)(i);
    }
  }

  // A component is blocked if it sits on a bound and `v` points outward.
  bool blocked(const Eigen::VectorXd& x, const Eigen::VectorXd& v, Index i) const {
    return (lo && x(i) <= (*lo)(i) && v(i) < 0.0) || (hi && x(i) >= (*hi)(i) && v(i) > 0.0);
  }

  // Zeroes the components of a step direction that would leave the box.
  void project_direction(const Eigen::VectorXd& x, Eigen::VectorXd& d) const {
    if (!active()) return;
    for (Index i = 0; i < d.size(); ++i) {
      if (blocked(x, d, i)) d(i) = 0.0;
    }
  }

  Eigen::VectorXd projected_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g) const {
    Eigen::VectorXd pg = g;
    if (!active()) return pg;
    for (Index i = 0; i < g.size(); ++i) {
      if (blocked(x, -g, i)) pg(i) = 0.0;
    }
    return pg;
  }

  double max_step(const Eigen::VectorXd& x, const Eigen::VectorXd& d) const {
    double a = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < d.size(); ++i) {
      if (d(i) > 0.0 && hi) a = std::min(a, ((*hi)(i) - x(i)) / d(i));
      if (d(i) < 0.0 && lo) a = std::min(a, ((*lo)(i) - x(i)) / d(i));
    }
    return std::max(a, 0.0);
  }
};

struct Point {
  double alpha = 0.0;
  double phi = 0.0;
  double dphi = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd g;
};

// Minimizer of the cubic through (a, fa, da) and (b, fb, db), safeguarded
// into the inner 80% of the bracket; bisection if the cubic has no minimum.
double cubic_step(const Point& a, const Point& b) {
  const double lo = std::min(a.alpha, b.alpha);
  const double hi = std::max(a.alpha, b.alpha);
  const double width = hi - lo;
  const double d1 = a.dphi + b.dphi - 3.0 * (a.phi - b.phi) / (a.alpha - b.alpha);
  const double disc = d1 * d1 - a.dphi * b.dphi;
  double t = 0.5 * (lo + hi);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
    const double denom = b.dphi - a.dphi + 2.0 * d2;
    if (denom != 0.0) {
      const double c = b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / denom;
      if (std::isfinite(c)) t = c;
    }
  }
  return std::clamp(t, lo + 0.1 * width, hi - 0.1 * width);
}

}  // namespace

OptimResult lbfgs_minimize(const ValueGrad& value_grad, const Eigen::VectorXd& x0,
                           const LbfgsOptions& opts) {
  const Index n = x0.size();
  Bounds box;
  if (opts.lower) {
    if (opts.lower->size() != n) throw DimensionError("lower bound has wrong length");
    box.lo = &*opts.lower;
  }
  if (opts.upper) {
    if (opts.upper->size() != n) throw DimensionError("upper bound has wrong length");
    box.hi = &*opts.upper;
  }
  if (opts.history < 1) throw ValueError("L-BFGS history must be at least 1");
  if (!(opts.c1 > 0.0 && opts.c1 < opts.c2 && opts.c2 < 1.0)) {
    throw ValueError("Wolfe constants need 0 < c1 < c2 < 1");
  }

  OptimResult res;
  res.x = x0;
  box.clip(res.x);
  res.grad.resize(n);

  auto evaluate = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(n);
    const double f = value_grad(x, g);
    ++res.evaluations;
    if (!std::isfinite(f) || !g.allFinite()) {
      throw ValueError("objective returned a non-finite value or gradient");
    }
    return f;
  };

  res.f = evaluate(res.x, res.grad);
  res.f_history.push_back(res.f);

  std::deque<Eigen::VectorXd> S, Y;
  std::deque<double> rho;

  auto report = [&]() {
    const Eigen::VectorXd pg = box.projected_gradient(res.x, res.grad);
    const double ginf = pg.size() ? pg.lpNorm<Eigen::Infinity>() : 0.0;
    if (opts.on_iteration &&
        !opts.on_iteration({res.iterations, res.f, ginf, res.evaluations})) {
      res.status = OptimStatus::stopped;
      return true;
    }
    if (res.f <= opts.f_target) {
      res.status = OptimStatus::f_target;
      return true;
    }
    if (ginf <= opts.grad_tol) {
      res.status = OptimStatus::grad_tol;
      return true;
    }
    if (res.iterations >= opts.max_iters) {
      res.status = OptimStatus::max_iters;
      return true;
    }
    return false;
  };

  if (report()) return res;

  while (true) {
    const Eigen::VectorXd pg = box.projected_gradient(res.x, res.grad);

    // Two-loop recursion restricted to the free variables: components held at
    // a bound by the gradient are masked out of the correction pairs too.
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(n);
    for (Index i = 0; i < n; ++i) {
      if (pg(i) == 0.0 && res.grad(i) != 0.0) mask(i) = 0.0;
    }
    const bool masked = box.active() && mask.sum() < static_cast<double>(n);
    std::vector<Eigen::VectorXd> Sm, Ym;
    std::vector<double> rm;
    for (std::size_t j = 0; j < S.size(); ++j) {
      if (!masked) {
        Sm.push_back(S[j]);
        Ym.push_back(Y[j]);
        rm.push_back(rho[j]);
        continue;
      }
      Eigen::VectorXd sj = S[j].cwiseProduct(mask), yj = Y[j].cwiseProduct(mask);
      const double sy = sj.dot(yj);
      if (sy > 0.0) {
        Sm.push_back(std::move(sj));
        Ym.push_back(std::move(yj));
        rm.push_back(1.0 / sy);
      }
    }
    Eigen::VectorXd q = pg;
    std::vector<double> a(Sm.size());
    for (std::size_t j = Sm.size(); j-- > 0;) {
      a[j] = rm[j] * Sm[j].dot(q);
      q -= a[j] * Ym[j];
    }
    if (!Sm.empty()) q *= Sm.back().dot(Ym.back()) / Ym.back().squaredNorm();
    for (std::size_t j = 0; j < Sm.size(); ++j) {
      const double b = rm[j] * Ym[j].dot(q);
      q += (a[j] - b) * Sm[j];
    }
    Eigen::VectorXd d = -q;
    box.project_direction(res.x, d);
    double slope = res.grad.dot(d);
    if (!(slope < 0.0)) {
      d = -pg;
      box.project_direction(res.x, d);
      slope = res.grad.dot(d);
      S.clear();
      Y.clear();
      rho.clear();
    }
    if (!(slope < 0.0)) {
      res.status = OptimStatus::grad_tol;
      return res;
    }

    // Strong-Wolfe line search while the step stays inside the box; a first
    // trial that leaves it switches to backtracking along the clipped path.
    const double alpha_free = box.max_step(res.x, d);
    double alpha = S.empty() ? 1.0 / d.norm() : 1.0;

    const Point p0{0.0, res.f, slope, res.x, res.grad};
    int trials = 0;
    auto probe = [&](double t) {
      Point p;
      p.alpha = t;
      p.x = res.x + t * d;
      box.clip(p.x);
      p.phi = evaluate(p.x, p.g);
      p.dphi = p.g.dot(d);
      ++trials;
      return p;
    };
    auto armijo = [&](const Point& p) { return p.phi <= p0.phi + opts.c1 * p.alpha * p0.dphi; };
    auto curvature = [&](const Point& p) { return std::abs(p.dphi) <= -opts.c2 * p0.dphi; };

    std::optional<Point> accepted;
    bool curvature_checked = true;
    auto zoom = [&](Point lo, Point hi) {
      while (trials < opts.max_linesearch) {
        const Point p = probe(cubic_step(lo, hi));
        if (!armijo(p) || p.phi >= lo.phi) {
          hi = p;
        } else {
          if (curvature(p)) return p;
          if (p.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
          lo = p;
        }
      }
      return lo;  // best point satisfying sufficient decrease, possibly alpha 0
    };

    if (alpha > alpha_free) {
      curvature_checked = false;
      Point best = p0;
      while (trials < opts.max_linesearch) {
        const Point p = probe(alpha);
        const double predicted = res.grad.dot(p.x - res.x);
        if (p.phi <= p0.phi + opts.c1 * std::min(predicted, 0.0) && p.phi < p0.phi) {
          accepted = p;
          break;
        }
        if (p.phi < best.phi) best = p;
        alpha *= 0.5;
      }
      if (!accepted) accepted = best;
    } else {
      Point prev = p0;
      while (trials < opts.max_linesearch) {
        const Point p = probe(alpha);
        if (!armijo(p) || (trials > 1 && p.phi >= prev.phi)) {
          accepted = zoom(prev, p);
          break;
        }
        if (curvature(p)) {
          accepted = p;
          break;
        }
        if (p.dphi >= 0.0) {
          accepted = zoom(p, prev);
          break;
        }
        if (alpha >= alpha_free) {
          accepted = p;  // cut at the box; curvature cannot be enforced
          curvature_checked = false;
          break;
        }
        prev = p;
        alpha = std::min(2.0 * alpha, alpha_free);
      }
      if (!accepted) accepted = prev;
    }

    const bool wolfe = accepted->alpha > 0.0 &&
                       (curvature_checked ? armijo(*accepted) && curvature(*accepted)
                                          : accepted->phi < p0.phi);
    if (!(accepted->alpha > 0.0) || accepted->phi > res.f) {
      res.status = OptimStatus::linesearch_failed;
      return res;
    }

    const Eigen::VectorXd s = accepted->x - res.x;
    const Eigen::VectorXd y = accepted->g - res.grad;
    res.steps.push_back({p0.phi, p0.dphi, accepted->alpha, accepted->phi, accepted->dphi,
                         trials, curvature_checked});
    res.x = accepted->x;
    res.f = accepted->phi;
    res.grad = accepted->g;
    ++res.iterations;
    res.f_history.push_back(res.f);

    const double sy = s.dot(y);
    if (sy > 0.0) {
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > opts.history) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }

    if (!wolfe) {
      // Best point of a failed search: keep it, then stop.
      res.status = OptimStatus::linesearch_failed;
      if (opts.on_iteration) {
        const Eigen::VectorXd pgn = box.projected_gradient(res.x, res.grad);
        opts.on_iteration(
            {res.iterations, res.f, pgn.lpNorm<Eigen::Infinity>(), res.evaluations});
      }
      return res;
    }
    if (report()) return res;
  }
}

}  // namespace qoc
