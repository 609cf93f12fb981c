#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qoc {

/// Returns f(x) and writes ∇f(x) into `grad` (already sized like x).
using ValueGrad = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// One accepted line-search step: φ(α) = f(x + α·d).
struct LineSearchRecord {
  double phi0 = 0.0;
  double dphi0 = 0.0;
  double alpha = 0.0;
  double phi = 0.0;
  double dphi = 0.0;
  int trials = 0;
  /// False if the step was cut at a bound and only sufficient decrease holds.
  bool curvature_checked = true;
};

struct IterationInfo {
  int iteration = 0;
  double f = 0.0;
  double grad_inf = 0.0;
  int evaluations = 0;
};

struct LbfgsOptions {
  int history = 10;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_iters = 100;
  int max_linesearch = 20;
  /// Stop when the (projected) gradient inf-norm falls below this.
  double grad_tol = 0.0;
  /// Stop when f falls below this.
  double f_target = -std::numeric_limits<double>::infinity();
  std::optional<Eigen::VectorXd> lower;
  std::optional<Eigen::VectorXd> upper;
  /// Called after the initial point and every accepted iterate; returning
  /// false stops the run.
  std::function<bool(const IterationInfo&)> on_iteration;
};

enum class OptimStatus {
  max_iters,
  grad_tol,
  f_target,
  linesearch_failed,
  stopped,
};

std::string to_string(OptimStatus s);

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  int evaluations = 0;
  OptimStatus status = OptimStatus::max_iters;
  /// f at the initial point and at every accepted iterate.
  std::vector<double> f_history;
  std::vector<LineSearchRecord> steps;
};

/// Limited-memory BFGS with a strong-Wolfe line search. Box bounds, when
/// given, are enforced by projecting the search direction and clipping.
OptimResult lbfgs_minimize(const ValueGrad& value_grad, const Eigen::VectorXd& x0,
                           const LbfgsOptions& opts = {});

}  // namespace qoc
