#pragma once

#include <functional>
#include <vector>

#include "qoc/grape.hpp"

namespace qoc {

struct KrotovParams {
  /// Inverse step size; must be positive.
  double lambda_a = 1.0;
  /// Update shape S_n in [0, 1] per interval; empty selects
  /// flattop_update_shape().
  Eigen::VectorXd shape;
};

/// sin² ramps over the first and last 10% of the grid, 1 in between,
/// sampled at interval midpoints.
Eigen::VectorXd flattop_update_shape(const TimeGrid& grid, double ramp_fraction = 0.1);

struct KrotovStep {
  PiecewiseControls controls;
  double J_before = 0.0;
  double J_after = 0.0;
};

/// One first-order Krotov iteration: costates propagated backward under the
/// guess and stored, then a sequential forward sweep in which interval n
/// gets Δε_nl = (S_n/λ_a)·Im Σ_k ⟨χ_k(t_{n−1})|H⁽ˡ⁾|Ψ_k(t_{n−1})⟩ with Ψ
/// propagated under the already updated controls. J values are J_T only;
/// running costs in `functional` are rejected.
KrotovStep krotov_iterate(const std::vector<Objective>& objectives,
                          const PiecewiseControls& guess, const TimeGrid& grid,
                          const FunctionalSpec& functional, const KrotovParams& params,
                          const GradOptions& opts = {});

ControlResult run_krotov(const std::vector<Objective>& objectives,
                         const PiecewiseControls& guess, const TimeGrid& grid,
                         const FunctionalSpec& functional, const KrotovParams& params,
                         const ConvergenceCriteria& stop, const GradOptions& opts = {},
                         const std::function<void(const ConvergenceRecord&)>& on_record = {});

}  // namespace qoc
