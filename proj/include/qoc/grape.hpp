#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qoc/core.hpp"
#include "qoc/functionals.hpp"
#include "qoc/optim.hpp"
#include "qoc/propagator.hpp"

namespace qoc {

/// One initial state to be steered, with an optional target (required in
/// overlap mode) and the generator it evolves under.
struct Objective {
  StateVector initial;
  std::optional<StateVector> target;
  std::shared_ptr<const ControlGenerator> generator;
};

/// Objectives |φ_k⟩ = basis_k with targets Σ_i U_ik |basis_i⟩.
std::vector<Objective> gate_objectives(std::shared_ptr<const ControlGenerator> gen,
                                       const std::vector<StateVector>& basis,
                                       const GateMatrix& target);

struct GradOptions {
  PropagatorOptions propagator;
  /// Worker threads over objectives; 0 means one per objective.
  int workers = 1;
};

struct GradResult {
  double J = 0.0;
  double J_T = 0.0;
  /// ∂J/∂ε_nl, shaped like the controls.
  Eigen::MatrixXd grad;
  /// ⟨φ_k^tgt|Ψ_k(T)⟩ for objectives that have a target.
  std::vector<cplx> tau;
  std::vector<StateVector> final_states;
  /// State vectors held during the evaluation, and their complex entries.
  std::size_t stored_states = 0;
  std::size_t stored_entries = 0;
};

/// Exact gradient of J = J_T + running costs: forward propagation with
/// storage, costates from the functional, backward extended-state
/// propagation with overlap extraction per interval.
GradResult grape_gradient(const std::vector<Objective>& objectives,
                          const PiecewiseControls& controls, const TimeGrid& grid,
                          const FunctionalSpec& functional, const GradOptions& opts = {});

/// J alone, by forward propagation (with storage only if a state-dependent
/// running cost needs it).
double evaluate_functional(const std::vector<Objective>& objectives,
                           const PiecewiseControls& controls, const TimeGrid& grid,
                           const FunctionalSpec& functional, const GradOptions& opts = {});

/// First-order approximation −2·dt_n·Im Σ_k ⟨χ_k|H⁽ˡ⁾|Ψ_k⟩ with both states
/// taken at the interval midpoints. Diagnostic only.
Eigen::MatrixXd continuous_limit_gradient(const std::vector<Objective>& objectives,
                                          const PiecewiseControls& controls,
                                          const TimeGrid& grid,
                                          const FunctionalSpec& functional,
                                          const GradOptions& opts = {});

/// One row of the convergence log.
struct ConvergenceRecord {
  int iteration = 0;
  double J = 0.0;
  double grad_inf = 0.0;
  int grad_evals = 0;
  double seconds_per_gradient = 0.0;
};

struct ConvergenceCriteria {
  int max_iters = 100;
  /// Stop once J is at or below this.
  double J_target = -std::numeric_limits<double>::infinity();
  double grad_tol = 0.0;
};

struct ControlResult {
  PiecewiseControls controls;
  double J = 0.0;
  int iterations = 0;
  int grad_evals = 0;
  std::string status;
  std::vector<ConvergenceRecord> history;
};

struct GrapeOptions {
  GradOptions grad;
  int history = 10;
  double c1 = 1e-4;
  double c2 = 0.9;
  /// Optional box on every control value.
  std::optional<double> lower;
  std::optional<double> upper;
  std::function<void(const ConvergenceRecord&)> on_record;
};

ControlResult run_grape(const std::vector<Objective>& objectives,
                        const PiecewiseControls& guess, const TimeGrid& grid,
                        const FunctionalSpec& functional, const ConvergenceCriteria& stop,
                        const GrapeOptions& opts = {});

namespace detail {

/// Runs fn(k) for k in [0, count) on up to `workers` threads.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

/// Propagators shared by objectives with the same generator.
struct PropagatorSet {
  std::vector<std::unique_ptr<Propagator>> props;
  std::vector<std::size_t> index;  // objective -> props slot

  const Propagator& operator[](std::size_t k) const { return *props[index[k]]; }
};

PropagatorSet make_propagators(const std::vector<Objective>& objectives,
                               const TimeGrid& grid, const PiecewiseControls& controls,
                               const PropagatorOptions& opts);

void check_objectives(const std::vector<Objective>& objectives, const TimeGrid& grid,
                      const PiecewiseControls& controls, const FunctionalSpec& functional);

/// χ_k(T) for every objective from the final states (the functional's own
/// mode; overlap mode converted to state form).
std::vector<StateVector> boundary_costates(const std::vector<Objective>& objectives,
                                           const FunctionalSpec& functional,
                                           const std::vector<StateVector>& final_states);

}  // namespace detail

}  // namespace qoc
