#pragma once

#include <memory>
#include <span>
#include <vector>

#include "qoc/core.hpp"

namespace qoc {

/// Real interval [E_min, E_max] enclosing the spectrum of a Hermitian generator.
struct SpectralBounds {
  double E_min = 0.0;
  double E_max = 0.0;

  double center() const noexcept { return 0.5 * (E_min + E_max); }
  double half_width() const noexcept { return 0.5 * (E_max - E_min); }
  bool contains(const SpectralBounds& other) const noexcept {
    return other.E_min >= E_min && other.E_max <= E_max;
  }
};

/// Gershgorin enclosure of a single Hermitian operator, widened on both sides
/// by `margin` times the width.
SpectralBounds spectral_bounds(const Operator& H, double margin = 0.05);

/// Enclosure valid for H(ε_i) on every interval of `controls`.
SpectralBounds spectral_bounds(const ControlGenerator& gen,
                               const PiecewiseControls& controls,
                               double margin = 0.05);

/// Chebychev expansion of exp(-i x dt) for x in the bounds.
///
/// `a[m]` multiplies Φ_m = (-i)^m T_m(H_norm)Ψ with
/// H_norm = (H - center)/half_width; the global phase exp(-i·center·dt) is
/// folded into the coefficients.
struct ChebyCoeffs {
  std::vector<cplx> a;
  double center = 0.0;
  double half_width = 0.0;
  double dt = 0.0;

  Index cutoff() const noexcept { return static_cast<Index>(a.size()); }
};

/// Coefficients truncated where |a_m| < tol·max|a_m| beyond the Bessel
/// turning point. dt may be negative (backward step). tol < 1e-16 throws.
ChebyCoeffs cheby_coeffs(const SpectralBounds& bounds, double dt, double tol = 1e-15);

/// U·v = exp(-i H dt)·v by the Chebychev three-term recursion.
/// Throws SpectralRangeError if the recursion diverges (bounds too narrow).
StateVector cheby_step(const Operator& H, const StateVector& v,
                       const ChebyCoeffs& coeffs);

/// Solves dv/dt = -i H v over [0, dt] with adaptive Dormand-Prince 5(4).
/// Works for any square generator.
StateVector ode_step(const Operator& H, const StateVector& v, double dt,
                     double tol = 1e-10);

enum class Direction { forward, backward };

enum class PropagatorKind {
  automatic,  ///< Chebychev if the generator is Hermitian, ODE otherwise
  cheby,
  ode,
};

struct PropagatorOptions {
  PropagatorKind kind = PropagatorKind::automatic;
  double margin = 0.05;
  double cheby_tol = 1e-15;
  double ode_tol = 1e-10;
};

/// Step-by-step propagation under a ControlGenerator on a TimeGrid.
///
/// Holds everything that is shared read-only between workers (spectral
/// bounds, Chebychev coefficients per signed time step, adjoint control
/// terms). Mutable buffers live in a Workspace, one per worker.
class Propagator {
 public:
  struct Workspace {
    Operator H;
    Operator H_adjoint;
    ChebyCoeffs local_coeffs;
    StateVector vec_scratch[4];
    Eigen::MatrixXcd block_scratch[4];
  };

  Propagator(const ControlGenerator& gen, const TimeGrid& grid,
             const PiecewiseControls& controls, PropagatorOptions opts = {});

  const ControlGenerator& generator() const noexcept { return *gen_; }
  const TimeGrid& grid() const noexcept { return *grid_; }
  const PropagatorOptions& options() const noexcept { return opts_; }
  bool uses_chebychev() const noexcept { return use_cheby_; }
  const SpectralBounds& bounds() const noexcept { return bounds_; }

  Workspace make_workspace() const;

  /// Propagates `v` through interval i with control values `eps`:
  /// forward applies U_i, backward applies U_i†.
  void step(Workspace& ws, Index i, std::span<const double> eps, Direction dir,
            StateVector& v) const;

  /// H_i (forward) or H_i† (backward), evaluated into the workspace.
  const Operator& evaluate(Workspace& ws, std::span<const double> eps,
                           Direction dir) const;
  /// Control terms as they enter the generator for `dir` (adjoints backward).
  const std::vector<Operator>& control_terms(Direction dir) const;
  /// Signed time step of interval i for `dir`.
  double signed_dt(Index i, Direction dir) const;
  /// Coefficients for the operator last evaluated into `ws`. Uses the shared
  /// cache when the interval's Gershgorin enclosure fits the global bounds,
  /// otherwise computes local coefficients in `ws`.
  const ChebyCoeffs& coefficients(Workspace& ws, Index i,
                                  std::span<const double> eps,
                                  Direction dir) const;

 private:
  const ChebyCoeffs& cached(Index i, Direction dir) const;

  const ControlGenerator* gen_;
  const TimeGrid* grid_;
  PropagatorOptions opts_;
  bool use_cheby_ = false;
  SpectralBounds bounds_;
  PiecewiseControls reference_controls_;
  // Adjoint generator, only for non-Hermitian problems.
  std::unique_ptr<ControlGenerator> adjoint_gen_;
  // Forward coefficients of each distinct time step; backward ones follow
  // at slot + 1. interval_slot_[i] is the forward slot of interval i.
  std::vector<ChebyCoeffs> coeff_cache_;
  std::vector<std::size_t> interval_slot_;
};

/// Stored states of one propagation. Column n is the state at t_n when all
/// states were stored, otherwise a single column with the final state.
struct Trajectory {
  Eigen::MatrixXcd states;

  Index size() const noexcept { return states.cols(); }
  StateVector state(Index n) const { return states.col(n); }
};

/// Forward: Ψ(t_n) = U_n···U_1 v0. Backward: v0 is taken at T and the states
/// U†_{n+1}···U†_{N_T} v0 are produced. With `store`, all N_T+1 states are
/// kept (indexed by grid point); otherwise only the final one.
Trajectory propagate(const ControlGenerator& gen, const PiecewiseControls& controls,
                     const TimeGrid& grid, const StateVector& v0, Direction dir,
                     bool store, const PropagatorOptions& opts = {});

}  // namespace qoc
