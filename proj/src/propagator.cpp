#include "qoc/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qoc/detail/kernels.hpp"

namespace qoc {

namespace {

// Raw Gershgorin interval of a Hermitian operator: real diagonal plus or minus
// the off-diagonal absolute row sum.
SpectralBounds gershgorin(const SparseMatrix& m) {
  SpectralBounds b{std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity()};
  for (Index r = 0; r < m.outerSize(); ++r) {
    double center = 0.0;
    double radius = 0.0;
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
      if (it.col() == r) {
        center = it.value().real();
      } else {
        radius += std::abs(it.value());
      }
    }
    b.E_min = std::min(b.E_min, center - radius);
    b.E_max = std::max(b.E_max, center + radius);
  }
  return b;
}

SpectralBounds widen(SpectralBounds b, double margin) {
  if (!(margin >= 0.0)) throw ValueError("spectral margin must be non-negative");
  const double w = b.E_max - b.E_min;
  b.E_min -= margin * w;
  b.E_max += margin * w;
  return b;
}

void require_hermitian(bool hermitian) {
  if (!hermitian) {
    throw SpectralRangeError(
        "spectral bounds need a Hermitian generator; use the ODE propagator for "
        "non-Hermitian problems");
  }
}

bool same_dt(double a, double b) { return std::abs(a - b) <= 1e-14 * std::abs(b); }

}  // namespace

SpectralBounds spectral_bounds(const Operator& H, double margin) {
  require_hermitian(H.hermitian());
  return widen(gershgorin(H.matrix()), margin);
}

SpectralBounds spectral_bounds(const ControlGenerator& gen,
                               const PiecewiseControls& controls, double margin) {
  require_hermitian(gen.hermitian());
  if (controls.num_controls() != gen.num_controls()) {
    throw DimensionError("controls do not match the generator");
  }
  Operator H = gen.make_buffer();
  SpectralBounds all{std::numeric_limits<double>::infinity(),
                     -std::numeric_limits<double>::infinity()};
  for (Index i = 0; i < controls.num_intervals(); ++i) {
    const auto eps = controls.row(i);
    gen.evaluate_into(eps, H);
    const SpectralBounds b = gershgorin(H.matrix());
    all.E_min = std::min(all.E_min, b.E_min);
    all.E_max = std::max(all.E_max, b.E_max);
  }
  return widen(all, margin);
}

ChebyCoeffs cheby_coeffs(const SpectralBounds& bounds, double dt, double tol) {
  if (!(tol >= 1e-16)) throw ValueError("Chebychev tolerance below 1e-16 is unreachable");
  if (dt == 0.0 || !std::isfinite(dt)) throw ValueError("time step must be finite and nonzero");
  if (!(bounds.E_max >= bounds.E_min)) throw ValueError("spectral bounds are empty");

  ChebyCoeffs c;
  c.center = bounds.center();
  c.half_width = std::max(bounds.half_width(),
                          1e-8 * std::max(1.0, std::abs(c.center)));
  c.dt = dt;

  const double alpha = c.half_width * dt;
  const double x = std::abs(alpha);
  const double odd_sign = alpha < 0.0 ? -1.0 : 1.0;
  const cplx phase = std::exp(cplx(0.0, -c.center * dt));

  const int hard_limit = static_cast<int>(2.0 * x) + 200;
  double largest = 0.0;
  for (int m = 0; m < hard_limit; ++m) {
    double j = std::cyl_bessel_j(static_cast<double>(m), x);
    if (m % 2 == 1) j *= odd_sign;
    const double weight = m == 0 ? 1.0 : 2.0;
    const double mag = std::abs(weight * j);
    largest = std::max(largest, mag);
    if (m > x && mag < tol * largest) break;
    c.a.push_back(weight * j * phase);
  }
  return c;
}

StateVector cheby_step(const Operator& H, const StateVector& v,
                       const ChebyCoeffs& coeffs) {
  if (H.dim() != v.size()) throw DimensionError("cheby_step: operator and state differ in size");
  StateVector x = v;
  StateVector p0, p1, p2, tmp;
  const SparseMatrix& m = H.matrix();
  detail::chebyshev_propagate(
      coeffs, [&](const StateVector& in, StateVector& out) { out.noalias() = m * in; }, x,
      p0, p1, p2, tmp);
  return x;
}

StateVector ode_step(const Operator& H, const StateVector& v, double dt, double tol) {
  if (H.dim() != v.size()) throw DimensionError("ode_step: operator and state differ in size");
  if (!(tol > 0.0)) throw ValueError("ODE tolerance must be positive");
  StateVector y = v;
  const SparseMatrix& m = H.matrix();
  detail::dopri5_propagate(
      [&](const StateVector& in, StateVector& out) { out.noalias() = m * in; }, y, dt, tol);
  return y;
}

Propagator::Propagator(const ControlGenerator& gen, const TimeGrid& grid,
                       const PiecewiseControls& controls, PropagatorOptions opts)
    : gen_(&gen), grid_(&grid), opts_(opts), reference_controls_(controls) {
  controls.check_shape(grid, gen.num_controls());
  switch (opts_.kind) {
    case PropagatorKind::automatic:
      use_cheby_ = gen.hermitian();
      break;
    case PropagatorKind::cheby:
      require_hermitian(gen.hermitian());
      use_cheby_ = true;
      break;
    case PropagatorKind::ode:
      use_cheby_ = false;
      break;
  }
  if (!gen.hermitian()) {
    std::vector<Operator> adj;
    for (const auto& c : gen.controls()) adj.push_back(c.adjoint());
    adjoint_gen_ = std::make_unique<ControlGenerator>(gen.drift().adjoint(), std::move(adj));
  }
  if (!use_cheby_) return;

  bounds_ = spectral_bounds(gen, controls, opts_.margin);
  interval_slot_.resize(static_cast<std::size_t>(grid.num_intervals()));
  for (Index i = 0; i < grid.num_intervals(); ++i) {
    const double dt = grid.dt(i);
    std::size_t slot = 0;
    for (; slot < coeff_cache_.size(); slot += 2) {
      if (same_dt(dt, coeff_cache_[slot].dt)) break;
    }
    if (slot == coeff_cache_.size()) {
      coeff_cache_.push_back(cheby_coeffs(bounds_, dt, opts_.cheby_tol));
      coeff_cache_.push_back(cheby_coeffs(bounds_, -dt, opts_.cheby_tol));
    }
    interval_slot_[static_cast<std::size_t>(i)] = slot;
  }
}

Propagator::Workspace Propagator::make_workspace() const {
  Workspace ws;
  ws.H = gen_->make_buffer();
  if (adjoint_gen_) ws.H_adjoint = adjoint_gen_->make_buffer();
  return ws;
}

const Operator& Propagator::evaluate(Workspace& ws, std::span<const double> eps,
                                     Direction dir) const {
  if (dir == Direction::backward && adjoint_gen_) {
    adjoint_gen_->evaluate_into(eps, ws.H_adjoint);
    return ws.H_adjoint;
  }
  gen_->evaluate_into(eps, ws.H);
  return ws.H;
}

const std::vector<Operator>& Propagator::control_terms(Direction dir) const {
  if (dir == Direction::backward && adjoint_gen_) return adjoint_gen_->controls();
  return gen_->controls();
}

double Propagator::signed_dt(Index i, Direction dir) const {
  const double dt = grid_->dt(i);
  return dir == Direction::forward ? dt : -dt;
}

const ChebyCoeffs& Propagator::cached(Index i, Direction dir) const {
  const std::size_t slot = interval_slot_.at(static_cast<std::size_t>(i));
  return coeff_cache_[dir == Direction::forward ? slot : slot + 1];
}

const ChebyCoeffs& Propagator::coefficients(Workspace& ws, Index i,
                                            std::span<const double> eps,
                                            Direction dir) const {
  bool reference = true;
  for (Index l = 0; l < reference_controls_.num_controls(); ++l) {
    if (eps[static_cast<std::size_t>(l)] != reference_controls_(i, l)) {
      reference = false;
      break;
    }
  }
  if (reference) return cached(i, dir);
  // The generator was evaluated into ws.H by the caller (Hermitian here, so
  // H and H† share the enclosure).
  const SpectralBounds local = gershgorin(ws.H.matrix());
  if (bounds_.contains(local)) return cached(i, dir);
  ws.local_coeffs =
      cheby_coeffs(widen(local, opts_.margin), signed_dt(i, dir), opts_.cheby_tol);
  return ws.local_coeffs;
}

void Propagator::step(Workspace& ws, Index i, std::span<const double> eps,
                      Direction dir, StateVector& v) const {
  const Operator& H = evaluate(ws, eps, dir);
  if (H.dim() != v.size()) throw DimensionError("state does not match the generator");
  const SparseMatrix& m = H.matrix();
  auto apply_h = [&](const StateVector& in, StateVector& out) { out.noalias() = m * in; };
  if (use_cheby_) {
    const ChebyCoeffs& c = coefficients(ws, i, eps, dir);
    detail::chebyshev_propagate(c, apply_h, v, ws.vec_scratch[0], ws.vec_scratch[1],
                                ws.vec_scratch[2], ws.vec_scratch[3]);
  } else {
    detail::dopri5_propagate(apply_h, v, signed_dt(i, dir), opts_.ode_tol);
  }
}

Trajectory propagate(const ControlGenerator& gen, const PiecewiseControls& controls,
                     const TimeGrid& grid, const StateVector& v0, Direction dir,
                     bool store, const PropagatorOptions& opts) {
  validate_state(v0, "initial state");
  if (v0.size() != gen.dim()) throw DimensionError("initial state does not match the generator");
  const Propagator prop(gen, grid, controls, opts);
  auto ws = prop.make_workspace();
  const Index nt = grid.num_intervals();

  Trajectory traj;
  traj.states.resize(v0.size(), store ? nt + 1 : 1);
  StateVector v = v0;
  auto record = [&](Index n) {
    if (store) traj.states.col(n) = v;
  };

  if (dir == Direction::forward) {
    record(0);
    for (Index i = 0; i < nt; ++i) {
      const auto eps = controls.row(i);
      try {
        prop.step(ws, i, eps, dir, v);
      } catch (const PropagationError&) {
        throw;
      } catch (const Error& e) {
        throw PropagationError(std::string(e.what()) + " (interval " +
                                   std::to_string(i + 1) + ")",
                               i + 1);
      }
      record(i + 1);
    }
  } else {
    record(nt);
    for (Index i = nt - 1; i >= 0; --i) {
      const auto eps = controls.row(i);
      try {
        prop.step(ws, i, eps, dir, v);
      } catch (const PropagationError&) {
        throw;
      } catch (const Error& e) {
        throw PropagationError(std::string(e.what()) + " (interval " +
                                   std::to_string(i + 1) + ")",
                               i + 1);
      }
      record(i);
    }
  }
  if (!store) traj.states.col(0) = v;
  return traj;
}

}  // namespace qoc
