#include "qoc/grape.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <thread>

#include "qoc/gradgen.hpp"

namespace qoc {

std::vector<Objective> gate_objectives(std::shared_ptr<const ControlGenerator> gen,
                                       const std::vector<StateVector>& basis,
                                       const GateMatrix& target) {
  if (basis.size() != 4) throw DimensionError("gate objectives need a four-state basis");
  std::vector<Objective> objs;
  for (Index k = 0; k < 4; ++k) {
    StateVector tgt = StateVector::Zero(basis[0].size());
    for (Index i = 0; i < 4; ++i) tgt += target(i, k) * basis[static_cast<std::size_t>(i)];
    objs.push_back({basis[static_cast<std::size_t>(k)], tgt, gen});
  }
  return objs;
}

namespace detail {

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  std::size_t n_threads = workers <= 0 ? count : static_cast<std::size_t>(workers);
  n_threads = std::min(n_threads, count);
  std::vector<std::exception_ptr> errors(count);
  auto guarded = [&](std::size_t k) {
    try {
      fn(k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  if (n_threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) guarded(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < count; k = next++) guarded(k);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

PropagatorSet make_propagators(const std::vector<Objective>& objectives,
                               const TimeGrid& grid, const PiecewiseControls& controls,
                               const PropagatorOptions& opts) {
  PropagatorSet set;
  std::vector<const ControlGenerator*> seen;
  for (const auto& obj : objectives) {
    const ControlGenerator* g = obj.generator.get();
    auto it = std::find(seen.begin(), seen.end(), g);
    if (it == seen.end()) {
      seen.push_back(g);
      set.props.push_back(std::make_unique<Propagator>(*g, grid, controls, opts));
      set.index.push_back(seen.size() - 1);
    } else {
      set.index.push_back(static_cast<std::size_t>(it - seen.begin()));
    }
  }
  return set;
}

void check_objectives(const std::vector<Objective>& objectives, const TimeGrid& grid,
                      const PiecewiseControls& controls, const FunctionalSpec& functional) {
  if (objectives.empty()) throw ValueError("at least one objective is required");
  const Index L = controls.num_controls();
  for (std::size_t k = 0; k < objectives.size(); ++k) {
    const auto& obj = objectives[k];
    if (!obj.generator) throw ValueError("objective " + std::to_string(k) + " has no generator");
    validate_state(obj.initial, "objective initial state");
    if (obj.initial.size() != obj.generator->dim()) {
      throw DimensionError("objective " + std::to_string(k) +
                           ": initial state does not match the generator");
    }
    if (obj.generator->num_controls() != L) {
      throw DimensionError("objectives must share the control set");
    }
    if (functional.mode == FunctionalMode::overlap) {
      if (!obj.target) throw ValueError("overlap mode needs a target for every objective");
      if (obj.target->size() != obj.initial.size()) {
        throw DimensionError("objective " + std::to_string(k) + ": target has wrong dimension");
      }
    }
  }
  controls.check_shape(grid, L);
  if (functional.mode == FunctionalMode::gate && objectives.size() != 4) {
    throw ValueError("gate mode needs exactly four objectives");
  }
  if (functional.forbidden && functional.forbidden->D.dim() != objectives[0].initial.size()) {
    throw DimensionError("forbidden-subspace projector has wrong dimension");
  }
}

std::vector<StateVector> boundary_costates(const std::vector<Objective>& objectives,
                                           const FunctionalSpec& functional,
                                           const std::vector<StateVector>& final_states) {
  switch (functional.mode) {
    case FunctionalMode::overlap: {
      std::vector<cplx> tau;
      std::vector<StateVector> targets;
      for (std::size_t k = 0; k < objectives.size(); ++k) {
        targets.push_back(*objectives[k].target);
        tau.push_back(inner(targets.back(), final_states[k]));
      }
      return chi_from_overlaps(functional, tau, targets);
    }
    case FunctionalMode::state:
      return chi_from_states(functional, final_states);
    case FunctionalMode::gate:
      return chi_from_gate(functional, extract_gate(final_states, functional.logical_basis),
                           functional.logical_basis);
  }
  return {};
}

}  // namespace detail

namespace {

using detail::PropagatorSet;

std::vector<StateVector> targets_of(const std::vector<Objective>& objectives) {
  std::vector<StateVector> t;
  for (const auto& o : objectives) {
    if (o.target) t.push_back(*o.target);
  }
  return t;
}

PropagationError annotate(const Error& e, std::size_t k, Index interval) {
  return PropagationError(std::string(e.what()) + " (objective " + std::to_string(k) +
                              ", interval " + std::to_string(interval + 1) + ")",
                          interval + 1, static_cast<std::ptrdiff_t>(k));
}

// Forward propagation of objective k; all N_T+1 states if `store`.
Eigen::MatrixXcd forward(const Propagator& prop, const PiecewiseControls& controls,
                         const StateVector& v0, std::size_t k, bool store) {
  const Index nt = controls.num_intervals();
  Eigen::MatrixXcd traj(v0.size(), store ? nt + 1 : 1);
  auto ws = prop.make_workspace();
  StateVector v = v0;
  if (store) traj.col(0) = v;
  for (Index i = 0; i < nt; ++i) {
    const auto eps = controls.row(i);
    try {
      prop.step(ws, i, eps, Direction::forward, v);
    } catch (const Error& e) {
      throw annotate(e, k, i);
    }
    if (store) traj.col(i + 1) = v;
  }
  if (!store) traj.col(0) = v;
  return traj;
}

double running_costs(const FunctionalSpec& functional, const PiecewiseControls& controls,
                     const TimeGrid& grid, const std::vector<Eigen::MatrixXcd>& traj,
                     Eigen::MatrixXd* grad, ForbiddenValue* forbidden) {
  double J = 0.0;
  if (functional.lambda_a) {
    const auto ca = run_cost_a_l2(controls, *functional.lambda_a, grid);
    J += ca.value;
    if (grad) *grad += ca.grad;
  }
  if (functional.forbidden) {
    auto fb = run_cost_b_forbidden(traj, functional.forbidden->D,
                                   functional.forbidden->lambda_b, grid);
    J += fb.value;
    if (forbidden) *forbidden = std::move(fb);
  }
  return J;
}

}  // namespace

GradResult grape_gradient(const std::vector<Objective>& objectives,
                          const PiecewiseControls& controls, const TimeGrid& grid,
                          const FunctionalSpec& functional, const GradOptions& opts) {
  detail::check_objectives(objectives, grid, controls, functional);
  const std::size_t N = objectives.size();
  const Index nt = grid.num_intervals();
  const Index L = controls.num_controls();
  const PropagatorSet props =
      detail::make_propagators(objectives, grid, controls, opts.propagator);

  std::vector<Eigen::MatrixXcd> traj(N);
  detail::parallel_for(N, opts.workers, [&](std::size_t k) {
    traj[k] = forward(props[k], controls, objectives[k].initial, k, true);
  });

  GradResult res;
  res.grad = Eigen::MatrixXd::Zero(nt, L);
  for (const auto& t : traj) res.final_states.emplace_back(t.col(nt));
  for (const auto& t : traj) {
    res.stored_states += static_cast<std::size_t>(t.cols());
    res.stored_entries += static_cast<std::size_t>(t.size());
  }
  const std::vector<StateVector> targets = targets_of(objectives);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    res.tau.push_back(inner(targets[k], res.final_states[k]));
  }

  res.J_T = eval_J_T(functional, res.final_states, targets);
  ForbiddenValue fb;
  res.J = res.J_T + running_costs(functional, controls, grid, traj, &res.grad, &fb);

  // Overlap mode without state-dependent costs combines ∇τ with ∇_τ J
  // directly; everything else goes through χ_k(T).
  const bool direct_overlap = functional.mode == FunctionalMode::overlap && !functional.forbidden;
  std::vector<StateVector> chi_T;
  std::vector<cplx> dJ_dtau;
  if (direct_overlap) {
    chi_T = targets;
    dJ_dtau = overlap_gradient(functional, res.tau);
  } else {
    chi_T = detail::boundary_costates(objectives, functional, res.final_states);
    if (functional.forbidden) {
      for (std::size_t k = 0; k < N; ++k) chi_T[k] += fb.xi[k].col(nt);
    }
  }

  std::vector<Eigen::MatrixXd> contrib(N);
  detail::parallel_for(N, opts.workers, [&](std::size_t k) {
    const Propagator& prop = props[k];
    auto ws = prop.make_workspace();
    ExtendedState x = ExtendedState::from_base(chi_T[k], L);
    Eigen::MatrixXcd dtau(nt, L);
    for (Index i = nt - 1; i >= 0; --i) {
      const auto eps = controls.row(i);
      try {
        grad_step(prop, ws, i, eps, Direction::backward, x);
      } catch (const Error& e) {
        throw annotate(e, k, i);
      }
      for (Index l = 0; l < L; ++l) dtau(i, l) = x.grad_block(l).dot(traj[k].col(i));
      zero_grad_blocks(x);
      if (functional.forbidden) x.base() += fb.xi[k].col(i);
    }
    if (direct_overlap) {
      const cplx g = dJ_dtau[k];
      contrib[k] = g.real() * dtau.real() + g.imag() * dtau.imag();
    } else {
      contrib[k] = -2.0 * dtau.real();
    }
  });
  for (const auto& c : contrib) res.grad += c;
  return res;
}

double evaluate_functional(const std::vector<Objective>& objectives,
                           const PiecewiseControls& controls, const TimeGrid& grid,
                           const FunctionalSpec& functional, const GradOptions& opts) {
  detail::check_objectives(objectives, grid, controls, functional);
  const std::size_t N = objectives.size();
  const Index nt = grid.num_intervals();
  const bool store = functional.forbidden.has_value();
  const PropagatorSet props =
      detail::make_propagators(objectives, grid, controls, opts.propagator);
  std::vector<Eigen::MatrixXcd> traj(N);
  detail::parallel_for(N, opts.workers, [&](std::size_t k) {
    traj[k] = forward(props[k], controls, objectives[k].initial, k, store);
  });
  std::vector<StateVector> final_states;
  for (const auto& t : traj) final_states.emplace_back(t.col(store ? nt : 0));
  const double J_T = eval_J_T(functional, final_states, targets_of(objectives));
  return J_T + running_costs(functional, controls, grid, traj, nullptr, nullptr);
}

namespace {

// exp(-i H dt) v for a single operator, Chebychev if Hermitian.
StateVector single_step(const Operator& H, const StateVector& v, double dt,
                        const PropagatorOptions& opts) {
  if (H.hermitian() && opts.kind != PropagatorKind::ode) {
    return cheby_step(H, v, cheby_coeffs(spectral_bounds(H, opts.margin), dt, opts.cheby_tol));
  }
  return ode_step(H, v, dt, opts.ode_tol);
}

}  // namespace

Eigen::MatrixXd continuous_limit_gradient(const std::vector<Objective>& objectives,
                                          const PiecewiseControls& controls,
                                          const TimeGrid& grid,
                                          const FunctionalSpec& functional,
                                          const GradOptions& opts) {
  detail::check_objectives(objectives, grid, controls, functional);
  const std::size_t N = objectives.size();
  const Index nt = grid.num_intervals();
  const Index L = controls.num_controls();
  const PropagatorSet props =
      detail::make_propagators(objectives, grid, controls, opts.propagator);

  std::vector<Eigen::MatrixXcd> traj(N);
  detail::parallel_for(N, opts.workers, [&](std::size_t k) {
    traj[k] = forward(props[k], controls, objectives[k].initial, k, true);
  });
  std::vector<StateVector> final_states;
  for (const auto& t : traj) final_states.emplace_back(t.col(nt));

  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(nt, L);
  ForbiddenValue fb;
  running_costs(functional, controls, grid, traj, &grad, &fb);
  std::vector<StateVector> chi_T = detail::boundary_costates(objectives, functional, final_states);
  if (functional.forbidden) {
    for (std::size_t k = 0; k < N; ++k) chi_T[k] += fb.xi[k].col(nt);
  }

  std::vector<Eigen::MatrixXd> contrib(N);
  detail::parallel_for(N, opts.workers, [&](std::size_t k) {
    const Propagator& prop = props[k];
    const ControlGenerator& gen = *objectives[k].generator;
    Operator H = gen.make_buffer();
    std::vector<Operator> Hadj_controls;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nt, L);
    StateVector chi = chi_T[k];  // χ(t_{i+1}) on entry of iteration i
    auto ws = prop.make_workspace();
    for (Index i = nt - 1; i >= 0; --i) {
      const auto eps = controls.row(i);
      const double dt = grid.dt(i);
      gen.evaluate_into(eps, H);
      const StateVector psi_mid =
          single_step(H, traj[k].col(i), 0.5 * dt, opts.propagator);
      const Operator Hadj = H.hermitian() ? H : H.adjoint();
      const StateVector chi_mid = single_step(Hadj, chi, -0.5 * dt, opts.propagator);
      for (Index l = 0; l < L; ++l) {
        const cplx z = chi_mid.dot(gen.control(l).matrix() * psi_mid);
        g(i, l) = -2.0 * dt * z.imag();
      }
      prop.step(ws, i, eps, Direction::backward, chi);
      if (functional.forbidden) chi += fb.xi[k].col(i);
    }
    contrib[k] = g;
  });
  for (const auto& c : contrib) grad += c;
  return grad;
}

ControlResult run_grape(const std::vector<Objective>& objectives,
                        const PiecewiseControls& guess, const TimeGrid& grid,
                        const FunctionalSpec& functional, const ConvergenceCriteria& stop,
                        const GrapeOptions& opts) {
  const Index nt = guess.num_intervals();
  const Index L = guess.num_controls();
  double total_seconds = 0.0;
  int evals = 0;

  ValueGrad vg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const PiecewiseControls c = PiecewiseControls::unflatten(x, nt, L);
    const GradResult r = grape_gradient(objectives, c, grid, functional, opts.grad);
    total_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++evals;
    g = Eigen::Map<const Eigen::VectorXd>(r.grad.data(), r.grad.size());
    return r.J;
  };

  ControlResult out;
  LbfgsOptions lo;
  lo.history = opts.history;
  lo.c1 = opts.c1;
  lo.c2 = opts.c2;
  lo.max_iters = stop.max_iters;
  lo.grad_tol = stop.grad_tol;
  lo.f_target = stop.J_target;
  if (opts.lower) lo.lower = Eigen::VectorXd::Constant(nt * L, *opts.lower);
  if (opts.upper) lo.upper = Eigen::VectorXd::Constant(nt * L, *opts.upper);
  lo.on_iteration = [&](const IterationInfo& info) {
    ConvergenceRecord rec{info.iteration, info.f, info.grad_inf, info.evaluations,
                          evals > 0 ? total_seconds / evals : 0.0};
    out.history.push_back(rec);
    if (opts.on_record) opts.on_record(rec);
    return true;
  };

  const OptimResult r = lbfgs_minimize(vg, guess.flatten(), lo);
  out.controls = PiecewiseControls::unflatten(r.x, nt, L);
  out.J = r.f;
  out.iterations = r.iterations;
  out.grad_evals = r.evaluations;
  out.status = to_string(r.status);
  return out;
}

}  // namespace qoc
