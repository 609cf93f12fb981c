#include "qoc/krotov.hpp"

#include <barrier>
#include <chrono>
#include <cmath>
#include <exception>
#include <numbers>
#include <thread>

namespace qoc {

Eigen::VectorXd flattop_update_shape(const TimeGrid& grid, double ramp_fraction) {
  const Index nt = grid.num_intervals();
  const double t0 = grid.t(0);
  const double T = grid.duration();
  const double ramp = ramp_fraction * T;
  Eigen::VectorXd S(nt);
  for (Index i = 0; i < nt; ++i) {
    const double t = grid.midpoint(i) - t0;
    double s = 1.0;
    if (ramp > 0.0 && t < ramp) s = std::pow(std::sin(0.5 * std::numbers::pi * t / ramp), 2);
    if (ramp > 0.0 && t > T - ramp) {
      s = std::pow(std::sin(0.5 * std::numbers::pi * (T - t) / ramp), 2);
    }
    S(i) = s;
  }
  return S;
}

namespace {

void check_krotov(const FunctionalSpec& functional, const KrotovParams& params,
                  const TimeGrid& grid) {
  if (functional.lambda_a || functional.forbidden) {
    throw ValueError("Krotov's method supports final-time functionals only");
  }
  if (!(params.lambda_a > 0.0)) throw ValueError("Krotov lambda_a must be positive");
  if (params.shape.size() != 0) {
    if (params.shape.size() != grid.num_intervals()) {
      throw DimensionError("update shape must have one value per interval");
    }
    if ((params.shape.array() < 0.0).any()) throw ValueError("update shape must be non-negative");
  }
}

std::vector<StateVector> targets_of(const std::vector<Objective>& objectives) {
  std::vector<StateVector> t;
  for (const auto& o : objectives) {
    if (o.target) t.push_back(*o.target);
  }
  return t;
}

}  // namespace

KrotovStep krotov_iterate(const std::vector<Objective>& objectives,
                          const PiecewiseControls& guess, const TimeGrid& grid,
                          const FunctionalSpec& functional, const KrotovParams& params,
                          const GradOptions& opts) {
  detail::check_objectives(objectives, grid, guess, functional);
  check_krotov(functional, params, grid);
  const std::size_t N = objectives.size();
  const Index nt = grid.num_intervals();
  const Index L = guess.num_controls();
  const Eigen::VectorXd S =
      params.shape.size() ? params.shape : flattop_update_shape(grid);
  const std::vector<StateVector> targets = targets_of(objectives);
  const detail::PropagatorSet props =
      detail::make_propagators(objectives, grid, guess, opts.propagator);

  // Final states under the guess.
  std::vector<StateVector> psi_T(N);
  detail::parallel_for(N, opts.workers, [&](std::size_t k) {
    auto ws = props[k].make_workspace();
    StateVector v = objectives[k].initial;
    for (Index i = 0; i < nt; ++i) props[k].step(ws, i, guess.row(i), Direction::forward, v);
    psi_T[k] = v;
  });

  KrotovStep out;
  out.J_before = eval_J_T(functional, psi_T, targets);

  // Backward costates, all stored.
  const std::vector<StateVector> chi_T = detail::boundary_costates(objectives, functional, psi_T);
  std::vector<Eigen::MatrixXcd> chi(N);
  detail::parallel_for(N, opts.workers, [&](std::size_t k) {
    auto ws = props[k].make_workspace();
    chi[k].resize(chi_T[k].size(), nt + 1);
    StateVector v = chi_T[k];
    chi[k].col(nt) = v;
    for (Index i = nt - 1; i >= 0; --i) {
      props[k].step(ws, i, guess.row(i), Direction::backward, v);
      chi[k].col(i) = v;
    }
  });

  // Sequential forward sweep, synchronized over objectives after each step.
  out.controls = guess;
  std::vector<StateVector> psi(N);
  for (std::size_t k = 0; k < N; ++k) psi[k] = objectives[k].initial;
  Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(static_cast<Index>(N), L);
  std::vector<double> row(static_cast<std::size_t>(L));

  auto overlap_part = [&](std::size_t k, Index i) {
    const ControlGenerator& gen = *objectives[k].generator;
    for (Index l = 0; l < L; ++l) {
      const cplx z = chi[k].col(i).dot(gen.control(l).matrix() * psi[k]);
      partial(static_cast<Index>(k), l) = z.imag();
    }
  };
  auto update_row = [&](Index i) {
    for (Index l = 0; l < L; ++l) {
      double sum = 0.0;
      for (std::size_t k = 0; k < N; ++k) sum += partial(static_cast<Index>(k), l);
      out.controls(i, l) = guess(i, l) + S(i) / params.lambda_a * sum;
      row[static_cast<std::size_t>(l)] = out.controls(i, l);
    }
  };

  std::size_t workers = opts.workers <= 0 ? N : static_cast<std::size_t>(opts.workers);
  workers = std::min(workers, N);
  if (workers <= 1) {
    std::vector<Propagator::Workspace> ws;
    for (std::size_t k = 0; k < N; ++k) ws.push_back(props[k].make_workspace());
    for (Index i = 0; i < nt; ++i) {
      for (std::size_t k = 0; k < N; ++k) overlap_part(k, i);
      update_row(i);
      for (std::size_t k = 0; k < N; ++k) {
        props[k].step(ws[k], i, row, Direction::forward, psi[k]);
      }
    }
  } else {
    std::barrier sync(static_cast<std::ptrdiff_t>(workers));
    std::vector<std::exception_ptr> errors(workers);
    auto body = [&](std::size_t w) {
      std::vector<std::size_t> mine;
      for (std::size_t k = w; k < N; k += workers) mine.push_back(k);
      std::vector<Propagator::Workspace> ws;
      for (std::size_t k : mine) ws.push_back(props[k].make_workspace());
      for (Index i = 0; i < nt; ++i) {
        if (!errors[w]) {
          try {
            for (std::size_t k : mine) overlap_part(k, i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        }
        sync.arrive_and_wait();
        if (w == 0) update_row(i);
        sync.arrive_and_wait();
        if (!errors[w]) {
          try {
            for (std::size_t j = 0; j < mine.size(); ++j) {
              props[mine[j]].step(ws[j], i, row, Direction::forward, psi[mine[j]]);
            }
          } catch (...) {
            errors[w] = std::current_exception();
          }
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  out.J_after = eval_J_T(functional, psi, targets);
  return out;
}

ControlResult run_krotov(const std::vector<Objective>& objectives,
                         const PiecewiseControls& guess, const TimeGrid& grid,
                         const FunctionalSpec& functional, const KrotovParams& params,
                         const ConvergenceCriteria& stop, const GradOptions& opts,
                         const std::function<void(const ConvergenceRecord&)>& on_record) {
  ControlResult out;
  out.controls = guess;
  out.status = "max_iters";
  double seconds = 0.0;
  auto record = [&](int it, double J) {
    ConvergenceRecord rec{it, J, 0.0, it, it > 0 ? seconds / it : 0.0};
    out.history.push_back(rec);
    if (on_record) on_record(rec);
  };

  if (stop.max_iters <= 0) {
    out.J = evaluate_functional(objectives, guess, grid, functional, opts);
    record(0, out.J);
    return out;
  }
  for (int it = 1; it <= stop.max_iters; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const KrotovStep step = krotov_iterate(objectives, out.controls, grid, functional, params, opts);
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (it == 1) record(0, step.J_before);
    out.controls = step.controls;
    out.J = step.J_after;
    out.iterations = it;
    out.grad_evals = it;
    record(it, out.J);
    if (out.J <= stop.J_target) {
      out.status = "f_target";
      break;
    }
  }
  return out;
}

}  // namespace qoc
