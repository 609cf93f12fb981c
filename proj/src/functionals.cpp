#include "qoc/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qoc {

double eval_J_T_sm(const std::vector<cplx>& tau) {
  if (tau.empty()) throw ValueError("square-modulus functional needs at least one overlap");
  cplx s = 0.0;
  for (const cplx& t : tau) s += t;
  const double n = static_cast<double>(tau.size());
  return 1.0 - std::norm(s / n);
}

std::vector<cplx> grad_J_T_sm(const std::vector<cplx>& tau) {
  cplx s = 0.0;
  for (const cplx& t : tau) s += t;
  const double n = static_cast<double>(tau.size());
  return std::vector<cplx>(tau.size(), -2.0 / (n * n) * s);
}

double eval_J_T_pe(const GateMatrix& U) {
  return 0.5 * std::max(d_pe(U), 0.0) + 0.5 * pop_loss(U);
}

double eval_J_T_c(const GateMatrix& U) {
  return 0.5 * (1.0 - gate_concurrence(U)) + 0.5 * pop_loss(U);
}

Eigen::VectorXd reduced_fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& z, double h) {
  if (!(h > 0.0)) throw ValueError("finite-difference step must be positive");
  Eigen::VectorXd g(z.size());
  Eigen::VectorXd probe = z;
  for (Index i = 0; i < z.size(); ++i) {
    probe(i) = z(i) + h;
    const double fp = f(probe);
    probe(i) = z(i) - h;
    const double fm = f(probe);
    probe(i) = z(i);
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw ValueError("functional is not finite when perturbing component " +
                       std::to_string(i));
    }
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::VectorXcd reduced_fd_gradient(
    const std::function<double(const Eigen::VectorXcd&)>& f, const Eigen::VectorXcd& z,
    double h) {
  const Index n = z.size();
  Eigen::VectorXd packed(2 * n);
  packed << z.real(), z.imag();
  auto real_f = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXcd c(n);
    for (Index i = 0; i < n; ++i) c(i) = cplx(x(i), x(n + i));
    return f(c);
  };
  const Eigen::VectorXd g = reduced_fd_gradient(real_f, packed, h);
  Eigen::VectorXcd out(n);
  for (Index i = 0; i < n; ++i) out(i) = cplx(g(i), g(n + i));
  return out;
}

std::vector<cplx> overlap_gradient(const FunctionalSpec& J, const std::vector<cplx>& tau) {
  if (J.grad_overlap) return J.grad_overlap(tau);
  if (!J.J_overlap) throw ValueError("functional has no overlap evaluator");
  const Eigen::VectorXcd z = Eigen::Map<const Eigen::VectorXcd>(
      tau.data(), static_cast<Index>(tau.size()));
  auto f = [&](const Eigen::VectorXcd& c) {
    return J.J_overlap(std::vector<cplx>(c.data(), c.data() + c.size()));
  };
  const Eigen::VectorXcd g = reduced_fd_gradient(f, z, J.fd_step);
  return std::vector<cplx>(g.data(), g.data() + g.size());
}

std::vector<StateVector> chi_from_states(const FunctionalSpec& J,
                                         const std::vector<StateVector>& psi_T) {
  std::vector<StateVector> grad;
  if (J.grad_states) {
    grad = J.grad_states(psi_T);
  } else {
    if (!J.J_states) throw ValueError("functional has no state evaluator");
    Index total = 0;
    for (const auto& p : psi_T) total += p.size();
    Eigen::VectorXcd z(total);
    Index off = 0;
    for (const auto& p : psi_T) {
      z.segment(off, p.size()) = p;
      off += p.size();
    }
    auto unpack = [&](const Eigen::VectorXcd& c) {
      std::vector<StateVector> out;
      Index o = 0;
      for (const auto& p : psi_T) {
        out.emplace_back(c.segment(o, p.size()));
        o += p.size();
      }
      return out;
    };
    const Eigen::VectorXcd g = reduced_fd_gradient(
        [&](const Eigen::VectorXcd& c) { return J.J_states(unpack(c)); }, z, J.fd_step);
    grad = unpack(g);
  }
  if (grad.size() != psi_T.size()) throw DimensionError("state gradient has wrong length");
  for (auto& g : grad) g *= -0.5;
  return grad;
}

std::vector<StateVector> chi_from_gate(const FunctionalSpec& J, const GateMatrix& U,
                                       const std::vector<StateVector>& logical_basis) {
  if (logical_basis.size() != 4) throw DimensionError("gate functional needs four basis states");
  GateMatrix G;
  if (J.grad_gate) {
    G = J.grad_gate(U);
  } else {
    if (!J.J_gate) throw ValueError("functional has no gate evaluator");
    const Eigen::VectorXcd z = Eigen::Map<const Eigen::VectorXcd>(U.data(), 16);
    auto f = [&](const Eigen::VectorXcd& c) {
      return J.J_gate(Eigen::Map<const GateMatrix>(c.data()));
    };
    const Eigen::VectorXcd g = reduced_fd_gradient(f, z, J.fd_step);
    G = Eigen::Map<const GateMatrix>(g.data());
  }
  std::vector<StateVector> chi;
  for (Index k = 0; k < 4; ++k) {
    StateVector c = StateVector::Zero(logical_basis[0].size());
    for (Index i = 0; i < 4; ++i) c += G(i, k) * logical_basis[static_cast<std::size_t>(i)];
    chi.push_back(-0.5 * c);
  }
  return chi;
}

std::vector<StateVector> chi_from_overlaps(const FunctionalSpec& J,
                                           const std::vector<cplx>& tau,
                                           const std::vector<StateVector>& targets) {
  if (targets.size() != tau.size()) throw DimensionError("one target per overlap required");
  const std::vector<cplx> g = overlap_gradient(J, tau);
  std::vector<StateVector> chi;
  for (std::size_t k = 0; k < tau.size(); ++k) chi.push_back(-0.5 * g[k] * targets[k]);
  return chi;
}

CostValueGrad run_cost_a_l2(const PiecewiseControls& eps, double lambda_a,
                            const TimeGrid& grid) {
  if (!(lambda_a >= 0.0)) throw ValueError("lambda_a must be non-negative");
  if (eps.num_intervals() != grid.num_intervals()) {
    throw DimensionError("controls do not match the time grid");
  }
  return {lambda_a * eps.values().squaredNorm(), 2.0 * lambda_a * eps.values()};
}

ForbiddenValue run_cost_b_forbidden(const std::vector<Eigen::MatrixXcd>& trajectories,
                                    const Operator& D, double lambda_b,
                                    const TimeGrid& grid) {
  ForbiddenValue out;
  for (const auto& traj : trajectories) {
    if (traj.cols() != grid.num_intervals() + 1 || traj.rows() != D.dim()) {
      throw DimensionError("trajectory does not match the grid or the projector");
    }
    Eigen::MatrixXcd DPsi = D.matrix() * traj;
    for (Index n = 0; n < traj.cols(); ++n) {
      out.value += lambda_b * traj.col(n).dot(DPsi.col(n)).real();
    }
    out.xi.push_back(-lambda_b * DPsi);
  }
  return out;
}

FunctionalSpec make_sm_overlap(bool analytic) {
  FunctionalSpec J;
  J.mode = FunctionalMode::overlap;
  J.name = "sm";
  J.J_overlap = eval_J_T_sm;
  if (analytic) J.grad_overlap = grad_J_T_sm;
  return J;
}

namespace {

std::vector<cplx> overlaps(const std::vector<StateVector>& targets,
                           const std::vector<StateVector>& psi) {
  if (targets.size() != psi.size()) throw DimensionError("one target per state required");
  std::vector<cplx> tau;
  for (std::size_t k = 0; k < psi.size(); ++k) tau.push_back(inner(targets[k], psi[k]));
  return tau;
}

}  // namespace

FunctionalSpec make_sm_state(std::vector<StateVector> targets, bool analytic) {
  FunctionalSpec J;
  J.mode = FunctionalMode::state;
  J.name = "sm";
  J.J_states = [targets](const std::vector<StateVector>& psi) {
    return eval_J_T_sm(overlaps(targets, psi));
  };
  if (analytic) {
    J.grad_states = [targets](const std::vector<StateVector>& psi) {
      const auto g = grad_J_T_sm(overlaps(targets, psi));
      std::vector<StateVector> out;
      for (std::size_t k = 0; k < psi.size(); ++k) out.push_back(g[k] * targets[k]);
      return out;
    };
  }
  return J;
}

FunctionalSpec make_pe(std::vector<StateVector> logical_basis) {
  FunctionalSpec J;
  J.mode = FunctionalMode::gate;
  J.name = "pe";
  J.J_gate = eval_J_T_pe;
  J.logical_basis = std::move(logical_basis);
  return J;
}

FunctionalSpec make_c(std::vector<StateVector> logical_basis) {
  FunctionalSpec J;
  J.mode = FunctionalMode::gate;
  J.name = "c";
  J.J_gate = eval_J_T_c;
  J.logical_basis = std::move(logical_basis);
  return J;
}

double eval_J_T(const FunctionalSpec& J, const std::vector<StateVector>& psi_T,
                const std::vector<StateVector>& targets) {
  switch (J.mode) {
    case FunctionalMode::overlap:
      return J.J_overlap(overlaps(targets, psi_T));
    case FunctionalMode::state:
      return J.J_states(psi_T);
    case FunctionalMode::gate:
      return J.J_gate(extract_gate(psi_T, J.logical_basis));
  }
  return 0.0;
}

}  // namespace qoc
