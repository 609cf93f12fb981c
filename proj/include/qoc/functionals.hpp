#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qoc/core.hpp"
#include "qoc/gates.hpp"

namespace qoc {

// Gradients with respect to complex variables use the paired convention:
// component z_k of the gradient is ∂J/∂Re z_k + i·∂J/∂Im z_k.

/// Which reduced variables J_T depends on.
enum class FunctionalMode {
  overlap,  ///< τ_k = ⟨φ_k^tgt|Ψ_k(T)⟩
  state,    ///< the propagated states Ψ_k(T)
  gate,     ///< U_L projected onto the logical basis
};

using OverlapFunction = std::function<double(const std::vector<cplx>&)>;
using OverlapGradient = std::function<std::vector<cplx>(const std::vector<cplx>&)>;
using StateFunction = std::function<double(const std::vector<StateVector>&)>;
using StateGradient =
    std::function<std::vector<StateVector>(const std::vector<StateVector>&)>;
using GateFunction = std::function<double(const GateMatrix&)>;
using GateGradient = std::function<GateMatrix(const GateMatrix&)>;

/// Penalty λ_b·Σ_n Σ_k ⟨Ψ_k(t_n)|D|Ψ_k(t_n)⟩ on population in range(D).
struct ForbiddenCost {
  double lambda_b = 0.0;
  Operator D;
};

/// A final-time functional in one reduced form plus optional running costs.
/// Only the evaluator of `mode` is used; a missing analytic gradient falls
/// back to central finite differences with step `fd_step`.
struct FunctionalSpec {
  FunctionalMode mode = FunctionalMode::overlap;
  std::string name;

  OverlapFunction J_overlap;
  OverlapGradient grad_overlap;
  StateFunction J_states;
  StateGradient grad_states;
  GateFunction J_gate;
  GateGradient grad_gate;
  /// Gate mode: (U_L)_ij = ⟨basis_i|Ψ_j(T)⟩; objective j must start in basis_j.
  std::vector<StateVector> logical_basis;

  /// λ_a·Σ ε² on the control values.
  std::optional<double> lambda_a;
  std::optional<ForbiddenCost> forbidden;

  double fd_step = 1e-6;
};

double eval_J_T_sm(const std::vector<cplx>& tau);
std::vector<cplx> grad_J_T_sm(const std::vector<cplx>& tau);
/// ½·max(D_PE, 0) + ½·p_loss.
double eval_J_T_pe(const GateMatrix& U);
/// ½·(1 − C) + ½·p_loss.
double eval_J_T_c(const GateMatrix& U);

/// Central differences of f over every real component, step h.
Eigen::VectorXd reduced_fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& z, double h = 1e-6);
/// Same over complex variables, Re and Im perturbed independently; result in
/// the paired convention.
Eigen::VectorXcd reduced_fd_gradient(
    const std::function<double(const Eigen::VectorXcd&)>& f, const Eigen::VectorXcd& z,
    double h = 1e-6);

/// Paired gradient of J_T over the overlaps, analytic if available.
std::vector<cplx> overlap_gradient(const FunctionalSpec& J, const std::vector<cplx>& tau);

/// χ_k(T) = −½·(paired gradient of J over Ψ_k(T)).
std::vector<StateVector> chi_from_states(const FunctionalSpec& J,
                                         const std::vector<StateVector>& psi_T);
/// χ_k = −½·Σ_i (∇_U J)_ik·|φ_i⟩.
std::vector<StateVector> chi_from_gate(const FunctionalSpec& J, const GateMatrix& U,
                                       const std::vector<StateVector>& logical_basis);
/// χ_k = −½·(∇_τ J)_k·|φ_k^tgt⟩, the overlap-mode boundary in state form.
std::vector<StateVector> chi_from_overlaps(const FunctionalSpec& J,
                                           const std::vector<cplx>& tau,
                                           const std::vector<StateVector>& targets);

struct CostValueGrad {
  double value = 0.0;
  Eigen::MatrixXd grad;
};

/// λ_a·Σ_{nl} ε_nl² and its gradient 2·λ_a·ε.
CostValueGrad run_cost_a_l2(const PiecewiseControls& eps, double lambda_a,
                            const TimeGrid& grid);

struct ForbiddenValue {
  double value = 0.0;
  /// xi[k].col(n) = −λ_b·D·Ψ_k(t_n).
  std::vector<Eigen::MatrixXcd> xi;
};

/// `trajectories[k].col(n)` holds Ψ_k(t_n). The sum runs over all N_T+1 grid
/// points without time weights; scale λ_b to taste.
ForbiddenValue run_cost_b_forbidden(const std::vector<Eigen::MatrixXcd>& trajectories,
                                    const Operator& D, double lambda_b,
                                    const TimeGrid& grid);

/// Square-modulus functional of the overlaps with an analytic gradient
/// (`analytic` false leaves the gradient to finite differences).
FunctionalSpec make_sm_overlap(bool analytic = true);
/// Same functional written over the states, with targets given per objective.
FunctionalSpec make_sm_state(std::vector<StateVector> targets, bool analytic = true);
FunctionalSpec make_pe(std::vector<StateVector> logical_basis);
FunctionalSpec make_c(std::vector<StateVector> logical_basis);

/// Evaluates J_T of a functional in any mode from the final states.
/// `targets` is needed for overlap mode.
double eval_J_T(const FunctionalSpec& J, const std::vector<StateVector>& psi_T,
                const std::vector<StateVector>& targets);

}  // namespace qoc
