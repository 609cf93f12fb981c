#pragma once

#include <span>
#include <vector>

#include "qoc/core.hpp"
#include "qoc/propagator.hpp"

namespace qoc {

/// L gradient blocks ψ̃_1..ψ̃_L plus the base state Ψ, each a column of one
/// N_H × (L+1) matrix. Column l < L is gradient block l, column L the base.
class ExtendedState {
 public:
  ExtendedState() = default;
  ExtendedState(Index dim, Index num_controls)
      : blocks_(Eigen::MatrixXcd::Zero(dim, num_controls + 1)) {}

  /// Base set to `psi`, gradient blocks zero.
  static ExtendedState from_base(const StateVector& psi, Index num_controls);

  Index dim() const noexcept { return blocks_.rows(); }
  Index num_controls() const noexcept { return blocks_.cols() - 1; }

  auto grad_block(Index l) { return blocks_.col(l); }
  auto grad_block(Index l) const { return blocks_.col(l); }
  auto base() { return blocks_.col(blocks_.cols() - 1); }
  auto base() const { return blocks_.col(blocks_.cols() - 1); }

  Eigen::MatrixXcd& blocks() noexcept { return blocks_; }
  const Eigen::MatrixXcd& blocks() const noexcept { return blocks_; }

 private:
  Eigen::MatrixXcd blocks_;
};

/// Zeroes the gradient blocks in place; base untouched.
void zero_grad_blocks(ExtendedState& x);

/// Action of the block operator
///
///     G = | H   0  ... H⁽¹⁾ |
///         | 0   H  ... H⁽²⁾ |
///         | ...        ...  |
///         | 0   0  ...  H   |
///
/// on an extended state. Holds non-owning references.
class GradGenerator {
 public:
  GradGenerator(const Operator& base, const std::vector<Operator>& control_ops);

  Index dim() const noexcept { return base_->dim(); }
  Index num_controls() const noexcept {
    return static_cast<Index>(controls_->size());
  }

  /// Y = G·X on the column layout of ExtendedState.
  void apply(const Eigen::MatrixXcd& X, Eigen::MatrixXcd& Y) const;

  /// Dense (L+1)N_H square matrix in the column order of ExtendedState.
  /// For tests on small instances only.
  Eigen::MatrixXcd dense() const;

 private:
  const Operator* base_;
  const std::vector<Operator>* controls_;
};

ExtendedState apply_gradgen(const GradGenerator& G, const ExtendedState& x);

/// [∂U/∂ε_1·Ψ, ..., ∂U/∂ε_L·Ψ, U·Ψ] with U = exp(-i H dt), by Chebychev
/// expansion of exp(-i G dt). The coefficients are those of H.
ExtendedState grad_step(const GradGenerator& G, const StateVector& psi,
                        const ChebyCoeffs& coeffs);

/// Same as grad_step with the adaptive ODE integrator.
ExtendedState grad_step_ode(const GradGenerator& G, const StateVector& psi,
                            double dt, double tol = 1e-10);

/// Propagates `x` in place through interval i under the extended generator
/// built from the propagator's H_i (forward) or H_i† with adjoint control
/// terms and negative dt (backward). The gradient blocks of `x` are used as
/// they are; zero them first for a fresh derivative.
void grad_step(const Propagator& prop, Propagator::Workspace& ws, Index i,
               std::span<const double> eps, Direction dir, ExtendedState& x);

}  // namespace qoc
