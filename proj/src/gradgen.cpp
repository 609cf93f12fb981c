#include "qoc/gradgen.hpp"

#include "qoc/detail/kernels.hpp"

namespace qoc {

ExtendedState ExtendedState::from_base(const StateVector& psi, Index num_controls) {
  ExtendedState x(psi.size(), num_controls);
  x.base() = psi;
  return x;
}

void zero_grad_blocks(ExtendedState& x) {
  x.blocks().leftCols(x.num_controls()).setZero();
}

GradGenerator::GradGenerator(const Operator& base, const std::vector<Operator>& control_ops)
    : base_(&base), controls_(&control_ops) {
  for (const auto& c : control_ops) {
    if (c.dim() != base.dim()) throw DimensionError("control operator dimension mismatch");
  }
}

void GradGenerator::apply(const Eigen::MatrixXcd& X, Eigen::MatrixXcd& Y) const {
  const Index L = num_controls();
  if (X.rows() != dim() || X.cols() != L + 1) {
    throw DimensionError("extended state does not match the gradient generator");
  }
  Y.noalias() = base_->matrix() * X;
  for (Index l = 0; l < L; ++l) {
    Y.col(l).noalias() += (*controls_)[static_cast<std::size_t>(l)].matrix() * X.col(L);
  }
}

Eigen::MatrixXcd GradGenerator::dense() const {
  const Index n = dim();
  const Index L = num_controls();
  const Eigen::MatrixXcd H = base_->dense();
  Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero((L + 1) * n, (L + 1) * n);
  for (Index l = 0; l <= L; ++l) G.block(l * n, l * n, n, n) = H;
  for (Index l = 0; l < L; ++l) {
    G.block(l * n, L * n, n, n) = (*controls_)[static_cast<std::size_t>(l)].dense();
  }
  return G;
}

ExtendedState apply_gradgen(const GradGenerator& G, const ExtendedState& x) {
  ExtendedState y(x.dim(), x.num_controls());
  G.apply(x.blocks(), y.blocks());
  return y;
}

ExtendedState grad_step(const GradGenerator& G, const StateVector& psi,
                        const ChebyCoeffs& coeffs) {
  ExtendedState x = ExtendedState::from_base(psi, G.num_controls());
  Eigen::MatrixXcd p0, p1, p2, tmp;
  detail::chebyshev_propagate(
      coeffs, [&](const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) { G.apply(in, out); },
      x.blocks(), p0, p1, p2, tmp);
  return x;
}

ExtendedState grad_step_ode(const GradGenerator& G, const StateVector& psi, double dt,
                            double tol) {
  ExtendedState x = ExtendedState::from_base(psi, G.num_controls());
  detail::dopri5_propagate(
      [&](const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) { G.apply(in, out); },
      x.blocks(), dt, tol);
  return x;
}

void grad_step(const Propagator& prop, Propagator::Workspace& ws, Index i,
               std::span<const double> eps, Direction dir, ExtendedState& x) {
  const Operator& H = prop.evaluate(ws, eps, dir);
  const GradGenerator G(H, prop.control_terms(dir));
  auto apply_g = [&](const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) { G.apply(in, out); };
  if (prop.uses_chebychev()) {
    const ChebyCoeffs& c = prop.coefficients(ws, i, eps, dir);
    detail::chebyshev_propagate(c, apply_g, x.blocks(), ws.block_scratch[0],
                                ws.block_scratch[1], ws.block_scratch[2],
                                ws.block_scratch[3]);
  } else {
    detail::dopri5_propagate(apply_g, x.blocks(), prop.signed_dt(i, dir),
                             prop.options().ode_tol);
  }
}

}  // namespace qoc
