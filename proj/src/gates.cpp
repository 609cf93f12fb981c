#include "qoc/gates.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>

#include <Eigen/Eigenvalues>

namespace qoc {

namespace {

constexpr double pi = std::numbers::pi;
const cplx I1(0.0, 1.0);

}  // namespace

GateMatrix extract_gate(const std::vector<StateVector>& final_states,
                        const std::vector<StateVector>& logical_basis) {
  if (final_states.size() != 4 || logical_basis.size() != 4) {
    throw DimensionError("gate extraction needs four states and four basis states");
  }
  const Index n = logical_basis[0].size();
  for (std::size_t i = 0; i < 4; ++i) {
    if (logical_basis[i].size() != n || final_states[i].size() != n) {
      throw DimensionError("gate extraction: states differ in dimension");
    }
    for (std::size_t j = 0; j < 4; ++j) {
      const cplx s = logical_basis[i].dot(logical_basis[j]);
      if (std::abs(s - (i == j ? 1.0 : 0.0)) > 1e-12) {
        throw ValueError("logical basis is not orthonormal");
      }
    }
  }
  GateMatrix U;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      U(static_cast<Index>(i), static_cast<Index>(j)) =
          logical_basis[i].dot(final_states[j]);
    }
  }
  return U;
}

const GateMatrix& magic_basis() {
  static const GateMatrix Q = [] {
    GateMatrix q;
    q << 1.0, 0.0, 0.0, I1,
         0.0, I1, 1.0, 0.0,
         0.0, I1, -1.0, 0.0,
         1.0, 0.0, 0.0, -I1;
    return GateMatrix(q / std::sqrt(2.0));
  }();
  return Q;
}

GateMatrix to_magic_basis(const GateMatrix& U) {
  const GateMatrix& Q = magic_basis();
  return Q.adjoint() * U * Q;
}

LocalInvariants local_invariants(const GateMatrix& U) {
  const GateMatrix UB = to_magic_basis(U);
  const GateMatrix m = UB.transpose() * UB;
  cplx det = U.determinant();
  // A singular matrix has no defined invariants; leave the traces unscaled.
  if (std::abs(det) == 0.0) det = 1.0;
  const cplx tr = m.trace();
  const cplx tr2 = tr * tr;
  const cplx G1 = tr2 / (16.0 * det);
  const cplx G3 = (tr2 - (m * m).trace()) / (4.0 * det);
  return {G1.real(), G1.imag(), G3.real()};
}

WeylPoint weyl_coordinates(const GateMatrix& U) {
  const GateMatrix UB = to_magic_basis(U);
  const GateMatrix m = UB.transpose() * UB;
  cplx det = U.determinant();
  if (std::abs(det) == 0.0) det = 1.0;
  Eigen::ComplexEigenSolver<GateMatrix> es(m / std::sqrt(det), false);
  const auto& ev = es.eigenvalues();

  std::array<double, 4> S{};
  for (int k = 0; k < 4; ++k) {
    double two_s = std::arg(ev(k)) / pi;
    if (two_s <= -0.5) two_s += 2.0;
    S[static_cast<std::size_t>(k)] = two_s / 2.0;
  }
  std::stable_sort(S.begin(), S.end(), std::greater<>());
  const int n = static_cast<int>(std::lround(S[0] + S[1] + S[2] + S[3]));
  for (int k = 0; k < n && k < 4; ++k) S[static_cast<std::size_t>(k)] -= 1.0;
  const int shift = ((n % 4) + 4) % 4;
  std::rotate(S.begin(), S.begin() + shift, S.end());

  double c1 = S[0] + S[1];
  const double c2 = S[0] + S[2];
  double c3 = S[1] + S[2];
  if (c3 < 0.0) {
    c1 = 1.0 - c1;
    c3 = -c3;
  }
  return {c1 * pi, c2 * pi, c3 * pi};
}

GateMatrix canonical_gate(const WeylPoint& c) {
  // XX, YY, ZZ are diagonal in the magic basis with (XX, YY, ZZ) eigenvalues
  // (+,-,+), (+,+,-), (-,-,-), (-,+,+) on the four columns.
  static constexpr int signs[4][3] = {{1, -1, 1}, {1, 1, -1}, {-1, -1, -1}, {-1, 1, 1}};
  Eigen::Vector4cd phases;
  for (int k = 0; k < 4; ++k) {
    const double arg =
        0.5 * (signs[k][0] * c.c1 + signs[k][1] * c.c2 + signs[k][2] * c.c3);
    phases(k) = std::exp(I1 * arg);
  }
  const GateMatrix& Q = magic_basis();
  return Q * phases.asDiagonal() * Q.adjoint();
}

bool is_perfect_entangler(const WeylPoint& c, double slack) {
  return c.c1 + c.c2 >= pi / 2 - slack && c.c1 - c.c2 <= pi / 2 + slack &&
         c.c2 + c.c3 <= pi / 2 + slack;
}

double gate_concurrence(const WeylPoint& c) {
  if (is_perfect_entangler(c, 0.0)) return 1.0;
  const double v[6] = {std::sin(c.c1 + c.c3), std::sin(c.c1 - c.c3),
                       std::sin(c.c2 + c.c1), std::sin(c.c2 - c.c1),
                       std::sin(c.c3 + c.c2), std::sin(c.c3 - c.c2)};
  double best = 0.0;
  for (double x : v) best = std::max(best, std::abs(x));
  return std::min(best, 1.0);
}

double gate_concurrence(const GateMatrix& U) { return gate_concurrence(weyl_coordinates(U)); }

double d_pe(const LocalInvariants& g) {
  return g.g3 * std::sqrt(g.g1 * g.g1 + g.g2 * g.g2) - g.g1;
}

double d_pe(const GateMatrix& U) { return d_pe(local_invariants(U)); }

double pop_loss(const GateMatrix& U) { return 1.0 - (U.adjoint() * U).trace().real() / 4.0; }

GateMatrix named_gate(const std::string& name) {
  GateMatrix U = GateMatrix::Identity();
  if (name == "identity") return U;
  if (name == "cnot") {
    U.block(2, 2, 2, 2) << 0.0, 1.0, 1.0, 0.0;
    return U;
  }
  if (name == "cz") {
    U(3, 3) = -1.0;
    return U;
  }
  if (name == "swap") {
    U.block(1, 1, 2, 2) << 0.0, 1.0, 1.0, 0.0;
    return U;
  }
  if (name == "iswap") {
    U.block(1, 1, 2, 2) << 0.0, I1, I1, 0.0;
    return U;
  }
  if (name == "sqrt_iswap") {
    const double s = 1.0 / std::sqrt(2.0);
    U.block(1, 1, 2, 2) << s, I1 * s, I1 * s, s;
    return U;
  }
  throw ValueError("unknown gate '" + name + "'");
}

}  // namespace qoc
