#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qoc/core.hpp"

namespace qoc {

/// Logical-subspace gate, basis order |00⟩, |01⟩, |10⟩, |11⟩.
using GateMatrix = Eigen::Matrix4cd;

struct LocalInvariants {
  double g1 = 0.0;
  double g2 = 0.0;
  double g3 = 0.0;
};

/// Weyl chamber coordinates in radians.
struct WeylPoint {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
};

/// (U_L)_ij = ⟨φ_i|Ψ_j(T)⟩. Throws ValueError if the basis is not
/// orthonormal to 1e-12.
GateMatrix extract_gate(const std::vector<StateVector>& final_states,
                        const std::vector<StateVector>& logical_basis);

/// Columns (|00⟩+|11⟩, i|01⟩+i|10⟩, |01⟩−|10⟩, i|00⟩−i|11⟩)/√2.
const GateMatrix& magic_basis();
/// Q†·U·Q.
GateMatrix to_magic_basis(const GateMatrix& U);

/// Makhlin invariants, normalized by det(U) so that they are insensitive to
/// the global phase and to single-qubit operations.
LocalInvariants local_invariants(const GateMatrix& U);

/// Coordinates from the eigenphases of m = U_B^T U_B; mapped into the chamber
/// c1 ≥ c2 ≥ c3 ≥ 0, c1 + c2 ≤ π. Only the phases of the eigenvalues enter,
/// so sub-unitary gates are accepted.
WeylPoint weyl_coordinates(const GateMatrix& U);

/// exp[(i/2)(c1·XX + c2·YY + c3·ZZ)].
GateMatrix canonical_gate(const WeylPoint& c);

/// c1 + c2 ≥ π/2, c1 − c2 ≤ π/2, c2 + c3 ≤ π/2 (with `slack`).
bool is_perfect_entangler(const WeylPoint& c, double slack = 1e-12);

double gate_concurrence(const WeylPoint& c);
double gate_concurrence(const GateMatrix& U);

/// g3·√(g1² + g2²) − g1: zero on the perfect-entangler boundary, positive on
/// the side of the identity.
double d_pe(const LocalInvariants& g);
double d_pe(const GateMatrix& U);

/// 1 − tr(U†U)/4.
double pop_loss(const GateMatrix& U);

/// "identity", "cnot", "cz", "swap", "iswap", "sqrt_iswap"; ValueError otherwise.
GateMatrix named_gate(const std::string& name);

}  // namespace qoc
