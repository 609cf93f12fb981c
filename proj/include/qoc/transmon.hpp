#pragma once

#include <string>
#include <vector>

#include "qoc/core.hpp"
#include "qoc/gates.hpp"

namespace qoc {

/// Two coupled transmons in the frame rotating at the drive frequency.
/// All frequencies in rad/ns.
struct TransmonParams {
  double w1 = 0.0;
  double w2 = 0.0;
  double wd = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double J = 0.0;
  double lambda = 1.0;
  int n_levels = 3;

  /// Frequencies in GHz, anharmonicities and coupling in MHz (cycles, not
  /// radians), converted to rad/ns.
  static TransmonParams from_lab_units(double w1_GHz, double w2_GHz, double wd_GHz,
                                       double alpha1_MHz, double alpha2_MHz, double J_MHz,
                                       double lambda, int n_levels);
  /// The reference device: 4.380/4.614 GHz qubits driven at 4.498 GHz,
  /// anharmonicities 210/215 MHz, J = −3 MHz, λ = 1.03.
  static TransmonParams reference(int n_levels);
};

/// rad/ns per MHz and per GHz.
double mhz_to_angular(double mhz);
double ghz_to_angular(double ghz);
double angular_to_mhz(double w);

/// Drift H0 and the two quadrature controls [H_re, H_im], dimension N_q².
/// Basis index n1·N_q + n2.
ControlGenerator build_transmon(const TransmonParams& p);

/// |00⟩, |01⟩, |10⟩, |11⟩ in the N_q² space.
std::vector<StateVector> logical_basis(int n_levels);

/// Envelope value at time t in [0, T]: "blackman", "flattop" (sin² ramps
/// over 10% on each side) or "const". ValueError for other names.
double envelope(const std::string& shape, double t, double T);

/// Envelope times amplitude sampled at the interval midpoints.
Eigen::VectorXd guess_pulse(const std::string& shape, double amplitude, const TimeGrid& grid);

GateMatrix target_gate_sqrt_iswap();

/// Projector onto the basis states with n1 or n2 in `levels`.
Operator forbidden_projector(int n_levels, const std::vector<int>& levels);

}  // namespace qoc
