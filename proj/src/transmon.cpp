#include "qoc/transmon.hpp"

#include <cmath>
#include <numbers>

namespace qoc {

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;
}

double mhz_to_angular(double mhz) { return two_pi * mhz * 1e-3; }
double ghz_to_angular(double ghz) { return two_pi * ghz; }
double angular_to_mhz(double w) { return w / two_pi * 1e3; }

TransmonParams TransmonParams::from_lab_units(double w1_GHz, double w2_GHz, double wd_GHz,
                                              double alpha1_MHz, double alpha2_MHz,
                                              double J_MHz, double lambda, int n_levels) {
  TransmonParams p;
  p.w1 = ghz_to_angular(w1_GHz);
  p.w2 = ghz_to_angular(w2_GHz);
  p.wd = ghz_to_angular(wd_GHz);
  p.alpha1 = mhz_to_angular(alpha1_MHz);
  p.alpha2 = mhz_to_angular(alpha2_MHz);
  p.J = mhz_to_angular(J_MHz);
  p.lambda = lambda;
  p.n_levels = n_levels;
  return p;
}

TransmonParams TransmonParams::reference(int n_levels) {
  return from_lab_units(4.380, 4.614, 4.498, 210.0, 215.0, -3.0, 1.03, n_levels);
}

ControlGenerator build_transmon(const TransmonParams& p) {
  const int nq = p.n_levels;
  if (nq < 2) throw ValueError("a transmon needs at least two levels");
  for (double v : {p.w1, p.w2, p.wd, p.alpha1, p.alpha2, p.J, p.lambda}) {
    if (!std::isfinite(v)) throw ValueError("transmon parameters must be finite");
  }
  const Index n = static_cast<Index>(nq) * nq;
  auto idx = [nq](int n1, int n2) { return static_cast<Index>(n1) * nq + n2; };

  std::vector<Eigen::Triplet<cplx>> h0, hre, him;
  const double d1 = p.w1 - p.wd + 0.5 * p.alpha1;
  const double d2 = p.w2 - p.wd + 0.5 * p.alpha2;
  for (int a = 0; a < nq; ++a) {
    for (int b = 0; b < nq; ++b) {
      const double n1 = a;
      const double n2 = b;
      const double e = d1 * n1 - 0.5 * p.alpha1 * n1 * n1 + d2 * n2 - 0.5 * p.alpha2 * n2 * n2;
      h0.emplace_back(idx(a, b), idx(a, b), e);
      // J (b1† b2 + b1 b2†)
      if (a + 1 < nq && b >= 1) {
        const double amp = p.J * std::sqrt((a + 1.0) * b);
        h0.emplace_back(idx(a + 1, b - 1), idx(a, b), amp);
        h0.emplace_back(idx(a, b), idx(a + 1, b - 1), amp);
      }
      // Raising operators b1†, b2† with amplitude √(n+1).
      if (a + 1 < nq) {
        const double s = 0.5 * std::sqrt(a + 1.0);
        hre.emplace_back(idx(a + 1, b), idx(a, b), s);
        hre.emplace_back(idx(a, b), idx(a + 1, b), s);
        him.emplace_back(idx(a + 1, b), idx(a, b), cplx(0.0, s));
        him.emplace_back(idx(a, b), idx(a + 1, b), cplx(0.0, -s));
      }
      if (b + 1 < nq && p.lambda != 0.0) {
        const double s = 0.5 * p.lambda * std::sqrt(b + 1.0);
        hre.emplace_back(idx(a, b + 1), idx(a, b), s);
        hre.emplace_back(idx(a, b), idx(a, b + 1), s);
        him.emplace_back(idx(a, b + 1), idx(a, b), cplx(0.0, s));
        him.emplace_back(idx(a, b), idx(a, b + 1), cplx(0.0, -s));
      }
    }
  }
  auto make = [n](const std::vector<Eigen::Triplet<cplx>>& t) {
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    m.prune(cplx(0.0));
    return Operator(std::move(m), true);
  };
  return ControlGenerator(make(h0), {make(hre), make(him)});
}

std::vector<StateVector> logical_basis(int n_levels) {
  if (n_levels < 2) throw ValueError("a transmon needs at least two levels");
  const Index n = static_cast<Index>(n_levels) * n_levels;
  std::vector<StateVector> basis;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      StateVector v = StateVector::Zero(n);
      v(static_cast<Index>(a) * n_levels + b) = 1.0;
      basis.push_back(v);
    }
  }
  return basis;
}

double envelope(const std::string& shape, double t, double T) {
  if (shape == "const") return 1.0;
  if (shape == "blackman") {
    const double x = t / T;
    return 0.42 - 0.5 * std::cos(two_pi * x) + 0.08 * std::cos(2.0 * two_pi * x);
  }
  if (shape == "flattop") {
    const double ramp = 0.1 * T;
    if (t < ramp) return std::pow(std::sin(0.5 * std::numbers::pi * t / ramp), 2);
    if (t > T - ramp) return std::pow(std::sin(0.5 * std::numbers::pi * (T - t) / ramp), 2);
    return 1.0;
  }
  throw ValueError("unknown pulse shape '" + shape + "' (expected blackman, flattop or const)");
}

Eigen::VectorXd guess_pulse(const std::string& shape, double amplitude, const TimeGrid& grid) {
  if (!std::isfinite(amplitude)) throw ValueError("pulse amplitude must be finite");
  const Index nt = grid.num_intervals();
  Eigen::VectorXd v(nt);
  for (Index i = 0; i < nt; ++i) {
    v(i) = amplitude * envelope(shape, grid.midpoint(i) - grid.t(0), grid.duration());
  }
  return v;
}

GateMatrix target_gate_sqrt_iswap() { return named_gate("sqrt_iswap"); }

Operator forbidden_projector(int n_levels, const std::vector<int>& levels) {
  const Index n = static_cast<Index>(n_levels) * n_levels;
  std::vector<Eigen::Triplet<cplx>> t;
  for (int a = 0; a < n_levels; ++a) {
    for (int b = 0; b < n_levels; ++b) {
      bool hit = false;
      for (int lv : levels) hit = hit || lv == a || lv == b;
      if (hit) t.emplace_back(static_cast<Index>(a) * n_levels + b,
                               static_cast<Index>(a) * n_levels + b, 1.0);
    }
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return Operator(std::move(m), true);
}

}  // namespace qoc
