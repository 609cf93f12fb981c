#pragma once

// Propagation kernels shared by plain states (one column) and extended states
// (L+1 columns, base state last). `apply(x, y)` must set y = A·x.

#include <algorithm>
#include <cmath>
#include <string>

#include "qoc/error.hpp"
#include "qoc/propagator.hpp"

namespace qoc::detail {

// Base column of the recursion may not exceed this multiple of the input norm.
inline constexpr double kChebyGrowthLimit = 2.0;

template <class Block, class Apply>
void chebyshev_propagate(const ChebyCoeffs& c, Apply&& apply, Block& x,
                         Block& phi0, Block& phi1, Block& phi2, Block& tmp) {
  const cplx minus_i(0.0, -1.0);
  const Index cutoff = c.cutoff();
  const Index last = x.cols() - 1;
  const double limit = kChebyGrowthLimit * x.col(last).norm() + 1e-300;
  const double inv = 1.0 / c.half_width;

  auto normalized = [&](const Block& in, Block& out) {
    apply(in, out);
    out -= c.center * in;
    out *= inv;
  };

  phi0 = x;
  x *= c.a[0];
  if (cutoff < 2) return;
  normalized(phi0, tmp);
  phi1 = minus_i * tmp;
  x += c.a[1] * phi1;
  for (Index m = 2; m < cutoff; ++m) {
    normalized(phi1, tmp);
    phi2 = (2.0 * minus_i) * tmp + phi0;
    x += c.a[static_cast<std::size_t>(m)] * phi2;
    if (phi2.col(last).norm() > limit) {
      throw SpectralRangeError(
          "Chebychev recursion diverged at order " + std::to_string(m) +
          "; spectral range does not bracket the generator, increase the margin");
    }
    std::swap(phi0, phi1);
    std::swap(phi1, phi2);
  }
}

// Adaptive Dormand-Prince 5(4) for dy/dt = -i·A·y over a signed interval dt.
// Error per unit step: each substep h must satisfy
// ‖err_j‖ <= tol·(h/|dt|)·(1 + ‖y_j‖) for every column j, so the local errors
// of one call sum to about tol.
template <class Block, class Apply>
void dopri5_propagate(Apply&& apply, Block& y, double dt, double tol) {
  if (dt == 0.0) return;
  const cplx minus_i(0.0, -1.0);
  auto f = [&](const Block& in, Block& out) {
    apply(in, out);
    out *= minus_i;
  };

  constexpr double a21 = 1.0 / 5.0;
  constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                   a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
  constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                   a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                   a65 = -5103.0 / 18656.0;
  constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                   b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
  constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0,
                   e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                   e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

  Block k1, k2, k3, k4, k5, k6, k7, stage, ynew, err;
  f(y, k1);

  const double span = std::abs(dt);
  const double sign = dt > 0.0 ? 1.0 : -1.0;
  double h;
  {
    const double d0 = y.norm();
    const double d1 = k1.norm();
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
    h = std::min(h * 10.0, span);
  }
  double done = 0.0;
  const double h_min = 1e-13 * span;
  while (done < span) {
    if (done + h > span) h = span - done;
    const double hs = sign * h;
    stage = y + (hs * a21) * k1;
    f(stage, k2);
    stage = y + hs * (a31 * k1 + a32 * k2);
    f(stage, k3);
    stage = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
    f(stage, k4);
    stage = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(stage, k5);
    stage = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(stage, k6);
    ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    f(ynew, k7);
    err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double ratio = 0.0;
    for (Index j = 0; j < err.cols(); ++j) {
      const double scale =
          tol * (h / span) * (1.0 + std::max(y.col(j).norm(), ynew.col(j).norm()));
      ratio = std::max(ratio, err.col(j).norm() / scale);
    }
    if (!std::isfinite(ratio)) ratio = 1e10;
    if (ratio <= 1.0) {
      done += h;
      y.swap(ynew);
      k1.swap(k7);
    }
    const double factor =
        ratio == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(ratio, -0.25), 0.2, 5.0);
    h *= ratio <= 1.0 ? factor : std::min(factor, 1.0);
    if (done < span && h < h_min) {
      throw Error("ODE step size underflow (h = " + std::to_string(h) + ")");
    }
  }
}

}  // namespace qoc::detail
