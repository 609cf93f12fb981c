#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "qoc/error.hpp"

namespace qoc {

using Index = Eigen::Index;
using cplx = std::complex<double>;

/// Complex amplitude vector: a Hilbert-space state or a vectorized density
/// matrix (dimension N_H², same operations).
using StateVector = Eigen::VectorXcd;
using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

/// Throws ValueError if `v` is empty or has a non-finite entry.
void validate_state(const StateVector& v, const char* what = "state");

/// Square sparse complex operator with an optional Hermiticity hint. The hint
/// is validated on construction (max |A - A†| entry below 1e-12).
class Operator {
 public:
  Operator() = default;
  explicit Operator(SparseMatrix m, bool hermitian = false);

  static Operator identity(Index n);
  static Operator zero(Index n);
  /// Entries with |entry| <= drop_tol are not stored.
  static Operator from_dense(const Eigen::MatrixXcd& m, bool hermitian = false,
                             double drop_tol = 0.0);

  Index dim() const noexcept { return m_.rows(); }
  Index nonzeros() const noexcept { return m_.nonZeros(); }
  bool hermitian() const noexcept { return hermitian_; }
  const SparseMatrix& matrix() const noexcept { return m_; }
  SparseMatrix& mutable_matrix() noexcept { return m_; }

  Operator adjoint() const;
  Eigen::MatrixXcd dense() const { return Eigen::MatrixXcd(m_); }
  double hermitian_defect() const;

 private:
  friend class ControlGenerator;

  SparseMatrix m_;
  bool hermitian_ = false;
};

/// op·v.
StateVector apply(const Operator& op, const StateVector& v);
/// y ← y + alpha·op·v.
void apply_add(const Operator& op, const StateVector& v, StateVector& y,
               cplx alpha = 1.0);
/// ⟨a|b⟩, conjugate-linear in `a`.
cplx inner(const StateVector& a, const StateVector& b);

/// Time grid t_0 < t_1 < ... < t_{N_T}. Interval i (0-based) spans
/// [t(i), t(i+1)]; it is interval n = i+1 in one-based notation.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> points);

  Index num_intervals() const noexcept {
    return static_cast<Index>(points_.size()) - 1;
  }
  double t(Index n) const { return points_.at(static_cast<std::size_t>(n)); }
  /// Length of interval i.
  double dt(Index i) const { return t(i + 1) - t(i); }
  /// Δt_n, the time step around grid point n = 0..N_T.
  double weight(Index n) const;
  double midpoint(Index i) const { return 0.5 * (t(i) + t(i + 1)); }
  double duration() const { return points_.back() - points_.front(); }
  bool uniform(double rtol = 1e-10) const;
  const std::vector<double>& points() const noexcept { return points_; }

 private:
  std::vector<double> points_;
};

/// Uniform grid on [0, T] with N_T = round(T/dt) intervals. T/dt must be an
/// integer to within 1e-6 (relative), otherwise ValueError.
TimeGrid make_time_grid(double T, double dt);

/// Control values ε_{il}: one row per time interval, one column per control.
class PiecewiseControls {
 public:
  PiecewiseControls() = default;
  PiecewiseControls(Index intervals, Index controls);
  explicit PiecewiseControls(Eigen::MatrixXd values);

  Index num_intervals() const noexcept { return values_.rows(); }
  Index num_controls() const noexcept { return values_.cols(); }
  double operator()(Index i, Index l) const { return values_(i, l); }
  double& operator()(Index i, Index l) { return values_(i, l); }
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  Eigen::MatrixXd& values() noexcept { return values_; }

  /// Values of all controls on interval i.
  std::vector<double> row(Index i) const;

  /// Flat view in column-major order (interval index fastest).
  Eigen::VectorXd flatten() const;
  static PiecewiseControls unflatten(const Eigen::VectorXd& x, Index intervals,
                                     Index controls);

  void check_shape(const TimeGrid& grid, Index controls) const;

 private:
  Eigen::MatrixXd values_;
};

/// H(ε) = H⁽⁰⁾ + Σ_l ε_l H⁽ˡ⁾ with a linear dependence on every control.
///
/// All terms are merged onto one sparsity pattern at construction so that
/// evaluating the generator on an interval only rewrites stored values.
class ControlGenerator {
 public:
  ControlGenerator(Operator drift, std::vector<Operator> controls);

  Index dim() const noexcept { return drift_.dim(); }
  Index num_controls() const noexcept {
    return static_cast<Index>(controls_.size());
  }
  const Operator& drift() const noexcept { return drift_; }
  const Operator& control(Index l) const {
    return controls_.at(static_cast<std::size_t>(l));
  }
  const std::vector<Operator>& controls() const noexcept { return controls_; }
  /// True if the drift and every control term carry the Hermitian hint.
  bool hermitian() const noexcept { return hermitian_; }

  Operator evaluate(std::span<const double> eps) const;
  /// Overwrites `out` with H(ε). `out` must have been produced by
  /// evaluate() or make_buffer() on this generator.
  void evaluate_into(std::span<const double> eps, Operator& out) const;
  Operator make_buffer() const;

 private:
  Operator drift_;
  std::vector<Operator> controls_;
  bool hermitian_ = false;
  SparseMatrix pattern_;
  // Position of each term's stored entry inside pattern_'s value array.
  std::vector<std::vector<Index>> positions_;
};

}  // namespace qoc
