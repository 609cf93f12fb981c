#include "qoc/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qoc {

void validate_state(const StateVector& v, const char* what) {
  if (v.size() == 0) throw ValueError(std::string(what) + " is empty");
  if (!v.allFinite()) throw ValueError(std::string(what) + " has non-finite entries");
}

Operator::Operator(SparseMatrix m, bool hermitian)
    : m_(std::move(m)), hermitian_(hermitian) {
  if (m_.rows() != m_.cols()) {
    throw DimensionError("operator must be square, got " +
                         std::to_string(m_.rows()) + "x" +
                         std::to_string(m_.cols()));
  }
  m_.makeCompressed();
  if (hermitian_) {
    const double defect = hermitian_defect();
    if (!(defect < 1e-12)) {
      throw ValueError("operator flagged Hermitian has |A - A^+| = " +
                       std::to_string(defect));
    }
  }
}

Operator Operator::identity(Index n) {
  SparseMatrix m(n, n);
  m.setIdentity();
  return Operator(std::move(m), true);
}

Operator Operator::zero(Index n) { return Operator(SparseMatrix(n, n), true); }

Operator Operator::from_dense(const Eigen::MatrixXcd& m, bool hermitian,
                              double drop_tol) {
  std::vector<Eigen::Triplet<cplx>> triplets;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (std::abs(m(i, j)) > drop_tol) triplets.emplace_back(i, j, m(i, j));
    }
  }
  SparseMatrix s(m.rows(), m.cols());
  s.setFromTriplets(triplets.begin(), triplets.end());
  return Operator(std::move(s), hermitian);
}

Operator Operator::adjoint() const {
  SparseMatrix a = m_.adjoint();
  return Operator(std::move(a), hermitian_);
}

double Operator::hermitian_defect() const {
  const SparseMatrix diff = m_ - SparseMatrix(m_.adjoint());
  double worst = 0.0;
  for (Index k = 0; k < diff.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) {
      worst = std::max(worst, std::abs(it.value()));
    }
  }
  return worst;
}

StateVector apply(const Operator& op, const StateVector& v) {
  if (op.dim() != v.size()) {
    throw DimensionError("apply: operator dim " + std::to_string(op.dim()) +
                         " vs state length " + std::to_string(v.size()));
  }
  return op.matrix() * v;
}

void apply_add(const Operator& op, const StateVector& v, StateVector& y,
               cplx alpha) {
  if (op.dim() != v.size() || y.size() != v.size()) {
    throw DimensionError("apply_add: dimension mismatch");
  }
  y.noalias() += alpha * (op.matrix() * v);
}

cplx inner(const StateVector& a, const StateVector& b) {
  if (a.size() != b.size()) {
    throw DimensionError("inner: lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  return a.dot(b);
}

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw ValueError("time grid needs at least one interval");
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i] > points_[i - 1]) || !std::isfinite(points_[i])) {
      throw ValueError("time grid points must be finite and strictly increasing");
    }
  }
}

double TimeGrid::weight(Index n) const {
  const Index nt = num_intervals();
  if (n < 0 || n > nt) throw ValueError("time grid weight index out of range");
  if (n == 0) return dt(0);
  if (n == nt) return dt(nt - 1);
  return 0.5 * (t(n + 1) - t(n - 1));
}

bool TimeGrid::uniform(double rtol) const {
  const double dt0 = dt(0);
  for (Index i = 1; i < num_intervals(); ++i) {
    if (std::abs(dt(i) - dt0) > rtol * dt0) return false;
  }
  return true;
}

TimeGrid make_time_grid(double T, double dt) {
  if (!(T > 0.0) || !(dt > 0.0)) throw ValueError("T and dt must be positive");
  const double ratio = T / dt;
  const double nt = std::round(ratio);
  if (nt < 1.0 || std::abs(ratio - nt) > 1e-6 * std::max(1.0, ratio)) {
    throw ValueError("T/dt = " + std::to_string(ratio) + " is not an integer");
  }
  const auto n = static_cast<std::size_t>(nt);
  std::vector<double> points(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    points[i] = T * static_cast<double>(i) / static_cast<double>(n);
  }
  return TimeGrid(std::move(points));
}

PiecewiseControls::PiecewiseControls(Index intervals, Index controls)
    : values_(Eigen::MatrixXd::Zero(intervals, controls)) {}

PiecewiseControls::PiecewiseControls(Eigen::MatrixXd values)
    : values_(std::move(values)) {
  if (!values_.allFinite()) throw ValueError("control values must be finite");
}

std::vector<double> PiecewiseControls::row(Index i) const {
  std::vector<double> r(static_cast<std::size_t>(num_controls()));
  for (Index l = 0; l < num_controls(); ++l) r[static_cast<std::size_t>(l)] = values_(i, l);
  return r;
}

Eigen::VectorXd PiecewiseControls::flatten() const {
  return Eigen::Map<const Eigen::VectorXd>(values_.data(), values_.size());
}

PiecewiseControls PiecewiseControls::unflatten(const Eigen::VectorXd& x,
                                               Index intervals, Index controls) {
  if (x.size() != intervals * controls) {
    throw DimensionError("unflatten: vector length does not match shape");
  }
  return PiecewiseControls(
      Eigen::Map<const Eigen::MatrixXd>(x.data(), intervals, controls));
}

void PiecewiseControls::check_shape(const TimeGrid& grid, Index controls) const {
  if (num_intervals() != grid.num_intervals() || num_controls() != controls) {
    throw DimensionError("controls have shape (" + std::to_string(num_intervals()) +
                         ", " + std::to_string(num_controls()) + "), expected (" +
                         std::to_string(grid.num_intervals()) + ", " +
                         std::to_string(controls) + ")");
  }
}

ControlGenerator::ControlGenerator(Operator drift, std::vector<Operator> controls)
    : drift_(std::move(drift)), controls_(std::move(controls)) {
  const Index n = drift_.dim();
  hermitian_ = drift_.hermitian();
  for (const auto& c : controls_) {
    if (c.dim() != n) throw DimensionError("generator terms differ in dimension");
    hermitian_ = hermitian_ && c.hermitian();
  }

  std::vector<Eigen::Triplet<cplx>> triplets;
  auto collect = [&](const Operator& op) {
    const SparseMatrix& m = op.matrix();
    for (Index k = 0; k < m.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
        triplets.emplace_back(it.row(), it.col(), cplx(1.0));
      }
    }
  };
  collect(drift_);
  for (const auto& c : controls_) collect(c);
  pattern_ = SparseMatrix(n, n);
  pattern_.setFromTriplets(triplets.begin(), triplets.end());
  pattern_.makeCompressed();

  auto locate = [&](const Operator& op) {
    std::vector<Index> pos;
    const SparseMatrix& m = op.matrix();
    pos.reserve(static_cast<std::size_t>(m.nonZeros()));
    const auto* outer = pattern_.outerIndexPtr();
    const auto* inner = pattern_.innerIndexPtr();
    for (Index r = 0; r < m.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
        const auto* first = inner + outer[r];
        const auto* last = inner + outer[r + 1];
        const auto* hit = std::lower_bound(first, last, it.col());
        pos.push_back(static_cast<Index>(hit - inner));
      }
    }
    return pos;
  };
  positions_.push_back(locate(drift_));
  for (const auto& c : controls_) positions_.push_back(locate(c));
}

Operator ControlGenerator::make_buffer() const {
  Operator out;
  out.mutable_matrix() = pattern_;
  return out;
}

void ControlGenerator::evaluate_into(std::span<const double> eps, Operator& out) const {
  if (static_cast<Index>(eps.size()) != num_controls()) {
    throw DimensionError("generator evaluated with wrong number of controls");
  }
  SparseMatrix& m = out.mutable_matrix();
  if (m.nonZeros() != pattern_.nonZeros() || m.rows() != pattern_.rows()) {
    m = pattern_;
  }
  cplx* values = m.valuePtr();
  std::fill(values, values + m.nonZeros(), cplx(0.0));
  auto accumulate = [&](const Operator& op, const std::vector<Index>& pos,
                        double coeff) {
    const cplx* src = op.matrix().valuePtr();
    for (std::size_t k = 0; k < pos.size(); ++k) values[pos[k]] += coeff * src[k];
  };
  accumulate(drift_, positions_[0], 1.0);
  for (std::size_t l = 0; l < controls_.size(); ++l) {
    if (eps[l] != 0.0) accumulate(controls_[l], positions_[l + 1], eps[l]);
  }
  // Hermitian by linearity when every term is; not re-validated per interval.
  out.hermitian_ = hermitian_;
}

Operator ControlGenerator::evaluate(std::span<const double> eps) const {
  Operator out = make_buffer();
  evaluate_into(eps, out);
  return out;
}

}  // namespace qoc
