#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qoc/cli/config.hpp"
#include "qoc/functionals.hpp"
#include "qoc/gates.hpp"
#include "qoc/grape.hpp"
#include "qoc/transmon.hpp"

namespace qoc::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 invalid input.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalid = 2;

/// Everything needed to run one transmon optimization.
struct Problem {
  TransmonParams params;
  std::shared_ptr<const ControlGenerator> generator;
  TimeGrid grid{std::vector<double>{0.0, 1.0}};
  std::vector<StateVector> basis;
  GateMatrix target;
  std::vector<Objective> objectives;
  FunctionalSpec functional;
  PiecewiseControls guess;
};

/// Builds the problem of `cfg`, optionally overriding the level count and
/// duration (benchmark cells).
Problem build_problem(const RunConfig& cfg, std::optional<int> n_levels = std::nullopt,
                      std::optional<double> T_ns = std::nullopt);

/// Four lines of four whitespace-separated entries `a+bj`. ValueError on
/// malformed input.
GateMatrix parse_gate_matrix(const std::string& text);
GateMatrix read_gate_matrix(const std::filesystem::path& path);

/// Controls CSV: t_midpoint_ns, omega_re_MHz, omega_im_MHz.
void write_controls_csv(const std::filesystem::path& path, const PiecewiseControls& controls,
                        const TimeGrid& grid);
PiecewiseControls read_controls_csv(const std::filesystem::path& path, const TimeGrid& grid);

void write_convergence_csv(const std::filesystem::path& path,
                           const std::vector<ConvergenceRecord>& history);

struct GateReport {
  WeylPoint c;
  LocalInvariants g;
  double concurrence = 0.0;
  double d_pe = 0.0;
  double pop_loss = 0.0;
  bool perfect_entangler = false;
};

GateReport analyze_gate(const GateMatrix& U);

struct BenchmarkRow {
  int n_levels = 0;
  Index N_H = 0;
  double T_ns = 0.0;
  Index N_T = 0;
  std::string functional;
  std::string method;
  double seconds_per_gradient = 0.0;
  double peak_rss_mb = 0.0;
  std::size_t stored_state_bytes = 0;
  double final_J = 0.0;
  int iterations = 0;
};

/// Times one benchmark cell: `warmup` untimed and `evaluations` timed
/// gradient evaluations (Krotov: iterations) at the guess; the minimum time
/// is reported.
BenchmarkRow benchmark_cell(const RunConfig& cfg, int n_levels, double T_ns);

void write_benchmark_csv(const std::filesystem::path& path, const std::vector<BenchmarkRow>& rows);

int cmd_optimize(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
int cmd_gate(const std::filesystem::path& matrix, std::ostream& out, std::ostream& err);
int cmd_benchmark(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
int cmd_propagate(const std::filesystem::path& config, const std::filesystem::path& controls,
                  std::ostream& out, std::ostream& err);

}  // namespace qoc::cli
