#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qoc/propagator.hpp"

namespace qoc::cli {

/// Transmon parameters as written in a config: GHz and MHz.
struct SystemConfig {
  int n_levels = 3;
  double w1 = 4.380;
  double w2 = 4.614;
  double wd = 4.498;
  double alpha1 = 210.0;
  double alpha2 = 215.0;
  double J = -3.0;
  double lambda = 1.03;
};

struct GridConfig {
  double T_ns = 100.0;
  double dt_ns = 0.1;
};

struct GuessConfig {
  std::string shape = "blackman";
  double amplitude_MHz = 35.0;
  double amplitude_im_MHz = 0.0;
  /// Standard deviation of Gaussian noise added to both controls (seeded).
  double noise_MHz = 0.0;
};

struct FunctionalConfig {
  std::string name = "pe";  // sm | pe | c
  std::string target = "sqrt_iswap";
  std::string target_file;  // overrides `target` when set
  double lambda_a = 0.0;
  std::vector<int> forbidden_levels;
  double lambda_b = 0.0;
};

struct MethodConfig {
  std::string name = "grape";  // grape | krotov
  int max_iters = 50;
  double J_target = 0.0;
  double grad_tol = 0.0;
  int history = 10;
  double c1 = 1e-4;
  double c2 = 0.9;
  std::optional<double> lower_MHz;
  std::optional<double> upper_MHz;
  double krotov_lambda_a = 1.0;
  std::string krotov_shape = "flattop";  // flattop | const
};

struct OutputConfig {
  std::filesystem::path dir = ".";
  std::string controls = "controls.csv";
  std::string convergence = "convergence.csv";
  std::string summary = "summary.json";
  std::string benchmark = "benchmark.csv";
};

struct BenchmarkConfig {
  std::optional<std::vector<int>> n_levels;
  std::optional<std::vector<double>> T_ns;
  int evaluations = 3;
  int warmup = 1;
  /// Optimization iterations per cell for final_J; 0 reports J of the guess.
  int iterations = 0;
};

struct RunConfig {
  SystemConfig system;
  GridConfig grid;
  GuessConfig guess;
  FunctionalConfig functional;
  MethodConfig method;
  PropagatorOptions propagator;
  OutputConfig output;
  BenchmarkConfig benchmark;
  int workers = 0;
  std::uint64_t seed = 0;
};

/// Parses and validates a JSON config. Unknown keys and invalid values raise
/// ConfigError naming the field path (e.g. "grid.dt_ns"). Relative paths are
/// resolved against `base_dir`.
RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

}  // namespace qoc::cli
