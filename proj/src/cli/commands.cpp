#include "qoc/cli/commands.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "qoc/krotov.hpp"

namespace qoc::cli {

namespace {

using nlohmann::json;

std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  return f;
}

// Resident set size sampled every 50 ms on a background thread.
class RssSampler {
 public:
  RssSampler() : thread_([this] { loop(); }) {}
  ~RssSampler() {
    stop_ = true;
    thread_.join();
  }
  double peak_mb() {
    sample();
    return static_cast<double>(peak_.load()) / (1024.0 * 1024.0);
  }

 private:
  void sample() {
    std::ifstream f("/proc/self/statm");
    long pages_total = 0;
    long pages_resident = 0;
    if (f >> pages_total >> pages_resident) {
      const long bytes = pages_resident * sysconf(_SC_PAGESIZE);
      long prev = peak_.load();
      while (bytes > prev && !peak_.compare_exchange_weak(prev, bytes)) {
      }
    }
  }
  void loop() {
    while (!stop_) {
      sample();
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }

  std::atomic<bool> stop_{false};
  std::atomic<long> peak_{0};
  std::thread thread_;
};

GradOptions grad_options(const RunConfig& cfg) {
  GradOptions g;
  g.propagator = cfg.propagator;
  g.workers = cfg.workers;
  return g;
}

std::vector<StateVector> final_states(const Problem& p, const PiecewiseControls& controls,
                                      const PropagatorOptions& opts) {
  std::vector<StateVector> out;
  for (const auto& obj : p.objectives) {
    out.push_back(propagate(*obj.generator, controls, p.grid, obj.initial, Direction::forward,
                            false, opts)
                      .state(0));
  }
  return out;
}

json gate_json(const GateReport& r) {
  return {{"c", {r.c.c1, r.c.c2, r.c.c3}},
          {"g", {r.g.g1, r.g.g2, r.g.g3}},
          {"concurrence", r.concurrence},
          {"d_pe", r.d_pe},
          {"pop_loss", r.pop_loss},
          {"perfect_entangler", r.perfect_entangler}};
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ValueError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

cplx parse_complex(const std::string& tok) {
  std::string s = tok;
  auto fail = [&]() -> cplx { throw ValueError("cannot parse complex entry '" + tok + "'"); };
  if (s.empty()) return fail();
  if (s.front() == '(' && s.back() == ')') s = s.substr(1, s.size() - 2);
  auto to_double = [&](const std::string& x) {
    if (x.empty() || x == "+") return 1.0;
    if (x == "-") return -1.0;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(x, &used);
    } catch (const std::exception&) {
      fail();
    }
    if (used != x.size()) fail();
    return v;
  };
  if (s.back() != 'j' && s.back() != 'J') return {to_double(s), 0.0};
  s.pop_back();
  // Split at the last sign that is not a leading sign or part of an exponent.
  std::size_t split = std::string::npos;
  for (std::size_t i = s.size(); i-- > 1;) {
    if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E') {
      split = i;
      break;
    }
  }
  if (split == std::string::npos) return {0.0, to_double(s)};
  return {to_double(s.substr(0, split)), to_double(s.substr(split))};
}

}  // namespace

Problem build_problem(const RunConfig& cfg, std::optional<int> n_levels,
                      std::optional<double> T_ns) {
  Problem p;
  const SystemConfig& s = cfg.system;
  const int nq = n_levels.value_or(s.n_levels);
  p.params = TransmonParams::from_lab_units(s.w1, s.w2, s.wd, s.alpha1, s.alpha2, s.J,
                                            s.lambda, nq);
  p.generator = std::make_shared<const ControlGenerator>(build_transmon(p.params));
  p.grid = make_time_grid(T_ns.value_or(cfg.grid.T_ns), cfg.grid.dt_ns);
  p.basis = logical_basis(nq);
  p.target = cfg.functional.target_file.empty() ? named_gate(cfg.functional.target)
                                                : read_gate_matrix(cfg.functional.target_file);

  const std::string& name = cfg.functional.name;
  if (name == "sm") {
    p.functional = make_sm_overlap();
    p.objectives = gate_objectives(p.generator, p.basis, p.target);
  } else {
    p.functional = name == "pe" ? make_pe(p.basis) : make_c(p.basis);
    for (const auto& b : p.basis) p.objectives.push_back({b, std::nullopt, p.generator});
  }
  if (cfg.functional.lambda_a > 0.0) p.functional.lambda_a = cfg.functional.lambda_a;
  if (!cfg.functional.forbidden_levels.empty() && cfg.functional.lambda_b > 0.0) {
    p.functional.forbidden =
        ForbiddenCost{cfg.functional.lambda_b, forbidden_projector(nq, cfg.functional.forbidden_levels)};
  }

  const Index nt = p.grid.num_intervals();
  Eigen::MatrixXd guess(nt, 2);
  guess.col(0) = guess_pulse(cfg.guess.shape, mhz_to_angular(cfg.guess.amplitude_MHz), p.grid);
  guess.col(1) = guess_pulse(cfg.guess.shape, mhz_to_angular(cfg.guess.amplitude_im_MHz), p.grid);
  if (cfg.guess.noise_MHz > 0.0) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, mhz_to_angular(cfg.guess.noise_MHz));
    for (Index l = 0; l < 2; ++l) {
      for (Index i = 0; i < nt; ++i) guess(i, l) += noise(rng);
    }
  }
  p.guess = PiecewiseControls(guess);
  return p;
}

GateMatrix parse_gate_matrix(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<cplx>> rows;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<cplx> row;
    std::string tok;
    while (ls >> tok) row.push_back(parse_complex(tok));
    if (!row.empty()) rows.push_back(row);
  }
  if (rows.size() != 4) {
    throw ValueError("gate matrix needs 4 rows, got " + std::to_string(rows.size()));
  }
  GateMatrix U;
  for (std::size_t i = 0; i < 4; ++i) {
    if (rows[i].size() != 4) {
      throw ValueError("gate matrix row " + std::to_string(i + 1) + " has " +
                       std::to_string(rows[i].size()) + " entries, expected 4");
    }
    for (std::size_t j = 0; j < 4; ++j) {
      U(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return U;
}

GateMatrix read_gate_matrix(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValueError("cannot open gate matrix file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_gate_matrix(ss.str());
}

void write_controls_csv(const std::filesystem::path& path, const PiecewiseControls& controls,
                        const TimeGrid& grid) {
  auto f = open_output(path);
  f << "t_midpoint_ns,omega_re_MHz,omega_im_MHz\n";
  for (Index i = 0; i < controls.num_intervals(); ++i) {
    f << format_double(grid.midpoint(i)) << ',' << format_double(angular_to_mhz(controls(i, 0)))
      << ',' << format_double(angular_to_mhz(controls(i, 1))) << '\n';
  }
}

PiecewiseControls read_controls_csv(const std::filesystem::path& path, const TimeGrid& grid) {
  std::ifstream f(path);
  if (!f) throw ValueError("cannot open controls file " + path.string());
  std::string line;
  std::getline(f, line);
  if (line.rfind("t_midpoint_ns,omega_re_MHz,omega_im_MHz", 0) != 0) {
    throw ValueError("controls file has an unexpected header");
  }
  std::vector<std::array<double, 3>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::array<double, 3> r{};
    char c1 = 0;
    char c2 = 0;
    if (!(ls >> r[0] >> c1 >> r[1] >> c2 >> r[2]) || c1 != ',' || c2 != ',') {
      throw ValueError("malformed controls row: " + line);
    }
    rows.push_back(r);
  }
  const Index nt = grid.num_intervals();
  if (static_cast<Index>(rows.size()) != nt) {
    throw ValueError("controls file has " + std::to_string(rows.size()) + " rows, grid has " +
                     std::to_string(nt) + " intervals");
  }
  PiecewiseControls c(nt, 2);
  for (Index i = 0; i < nt; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (std::abs(r[0] - grid.midpoint(i)) > 1e-9 * std::max(1.0, grid.duration())) {
      throw ValueError("controls file midpoints do not match the grid");
    }
    c(i, 0) = mhz_to_angular(r[1]);
    c(i, 1) = mhz_to_angular(r[2]);
  }
  return c;
}

void write_convergence_csv(const std::filesystem::path& path,
                           const std::vector<ConvergenceRecord>& history) {
  auto f = open_output(path);
  f << "iteration,J,grad_inf,grad_evals,seconds_per_gradient\n";
  for (const auto& r : history) {
    f << r.iteration << ',' << format_double(r.J) << ',' << format_double(r.grad_inf) << ','
      << r.grad_evals << ',' << format_double(r.seconds_per_gradient) << '\n';
  }
}

GateReport analyze_gate(const GateMatrix& U) {
  GateReport r;
  r.c = weyl_coordinates(U);
  r.g = local_invariants(U);
  r.concurrence = gate_concurrence(r.c);
  r.d_pe = d_pe(r.g);
  r.pop_loss = pop_loss(U);
  r.perfect_entangler = is_perfect_entangler(r.c, 1e-9);
  return r;
}

BenchmarkRow benchmark_cell(const RunConfig& cfg, int n_levels, double T_ns) {
  BenchmarkRow row;
  row.n_levels = n_levels;
  row.N_H = static_cast<Index>(n_levels) * n_levels;
  row.T_ns = T_ns;
  row.functional = cfg.functional.name;
  row.method = cfg.method.name;

  RssSampler rss;
  const Problem p = build_problem(cfg, n_levels, T_ns);
  row.N_T = p.grid.num_intervals();
  const GradOptions gopts = grad_options(cfg);
  KrotovParams kp;
  kp.lambda_a = cfg.method.krotov_lambda_a;
  if (cfg.method.krotov_shape == "const") kp.shape = Eigen::VectorXd::Ones(row.N_T);

  const bool krotov = cfg.method.name == "krotov";
  auto once = [&]() {
    if (krotov) {
      krotov_iterate(p.objectives, p.guess, p.grid, p.functional, kp, gopts);
    } else {
      const GradResult r = grape_gradient(p.objectives, p.guess, p.grid, p.functional, gopts);
      row.stored_state_bytes = r.stored_entries * sizeof(cplx);
    }
  };
  for (int w = 0; w < cfg.benchmark.warmup; ++w) once();
  double best = std::numeric_limits<double>::infinity();
  for (int e = 0; e < cfg.benchmark.evaluations; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    once();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  row.seconds_per_gradient = best;
  if (krotov) {
    row.stored_state_bytes = p.objectives.size() * static_cast<std::size_t>(row.N_T + 1) *
                             static_cast<std::size_t>(row.N_H) * sizeof(cplx);
  }

  ConvergenceCriteria stop;
  stop.max_iters = cfg.benchmark.iterations;
  stop.J_target = cfg.method.J_target;
  if (cfg.benchmark.iterations == 0) {
    row.final_J = evaluate_functional(p.objectives, p.guess, p.grid, p.functional, gopts);
  } else if (krotov) {
    const ControlResult r =
        run_krotov(p.objectives, p.guess, p.grid, p.functional, kp, stop, gopts);
    row.final_J = r.J;
    row.iterations = r.iterations;
  } else {
    GrapeOptions go;
    go.grad = gopts;
    const ControlResult r = run_grape(p.objectives, p.guess, p.grid, p.functional, stop, go);
    row.final_J = r.J;
    row.iterations = r.iterations;
  }
  row.peak_rss_mb = rss.peak_mb();
  return row;
}

void write_benchmark_csv(const std::filesystem::path& path, const std::vector<BenchmarkRow>& rows) {
  auto f = open_output(path);
  f << "n_levels,N_H,T_ns,N_T,functional,method,seconds_per_gradient,peak_rss_mb,"
       "stored_state_bytes,final_J,iterations\n";
  for (const auto& r : rows) {
    f << r.n_levels << ',' << r.N_H << ',' << format_double(r.T_ns) << ',' << r.N_T << ','
      << r.functional << ',' << r.method << ',' << format_double(r.seconds_per_gradient) << ','
      << format_double(r.peak_rss_mb) << ',' << r.stored_state_bytes << ','
      << format_double(r.final_J) << ',' << r.iterations << '\n';
  }
}

int cmd_optimize(const std::filesystem::path& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(config);
    const Problem p = build_problem(cfg);
    const GradOptions gopts = grad_options(cfg);

    ConvergenceCriteria stop;
    stop.max_iters = cfg.method.max_iters;
    stop.J_target = cfg.method.J_target;
    stop.grad_tol = cfg.method.grad_tol;

    ControlResult res;
    if (cfg.method.name == "krotov") {
      KrotovParams kp;
      kp.lambda_a = cfg.method.krotov_lambda_a;
      if (cfg.method.krotov_shape == "const") kp.shape = Eigen::VectorXd::Ones(p.grid.num_intervals());
      res = run_krotov(p.objectives, p.guess, p.grid, p.functional, kp, stop, gopts);
    } else {
      GrapeOptions go;
      go.grad = gopts;
      go.history = cfg.method.history;
      go.c1 = cfg.method.c1;
      go.c2 = cfg.method.c2;
      if (cfg.method.lower_MHz) go.lower = mhz_to_angular(*cfg.method.lower_MHz);
      if (cfg.method.upper_MHz) go.upper = mhz_to_angular(*cfg.method.upper_MHz);
      res = run_grape(p.objectives, p.guess, p.grid, p.functional, stop, go);
    }

    const GateMatrix U =
        extract_gate(final_states(p, res.controls, cfg.propagator), p.basis);
    const GateReport report = analyze_gate(U);

    const auto& o = cfg.output;
    write_controls_csv(o.dir / o.controls, res.controls, p.grid);
    write_convergence_csv(o.dir / o.convergence, res.history);
    json summary = {{"method", cfg.method.name},
                    {"functional", cfg.functional.name},
                    {"J", res.J},
                    {"iterations", res.iterations},
                    {"grad_evals", res.grad_evals},
                    {"status", res.status},
                    {"gate", gate_json(report)}};
    auto f = open_output(o.dir / o.summary);
    f << summary.dump(2) << '\n';
    out << summary.dump(2) << '\n';
    return kExitOk;
  });
}

int cmd_gate(const std::filesystem::path& matrix, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const GateReport r = analyze_gate(read_gate_matrix(matrix));
    out << std::setprecision(12);
    out << "c1 = " << r.c.c1 << "\nc2 = " << r.c.c2 << "\nc3 = " << r.c.c3 << "\n";
    out << "g1 = " << r.g.g1 << "\ng2 = " << r.g.g2 << "\ng3 = " << r.g.g3 << "\n";
    out << "C = " << r.concurrence << "\nD_PE = " << r.d_pe << "\np_loss = " << r.pop_loss
        << "\nperfect_entangler = " << (r.perfect_entangler ? "true" : "false") << "\n";
    return kExitOk;
  });
}

int cmd_benchmark(const std::filesystem::path& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(config);
    const std::vector<int> levels = cfg.benchmark.n_levels.value_or(std::vector<int>{cfg.system.n_levels});
    const std::vector<double> durations = cfg.benchmark.T_ns.value_or(std::vector<double>{cfg.grid.T_ns});
    std::vector<BenchmarkRow> rows;
    int failures = 0;
    for (int n : levels) {
      for (double T : durations) {
        try {
          rows.push_back(benchmark_cell(cfg, n, T));
        } catch (const std::exception& e) {
          err << "cell n_levels=" << n << " T_ns=" << T << " failed: " << e.what() << "\n";
          BenchmarkRow r;
          r.n_levels = n;
          r.N_H = static_cast<Index>(n) * n;
          r.T_ns = T;
          r.functional = cfg.functional.name;
          r.method = cfg.method.name;
          r.seconds_per_gradient = std::numeric_limits<double>::quiet_NaN();
          r.peak_rss_mb = std::numeric_limits<double>::quiet_NaN();
          r.final_J = std::numeric_limits<double>::quiet_NaN();
          rows.push_back(r);
          ++failures;
        }
        const auto& r = rows.back();
        out << "n_levels=" << r.n_levels << " T_ns=" << r.T_ns << " N_T=" << r.N_T
            << " seconds_per_gradient=" << r.seconds_per_gradient << "\n";
      }
    }
    write_benchmark_csv(cfg.output.dir / cfg.output.benchmark, rows);
    return failures ? kExitFailure : kExitOk;
  });
}

int cmd_propagate(const std::filesystem::path& config, const std::filesystem::path& controls,
                  std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(config);
    const Problem p = build_problem(cfg);
    const PiecewiseControls c = read_controls_csv(controls, p.grid);
    const double J = evaluate_functional(p.objectives, c, p.grid, p.functional, grad_options(cfg));
    const GateReport report = analyze_gate(extract_gate(final_states(p, c, cfg.propagator), p.basis));
    json summary = {{"functional", cfg.functional.name}, {"J", J}, {"gate", gate_json(report)}};
    out << summary.dump(2) << '\n';
    return kExitOk;
  });
}

}  // namespace qoc::cli
