#include "qoc/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace qoc::cli {

namespace {

using nlohmann::json;

// Reads the members of one JSON object and rejects whatever is left over.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
  }
  ~Section() = default;

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key), "has the wrong type");
    }
  }

  template <class T>
  void read(const std::string& key, std::optional<T>& out) {
    if (!has(key)) return;
    if (j_.at(key).is_null()) return;
    T v;
    read(key, v);
    out = v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

void parse_system(Section& s, SystemConfig& c) {
  s.read("n_levels", c.n_levels);
  s.read("w1", c.w1);
  s.read("w2", c.w2);
  s.read("wd", c.wd);
  s.read("alpha1", c.alpha1);
  s.read("alpha2", c.alpha2);
  s.read("J", c.J);
  s.read("lambda", c.lambda);
  s.finish();
  require(c.n_levels >= 2, s.field("n_levels"), "must be at least 2");
  for (auto [key, v] : {std::pair{"w1", c.w1}, {"w2", c.w2}, {"wd", c.wd},
                        {"alpha1", c.alpha1}, {"alpha2", c.alpha2}, {"J", c.J},
                        {"lambda", c.lambda}}) {
    require(std::isfinite(v), s.field(key), "must be finite");
  }
}

void parse_grid(Section& s, GridConfig& c) {
  s.read("T_ns", c.T_ns);
  s.read("dt_ns", c.dt_ns);
  s.finish();
  require(positive(c.T_ns), s.field("T_ns"), "must be positive");
  require(positive(c.dt_ns), s.field("dt_ns"), "must be positive");
  const double ratio = c.T_ns / c.dt_ns;
  require(std::abs(ratio - std::round(ratio)) <= 1e-6 * std::max(1.0, ratio),
          s.field("dt_ns"), "must divide T_ns into an integer number of steps");
}

void parse_guess(Section& s, GuessConfig& c) {
  s.read("shape", c.shape);
  s.read("amplitude_MHz", c.amplitude_MHz);
  s.read("amplitude_im_MHz", c.amplitude_im_MHz);
  s.read("noise_MHz", c.noise_MHz);
  s.finish();
  require(c.shape == "blackman" || c.shape == "flattop" || c.shape == "const",
          s.field("shape"), "must be blackman, flattop or const");
  require(std::isfinite(c.amplitude_MHz), s.field("amplitude_MHz"), "must be finite");
  require(std::isfinite(c.amplitude_im_MHz), s.field("amplitude_im_MHz"), "must be finite");
  require(std::isfinite(c.noise_MHz) && c.noise_MHz >= 0.0, s.field("noise_MHz"),
          "must be non-negative");
}

void parse_functional(Section& s, FunctionalConfig& c, const std::filesystem::path& base) {
  s.read("name", c.name);
  s.read("target", c.target);
  s.read("target_file", c.target_file);
  s.read("lambda_a", c.lambda_a);
  s.read("forbidden_levels", c.forbidden_levels);
  s.read("lambda_b", c.lambda_b);
  s.finish();
  require(c.name == "sm" || c.name == "pe" || c.name == "c", s.field("name"),
          "must be sm, pe or c");
  static const std::set<std::string> gates{"identity", "cnot", "cz", "swap", "iswap",
                                           "sqrt_iswap"};
  require(gates.count(c.target) > 0, s.field("target"),
          "must be one of identity, cnot, cz, swap, iswap, sqrt_iswap");
  if (!c.target_file.empty()) {
    std::filesystem::path p(c.target_file);
    if (p.is_relative()) p = base / p;
    require(std::filesystem::exists(p), s.field("target_file"), "file not found");
    c.target_file = p.string();
  }
  require(std::isfinite(c.lambda_a) && c.lambda_a >= 0.0, s.field("lambda_a"),
          "must be non-negative");
  require(std::isfinite(c.lambda_b) && c.lambda_b >= 0.0, s.field("lambda_b"),
          "must be non-negative");
  for (int lv : c.forbidden_levels) {
    require(lv >= 0, s.field("forbidden_levels"), "levels must be non-negative");
  }
}

void parse_method(Section& s, MethodConfig& c) {
  s.read("name", c.name);
  s.read("max_iters", c.max_iters);
  s.read("J_target", c.J_target);
  s.read("grad_tol", c.grad_tol);
  if (s.has("lbfgs")) {
    Section l(s.raw("lbfgs"), s.field("lbfgs"));
    l.read("history", c.history);
    l.read("c1", c.c1);
    l.read("c2", c.c2);
    l.read("lower_MHz", c.lower_MHz);
    l.read("upper_MHz", c.upper_MHz);
    l.finish();
    require(c.history >= 1, l.field("history"), "must be at least 1");
    require(c.c1 > 0.0 && c.c1 < c.c2 && c.c2 < 1.0, l.field("c2"), "need 0 < c1 < c2 < 1");
    if (c.lower_MHz && c.upper_MHz) {
      require(*c.lower_MHz < *c.upper_MHz, l.field("upper_MHz"), "must exceed lower_MHz");
    }
  }
  if (s.has("krotov")) {
    Section k(s.raw("krotov"), s.field("krotov"));
    k.read("lambda_a", c.krotov_lambda_a);
    k.read("shape", c.krotov_shape);
    k.finish();
    require(positive(c.krotov_lambda_a), k.field("lambda_a"), "must be positive");
    require(c.krotov_shape == "flattop" || c.krotov_shape == "const", k.field("shape"),
            "must be flattop or const");
  }
  s.finish();
  require(c.name == "grape" || c.name == "krotov", s.field("name"), "must be grape or krotov");
  require(c.max_iters >= 0, s.field("max_iters"), "must be non-negative");
  require(std::isfinite(c.J_target), s.field("J_target"), "must be finite");
  require(c.grad_tol >= 0.0, s.field("grad_tol"), "must be non-negative");
}

void parse_propagator(Section& s, PropagatorOptions& c) {
  std::string kind = "auto";
  s.read("kind", kind);
  s.read("margin", c.margin);
  s.read("cheby_tol", c.cheby_tol);
  s.read("ode_tol", c.ode_tol);
  s.finish();
  if (kind == "auto") {
    c.kind = PropagatorKind::automatic;
  } else if (kind == "cheby") {
    c.kind = PropagatorKind::cheby;
  } else if (kind == "ode") {
    c.kind = PropagatorKind::ode;
  } else {
    throw ConfigError(s.field("kind"), "must be auto, cheby or ode");
  }
  require(std::isfinite(c.margin) && c.margin >= 0.0, s.field("margin"), "must be non-negative");
  require(c.cheby_tol >= 1e-16, s.field("cheby_tol"), "must be at least 1e-16");
  require(positive(c.ode_tol), s.field("ode_tol"), "must be positive");
}

void parse_output(Section& s, OutputConfig& c, const std::filesystem::path& base) {
  std::string dir = ".";
  s.read("dir", dir);
  s.read("controls", c.controls);
  s.read("convergence", c.convergence);
  s.read("summary", c.summary);
  s.read("benchmark", c.benchmark);
  s.finish();
  c.dir = std::filesystem::path(dir);
  if (c.dir.is_relative()) c.dir = base / c.dir;
}

void parse_benchmark(Section& s, BenchmarkConfig& c) {
  s.read("n_levels", c.n_levels);
  s.read("T_ns", c.T_ns);
  s.read("evaluations", c.evaluations);
  s.read("warmup", c.warmup);
  s.read("iterations", c.iterations);
  s.finish();
  if (c.n_levels) {
    require(!c.n_levels->empty(), s.field("n_levels"), "sweep list is empty");
    for (int n : *c.n_levels) require(n >= 2, s.field("n_levels"), "levels must be at least 2");
  }
  if (c.T_ns) {
    require(!c.T_ns->empty(), s.field("T_ns"), "sweep list is empty");
    for (double t : *c.T_ns) require(positive(t), s.field("T_ns"), "durations must be positive");
  }
  require(c.evaluations >= 1, s.field("evaluations"), "must be at least 1");
  require(c.warmup >= 0, s.field("warmup"), "must be non-negative");
  require(c.iterations >= 0, s.field("iterations"), "must be non-negative");
}

}  // namespace

RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section top(root, "");
  auto section = [&](const char* key, auto&& fn) {
    if (top.has(key)) {
      Section s(top.raw(key), key);
      fn(s);
    }
  };
  section("system", [&](Section& s) { parse_system(s, cfg.system); });
  section("grid", [&](Section& s) { parse_grid(s, cfg.grid); });
  section("guess", [&](Section& s) { parse_guess(s, cfg.guess); });
  section("functional", [&](Section& s) { parse_functional(s, cfg.functional, base_dir); });
  section("method", [&](Section& s) { parse_method(s, cfg.method); });
  section("propagator", [&](Section& s) { parse_propagator(s, cfg.propagator); });
  section("output", [&](Section& s) { parse_output(s, cfg.output, base_dir); });
  section("benchmark", [&](Section& s) { parse_benchmark(s, cfg.benchmark); });
  top.read("workers", cfg.workers);
  top.read("seed", cfg.seed);
  top.finish();
  if (!top.has("output")) cfg.output.dir = base_dir;
  require(cfg.workers >= 0, "workers", "must be non-negative");
  if (cfg.method.name == "krotov") {
    require(cfg.functional.lambda_a == 0.0 && cfg.functional.forbidden_levels.empty(),
            "method.name", "krotov does not support running costs");
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  std::filesystem::path base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_config(ss.str(), base);
}

}  // namespace qoc::cli
