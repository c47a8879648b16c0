#include "sddekit/cli.hpp"

#include "sddekit/experiments.hpp"
#include "sddekit/paths.hpp"
#include "sddekit/problem.hpp"
#include "sddekit/report.hpp"
#include "sddekit/stability.hpp"
#include "sddekit/stepper.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace sddekit::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// config documents

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = {
      {"command", c.command},
      {"problem", c.problem},
      {"a", c.a},
      {"b", c.b},
      {"c", c.c},
      {"d", c.d},
      {"lag", c.lag},
      {"psi", c.psi},
      {"q", c.q},
      {"scheme", c.scheme},
      {"h", c.h},
      {"ref-h", c.ref_h},
      {"M", c.samples},
      {"seed", c.seed},
      {"interp", c.interp},
      {"solver", c.solver},
      {"rel-tol", c.rel_tol},
      {"abs-tol", c.abs_tol},
      {"max-iter", c.max_iter},
      {"blowup-threshold", c.blowup_threshold},
      {"out", c.out},
      {"json", c.json},
  };
  j["T"] = c.horizon ? nlohmann::json(*c.horizon) : nlohmann::json(nullptr);
  j["tN"] = c.t_end ? nlohmann::json(*c.t_end) : nlohmann::json(nullptr);
  return j;
}

namespace {

template <class T>
void read_field(const nlohmann::json& doc, const char* key, T& target) {
  const auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return;
  try {
    target = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config field '") + key + "': unexpected type " + it->type_name());
  }
}

void read_field(const nlohmann::json& doc, const char* key, std::optional<double>& target) {
  const auto it = doc.find(key);
  if (it == doc.end()) return;
  if (it->is_null()) {
    target.reset();
    return;
  }
  if (!it->is_number()) {
    throw ConfigError(std::string("config field '") + key + "': expected a number, got " +
                      it->type_name());
  }
  target = it->get<double>();
}

std::pair<std::size_t, std::size_t> line_and_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

void apply_json(RunConfig& c, const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  static const std::vector<std::string> known{
      "command", "problem", "a",      "b",      "c",       "d",        "lag",      "psi",
      "q",       "scheme",  "h",      "ref-h",  "M",       "T",        "tN",       "seed",
      "interp",  "solver",  "rel-tol", "abs-tol", "max-iter", "blowup-threshold", "workers", "out",
      "json"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("config field '" + key + "' is not recognised");
    }
  }
  read_field(doc, "problem", c.problem);
  read_field(doc, "a", c.a);
  read_field(doc, "b", c.b);
  read_field(doc, "c", c.c);
  read_field(doc, "d", c.d);
  read_field(doc, "lag", c.lag);
  read_field(doc, "psi", c.psi);
  read_field(doc, "q", c.q);
  read_field(doc, "scheme", c.scheme);
  read_field(doc, "h", c.h);
  read_field(doc, "ref-h", c.ref_h);
  read_field(doc, "M", c.samples);
  read_field(doc, "T", c.horizon);
  read_field(doc, "tN", c.t_end);
  read_field(doc, "seed", c.seed);
  read_field(doc, "interp", c.interp);
  read_field(doc, "solver", c.solver);
  read_field(doc, "rel-tol", c.rel_tol);
  read_field(doc, "abs-tol", c.abs_tol);
  read_field(doc, "max-iter", c.max_iter);
  read_field(doc, "blowup-threshold", c.blowup_threshold);
  read_field(doc, "workers", c.workers);
  read_field(doc, "out", c.out);
  read_field(doc, "json", c.json);
}

void load_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = line_and_column(text, e.byte);
    std::ostringstream os;
    os << path << ':' << line << ':' << col << ": invalid JSON";
    throw ConfigError(os.str());
  }
  if (doc.is_object() && doc.contains("config") && doc["config"].is_object()) doc = doc["config"];
  try {
    apply_json(c, doc);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// stepsize lists

namespace {

double parse_single_stepsize(const std::string& token, int* exponent) {
  const auto caret = token.find('^');
  if (caret != std::string::npos) {
    if (token.substr(0, caret) != "2") throw ConfigError("stepsize '" + token + "': only 2^k is supported");
    std::size_t used = 0;
    int k = 0;
    try {
      k = std::stoi(token.substr(caret + 1), &used);
    } catch (const std::exception&) {
      throw ConfigError("stepsize '" + token + "': bad exponent");
    }
    if (used != token.size() - caret - 1) throw ConfigError("stepsize '" + token + "': bad exponent");
    if (exponent != nullptr) *exponent = k;
    return std::ldexp(1.0, k);
  }
  if (exponent != nullptr) throw ConfigError("range endpoints must use the 2^k form: '" + token + "'");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    throw ConfigError("stepsize '" + token + "' is not a number");
  }
  if (used != token.size()) throw ConfigError("stepsize '" + token + "' is not a number");
  return v;
}

}  // namespace

std::vector<double> parse_stepsizes(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    token.erase(std::remove_if(token.begin(), token.end(), ::isspace), token.end());
    if (token.empty()) continue;
    const auto dots = token.find("..");
    if (dots != std::string::npos) {
      int k0 = 0, k1 = 0;
      parse_single_stepsize(token.substr(0, dots), &k0);
      parse_single_stepsize(token.substr(dots + 2), &k1);
      const int dir = k1 >= k0 ? 1 : -1;
      for (int k = k0;; k += dir) {
        out.push_back(std::ldexp(1.0, k));
        if (k == k1) break;
      }
    } else {
      out.push_back(parse_single_stepsize(token, nullptr));
    }
  }
  if (out.empty()) throw ConfigError("empty stepsize list");
  for (double h : out) {
    if (!(h > 0.0)) throw ConfigError("stepsizes must be positive");
  }
  return out;
}

// ---------------------------------------------------------------------------
// commands

namespace {

std::vector<Scheme> parse_schemes(const std::string& text) {
  std::vector<Scheme> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (!token.empty()) out.push_back(parse_scheme(token));
  }
  if (out.empty()) throw ConfigError("empty scheme list");
  return out;
}

SddeProblem build_problem(const RunConfig& c, std::optional<double> horizon) {
  if (c.problem == "linear") {
    return make_linear({c.a, c.b, c.c, c.d, c.lag}, c.psi, horizon.value_or(1.0));
  }
  if (c.problem == "pantograph") {
    return make_linear_pantograph(c.q, {c.a, c.b, c.c, c.d, 1.0}, c.psi,
                                  horizon.value_or(preset_default_horizon("pantograph")));
  }
  for (const std::string& name : preset_names()) {
    if (c.problem == name) return make_preset(name, horizon);
  }
  throw ConfigError("unknown problem '" + c.problem +
                    "' (expected example1, example2, example3, nonlinear, pantograph or linear)");
}

double default_horizon(const RunConfig& c) {
  return c.problem == "linear" ? 1.0 : preset_default_horizon(c.problem);
}

SolverConfig build_solver(const RunConfig& c) {
  SolverConfig s;
  s.mode = parse_solver_mode(c.solver);
  s.rel_tol = c.rel_tol;
  s.abs_tol = c.abs_tol;
  s.max_iter = c.max_iter;
  s.validate();
  return s;
}

fs::path output_dir(const RunConfig& c) {
  fs::path dir = c.out;
  if (dir.empty()) {
    const char* env = std::getenv("SDDEKIT_OUTPUT_DIR");
    dir = env != nullptr && *env != '\0' ? fs::path(env) : fs::path(".");
  }
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << text;
}

void write_sidecar(const fs::path& path, const RunConfig& c, nlohmann::json results) {
  nlohmann::json doc = {{"tool", "sddekit"},
                        {"version", kVersion},
                        {"master_seed", c.seed},
                        {"config", to_json(c)},
                        {"results", std::move(results)}};
  write_text(path, doc.dump(2) + "\n");
}

int cmd_simulate(RunConfig& c, std::ostream& out) {
  const Scheme scheme = parse_scheme(c.scheme);
  const Interpolation interp = parse_interpolation(c.interp);
  if (c.h.empty()) c.h = "2^-4";
  const std::vector<double> hs = parse_stepsizes(c.h);
  if (hs.size() != 1) throw ConfigError("simulate takes a single stepsize");
  const double h = hs.front();
  SddeProblem problem = build_problem(c, c.horizon);
  problem.validate();
  if (scheme == Scheme::SsbeLegacy) legacy_kappa(problem, h);
  const BrownianLattice lattice =
      generate(derive_path_seed(c.seed, 0), problem.horizon, h, problem.dim_noise);
  const Trajectory traj =
      run_trajectory(problem, scheme, h, lattice.increments, interp, build_solver(c), c.blowup_threshold);

  const fs::path dir = output_dir(c);
  std::ostringstream csv;
  write_trajectory_csv(csv, traj);
  write_text(dir / "trajectory.csv", csv.str());
  write_sidecar(dir / "trajectory.json", c,
                {{"status", to_string(traj.status)},
                 {"steps", traj.steps_completed},
                 {"zero_delay_clamps", traj.zero_delay_clamps},
                 {"solvability_warning", traj.solvability_warning},
                 {"message", traj.message}});
  out << "simulate " << problem.name << " scheme=" << to_string(scheme) << " h=" << format_number(h)
      << " steps=" << traj.steps_completed << " status=" << to_string(traj.status) << '\n';
  out << "final state " << format_number(traj.final_state()[0]) << '\n';
  if (traj.solvability_warning) out << "warning: (gamma1 + gamma2) h >= 1, stage solutions may not be unique\n";
  return traj.status == PathStatus::Ok ? kOk : kNumericalFailure;
}

int cmd_converge(RunConfig& c, std::ostream& out) {
  if (c.h.empty()) c.h = "2^-3..2^-7";
  ConvergenceConfig cc;
  cc.t_end = c.t_end.value_or(c.horizon.value_or(default_horizon(c)));
  cc.problem = build_problem(c, cc.t_end);
  cc.schemes = parse_schemes(c.scheme);
  cc.stepsizes = parse_stepsizes(c.h);
  const std::vector<double> ref = parse_stepsizes(c.ref_h);
  if (ref.size() != 1) throw ConfigError("ref-h takes a single stepsize");
  cc.reference_h = ref.front();
  cc.samples = c.samples;
  cc.master_seed = c.seed;
  cc.interp = parse_interpolation(c.interp);
  cc.solver = build_solver(c);
  cc.blowup_threshold = c.blowup_threshold;
  cc.workers = c.workers;
  const ExperimentReport report = strong_error(cc);

  const fs::path dir = output_dir(c);
  std::ostringstream csv;
  write_report_csv(csv, report);
  write_text(dir / "converge.csv", csv.str());
  write_sidecar(dir / "converge.json", c, to_json(report));

  out << "strong error, problem " << report.problem << ", t_N = " << format_number(report.t_end)
      << ", M = " << report.samples << ", reference h = " << format_number(report.reference_h) << '\n';
  out << std::left << std::setw(14) << "scheme" << std::setw(14) << "h" << std::setw(16) << "eps"
      << std::setw(16) << "std_error" << "blowups\n";
  for (const ErrorRow& r : report.rows) {
    out << std::left << std::setw(14) << to_string(r.scheme) << std::setw(14) << format_number(r.h)
        << std::setw(16) << std::setprecision(6) << r.eps << std::setw(16) << r.std_error << r.blowups
        << '\n';
  }
  for (const auto& [scheme, order] : report.fitted_order) {
    out << "fitted order " << to_string(scheme) << ": "
        << (order ? format_number(*order) : std::string("n/a")) << '\n';
  }
  return kOk;
}

int cmd_stability(RunConfig& c, std::ostream& out) {
  if (c.h.empty()) c.h = "1";
  const double horizon = c.horizon.value_or(60.0);
  SddeProblem problem = build_problem(c, horizon);
  std::vector<StabilityTrace> traces;
  nlohmann::json results = nlohmann::json::array();
  for (Scheme scheme : parse_schemes(c.scheme)) {
    for (double h : parse_stepsizes(c.h)) {
      StabilityTraceConfig sc;
      sc.problem = problem;
      sc.scheme = scheme;
      sc.h = h;
      sc.horizon = horizon;
      sc.samples = c.samples;
      sc.master_seed = c.seed;
      sc.interp = parse_interpolation(c.interp);
      sc.solver = build_solver(c);
      sc.blowup_threshold = c.blowup_threshold;
      sc.workers = c.workers;
      StabilityTrace trace = ms_trace(sc);
      nlohmann::json entry = {{"scheme", to_string(scheme)},
                              {"h", h},
                              {"blowups", trace.blowups},
                              {"failures", trace.failures},
                              {"final_mean_sq", trace.points.back().mean_sq},
                              {"wall_seconds", trace.wall_seconds}};
      std::string rate_text = "n/a";
      try {
        const double rate = empirical_rate(trace.points);
        entry["empirical_rate"] = rate;
        rate_text = format_number(rate);
      } catch (const NotApplicable&) {
        entry["empirical_rate"] = nullptr;
      }
      std::string bound_text = "n/a";
      entry["nu_h_plus"] = nullptr;
      if (problem.gammas && problem.delay_upper_bound) {
        try {
          const double bound = nu_h_plus(*problem.gammas, *problem.delay_upper_bound, h);
          entry["nu_h_plus"] = bound;
          bound_text = format_number(bound);
        } catch (const NotApplicable&) {
        }
      }
      out << to_string(scheme) << " h=" << format_number(h) << " mean|X|^2(T)="
          << format_number(trace.points.back().mean_sq) << " blowups=" << trace.blowups
          << " rate=" << rate_text << " nu_h_plus=" << bound_text << '\n';
      results.push_back(std::move(entry));
      traces.push_back(std::move(trace));
    }
  }
  const fs::path dir = output_dir(c);
  std::ostringstream csv;
  write_trace_csv(csv, traces);
  write_text(dir / "stability.csv", csv.str());
  write_sidecar(dir / "stability.json", c, results);
  return kOk;
}

int cmd_table1(RunConfig& c, std::ostream& out) {
  if (c.h.empty()) c.h = "2^-7..2^-3";
  Table1Config tc;
  tc.samples = c.samples;
  tc.master_seed = c.seed;
  const std::vector<double> ref = parse_stepsizes(c.ref_h);
  if (ref.size() != 1) throw ConfigError("ref-h takes a single stepsize");
  tc.reference_h = ref.front();
  tc.t_end = c.t_end.value_or(8.0);
  tc.stepsizes = parse_stepsizes(c.h);
  tc.interp = parse_interpolation(c.interp);
  tc.solver = build_solver(c);
  tc.blowup_threshold = c.blowup_threshold;
  tc.workers = c.workers;
  const Table1 table = table1(tc);

  const fs::path dir = output_dir(c);
  std::ostringstream csv;
  write_table1_csv(csv, table);
  write_text(dir / "table1.csv", csv.str());
  nlohmann::json reports = nlohmann::json::array();
  for (const ExperimentReport& r : table.reports) reports.push_back(to_json(r));
  write_sidecar(dir / "table1.json", c, reports);

  out << std::left << std::setw(12) << "h";
  for (const std::string& col : table.columns) out << std::setw(24) << col;
  out << '\n';
  for (std::size_t k = 0; k < table.stepsizes.size(); ++k) {
    out << std::left << std::setw(12) << format_number(table.stepsizes[k]);
    for (double v : table.values[k]) {
      std::ostringstream cell;
      cell << std::setprecision(5) << v;
      out << std::setw(24) << cell.str();
    }
    out << '\n';
  }
  return kOk;
}

int cmd_analyze(RunConfig& c, std::ostream& out) {
  if (c.h.empty()) c.h = "1";
  const std::vector<double> hs = parse_stepsizes(c.h);
  if (hs.size() != 1) throw ConfigError("analyze takes a single stepsize");
  const SddeProblem problem = build_problem(c, c.horizon);
  if (!problem.gammas) {
    throw NotApplicable("problem '" + problem.name +
                        "' carries no one-sided Lipschitz constants; analysis needs gamma1..gamma4");
  }
  const bool bounded = problem.delay_upper_bound.has_value();
  const StabilityProfile profile = stability_profile(*problem.gammas, problem.delay_upper_bound.value_or(0.0), hs.front());
  StabilityProfile shown = profile;
  if (!bounded) {
    shown.nu_plus.reset();
    shown.nu_h_plus.reset();
  }
  std::string verdict;
  if (!(profile.beta < 0.0)) {
    verdict = "not covered by the exponential stability conditions (beta >= 0)";
  } else if (!bounded) {
    verdict = "beta < 0 but the delay is unbounded; decay rates not certified";
  } else {
    verdict = "exponentially mean-square stable (beta < 0)";
  }
  std::optional<bool> linear_ok;
  if (problem.linear) linear_ok = linear_ms_stable(*problem.linear);

  if (c.json) {
    nlohmann::json j = to_json(shown);
    j["problem"] = problem.name;
    j["verdict"] = verdict;
    j["linear_ms_stable"] = linear_ok ? nlohmann::json(*linear_ok) : nlohmann::json(nullptr);
    out << j.dump(2) << '\n';
  } else {
    out << "problem             " << problem.name << '\n' << format_profile(shown);
    out << "verdict             " << verdict << '\n';
    if (linear_ok) out << "linear-MS           " << (*linear_ok ? "stable" : "not certified") << '\n';
  }
  return kOk;
}

void add_common(CLI::App* sub, RunConfig& c, std::string& config_path) {
  sub->add_option("--config", config_path, "flat JSON config file (flags override)");
  sub->add_option("--problem", c.problem, "example1|example2|example3|nonlinear|pantograph|linear");
  sub->add_option("--a", c.a, "linear drift coefficient of x");
  sub->add_option("--b", c.b, "linear drift coefficient of the delayed state");
  sub->add_option("--c", c.c, "linear diffusion coefficient of x");
  sub->add_option("--d", c.d, "linear diffusion coefficient of the delayed state");
  sub->add_option("--lag", c.lag, "constant lag of the linear problem");
  sub->add_option("--psi", c.psi, "constant initial value (linear, pantograph)");
  sub->add_option("--q", c.q, "pantograph ratio in (0,1)");
  sub->add_option("--T", c.horizon, "horizon");
  sub->add_option("--seed", c.seed, "master seed");
  sub->add_option("--interp", c.interp, "linear|constant");
  sub->add_option("--solver", c.solver, "newton|fixed-point|auto");
  sub->add_option("--rel-tol", c.rel_tol);
  sub->add_option("--abs-tol", c.abs_tol);
  sub->add_option("--max-iter", c.max_iter);
  sub->add_option("--blowup-threshold", c.blowup_threshold);
  sub->add_option("--workers", c.workers, "worker threads (0 = all cores)");
  sub->add_option("--out", c.out, "output directory (default $SDDEKIT_OUTPUT_DIR or .)");
}

std::string find_config_path(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::string config_path;
  try {
    const std::string pre = find_config_path(argc, argv);
    if (!pre.empty()) load_config_file(cfg, pre);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  CLI::App app{"Integrators and experiments for stochastic delay differential equations", "sddekit"};
  app.set_help_flag("--help", "print help");
  app.require_subcommand(1);
  CLI::App* simulate = app.add_subcommand("simulate", "integrate one path and write a trajectory CSV");
  CLI::App* converge = app.add_subcommand("converge", "strong-error study against a coupled reference");
  CLI::App* stability = app.add_subcommand("stability", "mean-square stability traces");
  CLI::App* table = app.add_subcommand("table1", "strong-error table for examples 2 and 3");
  CLI::App* analyze = app.add_subcommand("analyze", "analytic stability profile");
  for (CLI::App* sub : {simulate, converge, stability, table, analyze}) add_common(sub, cfg, config_path);
  for (CLI::App* sub : {simulate, converge, stability}) {
    sub->add_option("--scheme", cfg.scheme, "ssbe|ssbe-legacy|em (comma list for experiments)");
  }
  for (CLI::App* sub : {simulate, converge, stability, table, analyze}) {
    sub->add_option("--h", cfg.h, "stepsize(s): 0.25, 2^-3, 2^-3..2^-7");
  }
  for (CLI::App* sub : {converge, stability, table}) sub->add_option("--M", cfg.samples, "Monte Carlo samples");
  for (CLI::App* sub : {converge, table}) {
    sub->add_option("--ref-h", cfg.ref_h, "reference stepsize");
    sub->add_option("--tN", cfg.t_end, "evaluation time");
  }
  analyze->add_flag("--json", cfg.json, "print JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (simulate->parsed()) {
      cfg.command = "simulate";
      return cmd_simulate(cfg, out);
    }
    if (converge->parsed()) {
      cfg.command = "converge";
      return cmd_converge(cfg, out);
    }
    if (stability->parsed()) {
      cfg.command = "stability";
      return cmd_stability(cfg, out);
    }
    if (table->parsed()) {
      cfg.command = "table1";
      return cmd_table1(cfg, out);
    }
    cfg.command = "analyze";
    return cmd_analyze(cfg, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const HistoryUnderflow& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NotApplicable& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  }
}

}  // namespace sddekit::cli
