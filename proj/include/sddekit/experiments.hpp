#pragma once

#include "sddekit/problem.hpp"
#include "sddekit/stepper.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sddekit {

struct ConvergenceConfig {
  SddeProblem problem;
  std::vector<Scheme> schemes{Scheme::Ssbe};
  std::vector<double> stepsizes;
  double reference_h = 1.0 / 4096.0;
  std::size_t samples = 1000;
  /// Evaluation time t_N; the problem is integrated over [0, t_end].
  double t_end = 1.0;
  std::uint64_t master_seed = 0;
  Interpolation interp = Interpolation::Linear;
  SolverConfig solver;
  double blowup_threshold = kDefaultBlowupThreshold;
  /// 0 selects the hardware concurrency. Never changes results.
  unsigned workers = 0;

  void validate() const;
};

struct ErrorRow {
  Scheme scheme = Scheme::Ssbe;
  double h = 0.0;
  /// Mean absolute endpoint error against the coupled reference.
  double eps = 0.0;
  /// Sample standard deviation of the per-path error over sqrt(M).
  double std_error = 0.0;
  std::size_t blowups = 0;
  std::size_t failures = 0;
  double wall_seconds = 0.0;
};

struct ExperimentReport {
  std::string problem;
  std::vector<ErrorRow> rows;
  /// Least-squares order per scheme; absent when fewer than two positive rows.
  std::map<Scheme, std::optional<double>> fitted_order;
  double reference_h = 0.0;
  double t_end = 0.0;
  std::size_t samples = 0;
  std::uint64_t master_seed = 0;
  std::size_t reference_failures = 0;
  double wall_seconds = 0.0;
};

ExperimentReport strong_error(const ConvergenceConfig& cfg);

/// Least-squares slope of log eps against log h.
double fit_order(const std::vector<std::pair<double, double>>& rows);

struct StabilityTraceConfig {
  SddeProblem problem;
  Scheme scheme = Scheme::Ssbe;
  double h = 1.0;
  double horizon = 10.0;
  std::size_t samples = 1000;
  std::uint64_t master_seed = 0;
  Interpolation interp = Interpolation::Linear;
  SolverConfig solver;
  double blowup_threshold = kDefaultBlowupThreshold;
  unsigned workers = 0;

  void validate() const;
};

struct TracePoint {
  double t = 0.0;
  double mean_sq = 0.0;
  /// Paths that had already blown up or failed at this grid point.
  std::size_t divergent = 0;
};

struct StabilityTrace {
  Scheme scheme = Scheme::Ssbe;
  double h = 0.0;
  std::vector<TracePoint> points;
  std::size_t blowups = 0;
  std::size_t failures = 0;
  double wall_seconds = 0.0;
};

/// Sample mean of |X_n|^2 at every grid point. Aborted paths contribute their
/// last (clipped) state from the abort time on.
StabilityTrace ms_trace(const StabilityTraceConfig& cfg);

/// Negated least-squares slope of log mean |X_n|^2 against t over the second
/// half of the trace.
double empirical_rate(const std::vector<TracePoint>& trace);

struct Table1Config {
  std::size_t samples = 1000;
  std::uint64_t master_seed = 0;
  double reference_h = 1.0 / 4096.0;
  double t_end = 8.0;
  std::vector<double> stepsizes{1.0 / 128, 1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8};
  /// Each problem is integrated over [0, t_end]; columns are labelled by problem name.
  std::vector<SddeProblem> problems{make_preset("example2"), make_preset("example3")};
  Interpolation interp = Interpolation::Linear;
  SolverConfig solver;
  double blowup_threshold = kDefaultBlowupThreshold;
  unsigned workers = 0;
};

struct Table1 {
  std::vector<double> stepsizes;
  /// Column labels "<problem>:<scheme>".
  std::vector<std::string> columns;
  /// values[row][column]
  std::vector<std::vector<double>> values;
  std::vector<ExperimentReport> reports;
};

inline const std::vector<Scheme> kTable1Schemes{Scheme::EulerMaruyama, Scheme::SsbeLegacy, Scheme::Ssbe};

Table1 table1(const Table1Config& cfg);

}  // namespace sddekit
