#include "sddekit/experiments.hpp"

#include "sddekit/paths.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace sddekit {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr std::size_t kPathBlock = 32;

/// Runs `per_path(i, accum)` for every path; each block of kPathBlock
/// consecutive paths is accumulated sequentially by one worker and the block
/// partials are combined by pairwise summation in block order, so the result
/// does not depend on the worker count.
template <class PerPath>
std::vector<double> reduce_paths(std::size_t samples, std::size_t width, unsigned workers,
                                 PerPath&& per_path) {
  const std::size_t blocks = (samples + kPathBlock - 1) / kPathBlock;
  std::vector<std::vector<double>> partial(blocks, std::vector<double>(width, 0.0));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= blocks) return;
      try {
        const std::size_t end = std::min(samples, (b + 1) * kPathBlock);
        for (std::size_t i = b * kPathBlock; i < end; ++i) per_path(i, partial[b]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(blocks);
        return;
      }
    }
  };
  unsigned n_threads = workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : workers;
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, std::max<std::size_t>(blocks, 1)));
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> total(width, 0.0);
  std::vector<double> column(blocks);
  for (std::size_t c = 0; c < width; ++c) {
    for (std::size_t b = 0; b < blocks; ++b) column[b] = partial[b][c];
    total[c] = pairwise_sum(column);
  }
  return total;
}

bool is_power_of_two(std::size_t v) { return v != 0 && std::has_single_bit(v); }

Vector clip(VecIn x, double threshold) {
  Vector out(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    out[k] = std::isnan(x[k]) ? threshold : std::clamp(x[k], -threshold, threshold);
  }
  return out;
}

double least_squares_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (!(sxx > 0.0)) throw ConfigError("least-squares fit needs at least two distinct abscissae");
  return sxy / sxx;
}

}  // namespace

void ConvergenceConfig::validate() const {
  problem.validate();
  solver.validate();
  if (schemes.empty() || stepsizes.empty()) throw ConfigError("schemes and stepsizes must be non-empty");
  if (samples < 1) throw ConfigError("sample count must be >= 1");
  const std::size_t fine = grid_steps(t_end, reference_h);
  (void)fine;
  for (double h : stepsizes) {
    grid_steps(t_end, h);
    if (h < reference_h) throw ConfigError("stepsizes must not be finer than the reference stepsize");
    const std::size_t factor = grid_steps(h, reference_h);
    if (!is_power_of_two(factor)) {
      std::ostringstream os;
      os.precision(17);
      os << "h = " << h << " is not a dyadic multiple of the reference stepsize " << reference_h;
      throw ConfigError(os.str());
    }
  }
  for (Scheme s : schemes) {
    if (s == Scheme::SsbeLegacy) {
      for (double h : stepsizes) legacy_kappa(problem, h);
    }
  }
}

ExperimentReport strong_error(const ConvergenceConfig& cfg) {
  const auto start = Clock::now();
  cfg.validate();
  const SddeProblem problem = cfg.problem.with_horizon(cfg.t_end);
  const std::size_t rows = cfg.schemes.size() * cfg.stepsizes.size();
  constexpr std::size_t kCols = 5;  // sum, sum of squares, blow-ups, failures, seconds
  const std::size_t width = rows * kCols + 1;

  std::vector<std::size_t> factors;
  for (double h : cfg.stepsizes) factors.push_back(grid_steps(h, cfg.reference_h));

  auto per_path = [&](std::size_t i, std::vector<double>& acc) {
    const BrownianLattice lattice = generate(derive_path_seed(cfg.master_seed, i), cfg.t_end,
                                             cfg.reference_h, problem.dim_noise);
    const Trajectory reference = run_trajectory(problem, Scheme::Ssbe, cfg.reference_h,
                                                lattice.increments, cfg.interp, cfg.solver,
                                                cfg.blowup_threshold);
    if (reference.status != PathStatus::Ok) {
      acc[rows * kCols] += 1.0;
      return;
    }
    const Vector ref_end = reference.final_state();
    for (std::size_t k = 0; k < cfg.stepsizes.size(); ++k) {
      const std::vector<double> coarse = coarsen(lattice, factors[k]);
      for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
        const auto row_start = Clock::now();
        const Trajectory traj = run_trajectory(problem, cfg.schemes[s], cfg.stepsizes[k], coarse,
                                               cfg.interp, cfg.solver, cfg.blowup_threshold);
        const double err = (clip(traj.final_state(), cfg.blowup_threshold) - ref_end).norm();
        double* row = acc.data() + (s * cfg.stepsizes.size() + k) * kCols;
        row[0] += err;
        row[1] += err * err;
        row[2] += traj.status == PathStatus::BlowUp ? 1.0 : 0.0;
        row[3] += traj.status == PathStatus::SolverFailure ? 1.0 : 0.0;
        row[4] += seconds_since(row_start);
      }
    }
  };
  const std::vector<double> total = reduce_paths(cfg.samples, width, cfg.workers, per_path);

  ExperimentReport report;
  report.problem = cfg.problem.name;
  report.reference_h = cfg.reference_h;
  report.t_end = cfg.t_end;
  report.samples = cfg.samples;
  report.master_seed = cfg.master_seed;
  report.reference_failures = static_cast<std::size_t>(total[rows * kCols]);
  const double m = static_cast<double>(cfg.samples - report.reference_failures);
  for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
    std::vector<std::pair<double, double>> fit_rows;
    bool fit_ok = true;
    for (std::size_t k = 0; k < cfg.stepsizes.size(); ++k) {
      const double* row = total.data() + (s * cfg.stepsizes.size() + k) * kCols;
      ErrorRow out;
      out.scheme = cfg.schemes[s];
      out.h = cfg.stepsizes[k];
      if (m > 0) {
        out.eps = row[0] / m;
        const double var = m > 1 ? std::max(0.0, (row[1] - m * out.eps * out.eps) / (m - 1)) : 0.0;
        out.std_error = std::sqrt(var / m);
      }
      out.blowups = static_cast<std::size_t>(row[2]);
      out.failures = static_cast<std::size_t>(row[3]);
      out.wall_seconds = row[4];
      report.rows.push_back(out);
      if (factors[k] == 1) continue;
      if (out.eps > 0.0 && std::isfinite(out.eps)) {
        fit_rows.emplace_back(out.h, out.eps);
      } else {
        fit_ok = false;
      }
    }
    std::optional<double> order;
    if (fit_ok && fit_rows.size() >= 2) order = fit_order(fit_rows);
    report.fitted_order[cfg.schemes[s]] = order;
  }
  report.wall_seconds = seconds_since(start);
  return report;
}

double fit_order(const std::vector<std::pair<double, double>>& rows) {
  if (rows.size() < 2) throw ConfigError("order fit needs at least two rows");
  std::vector<double> xs, ys;
  for (const auto& [h, eps] : rows) {
    if (!(h > 0.0)) throw ConfigError("order fit needs positive stepsizes");
    if (!(eps > 0.0)) throw ConfigError("order fit needs positive errors");
    xs.push_back(std::log(h));
    ys.push_back(std::log(eps));
  }
  return least_squares_slope(xs, ys);
}

void StabilityTraceConfig::validate() const {
  problem.validate();
  solver.validate();
  if (samples < 1) throw ConfigError("sample count must be >= 1");
  if (!(h > 0.0)) throw ConfigError("stepsize must be positive");
  grid_steps(horizon, h);
  if (scheme == Scheme::SsbeLegacy) legacy_kappa(problem, h);
}

StabilityTrace ms_trace(const StabilityTraceConfig& cfg) {
  const auto start = Clock::now();
  cfg.validate();
  const SddeProblem problem = cfg.problem.with_horizon(cfg.horizon);
  const std::size_t steps = grid_steps(cfg.horizon, cfg.h);
  const std::size_t points = steps + 1;
  const std::size_t width = 2 * points + 2;

  auto per_path = [&](std::size_t i, std::vector<double>& acc) {
    const BrownianLattice lattice = generate(derive_path_seed(cfg.master_seed, i), cfg.horizon,
                                             cfg.h, problem.dim_noise);
    const Trajectory traj = run_trajectory(problem, cfg.scheme, cfg.h, lattice.increments,
                                           cfg.interp, cfg.solver, cfg.blowup_threshold);
    const std::size_t last = traj.steps_completed;
    for (std::size_t k = 0; k <= last; ++k) acc[k] += traj.state(k).squaredNorm();
    const double tail = clip(traj.state(last), cfg.blowup_threshold).squaredNorm();
    if (traj.status == PathStatus::BlowUp) {
      acc[last] += tail - traj.state(last).squaredNorm();
    }
    for (std::size_t k = last + 1; k < points; ++k) acc[k] += tail;
    if (traj.status != PathStatus::Ok) {
      const std::size_t from = traj.status == PathStatus::BlowUp ? last : last + 1;
      for (std::size_t k = from; k < points; ++k) acc[points + k] += 1.0;
    }
    acc[2 * points] += traj.status == PathStatus::BlowUp ? 1.0 : 0.0;
    acc[2 * points + 1] += traj.status == PathStatus::SolverFailure ? 1.0 : 0.0;
  };
  const std::vector<double> total = reduce_paths(cfg.samples, width, cfg.workers, per_path);

  StabilityTrace trace;
  trace.scheme = cfg.scheme;
  trace.h = cfg.h;
  const double m = static_cast<double>(cfg.samples);
  trace.points.reserve(points);
  for (std::size_t k = 0; k < points; ++k) {
    trace.points.push_back(
        {static_cast<double>(k) * cfg.h, total[k] / m, static_cast<std::size_t>(total[points + k])});
  }
  trace.blowups = static_cast<std::size_t>(total[2 * points]);
  trace.failures = static_cast<std::size_t>(total[2 * points + 1]);
  trace.wall_seconds = seconds_since(start);
  return trace;
}

double empirical_rate(const std::vector<TracePoint>& trace) {
  if (trace.size() < 2) throw NotApplicable("trace too short for a rate fit");
  const double t_half = 0.5 * trace.back().t;
  std::vector<double> ts, logs;
  for (const TracePoint& p : trace) {
    if (p.t < t_half) continue;
    if (!(p.mean_sq > 0.0) || !std::isfinite(p.mean_sq) || p.divergent > 0) {
      throw NotApplicable("trace is not positive and finite over the fitted window");
    }
    ts.push_back(p.t);
    logs.push_back(std::log(p.mean_sq));
  }
  if (ts.size() < 2) throw NotApplicable("fitted window holds fewer than two points");
  return -least_squares_slope(ts, logs);
}

Table1 table1(const Table1Config& cfg) {
  Table1 table;
  table.stepsizes = cfg.stepsizes;
  table.values.assign(cfg.stepsizes.size(), {});
  for (const SddeProblem& problem : cfg.problems) {
    const std::string& name = problem.name;
    ConvergenceConfig cc;
    cc.problem = problem.with_horizon(cfg.t_end);
    cc.schemes = kTable1Schemes;
    cc.stepsizes = cfg.stepsizes;
    cc.reference_h = cfg.reference_h;
    cc.samples = cfg.samples;
    cc.t_end = cfg.t_end;
    cc.master_seed = cfg.master_seed;
    cc.interp = cfg.interp;
    cc.solver = cfg.solver;
    cc.blowup_threshold = cfg.blowup_threshold;
    cc.workers = cfg.workers;
    ExperimentReport report = strong_error(cc);
    for (Scheme s : kTable1Schemes) table.columns.push_back(name + ":" + std::string(to_string(s)));
    for (std::size_t s = 0; s < kTable1Schemes.size(); ++s) {
      for (std::size_t k = 0; k < cfg.stepsizes.size(); ++k) {
        table.values[k].push_back(report.rows[s * cfg.stepsizes.size() + k].eps);
      }
    }
    table.reports.push_back(std::move(report));
  }
  return table;
}

}  // namespace sddekit
