#include "sddekit/stepper.hpp"

#include "sddekit/paths.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace sddekit {

std::string_view to_string(Scheme scheme) noexcept {
  switch (scheme) {
    case Scheme::Ssbe: return "ssbe";
    case Scheme::SsbeLegacy: return "ssbe-legacy";
    case Scheme::EulerMaruyama: return "em";
  }
  return "?";
}

std::string_view to_string(Interpolation interp) noexcept {
  return interp == Interpolation::Linear ? "linear" : "constant";
}

std::string_view to_string(SolverMode mode) noexcept {
  switch (mode) {
    case SolverMode::Newton: return "newton";
    case SolverMode::FixedPoint: return "fixed-point";
    case SolverMode::Auto: return "auto";
  }
  return "?";
}

std::string_view to_string(PathStatus status) noexcept {
  switch (status) {
    case PathStatus::Ok: return "ok";
    case PathStatus::BlowUp: return "blow-up";
    case PathStatus::SolverFailure: return "solver-failure";
  }
  return "?";
}

Scheme parse_scheme(std::string_view text) {
  if (text == "ssbe") return Scheme::Ssbe;
  if (text == "ssbe-legacy") return Scheme::SsbeLegacy;
  if (text == "em") return Scheme::EulerMaruyama;
  throw ConfigError("unknown scheme '" + std::string(text) + "' (expected ssbe, ssbe-legacy or em)");
}

Interpolation parse_interpolation(std::string_view text) {
  if (text == "linear") return Interpolation::Linear;
  if (text == "constant") return Interpolation::Constant;
  throw ConfigError("unknown interpolation '" + std::string(text) + "' (expected linear or constant)");
}

SolverMode parse_solver_mode(std::string_view text) {
  if (text == "newton") return SolverMode::Newton;
  if (text == "fixed-point") return SolverMode::FixedPoint;
  if (text == "auto") return SolverMode::Auto;
  throw ConfigError("unknown solver mode '" + std::string(text) + "'");
}

void SolverConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ConfigError("solver tolerances must be positive");
  if (max_iter < 1) throw ConfigError("solver max_iter must be >= 1");
}

// ---------------------------------------------------------------------------

StageHistory::StageHistory(const SddeProblem& problem, double step, std::size_t reserve_steps)
    : problem_(&problem), step_(step), dim_(static_cast<std::size_t>(problem.dim_state)) {
  stages_.reserve(reserve_steps * dim_);
  committed_.reserve((reserve_steps + 1) * dim_);
  push_committed(problem.initial_at(0.0));
}

Eigen::Map<const Vector> StageHistory::stage(std::size_t j) const {
  return {stages_.data() + j * dim_, static_cast<Eigen::Index>(dim_)};
}

Eigen::Map<const Vector> StageHistory::committed(std::size_t j) const {
  return {committed_.data() + j * dim_, static_cast<Eigen::Index>(dim_)};
}

void StageHistory::push_stage(VecIn value) {
  stages_.insert(stages_.end(), value.data(), value.data() + dim_);
}

void StageHistory::push_committed(VecIn value) {
  committed_.insert(committed_.end(), value.data(), value.data() + dim_);
}

StepWorkspace::StepWorkspace(int dim, int dim_noise)
    : delayed(dim), stage(dim), tilde(dim), next(dim), diffusion(dim, dim_noise), v(dim), fval(dim),
      res(dim), trial(dim), trial_v(dim), trial_f(dim), trial_res(dim), delta(dim), probe(dim),
      probe_v(dim), fprobe(dim), jac_x(dim, dim), jac_y(dim, dim), jac(dim, dim), lu(dim) {}

// ---------------------------------------------------------------------------

DelayedRef delayed_ref(std::size_t n, double h, const SddeProblem& problem, Interpolation interp) {
  if (!(h > 0.0)) throw ConfigError("stepsize must be positive");
  const double t = static_cast<double>(n) * h;
  const double tau = problem.delay(t);
  if (!(tau >= 0.0) || !std::isfinite(tau)) {
    std::ostringstream os;
    os << "delay(" << t << ") = " << tau << " is not a finite non-negative value";
    throw ConfigError(os.str());
  }
  DelayedRef ref;
  double s = t - tau;
  double r = s / h;
  const double rr = std::round(r);
  if (std::abs(r - rr) <= 1e-9) {
    r = rr;
    s = rr * h;
  }
  ref.time = s;
  if (r < 0.0) {
    const double floor_time = -problem.delay_lower_bound;
    if (s < floor_time - 1e-12 * std::max(1.0, problem.delay_lower_bound)) {
      std::ostringstream os;
      os << "delayed time " << s << " at step " << n << " is below the history depth "
         << floor_time;
      throw HistoryUnderflow(os.str());
    }
    ref.kind = DelayedRef::Kind::InitialSegment;
    return ref;
  }
  ref.kind = DelayedRef::Kind::Interpolated;
  const double j = std::floor(r);
  if (j >= static_cast<double>(n)) {
    ref.zero_delay = true;
    ref.couples_current = true;
    ref.lag_steps = 1;
    ref.left = n > 0 ? n - 1 : 0;
    ref.mu = 0.0;
    return ref;
  }
  ref.left = static_cast<std::size_t>(j);
  ref.lag_steps = n - ref.left;
  ref.mu = interp == Interpolation::Linear ? r - j : 0.0;
  ref.couples_current = ref.lag_steps == 1 && ref.mu > 0.0;
  return ref;
}

// ---------------------------------------------------------------------------

namespace {

struct StageEquation {
  VecIn y_prev;
  VecIn b;
  double h;
  double weight;
  bool coupled;
  const SddeProblem& problem;

  // Residual c - y_prev - h f(c, v(c)); also leaves v(c) and f(c, v(c)) behind.
  double eval(VecIn c, Vector& v, Vector& f, Vector& res) const {
    if (coupled) {
      v.noalias() = weight * c + (1.0 - weight) * b;
      problem.drift(c, v, f);
    } else {
      problem.drift(c, b, f);
    }
    res.noalias() = c - y_prev - h * f;
    return res.norm();
  }
};

void build_newton_matrix(const StageEquation& eq, const SolverConfig& cfg, VecIn c,
                         StepWorkspace& ws) {
  const auto d = c.size();
  const DriftJacobianFn* jac_fn = nullptr;
  if (cfg.jacobian) {
    jac_fn = &*cfg.jacobian;
  } else if (eq.problem.drift_jacobian) {
    jac_fn = &*eq.problem.drift_jacobian;
  }
  if (jac_fn != nullptr) {
    const VecIn v = eq.coupled ? VecIn(ws.v) : eq.b;
    (*jac_fn)(c, v, ws.jac_x, ws.jac_y);
    ws.jac = -eq.h * ws.jac_x;
    if (eq.coupled) ws.jac.noalias() -= (eq.h * eq.weight) * ws.jac_y;
  } else {
    // Forward differences of the total map c -> f(c, v(c)), so the coupled
    // derivative df/dx + w df/dy comes out directly.
    const double root_eps = std::sqrt(std::numeric_limits<double>::epsilon());
    for (Eigen::Index j = 0; j < d; ++j) {
      ws.probe = c;
      const double eta = root_eps * (1.0 + std::abs(c[j]));
      ws.probe[j] += eta;
      const double step = ws.probe[j] - c[j];
      if (eq.coupled) {
        ws.probe_v.noalias() = eq.weight * ws.probe + (1.0 - eq.weight) * eq.b;
        eq.problem.drift(ws.probe, ws.probe_v, ws.fprobe);
      } else {
        eq.problem.drift(ws.probe, eq.b, ws.fprobe);
      }
      ws.jac.col(j) = -(eq.h / step) * (ws.fprobe - ws.fval);
    }
  }
  ws.jac.diagonal().array() += 1.0;
}

SolveStats iterate(const StageEquation& eq, SolverMode mode, const SolverConfig& cfg, VecOut out,
                   StepWorkspace& ws) {
  Vector& c = ws.stage;
  // Explicit Euler predictor.
  eq.problem.drift(eq.y_prev, eq.b, ws.fval);
  c.noalias() = eq.y_prev + eq.h * ws.fval;
  double r = eq.eval(c, ws.v, ws.fval, ws.res);

  for (int iter = 0;; ++iter) {
    if (!std::isfinite(r) || !c.allFinite()) {
      throw SolverDivergence("non-finite value in stage iteration", r, iter);
    }
    if (r <= cfg.abs_tol + cfg.rel_tol * c.norm()) {
      out = c;
      return {iter, r};
    }
    if (iter == cfg.max_iter) {
      std::ostringstream os;
      os << "stage solve (" << to_string(mode) << ") did not converge in " << cfg.max_iter
         << " iterations, residual " << r;
      throw StageSolveFailure(os.str(), r, iter);
    }
    if (mode == SolverMode::FixedPoint) {
      c.noalias() = eq.y_prev + eq.h * ws.fval;
      r = eq.eval(c, ws.v, ws.fval, ws.res);
      continue;
    }
    build_newton_matrix(eq, cfg, c, ws);
    if (c.size() == 1) {
      ws.delta[0] = ws.res[0] / ws.jac(0, 0);
    } else {
      ws.lu.compute(ws.jac);
      ws.delta.noalias() = ws.lu.solve(ws.res);
    }
    // Backtracking on the residual norm; at the round-off floor the full step is kept.
    double lambda = 1.0;
    double rt = 0.0;
    bool accepted = false;
    for (int k = 0; k < 30; ++k) {
      ws.trial.noalias() = c - lambda * ws.delta;
      rt = eq.eval(ws.trial, ws.trial_v, ws.trial_f, ws.trial_res);
      if (std::isfinite(rt) && rt <= (1.0 - 1e-4 * lambda) * r) {
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) {
      ws.trial.noalias() = c - ws.delta;
      rt = eq.eval(ws.trial, ws.trial_v, ws.trial_f, ws.trial_res);
    }
    c.swap(ws.trial);
    ws.v.swap(ws.trial_v);
    ws.fval.swap(ws.trial_f);
    ws.res.swap(ws.trial_res);
    r = rt;
  }
}

}  // namespace

SolveStats solve_stage(VecIn y_prev, VecIn delayed, double h, const SddeProblem& problem, double mu,
                       bool coupled, const SolverConfig& cfg, VecOut out, StepWorkspace& ws) {
  const StageEquation eq{y_prev, delayed, h, mu, coupled, problem};
  if (cfg.mode != SolverMode::Auto) return iterate(eq, cfg.mode, cfg, out, ws);
  try {
    return iterate(eq, SolverMode::Newton, cfg, out, ws);
  } catch (const StageSolveFailure&) {
    try {
      return iterate(eq, SolverMode::FixedPoint, cfg, out, ws);
    } catch (const StageSolveFailure&) {
    }
    throw;
  }
}

Vector solve_stage(VecIn y_prev, VecIn delayed, double h, const SddeProblem& problem, double mu,
                   bool coupled, const SolverConfig& cfg) {
  StepWorkspace ws(problem.dim_state, problem.dim_noise);
  Vector out(problem.dim_state);
  solve_stage(y_prev, delayed, h, problem, mu, coupled, cfg, out, ws);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_step_preconditions(std::size_t n, const StageHistory& history, bool needs_stages) {
  if (history.committed_count() != n + 1 || (needs_stages && history.stage_count() != n)) {
    std::ostringstream os;
    os << "history does not match step " << n << " (" << history.committed_count()
       << " committed, " << history.stage_count() << " stages)";
    throw ConfigError(os.str());
  }
}

}  // namespace

int ssbe_step(std::size_t n, StageHistory& history, VecIn increment, const SddeProblem& problem,
              Interpolation interp, const SolverConfig& cfg, StepWorkspace& ws) {
  check_step_preconditions(n, history, true);
  const double h = history.step();
  const DelayedRef ref = delayed_ref(n, h, problem, interp);
  const Eigen::Map<const Vector> y_n = history.committed(n);
  bool coupled = false;
  double weight = 0.0;
  if (ref.kind == DelayedRef::Kind::InitialSegment) {
    problem.initial(ref.time, ws.delayed);
  } else if (ref.zero_delay) {
    ws.delayed = y_n;
    coupled = true;
    weight = 1.0;
  } else if (ref.couples_current) {
    ws.delayed = history.stage(ref.left);
    coupled = true;
    weight = ref.mu;
  } else if (ref.mu > 0.0) {
    ws.delayed.noalias() = (1.0 - ref.mu) * history.stage(ref.left) + ref.mu * history.stage(ref.left + 1);
  } else {
    ws.delayed = history.stage(ref.left);
  }

  Vector& stage = ws.tilde;  // solve_stage uses ws.stage internally
  solve_stage(y_n, ws.delayed, h, problem, weight, coupled, cfg, stage, ws);
  if (coupled) {
    ws.delayed = weight * stage + (1.0 - weight) * ws.delayed;
  }
  problem.diffusion(stage, ws.delayed, ws.diffusion);
  ws.next.noalias() = stage + ws.diffusion * increment;
  history.push_stage(stage);
  history.push_committed(ws.next);
  return ref.zero_delay ? 1 : 0;
}

StepValues ssbe_step(std::size_t n, StageHistory& history, VecIn increment,
                     const SddeProblem& problem, Interpolation interp, const SolverConfig& cfg) {
  StepWorkspace ws(problem.dim_state, problem.dim_noise);
  ssbe_step(n, history, increment, problem, interp, cfg, ws);
  return {history.stage(n), history.committed(n + 1)};
}

void ssbe_legacy_step(std::size_t n, StageHistory& history, double increment,
                      const LinearSddeParams& params, std::size_t kappa) {
  check_step_preconditions(n, history, true);
  if (history.dim() != 1) throw ConfigError("ssbe-legacy is defined for scalar problems only");
  if (kappa < 1) throw ConfigError("ssbe-legacy requires kappa >= 1");
  const double h = history.step();
  const auto k = static_cast<std::ptrdiff_t>(n) + 1 - static_cast<std::ptrdiff_t>(kappa);
  const double z_delayed = k < 0 ? history.problem().initial_at(static_cast<double>(k) * h)[0]
                                 : history.committed(static_cast<std::size_t>(k))[0];
  const double z_n = history.committed(n)[0];
  const double z_stage = (z_n + h * params.b * z_delayed) / (1.0 - h * params.a);
  const double z_next = z_stage + (params.c * z_stage + params.d_coef * z_delayed) * increment;
  const Eigen::Matrix<double, 1, 1> stage_v{z_stage};
  const Eigen::Matrix<double, 1, 1> next_v{z_next};
  history.push_stage(stage_v);
  history.push_committed(next_v);
}

void em_step(std::size_t n, StageHistory& history, VecIn increment, const SddeProblem& problem,
             Interpolation interp, StepWorkspace& ws) {
  check_step_preconditions(n, history, false);
  const double h = history.step();
  const DelayedRef ref = delayed_ref(n, h, problem, interp);
  const Eigen::Map<const Vector> y_n = history.committed(n);
  if (ref.kind == DelayedRef::Kind::InitialSegment) {
    problem.initial(ref.time, ws.delayed);
  } else if (ref.zero_delay) {
    ws.delayed = y_n;
  } else if (ref.mu > 0.0) {
    ws.delayed.noalias() =
        (1.0 - ref.mu) * history.committed(ref.left) + ref.mu * history.committed(ref.left + 1);
  } else {
    ws.delayed = history.committed(ref.left);
  }
  problem.drift(y_n, ws.delayed, ws.fval);
  problem.diffusion(y_n, ws.delayed, ws.diffusion);
  ws.next.noalias() = y_n + h * ws.fval + ws.diffusion * increment;
  history.push_committed(ws.next);
}

std::size_t legacy_kappa(const SddeProblem& problem, double h) {
  if (!problem.linear || problem.dim_state != 1) {
    throw ConfigError("ssbe-legacy requires a scalar linear problem with constant lag (problem '" +
                      problem.name + "')");
  }
  try {
    return grid_steps(problem.linear->lag, h);
  } catch (const ConfigError&) {
    std::ostringstream os;
    os.precision(17);
    os << "ssbe-legacy requires h = lag / kappa for an integer kappa (lag " << problem.linear->lag
       << ", h " << h << ")";
    throw ConfigError(os.str());
  }
}

// ---------------------------------------------------------------------------

Eigen::Map<const Vector> Trajectory::state(std::size_t k) const {
  return {states.data() + k * static_cast<std::size_t>(dim), dim};
}

Trajectory run_trajectory(const SddeProblem& problem, Scheme scheme, double h,
                          std::span<const double> increments, Interpolation interp,
                          const SolverConfig& cfg, double blowup_threshold) {
  cfg.validate();
  if (!(blowup_threshold > 0.0)) throw ConfigError("blow-up threshold must be positive");
  const auto m = static_cast<std::size_t>(problem.dim_noise);
  if (increments.size() % m != 0) throw ConfigError("increment array is not a multiple of dim_noise");
  const std::size_t steps = increments.size() / m;
  if (steps == 0) {
    Trajectory initial_only;
    initial_only.dim = problem.dim_state;
    initial_only.step = h;
    const Vector psi0 = problem.initial_at(0.0);
    initial_only.states.assign(psi0.data(), psi0.data() + psi0.size());
    return initial_only;
  }
  const std::size_t expected = grid_steps(problem.horizon, h);
  if (steps != expected) {
    std::ostringstream os;
    os << "expected " << expected << " increments for horizon " << problem.horizon << " and h " << h
       << ", got " << steps;
    throw ConfigError(os.str());
  }
  const std::size_t kappa = scheme == Scheme::SsbeLegacy ? legacy_kappa(problem, h) : 0;

  Trajectory traj;
  traj.dim = problem.dim_state;
  traj.step = h;
  if (problem.gammas && scheme == Scheme::Ssbe) {
    traj.solvability_warning = (problem.gammas->gamma1 + problem.gammas->gamma2) * h >= 1.0;
  }
  StageHistory history(problem, h, steps);
  StepWorkspace ws(problem.dim_state, problem.dim_noise);
  for (std::size_t n = 0; n < steps; ++n) {
    const Eigen::Map<const Vector> dw(increments.data() + n * m, static_cast<Eigen::Index>(m));
    try {
      switch (scheme) {
        case Scheme::Ssbe:
          traj.zero_delay_clamps += ssbe_step(n, history, dw, problem, interp, cfg, ws);
          break;
        case Scheme::SsbeLegacy:
          ssbe_legacy_step(n, history, dw[0], *problem.linear, kappa);
          break;
        case Scheme::EulerMaruyama:
          em_step(n, history, dw, problem, interp, ws);
          break;
      }
    } catch (const StageSolveFailure& e) {
      traj.status = PathStatus::SolverFailure;
      traj.message = e.what();
      break;
    }
    const auto y = history.last_committed();
    if (!y.allFinite() || y.cwiseAbs().maxCoeff() > blowup_threshold) {
      traj.status = PathStatus::BlowUp;
      std::ostringstream os;
      os << "state exceeded " << blowup_threshold << " at step " << n + 1;
      traj.message = os.str();
      break;
    }
  }
  traj.steps_completed = history.committed_count() - 1;
  traj.stages = history.release_stages();
  traj.states = history.release_committed();
  return traj;
}

}  // namespace sddekit
