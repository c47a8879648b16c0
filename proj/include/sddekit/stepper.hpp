#pragma once

#include "sddekit/core.hpp"
#include "sddekit/problem.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sddekit {

enum class Scheme { Ssbe, SsbeLegacy, EulerMaruyama };
enum class Interpolation { Constant, Linear };
enum class SolverMode { Newton, FixedPoint, Auto };

std::string_view to_string(Scheme scheme) noexcept;
std::string_view to_string(Interpolation interp) noexcept;
std::string_view to_string(SolverMode mode) noexcept;
Scheme parse_scheme(std::string_view text);
Interpolation parse_interpolation(std::string_view text);
SolverMode parse_solver_mode(std::string_view text);

struct SolverConfig {
  SolverMode mode = SolverMode::Auto;
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  int max_iter = 50;
  /// Overrides the problem's Jacobian; forward differences are used when neither is set.
  std::optional<DriftJacobianFn> jacobian;

  void validate() const;
};

/// Committed values y_0..y_n and stage values y*_0..y*_{n-1} of one path.
/// Both sequences are append-only and stored contiguously.
class StageHistory {
 public:
  /// Commits y_0 = psi(0).
  StageHistory(const SddeProblem& problem, double step, std::size_t reserve_steps = 0);

  const SddeProblem& problem() const noexcept { return *problem_; }
  double step() const noexcept { return step_; }
  int dim() const noexcept { return dim_; }
  std::size_t stage_count() const noexcept { return stages_.size() / dim_; }
  std::size_t committed_count() const noexcept { return committed_.size() / dim_; }

  Eigen::Map<const Vector> stage(std::size_t j) const;
  Eigen::Map<const Vector> committed(std::size_t j) const;
  Eigen::Map<const Vector> last_committed() const { return committed(committed_count() - 1); }

  void push_stage(VecIn value);
  void push_committed(VecIn value);

  std::span<const double> stage_data() const noexcept { return stages_; }
  std::span<const double> committed_data() const noexcept { return committed_; }
  std::vector<double> release_stages() noexcept { return std::move(stages_); }
  std::vector<double> release_committed() noexcept { return std::move(committed_); }

 private:
  const SddeProblem* problem_;
  double step_;
  std::size_t dim_;
  std::vector<double> stages_;
  std::vector<double> committed_;
};

/// Location of the delayed argument t_n - tau(t_n) relative to the grid.
struct DelayedRef {
  enum class Kind { InitialSegment, Interpolated };
  Kind kind = Kind::InitialSegment;
  /// Delayed time t_n - tau(t_n).
  double time = 0.0;
  /// Left node index n - q_n (interpolated only).
  std::size_t left = 0;
  std::size_t lag_steps = 0;
  /// Weight of the right node, in [0, 1).
  double mu = 0.0;
  /// The right node is the stage being solved for at step n.
  bool couples_current = false;
  /// tau(t_n) = 0 on a grid point: clamped to q_n = 1 with the delayed value
  /// equal to the current unknown stage.
  bool zero_delay = false;

  /// Weight of the current unknown stage in the delayed value.
  double current_weight() const noexcept { return zero_delay ? 1.0 : (couples_current ? mu : 0.0); }
};

DelayedRef delayed_ref(std::size_t n, double h, const SddeProblem& problem, Interpolation interp);

/// Scratch buffers reused across steps.
struct StepWorkspace {
  StepWorkspace(int dim, int dim_noise);
  // step-level
  Vector delayed, stage, tilde, next;
  Matrix diffusion;
  // stage solver
  Vector v, fval, res, trial, trial_v, trial_f, trial_res, delta, probe, probe_v, fprobe;
  Matrix jac_x, jac_y, jac;
  Eigen::PartialPivLU<Matrix> lu;
};

struct SolveStats {
  int iterations = 0;
  double residual = 0.0;
};

/// Solves c = y_prev + h f(c, v(c)) with v(c) = mu c + (1-mu) b when `coupled`,
/// else v = b.
SolveStats solve_stage(VecIn y_prev, VecIn delayed, double h, const SddeProblem& problem, double mu,
                       bool coupled, const SolverConfig& cfg, VecOut out, StepWorkspace& ws);
Vector solve_stage(VecIn y_prev, VecIn delayed, double h, const SddeProblem& problem, double mu,
                   bool coupled, const SolverConfig& cfg);

struct StepValues {
  Vector stage;
  Vector next;
};

/// Improved split-step backward Euler: the implicit stage uses interpolated
/// stage values y* at the delayed time. Appends y*_n and y_{n+1} to `history`.
/// Returns the number of zero-delay clamps (0 or 1).
int ssbe_step(std::size_t n, StageHistory& history, VecIn increment, const SddeProblem& problem,
              Interpolation interp, const SolverConfig& cfg, StepWorkspace& ws);
StepValues ssbe_step(std::size_t n, StageHistory& history, VecIn increment,
                     const SddeProblem& problem, Interpolation interp, const SolverConfig& cfg);

/// Legacy split-step scheme for the scalar linear equation with h = lag / kappa:
/// the delayed argument is the committed value z_{n-kappa+1}.
void ssbe_legacy_step(std::size_t n, StageHistory& history, double increment,
                      const LinearSddeParams& params, std::size_t kappa);

/// Euler-Maruyama with delayed values interpolated from committed values.
void em_step(std::size_t n, StageHistory& history, VecIn increment, const SddeProblem& problem,
             Interpolation interp, StepWorkspace& ws);

/// kappa = lag / h for the legacy scheme; throws unless the problem is a
/// constant-lag linear problem and lag / h is a positive integer.
std::size_t legacy_kappa(const SddeProblem& problem, double h);

enum class PathStatus { Ok, BlowUp, SolverFailure };
std::string_view to_string(PathStatus status) noexcept;

struct Trajectory {
  PathStatus status = PathStatus::Ok;
  int dim = 1;
  double step = 0.0;
  /// Committed states y_0..y_k, k = steps_completed. On blow-up the last entry
  /// is the offending state.
  std::vector<double> states;
  /// Stage values (empty for Euler-Maruyama).
  std::vector<double> stages;
  std::size_t steps_completed = 0;
  int zero_delay_clamps = 0;
  /// (gamma1 + gamma2) h >= 1: stage solutions are not guaranteed unique.
  bool solvability_warning = false;
  std::string message;

  std::size_t state_count() const noexcept { return states.size() / static_cast<std::size_t>(dim); }
  Eigen::Map<const Vector> state(std::size_t k) const;
  Eigen::Map<const Vector> final_state() const { return state(state_count() - 1); }
};

/// Integrates over [0, problem.horizon]; increments hold N = horizon / h
/// steps of dim_noise values each. An empty array yields the single state psi(0).
Trajectory run_trajectory(const SddeProblem& problem, Scheme scheme, double h,
                          std::span<const double> increments, Interpolation interp,
                          const SolverConfig& cfg, double blowup_threshold = kDefaultBlowupThreshold);

}  // namespace sddekit
