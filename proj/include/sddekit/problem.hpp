#pragma once

#include "sddekit/core.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sddekit {

/// Drift f(x, y) written into `out` (length d).
using DriftFn = std::function<void(VecIn x, VecIn y, VecOut out)>;
/// Diffusion g(x, y) written into `out` (d x m).
using DiffusionFn = std::function<void(VecIn x, VecIn y, MatOut out)>;
/// Partial Jacobians of the drift, df/dx and df/dy (both d x d).
using DriftJacobianFn = std::function<void(VecIn x, VecIn y, MatOut dfdx, MatOut dfdy)>;
using DelayFn = std::function<double(double t)>;
/// Initial path psi(s) for s in [-tau_bar, 0].
using InitialFn = std::function<void(double s, VecOut out)>;

/// One-sided Lipschitz constant of f in x (gamma1), Lipschitz constant of f
/// in y (gamma2) and the mean-square Lipschitz constants of g (gamma3, gamma4).
struct OneSidedLipschitzData {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double gamma3 = 0.0;
  double gamma4 = 0.0;

  void validate() const;
  friend bool operator==(const OneSidedLipschitzData&, const OneSidedLipschitzData&) = default;
};

/// dx = (a x + b x(t - lag)) dt + (c x + d x(t - lag)) dw.
struct LinearSddeParams {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d_coef = 0.0;
  double lag = 1.0;
};

struct SddeProblem {
  std::string name;
  int dim_state = 1;
  int dim_noise = 1;
  DriftFn drift;
  DiffusionFn diffusion;
  DelayFn delay;
  InitialFn initial;
  double horizon = 1.0;
  /// History depth: t - delay(t) >= -delay_lower_bound on [0, horizon].
  double delay_lower_bound = 0.0;
  /// Bound on delay(t) itself, when the delay is bounded.
  std::optional<double> delay_upper_bound;
  std::optional<DriftJacobianFn> drift_jacobian;
  std::optional<OneSidedLipschitzData> gammas;
  /// Present for constant-lag scalar linear problems.
  std::optional<LinearSddeParams> linear;

  /// Checks dimensions, callables and the sampled delay invariants.
  void validate(int samples = 257) const;

  Vector eval_drift(VecIn x, VecIn y) const;
  Matrix eval_diffusion(VecIn x, VecIn y) const;
  Vector initial_at(double s) const;

  /// Copy with a different final time.
  SddeProblem with_horizon(double new_horizon) const;
};

OneSidedLipschitzData gamma_map_linear(const LinearSddeParams& params);

/// Scalar linear test equation with constant initial data.
SddeProblem make_linear(const LinearSddeParams& params, double initial_value, double horizon);
SddeProblem make_linear(const LinearSddeParams& params, std::function<double(double)> initial,
                        double horizon);

/// dx = (-4x - 3x^3 + x(t - tau(t))) dt + (x + x(t - tau(t))) dw, tau(t) = 1/(1+t^2), psi = 1.
SddeProblem make_nonlinear_example(double horizon);

/// Proportional delay tau(t) = (1-q) t; the delayed argument is q t >= 0.
SddeProblem make_pantograph(double q, DriftFn drift, DiffusionFn diffusion, InitialFn initial,
                            int dim_state, int dim_noise, double horizon);

/// Scalar linear pantograph: f = a x + b y, g = c x + d y, constant initial value.
SddeProblem make_linear_pantograph(double q, const LinearSddeParams& coefs, double initial_value,
                                   double horizon);

LinearSddeParams example1_params();
LinearSddeParams example2_params();
LinearSddeParams example3_params();

/// Named presets: example1, example2, example3, nonlinear, pantograph.
/// Without a horizon each preset uses its default final time.
SddeProblem make_preset(std::string_view name, std::optional<double> horizon = std::nullopt);
double preset_default_horizon(std::string_view name);
const std::vector<std::string>& preset_names();

}  // namespace sddekit
