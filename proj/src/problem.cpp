#include "sddekit/problem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sddekit {

void OneSidedLipschitzData::validate() const {
  if (!(gamma2 >= 0.0) || !(gamma3 >= 0.0) || !(gamma4 >= 0.0)) {
    throw ConfigError("gamma2, gamma3 and gamma4 must be non-negative");
  }
  if (!std::isfinite(gamma1)) throw ConfigError("gamma1 must be finite");
}

void SddeProblem::validate(int samples) const {
  if (dim_state < 1 || dim_noise < 1) throw ConfigError("state and noise dimensions must be >= 1");
  if (!drift || !diffusion || !delay || !initial) {
    throw ConfigError("problem '" + name + "' is missing a coefficient callable");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be positive");
  if (!(delay_lower_bound >= 0.0)) throw ConfigError("delay lower bound must be >= 0");
  if (gammas) gammas->validate();
  const double slack = 1e-12 * std::max(1.0, delay_lower_bound);
  for (int k = 0; k < samples; ++k) {
    const double t = horizon * static_cast<double>(k) / static_cast<double>(samples - 1);
    const double tau = delay(t);
    if (!(tau >= 0.0)) {
      std::ostringstream os;
      os << "delay(" << t << ") = " << tau << " is negative";
      throw ConfigError(os.str());
    }
    if (t - tau < -delay_lower_bound - slack) {
      std::ostringstream os;
      os << "t - delay(t) = " << t - tau << " at t = " << t << " is below -tau_bar = "
         << -delay_lower_bound;
      throw ConfigError(os.str());
    }
  }
  const Vector x0 = initial_at(0.0);
  const Vector f0 = eval_drift(x0, initial_at(-std::min(delay(0.0), delay_lower_bound)));
  const Matrix g0 = eval_diffusion(x0, x0);
  if (!x0.allFinite() || !f0.allFinite() || !g0.allFinite()) {
    throw ConfigError("coefficients of '" + name + "' are not finite at the initial point");
  }
}

Vector SddeProblem::eval_drift(VecIn x, VecIn y) const {
  Vector out = Vector::Zero(dim_state);
  drift(x, y, out);
  return out;
}

Matrix SddeProblem::eval_diffusion(VecIn x, VecIn y) const {
  Matrix out = Matrix::Zero(dim_state, dim_noise);
  diffusion(x, y, out);
  return out;
}

Vector SddeProblem::initial_at(double s) const {
  Vector out = Vector::Zero(dim_state);
  initial(s, out);
  return out;
}

SddeProblem SddeProblem::with_horizon(double new_horizon) const {
  if (!(new_horizon > 0.0)) throw ConfigError("horizon must be positive");
  SddeProblem copy = *this;
  copy.horizon = new_horizon;
  return copy;
}

OneSidedLipschitzData gamma_map_linear(const LinearSddeParams& p) {
  const double cd = std::abs(p.c * p.d_coef);
  return {p.a, std::abs(p.b), p.c * p.c + cd, p.d_coef * p.d_coef + cd};
}

namespace {

void attach_linear_coefficients(SddeProblem& problem, const LinearSddeParams& p) {
  const double a = p.a, b = p.b, c = p.c, d = p.d_coef;
  problem.drift = [a, b](VecIn x, VecIn y, VecOut out) { out[0] = a * x[0] + b * y[0]; };
  problem.diffusion = [c, d](VecIn x, VecIn y, MatOut out) { out(0, 0) = c * x[0] + d * y[0]; };
  problem.drift_jacobian = [a, b](VecIn, VecIn, MatOut dfdx, MatOut dfdy) {
    dfdx(0, 0) = a;
    dfdy(0, 0) = b;
  };
  problem.gammas = gamma_map_linear(p);
}

}  // namespace

SddeProblem make_linear(const LinearSddeParams& params, std::function<double(double)> initial,
                        double horizon) {
  if (!(params.lag > 0.0)) throw ConfigError("linear problem requires lag > 0");
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  if (!initial) throw ConfigError("initial function is empty");
  SddeProblem problem;
  problem.name = "linear";
  problem.dim_state = 1;
  problem.dim_noise = 1;
  attach_linear_coefficients(problem, params);
  const double lag = params.lag;
  problem.delay = [lag](double) { return lag; };
  problem.initial = [psi = std::move(initial)](double s, VecOut out) { out[0] = psi(s); };
  problem.horizon = horizon;
  problem.delay_lower_bound = lag;
  problem.delay_upper_bound = lag;
  problem.linear = params;
  return problem;
}

SddeProblem make_linear(const LinearSddeParams& params, double initial_value, double horizon) {
  return make_linear(params, [initial_value](double) { return initial_value; }, horizon);
}

SddeProblem make_nonlinear_example(double horizon) {
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  SddeProblem problem;
  problem.name = "nonlinear";
  problem.drift = [](VecIn x, VecIn y, VecOut out) {
    const double v = x[0];
    out[0] = -4.0 * v - 3.0 * v * v * v + y[0];
  };
  problem.diffusion = [](VecIn x, VecIn y, MatOut out) { out(0, 0) = x[0] + y[0]; };
  problem.drift_jacobian = [](VecIn x, VecIn, MatOut dfdx, MatOut dfdy) {
    dfdx(0, 0) = -4.0 - 9.0 * x[0] * x[0];
    dfdy(0, 0) = 1.0;
  };
  problem.delay = [](double t) { return 1.0 / (1.0 + t * t); };
  problem.initial = [](double, VecOut out) { out[0] = 1.0; };
  problem.horizon = horizon;
  problem.delay_lower_bound = 1.0;
  problem.delay_upper_bound = 1.0;
  problem.gammas = OneSidedLipschitzData{-4.0, 1.0, 2.0, 2.0};
  return problem;
}

SddeProblem make_pantograph(double q, DriftFn drift, DiffusionFn diffusion, InitialFn initial,
                            int dim_state, int dim_noise, double horizon) {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("pantograph requires 0 < q < 1");
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  SddeProblem problem;
  problem.name = "pantograph";
  problem.dim_state = dim_state;
  problem.dim_noise = dim_noise;
  problem.drift = std::move(drift);
  problem.diffusion = std::move(diffusion);
  problem.initial = std::move(initial);
  problem.delay = [q](double t) { return (1.0 - q) * t; };
  problem.horizon = horizon;
  problem.delay_lower_bound = 0.0;
  return problem;
}

SddeProblem make_linear_pantograph(double q, const LinearSddeParams& coefs, double initial_value,
                                   double horizon) {
  SddeProblem problem = make_pantograph(
      q, nullptr, nullptr, [initial_value](double, VecOut out) { out[0] = initial_value; }, 1, 1,
      horizon);
  attach_linear_coefficients(problem, coefs);
  return problem;
}

LinearSddeParams example1_params() { return {-2.0, 1.0, 0.5, 0.5, 1.0}; }
LinearSddeParams example2_params() { return {-6.0, 3.0, 1.0, 1.0, 1.0}; }
LinearSddeParams example3_params() { return {-20.0, 12.0, 2.0, 1.0, 1.0}; }

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"example1", "example2", "example3", "nonlinear",
                                              "pantograph"};
  return names;
}

double preset_default_horizon(std::string_view name) {
  if (name == "example1") return 1.0;
  if (name == "example2" || name == "example3") return 8.0;
  if (name == "nonlinear") return 10.0;
  if (name == "pantograph") return 1.0;
  throw ConfigError("unknown problem preset '" + std::string(name) + "'");
}

SddeProblem make_preset(std::string_view name, std::optional<double> horizon) {
  const double T = horizon.value_or(preset_default_horizon(name));
  SddeProblem problem;
  if (name == "example1") {
    problem = make_linear(example1_params(), 0.5, T);
  } else if (name == "example2") {
    problem = make_linear(example2_params(), 0.5, T);
  } else if (name == "example3") {
    problem = make_linear(example3_params(), 0.5, T);
  } else if (name == "nonlinear") {
    problem = make_nonlinear_example(T);
  } else {
    problem = make_linear_pantograph(0.5, example1_params(), 0.5, T);
  }
  problem.name = std::string(name);
  return problem;
}

}  // namespace sddekit
