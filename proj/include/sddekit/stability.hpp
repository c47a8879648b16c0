#pragma once

#include "sddekit/problem.hpp"

#include <optional>

namespace sddekit {

/// tau = (kappa - delta) h with integer kappa >= 1 and delta in [0, 1).
struct DelayDecomposition {
  int kappa = 1;
  double delta = 0.0;
};

DelayDecomposition decompose_delay(double tau_bound, double h);

double beta(const OneSidedLipschitzData& g);
double beta1(const OneSidedLipschitzData& g);
double beta2(const OneSidedLipschitzData& g);

/// L(nu) = nu + beta1 + beta2 exp(nu tau).
double decay_polynomial(const OneSidedLipschitzData& g, double tau_bound, double nu);

/// Continuous mean-square decay rate: the root of L in (0, -beta].
double nu_plus(const OneSidedLipschitzData& g, double tau_bound, double tol = 1e-12);

/// Per-step contraction factor of the stage recurrence.
double beta_h(const OneSidedLipschitzData& g, double h);

/// Certified mean-square decay rate of the improved split-step scheme.
double nu_h_plus(const OneSidedLipschitzData& g, double tau_bound, double h);

/// a < -|b| - (|c| + |d|)^2 / 2.
bool linear_ms_stable(const LinearSddeParams& p);

/// Largest stepsize with (gamma1 + gamma2) h < 1; nullopt when unbounded.
std::optional<double> solvability_bound(const OneSidedLipschitzData& g);

struct StabilityProfile {
  OneSidedLipschitzData gammas;
  double tau_bound = 0.0;
  double h = 0.0;
  DelayDecomposition decomposition;
  double beta = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  /// Present when the denominator of beta_h is positive.
  std::optional<double> beta_h;
  /// Present when beta < 0.
  std::optional<double> nu_plus;
  std::optional<double> nu_h_plus;
  std::optional<double> solvability_bound;
};

StabilityProfile stability_profile(const OneSidedLipschitzData& g, double tau_bound, double h);

}  // namespace sddekit
