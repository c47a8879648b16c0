#include "sddekit/stability.hpp"

#include <cmath>
#include <sstream>

namespace sddekit {

DelayDecomposition decompose_delay(double tau_bound, double h) {
  if (!(h > 0.0)) throw ConfigError("stepsize must be positive");
  if (!(tau_bound >= 0.0)) throw ConfigError("delay bound must be non-negative");
  if (tau_bound == 0.0) return {1, 0.0};
  double ratio = tau_bound / h;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-12 * std::max(1.0, nearest)) ratio = nearest;
  const double kappa = std::max(1.0, std::ceil(ratio));
  return {static_cast<int>(kappa), kappa - ratio};
}

double beta(const OneSidedLipschitzData& g) {
  // extended accumulation keeps beta accurate when the gammas nearly cancel
  const long double sum = 2.0L * g.gamma1 + 2.0L * g.gamma2 + static_cast<long double>(g.gamma3) + g.gamma4;
  return static_cast<double>(sum);
}

double beta1(const OneSidedLipschitzData& g) { return 2.0 * g.gamma1 + g.gamma2 + g.gamma3; }

double beta2(const OneSidedLipschitzData& g) { return g.gamma2 + g.gamma4; }

double decay_polynomial(const OneSidedLipschitzData& g, double tau_bound, double nu) {
  return nu + beta1(g) + beta2(g) * std::exp(nu * tau_bound);
}

double nu_plus(const OneSidedLipschitzData& g, double tau_bound, double tol) {
  if (!(tol > 0.0)) throw ConfigError("tolerance must be positive");
  if (!(tau_bound >= 0.0)) throw ConfigError("delay bound must be non-negative");
  const double b = beta(g);
  if (!(b < 0.0)) throw NotApplicable("decay rate undefined: beta >= 0");
  const double b2 = beta2(g);
  if (b2 < 0.0) throw ConfigError("beta2 = gamma2 + gamma4 must be non-negative");
  if (b2 == 0.0) return -beta1(g);
  if (tau_bound == 0.0) return -b;

  // L(0) = beta < 0 and L(-beta) = beta2 (exp(-beta tau) - 1) >= 0.
  double lo = 0.0;
  double hi = -b;
  double best = hi;
  double best_abs = std::abs(decay_polynomial(g, tau_bound, hi));
  for (int iter = 0; iter < 200 && best_abs > tol; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double value = decay_polynomial(g, tau_bound, mid);
    if (std::abs(value) < best_abs) {
      best = mid;
      best_abs = std::abs(value);
    }
    if (value < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

double beta_h(const OneSidedLipschitzData& g, double h) {
  if (!(h > 0.0)) throw ConfigError("stepsize must be positive");
  const double denominator = 1.0 - 2.0 * h * g.gamma1 - h * g.gamma2;
  if (!(denominator > 0.0)) {
    std::ostringstream os;
    os << "beta_h undefined: 1 - 2 h gamma1 - h gamma2 = " << denominator << " <= 0";
    throw NotApplicable(os.str());
  }
  return (1.0 + h * g.gamma2 + h * g.gamma3 + h * g.gamma4) / denominator;
}

double nu_h_plus(const OneSidedLipschitzData& g, double tau_bound, double h) {
  if (!(beta(g) < 0.0)) throw NotApplicable("discrete decay rate undefined: beta >= 0");
  const double numerator = 1.0 - 2.0 * h * g.gamma1 - h * g.gamma2;
  const double denominator = 1.0 + h * g.gamma2 + h * g.gamma3 + h * g.gamma4;
  if (!(numerator > 0.0) || !(denominator > 0.0)) {
    throw NotApplicable("discrete decay rate undefined: non-positive logarithm argument");
  }
  const DelayDecomposition dd = decompose_delay(tau_bound, h);
  // numerator / denominator = 1 - h beta / denominator; log1p stays accurate as beta_h -> 1
  return std::log1p(-h * beta(g) / denominator) / (2.0 * (dd.kappa + 1) * h);
}

bool linear_ms_stable(const LinearSddeParams& p) {
  const double noise = std::abs(p.c) + std::abs(p.d_coef);
  return p.a < -std::abs(p.b) - 0.5 * noise * noise;
}

std::optional<double> solvability_bound(const OneSidedLipschitzData& g) {
  const double sum = g.gamma1 + g.gamma2;
  if (sum > 0.0) return 1.0 / sum;
  return std::nullopt;
}

StabilityProfile stability_profile(const OneSidedLipschitzData& g, double tau_bound, double h) {
  StabilityProfile p;
  p.gammas = g;
  p.tau_bound = tau_bound;
  p.h = h;
  p.decomposition = decompose_delay(tau_bound, h);
  p.beta = beta(g);
  p.beta1 = beta1(g);
  p.beta2 = beta2(g);
  p.solvability_bound = solvability_bound(g);
  try {
    p.beta_h = beta_h(g, h);
  } catch (const NotApplicable&) {
  }
  if (p.beta < 0.0) {
    p.nu_plus = nu_plus(g, tau_bound);
    try {
      p.nu_h_plus = nu_h_plus(g, tau_bound, h);
    } catch (const NotApplicable&) {
    }
  }
  return p;
}

}  // namespace sddekit
