#pragma once

#include "sddekit/core.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sddekit {

/// Wiener increments on a uniform fine grid over [0, horizon].
///
/// Increments are stored step-major: entry k*dim_noise + j is the j-th noise
/// component of the increment over [t_k, t_{k+1}].
struct BrownianLattice {
  std::uint64_t seed = 0;
  double horizon = 0.0;
  double fine_step = 0.0;
  int dim_noise = 1;
  std::vector<double> increments;

  std::size_t steps() const noexcept { return increments.size() / static_cast<std::size_t>(dim_noise); }
};

/// Number of steps of size `step` in `horizon`; throws unless it is a positive integer.
std::size_t grid_steps(double horizon, double step);

/// Seed of path `index` under `master_seed`, independent of any other path.
std::uint64_t derive_path_seed(std::uint64_t master_seed, std::uint64_t index) noexcept;

BrownianLattice generate(std::uint64_t seed, double horizon, double fine_step, int dim_noise);

/// Sum of `values` by binary splitting at the largest power of two below the length.
/// Dyadic blocks nest, so summing sub-block sums reproduces the full sum bit-for-bit.
double pairwise_sum(std::span<const double> values);

/// Aggregates consecutive groups of `factor` increments (per noise component).
std::vector<double> coarsen(std::span<const double> increments, int dim_noise, std::size_t factor);
std::vector<double> coarsen(const BrownianLattice& lattice, std::size_t factor);

}  // namespace sddekit
