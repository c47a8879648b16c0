#include "sddekit/paths.hpp"

#include <bit>
#include <cmath>
#include <random>
#include <sstream>

namespace sddekit {

std::size_t grid_steps(double horizon, double step) {
  if (!(horizon > 0.0) || !(step > 0.0)) throw ConfigError("horizon and step must be positive");
  const double ratio = horizon / step;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, rounded)) {
    std::ostringstream os;
    os.precision(17);
    os << "horizon " << horizon << " is not a positive integer multiple of step " << step;
    throw ConfigError(os.str());
  }
  return static_cast<std::size_t>(rounded);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_path_seed(std::uint64_t master_seed, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

BrownianLattice generate(std::uint64_t seed, double horizon, double fine_step, int dim_noise) {
  if (dim_noise < 1) throw ConfigError("dim_noise must be >= 1");
  const std::size_t n = grid_steps(horizon, fine_step);
  BrownianLattice lattice{seed, horizon, fine_step, dim_noise, {}};
  lattice.increments.resize(n * static_cast<std::size_t>(dim_noise));
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(fine_step));
  for (double& dw : lattice.increments) dw = normal(engine);
  return lattice;
}

double pairwise_sum(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  if (n == 1) return values[0];
  if (n == 2) return values[0] + values[1];
  const std::size_t left = std::bit_floor(n - 1);
  return pairwise_sum(values.first(left)) + pairwise_sum(values.subspan(left));
}

std::vector<double> coarsen(std::span<const double> increments, int dim_noise, std::size_t factor) {
  if (dim_noise < 1) throw ConfigError("dim_noise must be >= 1");
  const auto m = static_cast<std::size_t>(dim_noise);
  if (increments.size() % m != 0) throw ConfigError("increment array is not a multiple of dim_noise");
  const std::size_t n = increments.size() / m;
  if (factor == 0 || n % factor != 0) {
    std::ostringstream os;
    os << "coarsening factor " << factor << " does not divide " << n << " fine steps";
    throw ConfigError(os.str());
  }
  if (factor == 1) return {increments.begin(), increments.end()};
  const std::size_t coarse = n / factor;
  std::vector<double> out(coarse * m);
  std::vector<double> block(factor);
  for (std::size_t k = 0; k < coarse; ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < factor; ++i) block[i] = increments[(k * factor + i) * m + j];
      out[k * m + j] = pairwise_sum(block);
    }
  }
  return out;
}

std::vector<double> coarsen(const BrownianLattice& lattice, std::size_t factor) {
  return coarsen(lattice.increments, lattice.dim_noise, factor);
}

}  // namespace sddekit
