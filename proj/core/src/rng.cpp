#include "mbf/rng.hpp"

#include <cmath>
#include <numbers>

namespace mbf::rng {

double uniform(std::uint64_t seed, std::uint64_t counter) noexcept {
  const std::uint64_t bits = mix64(seed ^ mix64(counter));
  // 53 random bits, shifted by half an ulp so 0 is never produced.
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double normal(std::uint64_t seed, std::uint64_t counter) noexcept {
  const double u1 = uniform(seed, 2 * counter);
  const double u2 = uniform(seed, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vector normalVector(std::uint64_t seed, std::uint64_t index, Eigen::Index dim) {
  Vector z(dim);
  const auto d = static_cast<std::uint64_t>(dim);
  for (Eigen::Index j = 0; j < dim; ++j) z(j) = normal(seed, index * d + static_cast<std::uint64_t>(j));
  return z;
}

}  // namespace mbf::rng
