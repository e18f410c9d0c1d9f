#pragma once

#include <cstdint>

#include "mbf/linalg.hpp"

// Counter-based random numbers: every draw is a pure function of
// (seed, counter), so sample i of dimension d is reproducible regardless of
// call order, threading, or how many other draws happened before it.
namespace mbf::rng {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

/// Uniform on the open interval (0, 1).
double uniform(std::uint64_t seed, std::uint64_t counter) noexcept;

/// Standard normal via Box-Muller on counters 2c and 2c+1.
double normal(std::uint64_t seed, std::uint64_t counter) noexcept;

/// Entry j of the returned vector uses counter index * dim + j.
Vector normalVector(std::uint64_t seed, std::uint64_t index, Eigen::Index dim);

}  // namespace mbf::rng
