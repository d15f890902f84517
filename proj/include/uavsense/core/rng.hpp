#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "uavsense/core/types.hpp"

namespace uavsense::rng {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed from a parent seed and a path of indices (trial, cell, ue, ...).
// Independent of evaluation order, so sweeps can run in any order.
inline std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix(seed);
  for (auto p : path) s = splitmix(s ^ splitmix(p + 0x632be59bd9b4e019ULL));
  return s;
}

using Engine = std::mt19937_64;

inline Engine engine(std::uint64_t seed) { return Engine(seed); }

// Circular complex Gaussian with E|z|^2 = power.
inline cplx cgauss(Engine& g, double power) {
  std::normal_distribution<double> n(0.0, std::sqrt(power / 2.0));
  double re = n(g);
  double im = n(g);
  return {re, im};
}

inline double uniform(Engine& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

}  // namespace uavsense::rng
