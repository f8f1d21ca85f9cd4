#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace tinc {

// Thin deterministic random source. Draw helpers avoid the standard
// distributions so results are identical across standard libraries.
struct Rng {
  std::mt19937_64 gen;

  Rng() = default;
  explicit Rng(std::uint64_t seed) : gen(seed) {}

  double uniform() { return double(gen() >> 11) * 0x1.0p-53; }  // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // inclusive on both ends
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + std::int64_t(gen() % std::uint64_t(hi - lo + 1));
  }
  bool bernoulli(double p) { return uniform() < p; }
  double normal() {
    // Box-Muller; consumes two draws
    const double u1 = std::max(uniform(), 0x1.0p-60), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
};

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_str(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= std::uint64_t(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Per-sample seed derivation so parallel augmentation stays reproducible.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view patient_id, int visit_day,
                                 int view_index) {
  std::uint64_t h = mix64(global_seed);
  h = mix64(h ^ hash_str(patient_id));
  h = mix64(h ^ std::uint64_t(visit_day));
  h = mix64(h ^ std::uint64_t(view_index));
  return h;
}

}  // namespace tinc
