#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include "core/errors.hpp"

namespace core {

// Stable 64-bit FNV-1a. Used for seed derivation and text keys; must not
// change across platforms or the sampling streams change with it.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// One independent stream per (run seed, problem, model, round, sample) so
// results do not depend on scheduling or worker count.
inline std::uint64_t derive_stream(std::uint64_t run_seed, std::string_view problem_id,
                                   int model_id, int round_tag, int sample_index) {
  std::uint64_t h = splitmix64(run_seed ^ fnv1a64(problem_id));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(model_id) << 1));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(round_tag) << 17));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(sample_index) << 33));
  return h;
}

// mt19937_64 is fully pinned by the standard; the draw helpers below avoid
// std distributions, whose algorithms are implementation defined.
class sample_rng {
 public:
  explicit sample_rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

  // Draws an index with probability proportional to probs[i].
  int categorical(std::span<const double> probs) {
    if (probs.empty()) throw contract_error("categorical: empty probability vector");
    double total = 0.0;
    for (double p : probs) total += p;
    if (total <= 0.0) throw contract_error("categorical: non-positive mass");
    double u = uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size() - 1);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace core
