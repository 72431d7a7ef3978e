#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace cfx::nk {

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

// xoshiro256** seeded through splitmix64. Normal draws use Box-Muller so the
// stream is identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  // Independent stream for a named component of a run.
  static Rng stream(std::uint64_t run_seed, std::string_view component,
                    std::uint64_t index = 0);

  std::uint64_t next();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  Rng split();

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cfx::nk
