#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace lom::numkit {

// xoshiro256** seeded through splitmix64. Normal draws use Box-Muller written
// out here rather than std::normal_distribution, whose output is
// implementation-defined; streams are bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  // [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Unbiased integer in [0, n).
  std::uint64_t index(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Gamma(1) variate; normalising k of these gives a Dirichlet(1) vector.
  double exponential();

  // Independent child stream. Depends only on this stream's seed and the tag,
  // never on how many draws have been consumed.
  Rng split(std::string_view tag) const;
  Rng split(std::uint64_t id) const;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace lom::numkit
