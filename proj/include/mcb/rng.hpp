#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace mcb {

// Counter-based generator (splitmix-style output function over a keyed
// counter). Substreams are derived by hashing a label and index into a new
// key, so per-trial streams are reproducible independent of execution order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double next_double();    // uniform [0, 1)
  double next_gaussian();  // standard normal, Box-Muller
  std::uint64_t next_below(std::uint64_t bound);

  Rng substream(std::string_view label, std::uint64_t index = 0) const;

 private:
  Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Fisher-Yates shuffle driven by the given stream.
void shuffle_indices(Rng& rng, std::vector<std::size_t>& indices);

// {0, 1, ..., n-1}
std::vector<std::size_t> iota_indices(std::size_t n);

// k distinct values from [0, n), order arbitrary but deterministic.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n,
                                                    std::size_t k);

}  // namespace mcb
