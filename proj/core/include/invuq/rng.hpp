#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace invuq {

/// Deterministic counter-seeded random stream (xoshiro256++ core).
/// The same (seed, stream) pair always yields the same draw sequence;
/// distinct stream ids give statistically independent sequences.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  double uniform01();  // [0, 1)
  double normal();     // N(0, 1), Box-Muller
  void fill_normal(std::span<double> out);

  /// Derive an independent child stream. Deterministic in (seed, stream, id).
  RngStream substream(std::uint64_t id) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_ = 0, stream_ = 0;
  std::uint64_t s_[4] = {};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// n i.i.d. standard normal draws; n must be >= 1.
std::vector<double> sample_std_normal(RngStream& rng, std::size_t n);

}  // namespace invuq
