#pragma once

#include <cstdint>
#include <initializer_list>

#include "mimovb/types.hpp"

namespace mimovb {

/// Counter-based deterministic random stream (splitmix64 core). A given seed
/// produces the same sequence on every platform. Independent substreams are
/// derived by hashing a (seed, path) key, which gives reproducible
/// per-(trial, user, slot) streams under parallel execution.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  static RngStream derive(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> path);

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double next_unit();

  /// Standard real normal N(0, 1).
  double next_gaussian();

  /// Circularly symmetric complex normal with unit variance: real and
  /// imaginary parts are each N(0, 1/2).
  Complex next_cgaussian();

 private:
  struct RawState {};
  RngStream(RawState, std::uint64_t state) : state_(state) {}

  std::uint64_t state_;

  friend class RngKey;
};

/// Hierarchical derivation key. child(label) refines the path; stream()
/// instantiates the stream at the current node.
class RngKey {
 public:
  explicit RngKey(std::uint64_t seed);

  RngKey child(std::uint64_t label) const;
  RngStream stream() const;
  std::uint64_t seed() const { return seed_; }

 private:
  RngKey(std::uint64_t seed, std::uint64_t digest)
      : seed_(seed), digest_(digest) {}

  std::uint64_t seed_;
  std::uint64_t digest_;
};

/// Vector of i.i.d. CN(0, 1) entries.
CVector standard_complex_gaussian(RngStream& rng, Index n);

}  // namespace mimovb
