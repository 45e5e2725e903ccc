#include "mimovb/rng.hpp"

#include <cmath>
#include <numbers>

namespace mimovb {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kSeedTag = 0x6d696d6f76620a01ull;

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : state_(mix(seed ^ kSeedTag)) {}

RngStream RngStream::derive(std::uint64_t seed,
                            std::initializer_list<std::uint64_t> path) {
  RngKey key(seed);
  for (std::uint64_t p : path) key = key.child(p);
  return key.stream();
}

std::uint64_t RngStream::next_u64() {
  state_ += kGolden;
  return mix(state_);
}

double RngStream::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
  const double u1 = next_unit();
  const double u2 = next_unit();
  // log1p(-u1) is finite because u1 < 1.
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

Complex RngStream::next_cgaussian() {
  const double u1 = next_unit();
  const double u2 = next_unit();
  const double r = std::sqrt(-std::log1p(-u1));
  const double th = 2.0 * std::numbers::pi * u2;
  return Complex(r * std::cos(th), r * std::sin(th));
}

RngKey::RngKey(std::uint64_t seed)
    : seed_(seed), digest_(mix(seed ^ kSeedTag)) {}

RngKey RngKey::child(std::uint64_t label) const {
  return RngKey(seed_, mix(digest_ ^ mix(label + kGolden)));
}

RngStream RngKey::stream() const {
  return RngStream(RngStream::RawState{}, digest_);
}

CVector standard_complex_gaussian(RngStream& rng, Index n) {
  CVector g(n);
  for (Index i = 0; i < n; ++i) g(i) = rng.next_cgaussian();
  return g;
}

}  // namespace mimovb
