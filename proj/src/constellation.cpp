#include "mimovb/constellation.hpp"

#include <cmath>

namespace mimovb {

std::string mod_scheme_name(ModScheme scheme) {
  switch (scheme) {
    case ModScheme::kBpsk:
      return "bpsk";
    case ModScheme::kQpsk:
      return "qpsk";
    case ModScheme::kQam16:
      return "16qam";
  }
  throw ConfigError("unknown modulation scheme");
}

ModScheme mod_scheme_from_name(const std::string& name) {
  if (name == "bpsk") return ModScheme::kBpsk;
  if (name == "qpsk") return ModScheme::kQpsk;
  if (name == "16qam" || name == "qam16") return ModScheme::kQam16;
  throw ConfigError("unknown constellation '" + name + "'");
}

Constellation::Constellation(std::string name, CVector points, RVector priors)
    : name_(std::move(name)),
      points_(std::move(points)),
      priors_(std::move(priors)) {
  if (points_.size() == 0 || points_.size() != priors_.size()) {
    throw DimMismatch("constellation points and priors disagree");
  }
  if (priors_.minCoeff() < 0.0) {
    throw ConfigError("constellation priors must be nonnegative");
  }
  if (std::abs(priors_.sum() - 1.0) > 1e-12) {
    throw ConfigError("constellation priors must sum to one");
  }
  double energy = 0.0;
  for (Index i = 0; i < points_.size(); ++i) {
    energy += priors_(i) * std::norm(points_(i));
  }
  if (std::abs(energy - 1.0) > 1e-12) {
    throw ConfigError("constellation must have unit average energy, got " +
                      std::to_string(energy));
  }
}

Constellation Constellation::bpsk() {
  CVector p(2);
  p << Complex(1, 0), Complex(-1, 0);
  return Constellation("bpsk", p, RVector::Constant(2, 0.5));
}

Constellation Constellation::qpsk() {
  const double s = 1.0 / std::sqrt(2.0);
  CVector p(4);
  p << Complex(s, s), Complex(s, -s), Complex(-s, s), Complex(-s, -s);
  return Constellation("qpsk", p, RVector::Constant(4, 0.25));
}

Constellation Constellation::qam16() {
  const double s = 1.0 / std::sqrt(10.0);
  CVector p(16);
  const double levels[4] = {-3.0, -1.0, 1.0, 3.0};
  Index k = 0;
  for (double re : levels) {
    for (double im : levels) {
      p(k++) = Complex(re * s, im * s);
    }
  }
  return Constellation("16qam", p, RVector::Constant(16, 1.0 / 16.0));
}

Constellation Constellation::make(ModScheme scheme) {
  switch (scheme) {
    case ModScheme::kBpsk:
      return bpsk();
    case ModScheme::kQpsk:
      return qpsk();
    case ModScheme::kQam16:
      return qam16();
  }
  throw ConfigError("unknown modulation scheme");
}

int Constellation::nearest(Complex v) const {
  int best = 0;
  double best_d = std::norm(v - points_(0));
  for (Index i = 1; i < points_.size(); ++i) {
    const double d = std::norm(v - points_(i));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace mimovb
