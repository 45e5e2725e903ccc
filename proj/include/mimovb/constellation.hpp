#pragma once

#include <string>

#include "mimovb/types.hpp"

namespace mimovb {

enum class ModScheme { kBpsk, kQpsk, kQam16 };

std::string mod_scheme_name(ModScheme scheme);
ModScheme mod_scheme_from_name(const std::string& name);

/// Finite symbol alphabet with a prior pmf. Alphabets are normalized to unit
/// average energy under the prior.
class Constellation {
 public:
  Constellation(std::string name, CVector points, RVector priors);

  static Constellation bpsk();
  static Constellation qpsk();
  static Constellation qam16();
  static Constellation make(ModScheme scheme);

  Index size() const { return points_.size(); }
  const std::string& name() const { return name_; }
  const CVector& points() const { return points_; }
  const RVector& priors() const { return priors_; }

  /// Index of the nearest alphabet point in Euclidean distance.
  int nearest(Complex v) const;

 private:
  std::string name_;
  CVector points_;
  RVector priors_;
};

}  // namespace mimovb
