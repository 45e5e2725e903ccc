#include "mimovb/stats.hpp"

#include <cmath>
#include <limits>

namespace mimovb {

SymbolPMF::SymbolPMF(RVector probs) : p_(std::move(probs)) {
  if (p_.size() == 0) throw DimMismatch("empty pmf");
  if (p_.minCoeff() < 0.0) throw ConfigError("pmf entries must be nonnegative");
  if (std::abs(p_.sum() - 1.0) > 1e-12) {
    throw ConfigError("pmf must sum to one, got " + std::to_string(p_.sum()));
  }
}

SymbolPMF SymbolPMF::from_log_weights(const RVector& logw) {
  const double top = logw.maxCoeff();
  if (!std::isfinite(top)) {
    throw DegenerateChannel("all pmf log-weights are -inf");
  }
  RVector p = (logw.array() - top).exp();
  p /= p.sum();
  SymbolPMF out;
  out.p_ = std::move(p);
  return out;
}

int SymbolPMF::argmax() const {
  Index best;
  p_.maxCoeff(&best);
  return static_cast<int>(best);
}

Complex pmf_mean(const SymbolPMF& pmf, const Constellation& alphabet) {
  if (pmf.size() != alphabet.size()) {
    throw DimMismatch("pmf does not match the constellation");
  }
  Complex m(0.0, 0.0);
  for (Index a = 0; a < pmf.size(); ++a) {
    m += pmf.probs()(a) * alphabet.points()(a);
  }
  return m;
}

double pmf_second_moment(const SymbolPMF& pmf, const Constellation& alphabet) {
  if (pmf.size() != alphabet.size()) {
    throw DimMismatch("pmf does not match the constellation");
  }
  double s = 0.0;
  for (Index a = 0; a < pmf.size(); ++a) {
    s += pmf.probs()(a) * std::norm(alphabet.points()(a));
  }
  return s;
}

double pmf_variance(const SymbolPMF& pmf, const Constellation& alphabet) {
  const double sm = pmf_second_moment(pmf, alphabet);
  return std::max(0.0, sm - std::norm(pmf_mean(pmf, alphabet)));
}

double second_moment(const ScalarGaussianStat& stat) {
  return stat.mean * stat.mean + stat.var;
}

}  // namespace mimovb
