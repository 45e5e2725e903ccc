#pragma once

#include "mimovb/constellation.hpp"
#include "mimovb/numerics.hpp"
#include "mimovb/types.hpp"

namespace mimovb {

/// Complex Gaussian variational factor (mean and covariance).
struct GaussianStat {
  CVector mean;
  HermitianCov cov;

  GaussianStat() = default;
  GaussianStat(CVector m, HermitianCov c) : mean(std::move(m)), cov(std::move(c)) {
    if (mean.size() != cov.dim()) {
      throw DimMismatch("Gaussian mean and covariance dimensions disagree");
    }
  }
};

/// Real scalar Gaussian factor.
struct ScalarGaussianStat {
  double mean = 0.0;
  double var = 0.0;
};

/// Gamma factor in shape/rate parametrization.
struct GammaStat {
  double shape = 1.0;
  double rate = 1.0;

  GammaStat() = default;
  GammaStat(double a, double b) : shape(a), rate(b) {
    if (!(a > 0.0) || !(b > 0.0)) {
      throw ConfigError("Gamma parameters must be strictly positive");
    }
  }

  double mean() const { return shape / rate; }
};

/// Discrete variational factor over a constellation.
class SymbolPMF {
 public:
  SymbolPMF() = default;
  explicit SymbolPMF(RVector probs);

  /// Normalize exp(logw) in the log domain (max subtracted first).
  static SymbolPMF from_log_weights(const RVector& logw);

  const RVector& probs() const { return p_; }
  Index size() const { return p_.size(); }
  int argmax() const;

 private:
  RVector p_;
};

Complex pmf_mean(const SymbolPMF& pmf, const Constellation& alphabet);
double pmf_second_moment(const SymbolPMF& pmf, const Constellation& alphabet);
double pmf_variance(const SymbolPMF& pmf, const Constellation& alphabet);

/// E[x^2] = mean^2 + var.
double second_moment(const ScalarGaussianStat& stat);

}  // namespace mimovb
