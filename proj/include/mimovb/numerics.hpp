#pragma once

#include "mimovb/rng.hpp"
#include "mimovb/types.hpp"

namespace mimovb {

/// Dense Hermitian covariance matrix. Construction symmetrizes the input and
/// rejects matrices that are not Hermitian within a relative tolerance.
/// Positive semi-definiteness is enforced by the operations that need it.
class HermitianCov {
 public:
  HermitianCov() = default;
  explicit HermitianCov(CMatrix m, double rel_tol = 1e-12);

  static HermitianCov identity(Index dim);
  static HermitianCov zero(Index dim);

  Index dim() const { return m_.rows(); }
  const CMatrix& matrix() const { return m_; }
  double trace() const { return m_.real().trace(); }

 private:
  CMatrix m_;
};

/// Eigendecomposition of a Hermitian covariance: cov = U diag(values) U^H.
/// Shared by the square root, the inverse, and the inference hot paths,
/// which reuse one decomposition across many scalar-shifted inversions.
struct SpectralCov {
  CMatrix basis;   // unitary U, columns are eigenvectors
  RVector values;  // eigenvalues in ascending order

  static SpectralCov decompose(const HermitianCov& cov);

  /// U diag(d) U^H for an arbitrary spectrum d.
  CMatrix materialize(const RVector& d) const;
};

/// Hermitian principal square root L with L L^H = cov. Eigenvalues within
/// round-off below zero are clamped; clearly negative spectra are rejected.
CMatrix hermitian_sqrt(const HermitianCov& cov);

/// Inverse of a positive definite covariance.
HermitianCov hermitian_inverse(const HermitianCov& cov);

/// Draw mean + cov^{1/2} g with g ~ CN(0, I).
CVector sample_complex_gaussian(RngStream& rng, const CVector& mean,
                                const HermitianCov& cov);

/// Zero-order Bessel function of the first kind, even in z.
double bessel_j0(double z);

}  // namespace mimovb
