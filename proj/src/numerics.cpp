#include "mimovb/numerics.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace mimovb {

HermitianCov::HermitianCov(CMatrix m, double rel_tol) {
  if (m.rows() != m.cols()) {
    throw DimMismatch("covariance must be square, got " +
                      std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()));
  }
  const double scale = m.cwiseAbs().maxCoeff();
  const double dev = (m - m.adjoint().eval()).cwiseAbs().maxCoeff();
  if (dev > rel_tol * std::max(scale, 1e-300)) {
    throw NotHermitian("matrix deviates from Hermitian by " +
                       std::to_string(dev));
  }
  m_ = 0.5 * (m + m.adjoint().eval());
}

HermitianCov HermitianCov::identity(Index dim) {
  return HermitianCov(CMatrix::Identity(dim, dim));
}

HermitianCov HermitianCov::zero(Index dim) {
  return HermitianCov(CMatrix::Zero(dim, dim));
}

SpectralCov SpectralCov::decompose(const HermitianCov& cov) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(cov.matrix());
  if (es.info() != Eigen::Success) {
    throw Error("eigendecomposition failed");
  }
  return SpectralCov{es.eigenvectors(), es.eigenvalues()};
}

CMatrix SpectralCov::materialize(const RVector& d) const {
  return basis * d.asDiagonal() * basis.adjoint();
}

CMatrix hermitian_sqrt(const HermitianCov& cov) {
  SpectralCov s = SpectralCov::decompose(cov);
  const double tr = s.values.sum();
  if (s.values.minCoeff() < -1e-8 * tr) {
    throw NotPsd("eigenvalue " + std::to_string(s.values.minCoeff()) +
                 " below PSD tolerance for trace " + std::to_string(tr));
  }
  RVector root = s.values.cwiseMax(0.0).cwiseSqrt();
  return s.materialize(root);
}

HermitianCov hermitian_inverse(const HermitianCov& cov) {
  SpectralCov s = SpectralCov::decompose(cov);
  const double tr = s.values.sum();
  if (s.values.minCoeff() <= 1e-12 * std::max(tr, 0.0) || tr <= 0.0) {
    throw Singular("covariance not positive definite (min eigenvalue " +
                   std::to_string(s.values.minCoeff()) + ")");
  }
  return HermitianCov(s.materialize(s.values.cwiseInverse()));
}

CVector sample_complex_gaussian(RngStream& rng, const CVector& mean,
                                const HermitianCov& cov) {
  if (mean.size() != cov.dim()) {
    throw DimMismatch("mean length does not match covariance dimension");
  }
  const CMatrix root = hermitian_sqrt(cov);
  const CVector g = standard_complex_gaussian(rng, cov.dim());
  return mean + root * g;
}

double bessel_j0(double z) { return std::cyl_bessel_j(0.0, std::abs(z)); }

}  // namespace mimovb
