#pragma once

// Test-side reference implementations: straight-line transcriptions of the
// update formulas with dense inverses, and Monte-Carlo estimators for the
// expectation identities. Kept independent of the library's computation
// paths on purpose.

#include <utility>

#include "mimovb/numerics.hpp"
#include "mimovb/rng.hpp"
#include "mimovb/stats.hpp"
#include "mimovb/types.hpp"

namespace oracle {

using mimovb::CMatrix;
using mimovb::Complex;
using mimovb::CVector;
using mimovb::GaussianStat;
using mimovb::HermitianCov;
using mimovb::Index;
using mimovb::RngStream;
using mimovb::RVector;
using mimovb::ScalarGaussianStat;

inline CMatrix random_matrix(RngStream& rng, Index rows, Index cols) {
  CMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.next_cgaussian();
  }
  return m;
}

inline CVector random_vector(RngStream& rng, Index n) {
  return mimovb::standard_complex_gaussian(rng, n);
}

// B B^H with B of the requested rank; PSD by construction.
inline HermitianCov random_psd(RngStream& rng, Index n, Index rank) {
  const CMatrix b = random_matrix(rng, n, rank);
  CMatrix m = b * b.adjoint();
  return HermitianCov(0.5 * (m + m.adjoint().eval()));
}

inline HermitianCov random_pd(RngStream& rng, Index n, double ridge = 0.5) {
  const CMatrix b = random_matrix(rng, n, n);
  CMatrix m = b * b.adjoint() + ridge * CMatrix::Identity(n, n);
  return HermitianCov(0.5 * (m + m.adjoint().eval()));
}

inline CMatrix random_unitary(RngStream& rng, Index n) {
  const CMatrix m = random_matrix(rng, n, n);
  Eigen::HouseholderQR<CMatrix> qr(m);
  return qr.householderQ() * CMatrix::Identity(n, n);
}

// Literal per-user channel update with dense inverses.
struct ChannelRefIn {
  CVector y;
  CMatrix h_means;    // per-user current means, column i for user i
  CVector x_mean;     // per-user symbol means
  RVector x_second;   // per-user E|x|^2
  CMatrix prior_cov;  // predicted covariance of the target user
  CVector prev_mean;  // previous posterior mean of the target user
  double gamma = 1.0;
  double eta = 1.0;
  int user = 0;
};

inline std::pair<CVector, CMatrix> channel_update_reference(
    const ChannelRefIn& in) {
  const Index m = in.y.size();
  const CMatrix prior_inv = in.prior_cov.inverse();
  const CMatrix sigma =
      (in.gamma * in.x_second(in.user) * CMatrix::Identity(m, m) + prior_inv)
          .inverse();
  CVector r = in.y;
  for (Index j = 0; j < in.h_means.cols(); ++j) {
    if (j == in.user) continue;
    r -= in.h_means.col(j) * in.x_mean(j);
  }
  const CVector mean =
      sigma * (in.gamma * std::conj(in.x_mean(in.user)) * r +
               in.eta * (prior_inv * in.prev_mean));
  return {mean, sigma};
}

inline ScalarGaussianStat eta_update_reference(const CVector& prev_mean,
                                               const CMatrix& prior_cov,
                                               const CVector& h_now,
                                               const ScalarGaussianStat& prev) {
  const CMatrix prior_inv = prior_cov.inverse();
  const double quad = (prev_mean.adjoint() * prior_inv * prev_mean)(0).real();
  ScalarGaussianStat out;
  out.var = 1.0 / (quad + 1.0 / prev.var);
  out.mean = out.var * ((prev_mean.adjoint() * prior_inv * h_now)(0).real() +
                        prev.mean / prev.var);
  return out;
}

// Literal block channel update.
struct BlockChannelRefIn {
  CVector y;
  CMatrix h_means;
  CVector x_mean;
  RVector x_second;
  CVector h_prev;
  CVector h_next;
  CMatrix spatial;  // R
  double gamma = 1.0;
  double eta_mean = 1.0;
  double eta_var = 0.0;
  double nu = 1.0;
  int user = 0;
};

inline std::pair<CVector, CMatrix> block_channel_update_reference(
    const BlockChannelRefIn& in) {
  const Index m = in.y.size();
  const CMatrix r_inv = in.spatial.inverse();
  const double e2 = in.eta_mean * in.eta_mean + in.eta_var;
  const CMatrix sigma =
      (in.gamma * in.x_second(in.user) * CMatrix::Identity(m, m) +
       (1.0 + e2) * in.nu * r_inv)
          .inverse();
  CVector res = in.y;
  for (Index j = 0; j < in.h_means.cols(); ++j) {
    if (j == in.user) continue;
    res -= in.h_means.col(j) * in.x_mean(j);
  }
  const CVector mean =
      sigma * (in.gamma * std::conj(in.x_mean(in.user)) * res +
               in.eta_mean * in.nu * (r_inv * (in.h_next + in.h_prev)));
  return {mean, sigma};
}

inline ScalarGaussianStat block_eta_update_reference(
    const std::vector<CVector>& means, const CMatrix& spatial, double nu,
    const ScalarGaussianStat& prior) {
  const CMatrix r_inv = spatial.inverse();
  double prec = 0.0;
  double cross = 0.0;
  for (std::size_t t = 1; t < means.size(); ++t) {
    prec += (means[t - 1].adjoint() * r_inv * means[t - 1])(0).real();
    cross += (means[t - 1].adjoint() * r_inv * means[t])(0).real();
  }
  ScalarGaussianStat out;
  out.var = 1.0 / (nu * prec + 1.0 / prior.var);
  out.mean = out.var * (nu * cross + prior.mean / prior.var);
  return out;
}

// Monte-Carlo estimate of E||y - A x||^2 with column-wise Gaussian A and
// independent complex symbols of the given means/variances.
inline double mc_residual_sq(RngStream& rng, const CVector& y,
                             const std::vector<GaussianStat>& cols,
                             const CVector& x_mean, const RVector& x_var,
                             long samples) {
  const Index m = y.size();
  const Index n = x_mean.size();
  std::vector<CMatrix> roots;
  roots.reserve(n);
  for (const auto& c : cols) roots.push_back(mimovb::hermitian_sqrt(c.cov));
  double acc = 0.0;
  CVector r(m);
  for (long s = 0; s < samples; ++s) {
    r = y;
    for (Index i = 0; i < n; ++i) {
      const CVector a =
          cols[i].mean + roots[i] * random_vector(rng, m);
      const Complex x =
          x_mean(i) + std::sqrt(x_var(i)) * rng.next_cgaussian();
      r -= a * x;
    }
    acc += r.squaredNorm();
  }
  return acc / static_cast<double>(samples);
}

// Monte-Carlo estimate of E[(y - a x)^H W (y - a x)] with Gaussian y and a
// and a real scalar Gaussian x.
inline double mc_weighted_quadratic(RngStream& rng, const GaussianStat& y,
                                    const GaussianStat& a,
                                    const ScalarGaussianStat& x,
                                    const HermitianCov& weight, long samples) {
  const Index m = y.mean.size();
  const CMatrix root_y = mimovb::hermitian_sqrt(y.cov);
  const CMatrix root_a = mimovb::hermitian_sqrt(a.cov);
  const CMatrix& w = weight.matrix();
  double acc = 0.0;
  for (long s = 0; s < samples; ++s) {
    const CVector ys = y.mean + root_y * random_vector(rng, m);
    const CVector as = a.mean + root_a * random_vector(rng, m);
    const double xs = x.mean + std::sqrt(x.var) * rng.next_gaussian();
    const CVector d = ys - as * xs;
    acc += (d.adjoint() * w * d)(0).real();
  }
  return acc / static_cast<double>(samples);
}

}  // namespace oracle
