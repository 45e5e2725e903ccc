#pragma once

#include <span>

#include "mimovb/stats.hpp"
#include "mimovb/types.hpp"

namespace mimovb {

/// E||y - A x||^2 for column-wise independent A and independent x with
/// diagonal covariance diag(x_var):
///   ||y - <A><x>||^2 + <x>^H D <x> + Tr{Sx D} + Tr{Sx <A^H><A>},
/// with D = diag(Tr{S_a1}, ..., Tr{S_an}). With diagonal Sx this reduces to
///   ||y - <A><x>||^2 + sum_i [ x_var_i ||<a_i>||^2 + <|x_i|^2> Tr{S_ai} ].
double expected_residual_sq(const CVector& y,
                            std::span<const GaussianStat> columns,
                            const CVector& x_mean, const RVector& x_var);

/// Same expectation with deterministic x (all symbol variances zero).
double expected_residual_sq_det_x(const CVector& y,
                                  std::span<const GaussianStat> columns,
                                  const CVector& x);

/// E[(y - a x)^H W (y - a x)] for a random vector y, a single random column a
/// and a real scalar factor x, with W Hermitian:
///   <x>^2 D + var_x D + (<y> - <a><x>)^H W (<y> - <a><x>)
///   + Tr{W Sy} + var_x <a>^H W <a>,   D = Tr{W Sa}.
double expected_weighted_quadratic(const GaussianStat& y,
                                   const GaussianStat& column,
                                   const ScalarGaussianStat& x,
                                   const HermitianCov& weight);

/// Variant with the column quadratics replaced by Tr{W}-scaled plain norms
/// (var_x Tr{W} ||<a>||^2 and var_x Tr{W} Tr{Sa}). Kept for A/B comparison
/// behind a debug switch; not used by default.
double expected_weighted_quadratic_traceform(const GaussianStat& y,
                                             const GaussianStat& column,
                                             const ScalarGaussianStat& x,
                                             const HermitianCov& weight);

/// Lean kernel behind expected_residual_sq, taking column means and
/// covariance traces directly. The inference loops feed it cached traces.
double residual_sq_kernel(const CVector& y, const CMatrix& col_means,
                          const RVector& col_traces, const CVector& x_mean,
                          const RVector& x_var);

}  // namespace mimovb
