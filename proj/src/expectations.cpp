#include "mimovb/expectations.hpp"

#include <cmath>

namespace mimovb {
namespace {

void check_columns(const CVector& y, std::span<const GaussianStat> columns,
                   Index n_x) {
  if (static_cast<Index>(columns.size()) != n_x) {
    throw DimMismatch("column count does not match symbol stats");
  }
  for (const auto& c : columns) {
    if (c.mean.size() != y.size()) {
      throw DimMismatch("column dimension does not match y");
    }
  }
}

double weighted_trace(const CMatrix& w, const CMatrix& s) {
  // Tr{W S}; real for Hermitian W, S.
  return (w.cwiseProduct(s.transpose())).sum().real();
}

}  // namespace

double residual_sq_kernel(const CVector& y, const CMatrix& col_means,
                          const RVector& col_traces, const CVector& x_mean,
                          const RVector& x_var) {
  double out = (y - col_means * x_mean).squaredNorm();
  for (Index i = 0; i < x_mean.size(); ++i) {
    const double second = std::norm(x_mean(i)) + x_var(i);
    out += x_var(i) * col_means.col(i).squaredNorm() + second * col_traces(i);
  }
  return out;
}

double expected_residual_sq(const CVector& y,
                            std::span<const GaussianStat> columns,
                            const CVector& x_mean, const RVector& x_var) {
  if (x_mean.size() != x_var.size()) {
    throw DimMismatch("symbol mean and variance counts disagree");
  }
  check_columns(y, columns, x_mean.size());
  CMatrix means(y.size(), x_mean.size());
  RVector traces(x_mean.size());
  for (Index i = 0; i < x_mean.size(); ++i) {
    means.col(i) = columns[i].mean;
    traces(i) = columns[i].cov.trace();
  }
  return residual_sq_kernel(y, means, traces, x_mean, x_var);
}

double expected_residual_sq_det_x(const CVector& y,
                                  std::span<const GaussianStat> columns,
                                  const CVector& x) {
  return expected_residual_sq(y, columns, x, RVector::Zero(x.size()));
}

double expected_weighted_quadratic(const GaussianStat& y,
                                   const GaussianStat& column,
                                   const ScalarGaussianStat& x,
                                   const HermitianCov& weight) {
  if (y.mean.size() != column.mean.size() ||
      y.mean.size() != weight.dim()) {
    throw DimMismatch("weighted quadratic dimensions disagree");
  }
  const CMatrix& w = weight.matrix();
  const double d = weighted_trace(w, column.cov.matrix());
  const CVector diff = y.mean - column.mean * x.mean;
  double out = (x.mean * x.mean + x.var) * d;
  out += (diff.adjoint() * w * diff)(0).real();
  out += weighted_trace(w, y.cov.matrix());
  out += x.var * (column.mean.adjoint() * w * column.mean)(0).real();
  return out;
}

double expected_weighted_quadratic_traceform(const GaussianStat& y,
                                             const GaussianStat& column,
                                             const ScalarGaussianStat& x,
                                             const HermitianCov& weight) {
  if (y.mean.size() != column.mean.size() ||
      y.mean.size() != weight.dim()) {
    throw DimMismatch("weighted quadratic dimensions disagree");
  }
  const CMatrix& w = weight.matrix();
  const double tr_w = weight.trace();
  const CVector diff = y.mean - column.mean * x.mean;
  double out = (diff.adjoint() * w * diff)(0).real();
  out += weighted_trace(w, y.cov.matrix());
  out += x.var * tr_w * column.mean.squaredNorm();
  out += x.var * tr_w * column.cov.trace();
  out += x.mean * x.mean * weighted_trace(w, column.cov.matrix());
  return out;
}

}  // namespace mimovb
