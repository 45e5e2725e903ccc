#include "mimovb/metrics.hpp"

#include <cmath>
#include <limits>

namespace mimovb {

double compute_ser(const Eigen::MatrixXi& detected,
                   const Eigen::MatrixXi& truth,
                   std::span<const std::uint8_t> pilot_mask) {
  if (detected.rows() != truth.rows() || detected.cols() != truth.cols()) {
    throw DimMismatch("decision and truth shapes disagree");
  }
  if (static_cast<Index>(pilot_mask.size()) != truth.cols()) {
    throw DimMismatch("pilot mask length disagrees with the frame");
  }
  long errors = 0;
  long symbols = 0;
  for (Index t = 0; t < truth.cols(); ++t) {
    if (pilot_mask[t]) continue;
    for (Index i = 0; i < truth.rows(); ++i) {
      ++symbols;
      if (detected(i, t) != truth(i, t)) ++errors;
    }
  }
  if (symbols == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(errors) / static_cast<double>(symbols);
}

double compute_nmse_db(std::span<const CMatrix> truth,
                       std::span<const CMatrix> estimate) {
  if (truth.size() != estimate.size()) {
    throw DimMismatch("truth and estimate slot counts disagree");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (truth[t].rows() != estimate[t].rows() ||
        truth[t].cols() != estimate[t].cols()) {
      throw DimMismatch("truth and estimate shapes disagree");
    }
    num += (truth[t] - estimate[t]).squaredNorm();
    den += truth[t].squaredNorm();
  }
  if (den <= 0.0) throw DegenerateTruth("zero-norm channel truth");
  const double ratio = num / den;
  if (ratio <= 1e-30) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(ratio));
}

}  // namespace mimovb
