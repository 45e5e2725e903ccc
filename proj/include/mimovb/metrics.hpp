#pragma once

#include <cstdint>
#include <span>

#include "mimovb/types.hpp"

namespace mimovb {

/// Fraction of wrong symbol decisions over all (user, data-slot) pairs.
/// Pilot slots are excluded via the mask. NaN when the frame has no data
/// slots.
double compute_ser(const Eigen::MatrixXi& detected,
                   const Eigen::MatrixXi& truth,
                   std::span<const std::uint8_t> pilot_mask);

/// 10 log10(sum_t ||H_t - Hhat_t||_F^2 / sum_t ||H_t||_F^2), floored at
/// -300 dB for exact reconstructions.
double compute_nmse_db(std::span<const CMatrix> truth,
                       std::span<const CMatrix> estimate);

constexpr double kNmseFloorDb = -300.0;

}  // namespace mimovb
