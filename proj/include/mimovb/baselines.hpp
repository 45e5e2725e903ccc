#pragma once

#include <span>
#include <vector>

#include "mimovb/channel.hpp"
#include "mimovb/numerics.hpp"
#include "mimovb/types.hpp"

namespace mimovb {

/// Pilot-based linear MMSE channel estimate, also the initial state of the
/// variational strategies.
struct LmmseEstimate {
  std::vector<CVector> h_mean;       // per user
  std::vector<HermitianCov> h_cov;   // per user
};

/// Treats the channel as constant over the pilot block. Requires mutually
/// orthogonal pilot rows with unit per-symbol power; per user,
///   h~ = (1/T_p) Y_p x_p^H ~ h + CN(0, (N0/T_p) I),
///   mean = R (R + (N0/T_p) I)^{-1} h~,
///   cov  = R - R (R + (N0/T_p) I)^{-1} R.
LmmseEstimate lmmse_pilot_estimate(const CMatrix& received_pilot,
                                   const CMatrix& pilots,
                                   std::span<const HermitianCov> spatial,
                                   double noise_var);

/// One-shot Kalman tracker over the joint Gauss-Markov state with known eta,
/// spatial covariance and noise variance. Pilot slots apply the Kalman
/// measurement update with the known symbols; on data slots the tracker
/// detects via joint linear MMSE equalization on the predicted channel. By
/// default the data-slot observations do not feed back into the state (the
/// filter cannot improve once the pilots are gone); decision_directed
/// additionally updates the state with the hard decisions treated as pilots.
struct KalmanTrack {
  std::vector<CMatrix> h_est;  // per-slot filtered means, antennas x users
  Eigen::MatrixXi detected;    // users x slots, -1 on pilot slots
};

struct KfOptions {
  bool decision_directed = false;
};

/// cov_margin, when given, receives the smallest eigenvalue of the filtered
/// state covariance at every slot (a PSD diagnostic; costs an extra
/// eigendecomposition per slot).
KalmanTrack kf_track(const ChannelFrame& frame, const RVector& eta,
                     std::span<const HermitianCov> spatial, double noise_var,
                     const Constellation& alphabet,
                     RVector* cov_margin = nullptr,
                     const KfOptions& options = {});

/// Perfect-CSI detector: joint MAP over the symbol alphabet by enumeration
/// when |S|^K <= 4096, otherwise per-user MMSE equalization with nearest-
/// neighbor slicing.
Eigen::MatrixXi genie_detect(const ChannelFrame& frame, double noise_var,
                             const Constellation& alphabet);

/// Joint linear MMSE equalization + nearest-neighbor slicing of every data
/// slot against the given per-slot channel estimates.
Eigen::MatrixXi mmse_nearest_detect(const ChannelFrame& frame,
                                    std::span<const CMatrix> h_per_slot,
                                    double noise_var,
                                    const Constellation& alphabet);

}  // namespace mimovb
