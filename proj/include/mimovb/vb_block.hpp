#pragma once

#include <span>
#include <vector>

#include "mimovb/vb_online.hpp"

namespace mimovb {

/// How the innovation-precision rate accumulates across the block.
///   kLemma:     full expectation including the posterior covariance traces
///               (the default; matches the expectation identity).
///   kPlugIn:    mean innovation quadratics only; approaches
///               (1 - <eta>^2)^{-1} when the slot means are exact but
///               overshoots once they are smoothed estimates.
///   kTraceform: Tr{R^{-1}}-scaled plain-norm variant (A/B debugging).
enum class NuRateForm { kLemma, kPlugIn, kTraceform };

struct BlockOptions {
  int iterations = 50;
  /// Terminal pseudo-neighbor for the last slot. Default couples slot T to
  /// its own mean, eta * <h_T>, which cancels the backward smoothing pull in
  /// expectation; the literal variant couples it to the initial estimate.
  bool literal_terminal_neighbor = false;
  NuRateForm nu_rate = NuRateForm::kLemma;
};

struct BlockPosterior {
  std::vector<std::vector<GaussianStat>> channel;  // [user][slot]
  std::vector<ScalarGaussianStat> eta;             // per user
  std::vector<GammaStat> nu;                       // per user
  std::vector<GammaStat> gamma;                    // per slot
  std::vector<std::vector<SymbolPMF>> symbols;     // [user][slot]
  Eigen::MatrixXi detected;                        // users x slots, -1 pilots
  int iterations_run = 0;
};

/// Channel factor update of one (user, slot) with temporal neighbors:
///   Sigma = [gamma E|x|^2 I + (1 + E[eta^2]) nu R^{-1}]^{-1},
///   mean  = Sigma [gamma (y - interference) <x>* + eta nu R^{-1}(h_next + h_prev)].
GaussianStat update_channel_block(const CVector& y,
                                  std::span<const SlotUserView> users,
                                  int user, const CVector& h_prev,
                                  const CVector& h_next,
                                  const GammaStat& gamma,
                                  const ScalarGaussianStat& eta,
                                  const GammaStat& nu,
                                  const HermitianCov& spatial);

/// Whole-block eta update from the slot means (index 0 holds the initial
/// estimate):
///   var  = (nu sum_t m_{t-1}^H R^{-1} m_{t-1} + 1/tau0)^{-1},
///   mean = var (nu sum_t Re{m_{t-1}^H R^{-1} m_t} + eta0/tau0),
/// followed by the clamp rule. A zero-variance prior is inert.
ScalarGaussianStat update_eta_block(std::span<const CVector> slot_means,
                                    const GammaStat& nu,
                                    const HermitianCov& spatial_inverse,
                                    const ScalarGaussianStat& prior,
                                    const ScalarGaussianStat& reset);

/// Innovation-precision update over the whole block. slots[0] holds the
/// initial estimate; shape grows by exactly T*M and the rate accumulates the
/// expected R^{-1}-weighted innovation quadratics.
GammaStat update_nu(std::span<const GaussianStat> slots,
                    const ScalarGaussianStat& eta, const HermitianCov& spatial,
                    double prior_shape, double prior_rate,
                    NuRateForm form = NuRateForm::kLemma);

/// Whole-frame CAVI: warm start from one online pass, then `iterations`
/// sweeps in the order channels (all slots) -> etas -> nus -> symbols and
/// gammas per slot.
BlockPosterior run_block(const FrameRunInput& input, const BlockOptions& opt);

Eigen::MatrixXi block_decisions(const BlockPosterior& post);
std::vector<CMatrix> block_channel_estimates(const BlockPosterior& post);

}  // namespace mimovb
