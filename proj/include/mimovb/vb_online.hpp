#pragma once

#include <span>
#include <vector>

#include "mimovb/channel.hpp"
#include "mimovb/expectations.hpp"
#include "mimovb/stats.hpp"
#include "mimovb/types.hpp"

namespace mimovb {

/// Prior hyperparameters for the variational factors.
struct VbPriors {
  double eta_mean = 0.95;
  double eta_var = 1e-3;
  double gamma_shape = 1e-4;
  double gamma_rate = 1e-4;
  double nu_shape = 1e-4;  // block strategy only
  double nu_rate = 1e-4;
};

struct OnlineOptions {
  int iterations = 50;
  /// Use eta_mean^2 alone in the predicted covariance instead of the second
  /// moment eta_mean^2 + eta_var. Comparison knob, off by default.
  bool exact_eta_prediction = false;
  /// Early exit when the largest per-sweep channel-mean change drops below
  /// this value. Zero keeps the fixed iteration count.
  double convergence_tol = 0.0;
};

/// Per-user variational state carried from slot to slot.
struct UserPosterior {
  CVector h_mean;
  HermitianCov h_cov;
  ScalarGaussianStat eta;
  SymbolPMF symbol;
};

struct SlotEstimate {
  std::vector<UserPosterior> users;
  GammaStat gamma;
  std::vector<int> detected;
  int iterations_run = 0;
};

/// Prediction-phase output: the predicted Gaussian in spectral form plus the
/// cached precision-weighted quantities every estimation update needs.
struct ChannelPrior {
  CVector mean;           // predicted mean
  CVector prev_mean;      // previous posterior mean
  CMatrix basis;          // eigenvectors of the predicted covariance
  RVector variances;      // eigenvalues, floored at zero and ridged
  CVector info_vector;    // predicted precision times prev_mean
  double prev_quadratic = 0.0;
  bool invertible = false;

  HermitianCov cov() const;
  double trace() const { return variances.sum(); }
};

/// Propagate the previous posterior through the Gauss-Markov model:
/// mean = eta_mean * prev mean, covariance = E[eta^2] * prev covariance +
/// (1 - E[eta^2]) * spatial, clamped to PSD.
ChannelPrior predict_prior(const UserPosterior& prev,
                           const HermitianCov& spatial,
                           bool exact_eta = false);

/// Reset an eta factor that escaped [0, 1] back to its prior.
ScalarGaussianStat clamp_eta(const ScalarGaussianStat& eta,
                             const ScalarGaussianStat& reset);

/// Working per-user statistics within one slot's coordinate sweep.
struct SlotUserView {
  CVector h_mean;
  double h_trace = 0.0;
  Complex x_mean{0.0, 0.0};
  double x_second = 0.0;  // E[|x|^2]
  double x_var = 0.0;
};

/// Gaussian channel factor update for one user:
///   Sigma = [gamma E|x|^2 I + P^{-1}]^{-1},
///   mean  = Sigma [gamma (y - sum_{j!=i} <h_j><x_j>) <x_i>* + eta P^{-1} h_prev],
/// with P the predicted covariance.
GaussianStat update_channel(const CVector& y,
                            std::span<const SlotUserView> users,
                            const GammaStat& gamma, const ChannelPrior& prior,
                            const ScalarGaussianStat& eta, int user);

/// Scalar Gaussian eta update from the predicted-precision quadratics,
/// followed by the clamp rule. A zero-variance prior is inert.
ScalarGaussianStat update_eta(const ChannelPrior& prior, const CVector& h_mean,
                              const ScalarGaussianStat& eta_prev,
                              const ScalarGaussianStat& reset);

/// Discrete symbol factor update around the linear estimate
///   z = <h>^H (y - interference) / E||h||^2,
/// normalized in the log domain.
SymbolPMF update_symbol(const CVector& y, std::span<const SlotUserView> users,
                        const GammaStat& gamma, const Constellation& alphabet,
                        const RVector& prior_probs, int user);

/// Gamma noise-precision update: shape a0 + M, rate b0 + E||y - H x||^2.
GammaStat update_gamma(const CVector& y, std::span<const SlotUserView> users,
                       double prior_shape, double prior_rate);

/// Inputs for one slot of the online strategy.
struct SlotContext {
  const Constellation* alphabet = nullptr;
  std::span<const HermitianCov> spatial;
  std::span<const ScalarGaussianStat> eta_reset;  // per-user clamp target
  bool pilot_slot = false;
  CVector pilot;  // per-user pilot symbols when pilot_slot
  VbPriors priors;
  OnlineOptions options;
};

/// Two-phase update of one slot: prediction for every user, then coordinate
/// sweeps in the order channels -> etas -> symbols (data slots) -> gamma.
SlotEstimate run_slot(const CVector& y, std::span<const UserPosterior> prev,
                      const SlotContext& ctx);

/// Frame-level invocation of the online strategy.
struct FrameRunInput {
  const ChannelFrame* frame = nullptr;
  const Constellation* alphabet = nullptr;
  std::span<const HermitianCov> spatial;
  VbPriors priors;
  OnlineOptions options;
  /// Noise variance handed to the pilot-based initializer.
  double init_noise_var = 0.0;
  /// Optional per-user eta prior; defaults to (priors.eta_mean,
  /// priors.eta_var). A zero-variance entry pins eta (known-eta mode).
  std::vector<ScalarGaussianStat> eta_prior;
};

std::vector<SlotEstimate> run_frame_online(const FrameRunInput& input);

/// Online strategy over an interleaved frame; posteriors carry across the
/// section boundaries unchanged while the pilot mask re-enters pilot mode.
std::vector<SlotEstimate> run_frame_interleaved(
    const FrameRunInput& input, std::span<const SectionPlan> sections);

/// Hard decisions of a frame run as a users x slots index matrix (-1 on
/// pilot slots).
Eigen::MatrixXi frame_decisions(std::span<const SlotEstimate> slots,
                                std::span<const std::uint8_t> pilot_mask);

/// Per-slot channel mean estimates of a frame run.
std::vector<CMatrix> frame_channel_estimates(
    std::span<const SlotEstimate> slots);

}  // namespace mimovb
