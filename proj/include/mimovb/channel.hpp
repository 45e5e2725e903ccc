#pragma once

#include <cstdint>
#include <vector>

#include "mimovb/constellation.hpp"
#include "mimovb/numerics.hpp"
#include "mimovb/rng.hpp"
#include "mimovb/types.hpp"

namespace mimovb {

enum class CorrelationKind { kIdentityScaled, kExponential };

/// Spatial correlation model for one user's channel. The resulting covariance
/// has all diagonal entries equal to 1/M so that E[|h|^2] = 1.
struct CorrelationSpec {
  CorrelationKind kind = CorrelationKind::kIdentityScaled;
  Complex alpha{0.0, 0.0};  // neighbor-antenna correlation, |alpha| < 1
  int antennas = 1;
};

HermitianCov make_correlation(const CorrelationSpec& spec);

/// Time correlation coefficient from the maximum Doppler frequency and the
/// sampling period, clamped to [0, 1].
double eta_from_doppler(double doppler_hz, double sample_time_s);

/// Noise variance for a target SNR with unit-energy symbols and per-user
/// channel energy one: N0 = K / (M 10^{snr/10}).
double noise_variance_from_snr(double snr_db, int antennas, int users);

enum class EtaMode { kFixed, kSlowlyVarying };
enum class EtaRedraw { kPerSlot, kPerFrame };

/// First-order Gauss-Markov channel dynamics,
///   h_{i,t} = eta_i h_{i,t-1} + sqrt(1 - eta_i^2) R_i^{1/2} g_{i,t},
/// with per-user time correlation eta_i and stationary covariance R_i.
struct GaussMarkovParams {
  RVector eta;                        // per-user, each in [0, 1]
  EtaMode mode = EtaMode::kFixed;
  double fluct_mean = 0.0;            // slowly-varying redraw distribution
  double fluct_var = 0.0;
  EtaRedraw redraw = EtaRedraw::kPerSlot;
  std::vector<HermitianCov> spatial;  // per-user R_i
};

/// One Gauss-Markov step for all users. A null prev draws the stationary
/// initial state R^{1/2} g.
CMatrix evolve_channel(RngStream& rng, const CMatrix* prev,
                       const GaussMarkovParams& params);

/// Pilot/data layout of one frame section: pilot_len pilot slots followed by
/// data_len data slots.
struct SectionPlan {
  int pilot_len = 0;
  int data_len = 0;
};

/// Scenario knobs needed to synthesize one trial.
struct FrameSpec {
  int antennas = 1;
  int users = 1;
  std::vector<SectionPlan> sections;
  Constellation constellation = Constellation::qpsk();
  GaussMarkovParams gauss_markov;
  double noise_variance = 0.0;

  int pilot_len() const;
  int data_len() const;
  int total_len() const;
};

/// Equal split of (pilot_len, data_len) into `count` sections. Remainders go
/// to the leading sections.
std::vector<SectionPlan> split_sections(int pilot_len, int data_len, int count);

/// Ground truth and observations for one simulated trial. Immutable after
/// creation; received(t) = channel[t] * symbols.col(t) + noise by
/// construction.
struct ChannelFrame {
  std::vector<CMatrix> channel;    // per slot, antennas x users
  CMatrix symbols;                 // users x slots
  Eigen::MatrixXi symbol_index;    // constellation index, -1 on pilot slots
  CMatrix received;                // antennas x slots
  CMatrix pilots;                  // users x pilot_len, in slot order
  std::vector<std::uint8_t> pilot_mask;  // per slot
  RMatrix eta_used;                // users x slots, realized eta per step
  double noise_variance = 0.0;
  std::vector<SectionPlan> sections;

  int antennas() const { return static_cast<int>(received.rows()); }
  int users() const { return static_cast<int>(symbols.rows()); }
  int total_len() const { return static_cast<int>(received.cols()); }
  int pilot_len() const { return static_cast<int>(pilots.cols()); }

  /// Column index into `pilots` for pilot slot t.
  int pilot_column(int t) const;

  /// Content hash over channel, symbols, received and noise variance; used
  /// to assert paired-seed frame identity across methods.
  std::uint64_t hash() const;
};

/// Synthesize one frame. Draws are keyed per (purpose, user, slot) under
/// `key`, so the channel, the data symbols and the unit noise do not depend
/// on the section layout, and frames with different layouts stay paired.
ChannelFrame generate_frame(const RngKey& key, const FrameSpec& spec);

}  // namespace mimovb
