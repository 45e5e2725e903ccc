#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mimovb/channel.hpp"
#include "mimovb/vb_online.hpp"

namespace mimovb {

enum class Method {
  kVbOnline,
  kVbOnlineInterleaved,
  kVbBlock,
  kLmmse,
  kKf,
  kGenie,
};

std::string method_name(Method method);
Method method_from_name(const std::string& name);

/// How the per-user time correlation is produced.
struct EtaSpec {
  enum class Kind { kFixed, kDoppler, kSlowlyVarying };
  Kind kind = Kind::kFixed;
  double value = 0.985;        // kFixed
  double doppler_hz = 0.0;     // kDoppler
  double sample_time_s = 0.0;  // kDoppler
  double mean = 0.97;          // kSlowlyVarying
  double var = 5e-5;           // kSlowlyVarying
  EtaRedraw redraw = EtaRedraw::kPerSlot;

  /// Nominal coefficient: the fixed value, the Doppler-derived value, or the
  /// fluctuation mean. This is what genie-eta baselines are given.
  double nominal() const;
};

/// Full scenario description for one experiment.
struct SimConfig {
  int antennas = 32;
  int users = 4;
  int pilot_len = 8;
  int data_len = 128;
  std::vector<double> snr_grid_db{10.0};
  ModScheme constellation = ModScheme::kQpsk;
  CorrelationKind correlation = CorrelationKind::kIdentityScaled;
  Complex alpha{0.0, 0.0};
  EtaSpec eta;
  std::vector<Method> methods{Method::kVbOnline};
  int iterations = 50;
  int trials = 1000;
  std::uint64_t seed = 1;
  VbPriors priors;
  bool known_eta = false;  // hand the true eta to the variational methods
  int sections = 2;        // interleaved layout
  int threads = 0;         // 0: env MIMOVB_THREADS, then hardware
  bool record_walltime = true;
  std::string dump_dir;

  void validate() const;

  Constellation make_constellation() const;
  std::vector<HermitianCov> spatial_covs() const;
  RVector nominal_eta() const;  // per user
  FrameSpec frame_spec(int section_count, double noise_variance) const;
};

/// key = value lines, '#' comments. Keys are documented in the README.
SimConfig load_config_file(const std::string& path);
void apply_config_entry(SimConfig& cfg, const std::string& key,
                        const std::string& value);

std::vector<double> parse_snr_spec(const std::string& text);
Complex parse_complex(const std::string& text);
EtaSpec parse_eta_spec(const std::string& text);

}  // namespace mimovb
