#pragma once

#include <span>
#include <string>
#include <vector>

#include "mimovb/baselines.hpp"
#include "mimovb/config.hpp"
#include "mimovb/metrics.hpp"
#include "mimovb/vb_block.hpp"
#include "mimovb/vb_online.hpp"

namespace mimovb {

struct MetricsRow {
  std::string method;
  double snr_db = 0.0;
  double ser = 0.0;
  double ser_stderr = 0.0;
  double nmse_db = 0.0;
  double eta_mean = 0.0;
  double nu_consistency = 0.0;
  long trials = 0;
  double wall_time_s = 0.0;
};

/// Per (method, SNR) aggregates beyond the CSV row, for assertions that need
/// per-user resolution.
struct PointDetail {
  RVector eta_user_mean;        // empty for methods without an eta estimate
  RVector nu_user_consistency;  // empty for methods without a nu estimate
  long symbol_errors = 0;
  long symbols = 0;
  double nmse_ratio_mean = 0.0;
};

struct ExperimentResult {
  std::vector<MetricsRow> rows;                   // method-major, SNR-minor
  std::vector<std::vector<PointDetail>> details;  // [method][snr]
};

/// Monte-Carlo sweep over (method, SNR). Every method at a given (seed,
/// trial) sees the identical frame realization (asserted by content hash);
/// trials run in parallel and aggregation is reduced in trial order, so a
/// given seed reproduces byte-identical statistics.
ExperimentResult run_experiment(const SimConfig& config);

std::string results_to_csv(std::span<const MetricsRow> rows);

/// Write the CSV plus a JSON run manifest (config echo, seed, version) at
/// path + ".manifest.json".
void emit_results(std::span<const MetricsRow> rows, const std::string& path,
                  const SimConfig* config = nullptr);

std::vector<MetricsRow> read_results(const std::string& path);

std::string config_manifest_json(const SimConfig& config);

/// Raw little-endian trial dump: "MVBFRAME", u32 version/M/K/T/T_p, section
/// plan, N0, then channel/symbols/received as interleaved f64 re-im pairs,
/// symbol indices, realized eta and the pilot mask.
void dump_frame(const ChannelFrame& frame, const std::string& path);
ChannelFrame load_frame_dump(const std::string& path);

const char* library_version();

}  // namespace mimovb
