#include "mimovb/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include <json.hpp>

namespace mimovb {
namespace {

constexpr std::uint64_t kTrialTag = 0x54524941ull;  // frame derivation branch

struct TrialOutcome {
  long errors = 0;
  long symbols = 0;
  double nmse_ratio = 0.0;
  RVector eta_final;       // per user when the method estimates eta
  RVector nu_consistency;  // per user when the method estimates nu
  double seconds = 0.0;
};

std::pair<long, long> count_symbol_errors(
    const Eigen::MatrixXi& detected, const Eigen::MatrixXi& truth,
    std::span<const std::uint8_t> mask) {
  long errors = 0;
  long symbols = 0;
  for (Index t = 0; t < truth.cols(); ++t) {
    if (mask[t]) continue;
    for (Index i = 0; i < truth.rows(); ++i) {
      ++symbols;
      if (detected(i, t) != truth(i, t)) ++errors;
    }
  }
  return {errors, symbols};
}

double nmse_ratio(std::span<const CMatrix> truth,
                  std::span<const CMatrix> est) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    num += (truth[t] - est[t]).squaredNorm();
    den += truth[t].squaredNorm();
  }
  if (den <= 0.0) throw DegenerateTruth("zero-norm channel truth");
  return num / den;
}

int resolve_threads(const SimConfig& config) {
  if (config.threads > 0) return config.threads;
  if (const char* env = std::getenv("MIMOVB_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_f64(std::ofstream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), sizeof(double) * n);
}

void read_f64(std::ifstream& in, double* data, std::size_t n) {
  in.read(reinterpret_cast<char*>(data), sizeof(double) * n);
}

}  // namespace

const char* library_version() { return "mimovb 0.1.0"; }

ExperimentResult run_experiment(const SimConfig& config) {
  config.validate();

  const Constellation alphabet = config.make_constellation();
  const std::vector<HermitianCov> spatial = config.spatial_covs();
  const RVector eta_nominal = config.nominal_eta();
  const int n_methods = static_cast<int>(config.methods.size());
  const int n_snr = static_cast<int>(config.snr_grid_db.size());
  const int trials = config.trials;

  bool needs_plain = false;
  bool needs_interleaved = false;
  for (Method m : config.methods) {
    if (m == Method::kVbOnlineInterleaved) {
      needs_interleaved = true;
    } else {
      needs_plain = true;
    }
  }

  // Per-user eta prior handed to the variational methods.
  std::vector<ScalarGaussianStat> vb_eta_prior(config.users);
  for (int i = 0; i < config.users; ++i) {
    vb_eta_prior[i] = config.known_eta
                          ? ScalarGaussianStat{eta_nominal(i), 0.0}
                          : ScalarGaussianStat{config.priors.eta_mean,
                                               config.priors.eta_var};
  }

  OnlineOptions online_opt;
  online_opt.iterations = config.iterations;
  BlockOptions block_opt;
  block_opt.iterations = config.iterations;

  ExperimentResult result;
  result.details.assign(n_methods, std::vector<PointDetail>(n_snr));
  std::vector<std::vector<std::vector<TrialOutcome>>> outcomes(
      n_methods,
      std::vector<std::vector<TrialOutcome>>(n_snr,
                                             std::vector<TrialOutcome>(trials)));

  const RngKey root = RngKey(config.seed).child(kTrialTag);

  for (int s = 0; s < n_snr; ++s) {
    const double snr_db = config.snr_grid_db[s];
    const double noise_var =
        noise_variance_from_snr(snr_db, config.antennas, config.users);
    const FrameSpec plain_spec = config.frame_spec(1, noise_var);
    const FrameSpec inter_spec = config.frame_spec(config.sections, noise_var);

    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::string error_text;

    auto run_method = [&](Method method, const ChannelFrame& frame,
                          TrialOutcome& out) {
      const auto start = std::chrono::steady_clock::now();
      Eigen::MatrixXi detected;
      std::vector<CMatrix> h_est;
      switch (method) {
        case Method::kVbOnline:
        case Method::kVbOnlineInterleaved: {
          FrameRunInput in;
          in.frame = &frame;
          in.alphabet = &alphabet;
          in.spatial = spatial;
          in.priors = config.priors;
          in.options = online_opt;
          in.init_noise_var = noise_var;
          in.eta_prior = vb_eta_prior;
          const std::vector<SlotEstimate> slots =
              method == Method::kVbOnlineInterleaved
                  ? run_frame_interleaved(in, frame.sections)
                  : run_frame_online(in);
          detected = frame_decisions(slots, frame.pilot_mask);
          h_est = frame_channel_estimates(slots);
          out.eta_final.resize(config.users);
          for (int i = 0; i < config.users; ++i) {
            out.eta_final(i) = slots.back().users[i].eta.mean;
          }
          break;
        }
        case Method::kVbBlock: {
          FrameRunInput in;
          in.frame = &frame;
          in.alphabet = &alphabet;
          in.spatial = spatial;
          in.priors = config.priors;
          in.options = online_opt;
          in.init_noise_var = noise_var;
          in.eta_prior = vb_eta_prior;
          const BlockPosterior post = run_block(in, block_opt);
          detected = post.detected;
          h_est = block_channel_estimates(post);
          out.eta_final.resize(config.users);
          out.nu_consistency.resize(config.users);
          for (int i = 0; i < config.users; ++i) {
            out.eta_final(i) = post.eta[i].mean;
            const double e2 = post.eta[i].mean * post.eta[i].mean;
            out.nu_consistency(i) =
                std::abs(post.nu[i].mean() * (1.0 - e2) - 1.0);
          }
          break;
        }
        case Method::kLmmse: {
          CMatrix y_pilot(frame.antennas(), frame.pilot_len());
          int col = 0;
          for (int t = 0; t < frame.total_len(); ++t) {
            if (frame.pilot_mask[t]) y_pilot.col(col++) = frame.received.col(t);
          }
          const LmmseEstimate est = lmmse_pilot_estimate(
              y_pilot, frame.pilots, spatial, noise_var);
          CMatrix h_static(frame.antennas(), frame.users());
          for (int i = 0; i < frame.users(); ++i) {
            h_static.col(i) = est.h_mean[i];
          }
          h_est.assign(frame.total_len(), h_static);
          detected = mmse_nearest_detect(frame, h_est, noise_var, alphabet);
          break;
        }
        case Method::kKf: {
          const KalmanTrack track =
              kf_track(frame, eta_nominal, spatial, noise_var, alphabet);
          detected = track.detected;
          h_est = track.h_est;
          break;
        }
        case Method::kGenie: {
          detected = genie_detect(frame, noise_var, alphabet);
          h_est.assign(frame.channel.begin(), frame.channel.end());
          break;
        }
      }
      const auto [errors, symbols] =
          count_symbol_errors(detected, frame.symbol_index, frame.pilot_mask);
      out.errors = errors;
      out.symbols = symbols;
      out.nmse_ratio = nmse_ratio(frame.channel, h_est);
      const auto stop = std::chrono::steady_clock::now();
      out.seconds =
          config.record_walltime
              ? std::chrono::duration<double>(stop - start).count()
              : 0.0;
    };

    auto worker = [&]() {
      for (;;) {
        const int trial = next.fetch_add(1);
        if (trial >= trials || failed.load()) return;
        try {
          const RngKey key = root.child(static_cast<std::uint64_t>(trial));
          ChannelFrame plain_frame, inter_frame;
          std::uint64_t plain_hash = 0;
          std::uint64_t inter_hash = 0;
          if (needs_plain) {
            plain_frame = generate_frame(key, plain_spec);
            plain_hash = plain_frame.hash();
          }
          if (needs_interleaved) {
            inter_frame = generate_frame(key, inter_spec);
            inter_hash = inter_frame.hash();
          }
          if (!config.dump_dir.empty()) {
            char name[128];
            if (needs_plain) {
              std::snprintf(name, sizeof(name), "/frame_s%02d_t%05d_L1.bin", s,
                            trial);
              dump_frame(plain_frame, config.dump_dir + name);
            }
            if (needs_interleaved) {
              std::snprintf(name, sizeof(name), "/frame_s%02d_t%05d_L%d.bin",
                            s, trial, config.sections);
              dump_frame(inter_frame, config.dump_dir + name);
            }
          }
          for (int m = 0; m < n_methods; ++m) {
            const Method method = config.methods[m];
            const bool interleaved = method == Method::kVbOnlineInterleaved;
            const ChannelFrame& frame =
                interleaved ? inter_frame : plain_frame;
            const std::uint64_t expected =
                interleaved ? inter_hash : plain_hash;
            if (frame.hash() != expected) {
              throw Error("paired frame mutated between methods");
            }
            run_method(method, frame, outcomes[m][s][trial]);
          }
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!failed.exchange(true)) {
            error_text = "trial " + std::to_string(trial) + " (seed " +
                         std::to_string(config.seed) + ", snr " +
                         std::to_string(snr_db) + " dB) failed: " + e.what();
          }
          return;
        }
      }
    };

    const int n_threads = std::min(resolve_threads(config), trials);
    if (n_threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(n_threads);
      for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    if (failed.load()) throw Error(error_text);
  }

  // Deterministic reduction in (method, snr, trial) order.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int m = 0; m < n_methods; ++m) {
    for (int s = 0; s < n_snr; ++s) {
      long errors = 0;
      long symbols = 0;
      double ratio_sum = 0.0;
      double seconds = 0.0;
      RVector eta_sum;
      RVector nu_sum;
      long eta_count = 0;
      long nu_count = 0;
      for (int t = 0; t < trials; ++t) {
        const TrialOutcome& o = outcomes[m][s][t];
        errors += o.errors;
        symbols += o.symbols;
        ratio_sum += o.nmse_ratio;
        seconds += o.seconds;
        if (o.eta_final.size() > 0) {
          if (eta_sum.size() == 0) eta_sum = RVector::Zero(o.eta_final.size());
          eta_sum += o.eta_final;
          ++eta_count;
        }
        if (o.nu_consistency.size() > 0) {
          if (nu_sum.size() == 0) {
            nu_sum = RVector::Zero(o.nu_consistency.size());
          }
          nu_sum += o.nu_consistency;
          ++nu_count;
        }
      }
      PointDetail& detail = result.details[m][s];
      detail.symbol_errors = errors;
      detail.symbols = symbols;
      detail.nmse_ratio_mean = ratio_sum / trials;
      if (eta_count > 0) detail.eta_user_mean = eta_sum / eta_count;
      if (nu_count > 0) detail.nu_user_consistency = nu_sum / nu_count;

      MetricsRow row;
      row.method = method_name(config.methods[m]);
      row.snr_db = config.snr_grid_db[s];
      row.ser = symbols > 0
                    ? static_cast<double>(errors) / static_cast<double>(symbols)
                    : nan;
      row.ser_stderr =
          symbols > 0 ? std::sqrt(row.ser * (1.0 - row.ser) /
                                  static_cast<double>(symbols))
                      : nan;
      const double mean_ratio = detail.nmse_ratio_mean;
      row.nmse_db = mean_ratio <= 1e-30
                        ? kNmseFloorDb
                        : std::max(kNmseFloorDb, 10.0 * std::log10(mean_ratio));
      row.eta_mean = eta_count > 0 ? detail.eta_user_mean.mean() : nan;
      row.nu_consistency = nu_count > 0 ? detail.nu_user_consistency.mean() : nan;
      row.trials = trials;
      row.wall_time_s = seconds;
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

std::string results_to_csv(std::span<const MetricsRow> rows) {
  std::string out =
      "method,snr_db,ser,ser_stderr,nmse_db,eta_mean,nu_consistency,trials,"
      "wall_time_s\n";
  for (const auto& r : rows) {
    out += r.method;
    out += ',' + format_g17(r.snr_db);
    out += ',' + format_g17(r.ser);
    out += ',' + format_g17(r.ser_stderr);
    out += ',' + format_g17(r.nmse_db);
    out += ',' + format_g17(r.eta_mean);
    out += ',' + format_g17(r.nu_consistency);
    out += ',' + std::to_string(r.trials);
    out += ',' + format_g17(r.wall_time_s);
    out += '\n';
  }
  return out;
}

std::string config_manifest_json(const SimConfig& config) {
  nlohmann::json j;
  j["version"] = library_version();
  j["seed"] = config.seed;
  nlohmann::json c;
  c["antennas"] = config.antennas;
  c["users"] = config.users;
  c["pilot_len"] = config.pilot_len;
  c["data_len"] = config.data_len;
  c["snr_grid_db"] = config.snr_grid_db;
  c["constellation"] = mod_scheme_name(config.constellation);
  c["correlation"] = config.correlation == CorrelationKind::kExponential
                         ? "exponential"
                         : "identity";
  c["alpha_re"] = config.alpha.real();
  c["alpha_im"] = config.alpha.imag();
  switch (config.eta.kind) {
    case EtaSpec::Kind::kFixed:
      c["eta"] = {{"kind", "fixed"}, {"value", config.eta.value}};
      break;
    case EtaSpec::Kind::kDoppler:
      c["eta"] = {{"kind", "doppler"},
                  {"doppler_hz", config.eta.doppler_hz},
                  {"sample_time_s", config.eta.sample_time_s}};
      break;
    case EtaSpec::Kind::kSlowlyVarying:
      c["eta"] = {{"kind", "random"},
                  {"mean", config.eta.mean},
                  {"var", config.eta.var},
                  {"redraw", config.eta.redraw == EtaRedraw::kPerFrame
                                 ? "per-frame"
                                 : "per-slot"}};
      break;
  }
  std::vector<std::string> names;
  for (Method m : config.methods) names.push_back(method_name(m));
  c["methods"] = names;
  c["iterations"] = config.iterations;
  c["trials"] = config.trials;
  c["sections"] = config.sections;
  c["known_eta"] = config.known_eta;
  c["priors"] = {{"eta0_mean", config.priors.eta_mean},
                 {"eta0_var", config.priors.eta_var},
                 {"gamma_a0", config.priors.gamma_shape},
                 {"gamma_b0", config.priors.gamma_rate},
                 {"nu_a0", config.priors.nu_shape},
                 {"nu_b0", config.priors.nu_rate}};
  j["config"] = c;
  return j.dump(2) + "\n";
}

void emit_results(std::span<const MetricsRow> rows, const std::string& path,
                  const SimConfig* config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write results to '" + path + "'");
  const std::string csv = results_to_csv(rows);
  out.write(csv.data(), static_cast<std::streamsize>(csv.size()));
  if (!out) throw Error("short write to '" + path + "'");
  if (config != nullptr) {
    const std::string manifest_path = path + ".manifest.json";
    std::ofstream manifest(manifest_path, std::ios::binary);
    if (!manifest) {
      throw Error("cannot write manifest to '" + manifest_path + "'");
    }
    const std::string j = config_manifest_json(*config);
    manifest.write(j.data(), static_cast<std::streamsize>(j.size()));
  }
}

std::vector<MetricsRow> read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read results from '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error("empty results file");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      parts.push_back(line.substr(pos, comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (parts.size() != 9) throw Error("malformed results row '" + line + "'");
    MetricsRow r;
    r.method = parts[0];
    r.snr_db = std::strtod(parts[1].c_str(), nullptr);
    r.ser = std::strtod(parts[2].c_str(), nullptr);
    r.ser_stderr = std::strtod(parts[3].c_str(), nullptr);
    r.nmse_db = std::strtod(parts[4].c_str(), nullptr);
    r.eta_mean = std::strtod(parts[5].c_str(), nullptr);
    r.nu_consistency = std::strtod(parts[6].c_str(), nullptr);
    r.trials = std::strtol(parts[7].c_str(), nullptr, 10);
    r.wall_time_s = std::strtod(parts[8].c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

void dump_frame(const ChannelFrame& frame, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write frame dump to '" + path + "'");
  out.write("MVBFRAME", 8);
  write_u32(out, 1);
  write_u32(out, static_cast<std::uint32_t>(frame.antennas()));
  write_u32(out, static_cast<std::uint32_t>(frame.users()));
  write_u32(out, static_cast<std::uint32_t>(frame.total_len()));
  write_u32(out, static_cast<std::uint32_t>(frame.pilot_len()));
  write_u32(out, static_cast<std::uint32_t>(frame.sections.size()));
  for (const auto& s : frame.sections) {
    write_u32(out, static_cast<std::uint32_t>(s.pilot_len));
    write_u32(out, static_cast<std::uint32_t>(s.data_len));
  }
  write_f64(out, &frame.noise_variance, 1);
  for (const auto& h : frame.channel) {
    write_f64(out, reinterpret_cast<const double*>(h.data()), 2 * h.size());
  }
  write_f64(out, reinterpret_cast<const double*>(frame.symbols.data()),
            2 * frame.symbols.size());
  write_f64(out, reinterpret_cast<const double*>(frame.received.data()),
            2 * frame.received.size());
  std::vector<std::int32_t> idx(frame.symbol_index.size());
  for (Index i = 0; i < frame.symbol_index.size(); ++i) {
    idx[i] = frame.symbol_index.data()[i];
  }
  out.write(reinterpret_cast<const char*>(idx.data()),
            static_cast<std::streamsize>(sizeof(std::int32_t) * idx.size()));
  write_f64(out, frame.eta_used.data(), frame.eta_used.size());
  out.write(reinterpret_cast<const char*>(frame.pilot_mask.data()),
            static_cast<std::streamsize>(frame.pilot_mask.size()));
  if (!out) throw Error("short write to '" + path + "'");
}

ChannelFrame load_frame_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read frame dump from '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, "MVBFRAME", 8) != 0) {
    throw Error("bad frame dump magic in '" + path + "'");
  }
  if (read_u32(in) != 1) throw Error("unsupported frame dump version");
  const int m = static_cast<int>(read_u32(in));
  const int k = static_cast<int>(read_u32(in));
  const int total = static_cast<int>(read_u32(in));
  const int n_pilot = static_cast<int>(read_u32(in));
  const int n_sections = static_cast<int>(read_u32(in));

  ChannelFrame frame;
  frame.sections.resize(n_sections);
  for (auto& s : frame.sections) {
    s.pilot_len = static_cast<int>(read_u32(in));
    s.data_len = static_cast<int>(read_u32(in));
  }
  read_f64(in, &frame.noise_variance, 1);
  frame.channel.assign(total, CMatrix(m, k));
  for (auto& h : frame.channel) {
    read_f64(in, reinterpret_cast<double*>(h.data()), 2 * h.size());
  }
  frame.symbols.resize(k, total);
  read_f64(in, reinterpret_cast<double*>(frame.symbols.data()),
           2 * frame.symbols.size());
  frame.received.resize(m, total);
  read_f64(in, reinterpret_cast<double*>(frame.received.data()),
           2 * frame.received.size());
  std::vector<std::int32_t> idx(static_cast<std::size_t>(k) * total);
  in.read(reinterpret_cast<char*>(idx.data()),
          static_cast<std::streamsize>(sizeof(std::int32_t) * idx.size()));
  frame.symbol_index.resize(k, total);
  for (Index i = 0; i < frame.symbol_index.size(); ++i) {
    frame.symbol_index.data()[i] = idx[i];
  }
  frame.eta_used.resize(k, total);
  read_f64(in, frame.eta_used.data(), frame.eta_used.size());
  frame.pilot_mask.resize(total);
  in.read(reinterpret_cast<char*>(frame.pilot_mask.data()), total);
  if (!in) throw Error("truncated frame dump '" + path + "'");

  frame.pilots.resize(k, n_pilot);
  int col = 0;
  for (int t = 0; t < total; ++t) {
    if (frame.pilot_mask[t]) frame.pilots.col(col++) = frame.symbols.col(t);
  }
  if (col != n_pilot) throw Error("inconsistent pilot mask in dump");
  return frame;
}

}  // namespace mimovb
