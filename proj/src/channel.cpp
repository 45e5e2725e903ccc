#include "mimovb/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mimovb {
namespace {

// Stream derivation tags: one namespace per kind of draw so that a frame's
// channel, symbols and noise are independent of the section layout.
constexpr std::uint64_t kChannelTag = 1;
constexpr std::uint64_t kSymbolTag = 2;
constexpr std::uint64_t kNoiseTag = 3;
constexpr std::uint64_t kEtaTag = 4;

CVector gm_step_column(RngStream& rng, const CVector* prev, double eta,
                       const CMatrix& root) {
  const CVector g = standard_complex_gaussian(rng, root.rows());
  if (prev == nullptr) {
    return root * g;
  }
  const double innov = std::sqrt(std::max(0.0, 1.0 - eta * eta));
  return eta * (*prev) + innov * (root * g);
}

void validate_gauss_markov(const GaussMarkovParams& params, int users) {
  if (params.eta.size() != users ||
      static_cast<int>(params.spatial.size()) != users) {
    throw DimMismatch("Gauss-Markov parameters must cover every user");
  }
  for (Index i = 0; i < params.eta.size(); ++i) {
    if (!(params.eta(i) >= 0.0 && params.eta(i) <= 1.0)) {
      throw ConfigError("time correlation must lie in [0, 1]");
    }
  }
}

double clamp_unit(double v) { return std::min(1.0, std::max(0.0, v)); }

// Rows of the P-point DFT matrix: mutually orthogonal pilot sequences at
// unit per-symbol power.
CMatrix dft_pilots(int users, int len) {
  CMatrix p(users, len);
  for (int i = 0; i < users; ++i) {
    for (int t = 0; t < len; ++t) {
      const double phase =
          -2.0 * std::numbers::pi * static_cast<double>(i) * t / len;
      p(i, t) = Complex(std::cos(phase), std::sin(phase));
    }
  }
  return p;
}

std::uint64_t fnv_bytes(std::uint64_t h, const void* data, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

HermitianCov make_correlation(const CorrelationSpec& spec) {
  const int m = spec.antennas;
  if (m < 1) throw ConfigError("antenna count must be positive");
  const double inv_m = 1.0 / m;
  if (spec.kind == CorrelationKind::kIdentityScaled) {
    return HermitianCov(inv_m * CMatrix::Identity(m, m));
  }
  if (std::abs(spec.alpha) >= 1.0) {
    throw BadAlpha("correlation coefficient must satisfy |alpha| < 1");
  }
  CMatrix r(m, m);
  for (int k = 0; k < m; ++k) {
    for (int l = 0; l <= k; ++l) {
      const Complex v = inv_m * std::pow(spec.alpha, k - l);
      r(k, l) = v;
      r(l, k) = std::conj(v);
    }
  }
  return HermitianCov(std::move(r));
}

double eta_from_doppler(double doppler_hz, double sample_time_s) {
  if (doppler_hz < 0.0 || sample_time_s <= 0.0) {
    throw ConfigError("need doppler >= 0 and sample time > 0");
  }
  const double eta =
      bessel_j0(2.0 * std::numbers::pi * doppler_hz * sample_time_s);
  return clamp_unit(eta);
}

double noise_variance_from_snr(double snr_db, int antennas, int users) {
  if (antennas < 1 || users < 1) {
    throw ConfigError("antenna and user counts must be positive");
  }
  return static_cast<double>(users) /
         (antennas * std::pow(10.0, snr_db / 10.0));
}

CMatrix evolve_channel(RngStream& rng, const CMatrix* prev,
                       const GaussMarkovParams& params) {
  const int users = static_cast<int>(params.eta.size());
  validate_gauss_markov(params, users);
  if (prev != nullptr && prev->cols() != users) {
    throw DimMismatch("previous channel has wrong user count");
  }
  const Index m = params.spatial.front().dim();
  CMatrix out(m, users);
  for (int i = 0; i < users; ++i) {
    const CMatrix root = hermitian_sqrt(params.spatial[i]);
    const CVector prev_col = prev ? CVector(prev->col(i)) : CVector();
    out.col(i) = gm_step_column(rng, prev ? &prev_col : nullptr, params.eta(i),
                                root);
  }
  return out;
}

int FrameSpec::pilot_len() const {
  int n = 0;
  for (const auto& s : sections) n += s.pilot_len;
  return n;
}

int FrameSpec::data_len() const {
  int n = 0;
  for (const auto& s : sections) n += s.data_len;
  return n;
}

int FrameSpec::total_len() const { return pilot_len() + data_len(); }

std::vector<SectionPlan> split_sections(int pilot_len, int data_len,
                                        int count) {
  if (count < 1) throw ConfigError("section count must be positive");
  std::vector<SectionPlan> plan(count);
  for (int i = 0; i < count; ++i) {
    plan[i].pilot_len = pilot_len / count + (i < pilot_len % count ? 1 : 0);
    plan[i].data_len = data_len / count + (i < data_len % count ? 1 : 0);
  }
  return plan;
}

int ChannelFrame::pilot_column(int t) const {
  if (t < 0 || t >= static_cast<int>(pilot_mask.size()) || !pilot_mask[t]) {
    throw DimMismatch("slot " + std::to_string(t) + " is not a pilot slot");
  }
  int col = 0;
  for (int s = 0; s < t; ++s) col += pilot_mask[s] ? 1 : 0;
  return col;
}

std::uint64_t ChannelFrame::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& m : channel) {
    h = fnv_bytes(h, m.data(), sizeof(Complex) * m.size());
  }
  h = fnv_bytes(h, symbols.data(), sizeof(Complex) * symbols.size());
  h = fnv_bytes(h, received.data(), sizeof(Complex) * received.size());
  h = fnv_bytes(h, &noise_variance, sizeof(noise_variance));
  h = fnv_bytes(h, pilot_mask.data(), pilot_mask.size());
  return h;
}

ChannelFrame generate_frame(const RngKey& key, const FrameSpec& spec) {
  const int m = spec.antennas;
  const int users = spec.users;
  if (m < 1 || users < 1) throw ConfigError("bad frame dimensions");
  if (spec.sections.empty()) throw ConfigError("frame needs sections");
  if (spec.noise_variance < 0.0) throw ConfigError("negative noise variance");
  validate_gauss_markov(spec.gauss_markov, users);
  for (const auto& s : spec.sections) {
    if (s.pilot_len < users) {
      throw ConfigError("orthogonal pilots need a pilot block of at least " +
                        std::to_string(users) + " slots per section");
    }
    if (s.data_len < 0) throw ConfigError("negative data length");
  }

  const int total = spec.total_len();
  const int n_pilot = spec.pilot_len();
  ChannelFrame frame;
  frame.sections = spec.sections;
  frame.noise_variance = spec.noise_variance;
  frame.pilot_mask.assign(total, 0);
  frame.pilots.resize(users, n_pilot);

  int slot = 0;
  int pcol = 0;
  for (const auto& s : spec.sections) {
    const CMatrix block = dft_pilots(users, s.pilot_len);
    for (int p = 0; p < s.pilot_len; ++p) {
      frame.pilot_mask[slot] = 1;
      frame.pilots.col(pcol++) = block.col(p);
      ++slot;
    }
    slot += s.data_len;
  }

  // Realized per-step time correlation.
  frame.eta_used.resize(users, total);
  const auto& gm = spec.gauss_markov;
  for (int u = 0; u < users; ++u) {
    if (gm.mode == EtaMode::kFixed) {
      frame.eta_used.row(u).setConstant(gm.eta(u));
    } else if (gm.redraw == EtaRedraw::kPerFrame) {
      RngStream s = key.child(kEtaTag).child(u).child(0).stream();
      const double v =
          clamp_unit(gm.fluct_mean + std::sqrt(gm.fluct_var) * s.next_gaussian());
      frame.eta_used.row(u).setConstant(v);
    } else {
      for (int t = 0; t < total; ++t) {
        RngStream s = key.child(kEtaTag).child(u).child(t + 1).stream();
        frame.eta_used(u, t) =
            clamp_unit(gm.fluct_mean + std::sqrt(gm.fluct_var) * s.next_gaussian());
      }
    }
  }

  std::vector<CMatrix> roots(users);
  for (int u = 0; u < users; ++u) {
    roots[u] = hermitian_sqrt(gm.spatial[u]);
  }

  // Channel trajectory: stationary initial state, then one Gauss-Markov step
  // per slot.
  CMatrix current(m, users);
  for (int u = 0; u < users; ++u) {
    RngStream s = key.child(kChannelTag).child(u).child(0).stream();
    current.col(u) = gm_step_column(s, nullptr, 0.0, roots[u]);
  }
  frame.channel.reserve(total);
  for (int t = 0; t < total; ++t) {
    CMatrix next(m, users);
    for (int u = 0; u < users; ++u) {
      RngStream s = key.child(kChannelTag).child(u).child(t + 1).stream();
      const CVector prev_col = current.col(u);
      next.col(u) =
          gm_step_column(s, &prev_col, frame.eta_used(u, t), roots[u]);
    }
    frame.channel.push_back(next);
    current = next;
  }

  // Symbols: pilots from the section pilot matrices, data drawn from the
  // constellation prior. Data draws are keyed by (user, slot) so paired
  // frames with different layouts agree wherever both carry data.
  frame.symbols.resize(users, total);
  frame.symbol_index = Eigen::MatrixXi::Constant(users, total, -1);
  const auto& alphabet = spec.constellation;
  for (int t = 0; t < total; ++t) {
    if (frame.pilot_mask[t]) {
      frame.symbols.col(t) = frame.pilots.col(frame.pilot_column(t));
      continue;
    }
    for (int u = 0; u < users; ++u) {
      RngStream s = key.child(kSymbolTag).child(u).child(t + 1).stream();
      const double r = s.next_unit();
      double acc = 0.0;
      int idx = static_cast<int>(alphabet.size()) - 1;
      for (Index a = 0; a < alphabet.size(); ++a) {
        acc += alphabet.priors()(a);
        if (r < acc) {
          idx = static_cast<int>(a);
          break;
        }
      }
      frame.symbol_index(u, t) = idx;
      frame.symbols(u, t) = alphabet.points()(idx);
    }
  }

  frame.received.resize(m, total);
  const double noise_scale = std::sqrt(spec.noise_variance);
  for (int t = 0; t < total; ++t) {
    RngStream s = key.child(kNoiseTag).child(t + 1).stream();
    const CVector n = standard_complex_gaussian(s, m);
    frame.received.col(t) =
        frame.channel[t] * frame.symbols.col(t) + noise_scale * n;
  }
  return frame;
}

}  // namespace mimovb
