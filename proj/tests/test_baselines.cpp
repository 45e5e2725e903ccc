#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "mimovb/baselines.hpp"
#include "mimovb/metrics.hpp"
#include "mimovb/vb_online.hpp"
#include "support/oracles.hpp"

using namespace mimovb;

namespace {

FrameSpec spec_of(int m, int k, int tp, int td, double eta, double n0,
                  CorrelationKind kind = CorrelationKind::kIdentityScaled) {
  FrameSpec spec;
  spec.antennas = m;
  spec.users = k;
  spec.sections = {{tp, td}};
  spec.constellation = Constellation::qpsk();
  spec.noise_variance = n0;
  spec.gauss_markov.eta = RVector::Constant(k, eta);
  CorrelationSpec corr;
  corr.kind = kind;
  corr.alpha = Complex(0.5, 0.5);
  corr.antennas = m;
  spec.gauss_markov.spatial.assign(k, make_correlation(corr));
  return spec;
}

}  // namespace

TEST_CASE("lmmse recovers a static channel noiselessly") {
  const FrameSpec spec = spec_of(4, 2, 4, 0, 1.0, 0.0);
  const ChannelFrame f = generate_frame(RngKey(900), spec);
  const LmmseEstimate est = lmmse_pilot_estimate(
      f.received, f.pilots, spec.gauss_markov.spatial, 0.0);
  for (int i = 0; i < 2; ++i) {
    CHECK((est.h_mean[i] - f.channel[0].col(i)).norm() <=
          1e-9 * f.channel[0].col(i).norm());
    CHECK(est.h_cov[i].trace() <= 1e-10);
  }
}

TEST_CASE("lmmse collapses to the prior under infinite noise") {
  const FrameSpec spec = spec_of(4, 2, 4, 0, 1.0, 0.0);
  const ChannelFrame f = generate_frame(RngKey(901), spec);
  const LmmseEstimate est = lmmse_pilot_estimate(
      f.received, f.pilots, spec.gauss_markov.spatial, 1e12);
  for (int i = 0; i < 2; ++i) {
    CHECK(est.h_mean[i].norm() <= 1e-6);
    CHECK((est.h_cov[i].matrix() - spec.gauss_markov.spatial[i].matrix())
              .cwiseAbs()
              .maxCoeff() <= 1e-6);
  }
}

TEST_CASE("lmmse matches the per-antenna scalar formula for diagonal R") {
  // M=2, K=1, T_p=2, diagonal spatial covariance.
  const Index m = 2;
  CMatrix r = CMatrix::Zero(m, m);
  r(0, 0) = 0.7;
  r(1, 1) = 0.3;
  const std::vector<HermitianCov> spatial{HermitianCov(r)};

  CMatrix pilots(1, 2);
  pilots << Complex(1, 0), Complex(-1, 0);
  CMatrix y(m, 2);
  y << Complex(0.4, 0.2), Complex(-0.5, 0.1), Complex(1.0, -0.3),
      Complex(-0.9, 0.4);
  const double n0 = 0.2;

  const LmmseEstimate est = lmmse_pilot_estimate(y, pilots, spatial, n0);
  const CVector corr = y * pilots.row(0).adjoint() / 2.0;
  for (Index a = 0; a < m; ++a) {
    const double ra = r(a, a).real();
    const Complex want = ra / (ra + n0 / 2.0) * corr(a);
    CHECK(std::abs(est.h_mean[0](a) - want) <= 1e-12);
    const double want_var = ra - ra * ra / (ra + n0 / 2.0);
    CHECK(std::abs(est.h_cov[0].matrix()(a, a).real() - want_var) <= 1e-12);
  }
}

TEST_CASE("lmmse rejects non-orthogonal pilots") {
  const std::vector<HermitianCov> spatial(2, HermitianCov::identity(2));
  const CMatrix pilots = CMatrix::Ones(2, 2);
  const CMatrix y = CMatrix::Zero(2, 2);
  CHECK_THROWS_AS(lmmse_pilot_estimate(y, pilots, spatial, 0.1), ConfigError);
}

TEST_CASE("lmmse posterior covariance never exceeds the prior") {
  const FrameSpec spec =
      spec_of(6, 2, 4, 0, 1.0, 0.0, CorrelationKind::kExponential);
  const ChannelFrame f = generate_frame(RngKey(902), spec);
  const LmmseEstimate est = lmmse_pilot_estimate(
      f.received, f.pilots, spec.gauss_markov.spatial, 0.3);
  for (int i = 0; i < 2; ++i) {
    Eigen::SelfAdjointEigenSolver<CMatrix> psd(est.h_cov[i].matrix());
    CHECK(psd.eigenvalues().minCoeff() >= -1e-8);
    Eigen::SelfAdjointEigenSolver<CMatrix> gap(
        spec.gauss_markov.spatial[i].matrix() - est.h_cov[i].matrix());
    CHECK(gap.eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("kalman tracker reproduces the batch estimate on static pilots") {
  const FrameSpec spec =
      spec_of(4, 2, 8, 0, 1.0, 0.0, CorrelationKind::kExponential);
  ChannelFrame f = generate_frame(RngKey(903), spec);
  // Add noise manually so the same frame feeds both estimators.
  const double n0 = 0.05;
  RngStream noise(904);
  for (int t = 0; t < f.total_len(); ++t) {
    f.received.col(t) += std::sqrt(n0) * standard_complex_gaussian(noise, 4);
  }
  const RVector eta = RVector::Constant(2, 1.0);
  const KalmanTrack track =
      kf_track(f, eta, spec.gauss_markov.spatial, n0, Constellation::qpsk());
  const LmmseEstimate batch = lmmse_pilot_estimate(
      f.received, f.pilots, spec.gauss_markov.spatial, n0);
  for (int i = 0; i < 2; ++i) {
    CHECK((track.h_est.back().col(i) - batch.h_mean[i]).norm() <=
          1e-6 * std::max(1.0, batch.h_mean[i].norm()));
  }
}

TEST_CASE("kalman tracker locks on under vanishing noise") {
  // One user: every pilot slot observes the full state, so the filter pins
  // the moving channel exactly as the noise vanishes.
  const FrameSpec spec = spec_of(4, 1, 8, 0, 0.99, 1e-12);
  const ChannelFrame f = generate_frame(RngKey(905), spec);
  RVector margin;
  const KalmanTrack track =
      kf_track(f, spec.gauss_markov.eta, spec.gauss_markov.spatial, 1e-12,
               Constellation::qpsk(), &margin);
  const int last = f.total_len() - 1;
  CHECK((track.h_est[last].col(0) - f.channel[last].col(0)).norm() <=
        1e-3 * f.channel[last].col(0).norm());
  CHECK(margin.minCoeff() >= -1e-8);
}

TEST_CASE("kalman covariance stays PSD in both data-slot modes") {
  const FrameSpec spec =
      spec_of(4, 2, 4, 20, 0.97, 0.1, CorrelationKind::kExponential);
  const ChannelFrame f = generate_frame(RngKey(906), spec);
  RVector margin;
  kf_track(f, spec.gauss_markov.eta, spec.gauss_markov.spatial, 0.1,
           Constellation::qpsk(), &margin);
  CHECK(margin.minCoeff() >= -1e-8);

  KfOptions dd;
  dd.decision_directed = true;
  RVector margin_dd;
  kf_track(f, spec.gauss_markov.eta, spec.gauss_markov.spatial, 0.1,
           Constellation::qpsk(), &margin_dd, dd);
  CHECK(margin_dd.minCoeff() >= -1e-8);
}

TEST_CASE("genie detector is exact on noiseless frames") {
  const FrameSpec spec = spec_of(4, 2, 2, 20, 0.97, 0.0);
  const ChannelFrame f = generate_frame(RngKey(907), spec);
  const Eigen::MatrixXi det = genie_detect(f, 0.0, Constellation::qpsk());
  const double ser = compute_ser(det, f.symbol_index, f.pilot_mask);
  CHECK(ser == 0.0);
}

TEST_CASE("genie detector reduces to matched-filter slicing for one user") {
  const FrameSpec spec = spec_of(4, 1, 1, 16, 0.97, 0.05);
  const ChannelFrame f = generate_frame(RngKey(908), spec);
  const Constellation qpsk = Constellation::qpsk();
  const Eigen::MatrixXi det = genie_detect(f, 0.05, qpsk);
  for (int t = 1; t < f.total_len(); ++t) {
    const CVector h = f.channel[t].col(0);
    const Complex z = h.dot(f.received.col(t)) / h.squaredNorm();
    CHECK(det(0, t) == qpsk.nearest(z));
  }
}

TEST_CASE("paired-seed ordering: genie <= online vb <= kalman on ser") {
  const int m = 8, k = 2, trials = 40;
  const double n0 = noise_variance_from_snr(10.0, m, k);
  const Constellation qpsk = Constellation::qpsk();
  long err_vb = 0, err_kf = 0, err_genie = 0;
  long symbols = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const FrameSpec spec =
        spec_of(m, k, 4, 32, 0.97, n0, CorrelationKind::kExponential);
    const ChannelFrame f = generate_frame(RngKey(9200 + trial), spec);

    FrameRunInput in;
    in.frame = &f;
    in.alphabet = &qpsk;
    in.spatial = spec.gauss_markov.spatial;
    in.options.iterations = 20;
    in.init_noise_var = n0;
    const auto slots = run_frame_online(in);
    const auto det_vb = frame_decisions(slots, f.pilot_mask);
    const KalmanTrack track =
        kf_track(f, spec.gauss_markov.eta, spec.gauss_markov.spatial, n0, qpsk);
    const Eigen::MatrixXi det_genie = genie_detect(f, n0, qpsk);

    for (int t = 0; t < f.total_len(); ++t) {
      if (f.pilot_mask[t]) continue;
      for (int i = 0; i < k; ++i) {
        ++symbols;
        err_vb += det_vb(i, t) != f.symbol_index(i, t);
        err_kf += track.detected(i, t) != f.symbol_index(i, t);
        err_genie += det_genie(i, t) != f.symbol_index(i, t);
      }
    }
  }
  CHECK(symbols > 0);
  CHECK(err_genie <= err_vb);
  CHECK(err_vb <= err_kf);
}
