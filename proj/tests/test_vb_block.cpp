#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "mimovb/metrics.hpp"
#include "mimovb/vb_block.hpp"
#include "support/oracles.hpp"

using namespace mimovb;

namespace {

FrameSpec block_spec(int m, int k, int tp, int td, double eta, double n0) {
  FrameSpec spec;
  spec.antennas = m;
  spec.users = k;
  spec.sections = {{tp, td}};
  spec.constellation = Constellation::qpsk();
  spec.noise_variance = n0;
  spec.gauss_markov.eta = RVector::Constant(k, eta);
  CorrelationSpec corr;
  corr.kind = CorrelationKind::kExponential;
  corr.alpha = Complex(0.5, 0.5);
  corr.antennas = m;
  spec.gauss_markov.spatial.assign(k, make_correlation(corr));
  return spec;
}

FrameRunInput frame_input(const ChannelFrame& f, const FrameSpec& spec,
                          const Constellation& alphabet, int iters) {
  FrameRunInput in;
  in.frame = &f;
  in.alphabet = &alphabet;
  in.spatial = spec.gauss_markov.spatial;
  in.options.iterations = iters;
  in.init_noise_var = f.noise_variance;
  return in;
}

}  // namespace

TEST_CASE("update_channel_block without temporal coupling is likelihood-only") {
  RngStream rng(1);
  const Index m = 4;
  std::vector<SlotUserView> views(1);
  views[0].h_mean = oracle::random_vector(rng, m);
  views[0].x_mean = Complex(1.0, 0.0);
  views[0].x_second = 1.0;
  const CVector y = oracle::random_vector(rng, m);
  const HermitianCov r = oracle::random_pd(rng, m);
  const GammaStat gamma(4.0, 1.0);
  const GaussianStat post = update_channel_block(
      y, views, 0, CVector::Ones(m), CVector::Ones(m), gamma,
      ScalarGaussianStat{0.9, 1e-3}, GammaStat(1e-300, 1.0), r);
  // Sigma -> I / (gamma E|x|^2), mean -> y x* / E|x|^2.
  CHECK((post.mean - y).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((post.cov.matrix() - 0.25 * CMatrix::Identity(m, m))
            .cwiseAbs()
            .maxCoeff() <= 1e-6);
}

TEST_CASE("update_channel_block pure smoothing interpolates the midpoint") {
  RngStream rng(2);
  const Index m = 3;
  std::vector<SlotUserView> views(1);
  views[0].h_mean = CVector::Zero(m);
  views[0].x_mean = Complex(0.0, 0.0);
  views[0].x_second = 1.0;
  const CVector prev = oracle::random_vector(rng, m);
  const CVector next = oracle::random_vector(rng, m);
  const HermitianCov r = oracle::random_pd(rng, m);
  const GaussianStat post = update_channel_block(
      CVector::Zero(m), views, 0, prev, next, GammaStat(1e-300, 1.0),
      ScalarGaussianStat{1.0, 0.0}, GammaStat(7.0, 1.0), r);
  const CVector midpoint = 0.5 * (prev + next);
  CHECK((post.mean - midpoint).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((post.cov.matrix() - r.matrix() / 14.0).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("update_channel_block matches the straight-line reference") {
  RngStream rng(3);
  for (int rep = 0; rep < 4; ++rep) {
    const Index m = 2 + rep % 2;
    const int k = 1 + rep % 2;
    std::vector<SlotUserView> views(k);
    oracle::BlockChannelRefIn ref;
    ref.h_means.resize(m, k);
    ref.x_mean.resize(k);
    ref.x_second.resize(k);
    for (int i = 0; i < k; ++i) {
      views[i].h_mean = oracle::random_vector(rng, m);
      views[i].x_mean = rng.next_cgaussian();
      views[i].x_second = std::norm(views[i].x_mean) + rng.next_unit();
      ref.h_means.col(i) = views[i].h_mean;
      ref.x_mean(i) = views[i].x_mean;
      ref.x_second(i) = views[i].x_second;
    }
    const int user = rep % k;
    const HermitianCov r = oracle::random_pd(rng, m, 0.4);
    ref.y = oracle::random_vector(rng, m);
    ref.h_prev = oracle::random_vector(rng, m);
    ref.h_next = oracle::random_vector(rng, m);
    ref.spatial = r.matrix();
    ref.gamma = 2.5;
    ref.eta_mean = 0.93;
    ref.eta_var = 4e-3;
    ref.nu = 11.0;
    ref.user = user;
    const auto [want_mean, want_cov] =
        oracle::block_channel_update_reference(ref);
    const GaussianStat got = update_channel_block(
        ref.y, views, user, ref.h_prev, ref.h_next, GammaStat(2.5, 1.0),
        ScalarGaussianStat{0.93, 4e-3}, GammaStat(11.0, 1.0), r);
    CHECK((got.mean - want_mean).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((got.cov.matrix() - want_cov).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("update_eta_block carries the prior with zero means") {
  const Index m = 3;
  std::vector<CVector> means(4, CVector::Zero(m));
  means[3] = CVector::Ones(m);  // h_T enters only through cross terms
  const ScalarGaussianStat prior{0.91, 3e-3};
  const ScalarGaussianStat out = update_eta_block(
      means, GammaStat(5.0, 1.0), HermitianCov::identity(m), prior, prior);
  CHECK(out.mean == doctest::Approx(0.91).epsilon(1e-12));
  CHECK(out.var == doctest::Approx(3e-3).epsilon(1e-12));
}

TEST_CASE("update_eta_block with one step matches the scalar recursion") {
  RngStream rng(4);
  const Index m = 4;
  const CVector h0 = oracle::random_vector(rng, m);
  const CVector h1 = oracle::random_vector(rng, m);
  const double nu = 9.0;
  const ScalarGaussianStat prior{0.95, 1e-3};
  const ScalarGaussianStat got =
      update_eta_block(std::vector<CVector>{h0, h1}, GammaStat(nu, 1.0),
                       HermitianCov::identity(m), prior, prior);
  const double prec = nu * h0.squaredNorm() + 1.0 / prior.var;
  const double want_var = 1.0 / prec;
  const double want_mean =
      want_var * (nu * h0.dot(h1).real() + prior.mean / prior.var);
  CHECK(got.var == doctest::Approx(want_var).epsilon(1e-12));
  CHECK(got.mean == doctest::Approx(want_mean).epsilon(1e-12));
}

TEST_CASE("update_eta_block matches the dense reference") {
  RngStream rng(5);
  const Index m = 3;
  const int steps = 5;
  std::vector<CVector> means;
  for (int t = 0; t <= steps; ++t) {
    means.push_back(oracle::random_vector(rng, m));
  }
  const HermitianCov r = oracle::random_pd(rng, m, 0.4);
  const HermitianCov r_inv = hermitian_inverse(r);
  const ScalarGaussianStat prior{0.9, 2e-3};
  const ScalarGaussianStat got = update_eta_block(
      means, GammaStat(3.0, 1.0), r_inv, prior, prior);
  const ScalarGaussianStat want =
      oracle::block_eta_update_reference(means, r.matrix(), 3.0, prior);
  CHECK(got.mean == doctest::Approx(want.mean).epsilon(1e-8));
  CHECK(got.var == doctest::Approx(want.var).epsilon(1e-8));
}

TEST_CASE("update_nu returns the prior without steps and grows by T*M") {
  RngStream rng(6);
  const Index m = 4;
  std::vector<GaussianStat> slots;
  slots.emplace_back(oracle::random_vector(rng, m), HermitianCov::zero(m));
  const GammaStat empty = update_nu(slots, ScalarGaussianStat{0.9, 1e-3},
                                    HermitianCov::identity(m), 1e-4, 1e-4);
  CHECK(empty.shape == 1e-4);
  CHECK(empty.rate == 1e-4);

  for (int t = 0; t < 3; ++t) {
    slots.emplace_back(oracle::random_vector(rng, m),
                       oracle::random_psd(rng, m, m));
  }
  const GammaStat grown = update_nu(slots, ScalarGaussianStat{0.9, 1e-3},
                                    HermitianCov::identity(m), 1e-4, 1e-4);
  CHECK(grown.shape == doctest::Approx(1e-4 + 3.0 * m).epsilon(1e-15));
}

TEST_CASE("update_nu frozen channel leaves the rate at the prior") {
  const Index m = 3;
  const CVector h = CVector::Ones(m);
  std::vector<GaussianStat> slots(5, GaussianStat(h, HermitianCov::zero(m)));
  const GammaStat out = update_nu(slots, ScalarGaussianStat{1.0, 0.0},
                                  HermitianCov::identity(m), 1e-4, 1e-4);
  CHECK(out.rate == doctest::Approx(1e-4).epsilon(1e-9));
  CHECK(out.shape == doctest::Approx(1e-4 + 4.0 * m).epsilon(1e-15));
  CHECK(out.mean() > 1e4);  // diverges as eta -> 1
}

TEST_CASE("update_nu recovers the innovation precision of a synthetic chain") {
  // With exact chain statistics the posterior mean approaches 1/(1 - eta^2).
  RngStream rng(7);
  const Index m = 8;
  const int steps = 200;
  const double eta = 0.985;
  CorrelationSpec corr;
  corr.kind = CorrelationKind::kExponential;
  corr.alpha = Complex(0.5, 0.5);
  corr.antennas = static_cast<int>(m);
  const HermitianCov r = make_correlation(corr);
  const CMatrix root = hermitian_sqrt(r);

  std::vector<GaussianStat> slots;
  CVector h = root * oracle::random_vector(rng, m);
  slots.emplace_back(h, HermitianCov::zero(m));
  const double innov = std::sqrt(1.0 - eta * eta);
  for (int t = 0; t < steps; ++t) {
    h = eta * h + innov * (root * oracle::random_vector(rng, m));
    slots.emplace_back(h, HermitianCov::zero(m));
  }
  const GammaStat nu = update_nu(slots, ScalarGaussianStat{eta, 0.0}, r,
                                 1e-4, 1e-4);
  const double target = 1.0 / (1.0 - eta * eta);
  CHECK(std::abs(nu.mean() / target - 1.0) <= 0.10);

  // With zero covariances the plug-in rate coincides with the full
  // expectation.
  const GammaStat plug = update_nu(slots, ScalarGaussianStat{eta, 0.0}, r,
                                   1e-4, 1e-4, NuRateForm::kPlugIn);
  CHECK(plug.rate == doctest::Approx(nu.rate).epsilon(1e-12));
}

TEST_CASE("run_block with zero sweeps returns the warm-start state") {
  const FrameSpec spec = block_spec(4, 2, 2, 6, 0.97, 0.05);
  const ChannelFrame f = generate_frame(RngKey(700), spec);
  const Constellation qpsk = Constellation::qpsk();
  FrameRunInput in = frame_input(f, spec, qpsk, 8);
  BlockOptions opt;
  opt.iterations = 0;

  const BlockPosterior post = run_block(in, opt);
  const auto warm = run_frame_online(in);
  CHECK(post.iterations_run == 0);
  for (int i = 0; i < 2; ++i) {
    CHECK(post.eta[i].mean == doctest::Approx(0.95));
    CHECK(post.nu[i].shape == 1e-4);
    for (int t = 0; t < f.total_len(); ++t) {
      CHECK((post.channel[i][t].mean - warm[t].users[i].h_mean)
                .cwiseAbs()
                .maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("run_block keeps the nu shape at prior plus T*M") {
  const FrameSpec spec = block_spec(4, 2, 2, 10, 0.985, 0.02);
  const ChannelFrame f = generate_frame(RngKey(701), spec);
  const Constellation qpsk = Constellation::qpsk();
  FrameRunInput in = frame_input(f, spec, qpsk, 10);
  BlockOptions opt;
  opt.iterations = 10;
  const BlockPosterior post = run_block(in, opt);
  for (int i = 0; i < 2; ++i) {
    CHECK(post.nu[i].shape ==
          doctest::Approx(1e-4 + 12.0 * 4.0).epsilon(1e-15));
  }
}

TEST_CASE("run_block posterior covariances are PSD and pmfs normalized") {
  const FrameSpec spec = block_spec(4, 2, 2, 8, 0.97, 0.05);
  const ChannelFrame f = generate_frame(RngKey(702), spec);
  const Constellation qpsk = Constellation::qpsk();
  FrameRunInput in = frame_input(f, spec, qpsk, 10);
  BlockOptions opt;
  opt.iterations = 10;
  const BlockPosterior post = run_block(in, opt);
  for (int i = 0; i < 2; ++i) {
    CHECK(post.eta[i].mean >= 0.0);
    CHECK(post.eta[i].mean <= 1.0);
    for (int t = 0; t < f.total_len(); ++t) {
      Eigen::SelfAdjointEigenSolver<CMatrix> es(
          post.channel[i][t].cov.matrix());
      CHECK(es.eigenvalues().minCoeff() >= -1e-10);
      if (!f.pilot_mask[t]) {
        CHECK(post.symbols[i][t].probs().sum() ==
              doctest::Approx(1.0).epsilon(1e-9));
        CHECK(post.detected(i, t) == post.symbols[i][t].argmax());
      }
    }
  }
}

TEST_CASE("run_block is deterministic") {
  const FrameSpec spec = block_spec(4, 2, 2, 6, 0.97, 0.05);
  const ChannelFrame f = generate_frame(RngKey(703), spec);
  const Constellation qpsk = Constellation::qpsk();
  FrameRunInput in = frame_input(f, spec, qpsk, 6);
  BlockOptions opt;
  opt.iterations = 6;
  const BlockPosterior a = run_block(in, opt);
  const BlockPosterior b = run_block(in, opt);
  for (int i = 0; i < 2; ++i) {
    for (int t = 0; t < f.total_len(); ++t) {
      CHECK((a.channel[i][t].mean - b.channel[i][t].mean)
                .cwiseAbs()
                .maxCoeff() == 0.0);
    }
  }
  CHECK(a.detected == b.detected);
}

TEST_CASE("pure smoothing lowers channel NMSE against the online pass") {
  // Pilot-only frames at 15 dB: the smoother sees every observation.
  const int m = 8, k = 2, trials = 100;
  const double n0 = noise_variance_from_snr(15.0, m, k);
  const Constellation qpsk = Constellation::qpsk();
  double online_ratio = 0.0;
  double block_ratio = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const FrameSpec spec = block_spec(m, k, 8, 0, 0.985, n0);
    const ChannelFrame f = generate_frame(RngKey(7100 + trial), spec);
    FrameRunInput in = frame_input(f, spec, qpsk, 15);
    const auto online = run_frame_online(in);
    BlockOptions opt;
    opt.iterations = 15;
    const BlockPosterior block = run_block(in, opt);

    const std::vector<CMatrix> truth(f.channel.begin(), f.channel.end());
    const auto est_online = frame_channel_estimates(online);
    const auto est_block = block_channel_estimates(block);
    double num = 0.0, den = 0.0;
    for (int t = 0; t < f.total_len(); ++t) {
      num += (truth[t] - est_online[t]).squaredNorm();
      den += truth[t].squaredNorm();
    }
    online_ratio += num / den;
    num = 0.0;
    for (int t = 0; t < f.total_len(); ++t) {
      num += (truth[t] - est_block[t]).squaredNorm();
    }
    block_ratio += num / den;
  }
  CHECK(block_ratio <= online_ratio);
}

TEST_CASE("terminal-neighbor and rate-form variants stay finite") {
  const FrameSpec spec = block_spec(4, 2, 2, 6, 0.97, 0.05);
  const ChannelFrame f = generate_frame(RngKey(704), spec);
  const Constellation qpsk = Constellation::qpsk();
  FrameRunInput in = frame_input(f, spec, qpsk, 6);

  BlockOptions literal;
  literal.iterations = 6;
  literal.literal_terminal_neighbor = true;
  const BlockPosterior a = run_block(in, literal);

  BlockOptions traceform;
  traceform.iterations = 6;
  traceform.nu_rate = NuRateForm::kTraceform;
  const BlockPosterior b = run_block(in, traceform);
  BlockOptions lemma;
  lemma.iterations = 6;
  lemma.nu_rate = NuRateForm::kLemma;
  const BlockPosterior c = run_block(in, lemma);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::isfinite(c.nu[i].mean()));
  }

  for (int i = 0; i < 2; ++i) {
    CHECK(std::isfinite(a.nu[i].mean()));
    CHECK(std::isfinite(b.nu[i].mean()));
    CHECK(a.eta[i].mean >= 0.0);
    CHECK(b.eta[i].mean <= 1.0);
  }
}
