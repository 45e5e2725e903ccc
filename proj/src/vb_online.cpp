#include "mimovb/vb_online.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "mimovb/baselines.hpp"

namespace mimovb {
namespace {

constexpr double kRidgeScale = 1e-10;
constexpr double kSingularRel = 1e-12;

// Posterior spectrum for a scalar likelihood precision c on top of prior
// eigenvalues lam: 1 / (c + 1/lam) written as lam / (c lam + 1).
RVector posterior_spectrum(const RVector& lam, double c) {
  return lam.array() / (c * lam.array() + 1.0);
}

CVector interference_free(const CVector& y,
                          std::span<const SlotUserView> users, int self) {
  CVector r = y;
  for (int j = 0; j < static_cast<int>(users.size()); ++j) {
    if (j == self) continue;
    r -= users[j].h_mean * users[j].x_mean;
  }
  return r;
}

struct ChannelUpdate {
  CVector mean;
  double coeff;  // gamma E|x|^2, defines the posterior spectrum
};

ChannelUpdate channel_update_core(const CVector& y,
                                  std::span<const SlotUserView> users,
                                  const GammaStat& gamma,
                                  const ChannelPrior& prior,
                                  const ScalarGaussianStat& eta, int user) {
  if (!prior.invertible) {
    throw Singular("predicted channel covariance is singular");
  }
  const double g = gamma.mean();
  const double c = g * users[user].x_second;
  const CVector r = interference_free(y, users, user);
  const CVector b =
      g * std::conj(users[user].x_mean) * r + eta.mean * prior.info_vector;
  const RVector post = posterior_spectrum(prior.variances, c);
  const CVector mean =
      prior.basis * post.asDiagonal() * (prior.basis.adjoint() * b);
  return {mean, c};
}

}  // namespace

HermitianCov ChannelPrior::cov() const {
  return HermitianCov(basis * variances.asDiagonal() * basis.adjoint());
}

ChannelPrior predict_prior(const UserPosterior& prev,
                           const HermitianCov& spatial, bool exact_eta) {
  if (prev.h_mean.size() != spatial.dim() ||
      prev.h_cov.dim() != spatial.dim()) {
    throw DimMismatch("posterior and spatial covariance dimensions disagree");
  }
  const double e2 = exact_eta ? prev.eta.mean * prev.eta.mean
                              : second_moment(prev.eta);
  CMatrix blend =
      e2 * prev.h_cov.matrix() + (1.0 - e2) * spatial.matrix();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(blend);
  if (es.info() != Eigen::Success) {
    throw Error("prediction eigendecomposition failed");
  }

  ChannelPrior out;
  out.prev_mean = prev.h_mean;
  out.mean = prev.eta.mean * prev.h_mean;
  out.basis = es.eigenvectors();
  out.variances = es.eigenvalues().cwiseMax(0.0);

  const double tr = out.variances.sum();
  if (tr > 0.0 && out.variances.minCoeff() < kSingularRel * tr) {
    out.variances.array() += kRidgeScale * tr / spatial.dim();
  }
  out.invertible = tr > 0.0 && out.variances.minCoeff() > 0.0;
  if (out.invertible) {
    out.info_vector = out.basis * out.variances.cwiseInverse().asDiagonal() *
                      (out.basis.adjoint() * prev.h_mean);
    out.prev_quadratic =
        std::max(0.0, prev.h_mean.dot(out.info_vector).real());
  } else {
    out.info_vector = CVector::Zero(spatial.dim());
    out.prev_quadratic = 0.0;
  }
  return out;
}

ScalarGaussianStat clamp_eta(const ScalarGaussianStat& eta,
                             const ScalarGaussianStat& reset) {
  if (!(eta.mean >= 0.0 && eta.mean <= 1.0)) {
    return reset;
  }
  return eta;
}

GaussianStat update_channel(const CVector& y,
                            std::span<const SlotUserView> users,
                            const GammaStat& gamma, const ChannelPrior& prior,
                            const ScalarGaussianStat& eta, int user) {
  if (user < 0 || user >= static_cast<int>(users.size())) {
    throw DimMismatch("user index out of range");
  }
  const ChannelUpdate up =
      channel_update_core(y, users, gamma, prior, eta, user);
  const RVector post = posterior_spectrum(prior.variances, up.coeff);
  return GaussianStat(
      up.mean,
      HermitianCov(prior.basis * post.asDiagonal() * prior.basis.adjoint()));
}

ScalarGaussianStat update_eta(const ChannelPrior& prior, const CVector& h_mean,
                              const ScalarGaussianStat& eta_prev,
                              const ScalarGaussianStat& reset) {
  if (eta_prev.var <= 0.0) {
    return eta_prev;  // degenerate prior pins eta
  }
  if (!prior.invertible) {
    throw Singular("predicted channel covariance is singular");
  }
  const double precision = prior.prev_quadratic + 1.0 / eta_prev.var;
  ScalarGaussianStat out;
  out.var = 1.0 / precision;
  out.mean = out.var * (prior.info_vector.dot(h_mean).real() +
                        eta_prev.mean / eta_prev.var);
  return clamp_eta(out, reset);
}

SymbolPMF update_symbol(const CVector& y, std::span<const SlotUserView> users,
                        const GammaStat& gamma, const Constellation& alphabet,
                        const RVector& prior_probs, int user) {
  if (prior_probs.size() != alphabet.size()) {
    throw DimMismatch("symbol prior does not match the constellation");
  }
  const SlotUserView& self = users[user];
  const double hsq = self.h_mean.squaredNorm() + self.h_trace;
  if (hsq <= 1e-30) {
    throw DegenerateChannel("vanishing channel second moment");
  }
  const CVector r = interference_free(y, users, user);
  const Complex z = self.h_mean.dot(r) / hsq;
  const double scale = gamma.mean() * hsq;

  RVector logw(alphabet.size());
  for (Index a = 0; a < alphabet.size(); ++a) {
    if (prior_probs(a) > 0.0) {
      logw(a) =
          std::log(prior_probs(a)) - scale * std::norm(alphabet.points()(a) - z);
    } else {
      logw(a) = -std::numeric_limits<double>::infinity();
    }
  }
  return SymbolPMF::from_log_weights(logw);
}

GammaStat update_gamma(const CVector& y, std::span<const SlotUserView> users,
                       double prior_shape, double prior_rate) {
  const int k = static_cast<int>(users.size());
  CMatrix means(y.size(), k);
  RVector traces(k);
  CVector x_mean(k);
  RVector x_var(k);
  for (int i = 0; i < k; ++i) {
    means.col(i) = users[i].h_mean;
    traces(i) = users[i].h_trace;
    x_mean(i) = users[i].x_mean;
    x_var(i) = std::max(0.0, users[i].x_second - std::norm(users[i].x_mean));
  }
  const double residual = residual_sq_kernel(y, means, traces, x_mean, x_var);
  return GammaStat(prior_shape + y.size(), prior_rate + residual);
}

SlotEstimate run_slot(const CVector& y, std::span<const UserPosterior> prev,
                      const SlotContext& ctx) {
  const int k = static_cast<int>(prev.size());
  if (ctx.alphabet == nullptr) throw ConfigError("slot needs a constellation");
  if (static_cast<int>(ctx.spatial.size()) != k ||
      static_cast<int>(ctx.eta_reset.size()) != k) {
    throw DimMismatch("slot context does not cover every user");
  }
  if (ctx.pilot_slot && ctx.pilot.size() != k) {
    throw DimMismatch("pilot symbols missing");
  }

  const Constellation& alphabet = *ctx.alphabet;
  std::vector<ChannelPrior> priors(k);
  std::vector<SlotUserView> views(k);
  std::vector<ScalarGaussianStat> eta(k);
  std::vector<SymbolPMF> pmfs(k, SymbolPMF(alphabet.priors()));
  std::vector<double> coeff(k, 0.0);

  for (int i = 0; i < k; ++i) {
    priors[i] =
        predict_prior(prev[i], ctx.spatial[i], ctx.options.exact_eta_prediction);
    views[i].h_mean = priors[i].mean;
    views[i].h_trace = priors[i].trace();
    eta[i] = prev[i].eta;
    if (ctx.pilot_slot) {
      views[i].x_mean = ctx.pilot(i);
      views[i].x_second = std::norm(ctx.pilot(i));
      views[i].x_var = 0.0;
    } else {
      views[i].x_mean = pmf_mean(pmfs[i], alphabet);
      views[i].x_second = pmf_second_moment(pmfs[i], alphabet);
      views[i].x_var = pmf_variance(pmfs[i], alphabet);
    }
  }
  GammaStat gamma(ctx.priors.gamma_shape, ctx.priors.gamma_rate);

  int iters = 0;
  for (int it = 0; it < ctx.options.iterations; ++it) {
    double max_change = 0.0;
    for (int i = 0; i < k; ++i) {
      const ChannelUpdate up =
          channel_update_core(y, views, gamma, priors[i], eta[i], i);
      if (ctx.options.convergence_tol > 0.0) {
        max_change = std::max(
            max_change, (up.mean - views[i].h_mean).cwiseAbs().maxCoeff());
      }
      views[i].h_mean = up.mean;
      coeff[i] = up.coeff;
      views[i].h_trace = posterior_spectrum(priors[i].variances, up.coeff).sum();
    }
    for (int i = 0; i < k; ++i) {
      eta[i] = update_eta(priors[i], views[i].h_mean, prev[i].eta,
                          ctx.eta_reset[i]);
    }
    if (!ctx.pilot_slot) {
      for (int i = 0; i < k; ++i) {
        pmfs[i] = update_symbol(y, views, gamma, alphabet, alphabet.priors(), i);
        views[i].x_mean = pmf_mean(pmfs[i], alphabet);
        views[i].x_second = pmf_second_moment(pmfs[i], alphabet);
        views[i].x_var = pmf_variance(pmfs[i], alphabet);
      }
    }
    gamma = update_gamma(y, views, ctx.priors.gamma_shape,
                         ctx.priors.gamma_rate);
    ++iters;
    if (ctx.options.convergence_tol > 0.0 &&
        max_change < ctx.options.convergence_tol) {
      break;
    }
  }

  SlotEstimate out;
  out.users.resize(k);
  out.detected.resize(k);
  out.gamma = gamma;
  out.iterations_run = iters;
  for (int i = 0; i < k; ++i) {
    const RVector post = posterior_spectrum(priors[i].variances, coeff[i]);
    out.users[i].h_mean = views[i].h_mean;
    out.users[i].h_cov = HermitianCov(
        priors[i].basis * post.asDiagonal() * priors[i].basis.adjoint());
    out.users[i].eta = eta[i];
    out.users[i].symbol = pmfs[i];
    out.detected[i] = pmfs[i].argmax();
  }
  return out;
}

std::vector<SlotEstimate> run_frame_online(const FrameRunInput& input) {
  const ChannelFrame& frame = *input.frame;
  if (input.alphabet == nullptr) {
    throw ConfigError("frame run needs a constellation");
  }
  const int k = frame.users();
  const int total = frame.total_len();
  if (static_cast<int>(input.spatial.size()) != k) {
    throw DimMismatch("spatial covariances must cover every user");
  }

  int leading_pilots = 0;
  while (leading_pilots < total && frame.pilot_mask[leading_pilots]) {
    ++leading_pilots;
  }
  if (leading_pilots < k) {
    throw ConfigError("frame must open with a pilot block of at least K slots");
  }

  std::vector<ScalarGaussianStat> eta0 = input.eta_prior;
  if (eta0.empty()) {
    eta0.assign(k, {input.priors.eta_mean, input.priors.eta_var});
  }
  if (static_cast<int>(eta0.size()) != k) {
    throw DimMismatch("eta prior must cover every user");
  }

  const LmmseEstimate init = lmmse_pilot_estimate(
      frame.received.leftCols(leading_pilots),
      frame.pilots.leftCols(leading_pilots), input.spatial,
      input.init_noise_var);

  std::vector<UserPosterior> prev(k);
  for (int i = 0; i < k; ++i) {
    prev[i].h_mean = init.h_mean[i];
    prev[i].h_cov = init.h_cov[i];
    prev[i].eta = eta0[i];
    prev[i].symbol = SymbolPMF(input.alphabet->priors());
  }
  std::vector<SlotEstimate> out;
  out.reserve(total);
  SlotContext ctx;
  ctx.alphabet = input.alphabet;
  ctx.spatial = input.spatial;
  ctx.eta_reset = eta0;
  ctx.priors = input.priors;
  ctx.options = input.options;
  for (int t = 0; t < total; ++t) {
    ctx.pilot_slot = frame.pilot_mask[t] != 0;
    if (ctx.pilot_slot) {
      ctx.pilot = frame.pilots.col(frame.pilot_column(t));
    }
    SlotEstimate est = run_slot(frame.received.col(t), prev, ctx);
    prev = est.users;
    out.push_back(std::move(est));
  }
  return out;
}

std::vector<SlotEstimate> run_frame_interleaved(
    const FrameRunInput& input, std::span<const SectionPlan> sections) {
  const ChannelFrame& frame = *input.frame;
  int pilot_sum = 0;
  int data_sum = 0;
  for (const auto& s : sections) {
    pilot_sum += s.pilot_len;
    data_sum += s.data_len;
  }
  if (pilot_sum != frame.pilot_len() ||
      pilot_sum + data_sum != frame.total_len()) {
    throw ConfigError("section lengths do not sum to the frame layout");
  }
  // The mask must follow the section layout exactly.
  int slot = 0;
  for (const auto& s : sections) {
    for (int p = 0; p < s.pilot_len; ++p) {
      if (!frame.pilot_mask[slot++]) {
        throw ConfigError("frame mask does not match the section plan");
      }
    }
    for (int d = 0; d < s.data_len; ++d) {
      if (frame.pilot_mask[slot++]) {
        throw ConfigError("frame mask does not match the section plan");
      }
    }
  }
  return run_frame_online(input);
}

Eigen::MatrixXi frame_decisions(std::span<const SlotEstimate> slots,
                                std::span<const std::uint8_t> pilot_mask) {
  if (slots.empty()) return Eigen::MatrixXi();
  const int k = static_cast<int>(slots[0].users.size());
  const int total = static_cast<int>(slots.size());
  Eigen::MatrixXi out = Eigen::MatrixXi::Constant(k, total, -1);
  for (int t = 0; t < total; ++t) {
    if (t < static_cast<int>(pilot_mask.size()) && pilot_mask[t]) continue;
    for (int i = 0; i < k; ++i) out(i, t) = slots[t].detected[i];
  }
  return out;
}

std::vector<CMatrix> frame_channel_estimates(
    std::span<const SlotEstimate> slots) {
  std::vector<CMatrix> out;
  out.reserve(slots.size());
  for (const auto& s : slots) {
    const int k = static_cast<int>(s.users.size());
    const Index m = k > 0 ? s.users[0].h_mean.size() : 0;
    CMatrix h(m, k);
    for (int i = 0; i < k; ++i) h.col(i) = s.users[i].h_mean;
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace mimovb
