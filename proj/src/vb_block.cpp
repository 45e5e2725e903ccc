#include "mimovb/vb_block.hpp"

#include <cmath>

#include "mimovb/baselines.hpp"
#include "mimovb/expectations.hpp"

namespace mimovb {
namespace {

struct SpectralPd {
  CMatrix basis;
  RVector values;       // eigenvalues of R, all > 0
  CMatrix inverse;      // dense R^{-1}
  double inv_trace = 0.0;

  static SpectralPd decompose(const HermitianCov& cov) {
    SpectralCov s = SpectralCov::decompose(cov);
    if (s.values.minCoeff() <= 0.0) {
      throw Singular("spatial covariance must be positive definite");
    }
    SpectralPd out;
    out.basis = s.basis;
    out.values = s.values;
    out.inverse = s.materialize(s.values.cwiseInverse());
    out.inv_trace = s.values.cwiseInverse().sum();
    return out;
  }

  // Spectrum of [c1 I + c2 R^{-1}]^{-1} in the R eigenbasis.
  RVector posterior_spectrum(double c1, double c2) const {
    return values.array() / (c1 * values.array() + c2);
  }
};

double quad_form(const CVector& a, const CMatrix& w, const CVector& b_vec) {
  return (a.adjoint() * w * b_vec)(0).real();
}

}  // namespace

GaussianStat update_channel_block(const CVector& y,
                                  std::span<const SlotUserView> users,
                                  int user, const CVector& h_prev,
                                  const CVector& h_next,
                                  const GammaStat& gamma,
                                  const ScalarGaussianStat& eta,
                                  const GammaStat& nu,
                                  const HermitianCov& spatial) {
  if (user < 0 || user >= static_cast<int>(users.size())) {
    throw DimMismatch("user index out of range");
  }
  const SpectralPd r = SpectralPd::decompose(spatial);
  const double g = gamma.mean();
  const double c1 = g * users[user].x_second;
  const double c2 = (1.0 + second_moment(eta)) * nu.mean();

  CVector res = y;
  for (int j = 0; j < static_cast<int>(users.size()); ++j) {
    if (j == user) continue;
    res -= users[j].h_mean * users[j].x_mean;
  }
  const CVector b = g * std::conj(users[user].x_mean) * res +
                    eta.mean * nu.mean() * (r.inverse * (h_next + h_prev));
  const RVector post = r.posterior_spectrum(c1, c2);
  const CVector mean = r.basis * post.asDiagonal() * (r.basis.adjoint() * b);
  return GaussianStat(
      mean, HermitianCov(r.basis * post.asDiagonal() * r.basis.adjoint()));
}

ScalarGaussianStat update_eta_block(std::span<const CVector> slot_means,
                                    const GammaStat& nu,
                                    const HermitianCov& spatial_inverse,
                                    const ScalarGaussianStat& prior,
                                    const ScalarGaussianStat& reset) {
  if (prior.var <= 0.0) {
    return prior;
  }
  if (slot_means.size() < 2) {
    throw DimMismatch("eta update needs the initial estimate plus T slots");
  }
  const CMatrix& w = spatial_inverse.matrix();
  double precision_sum = 0.0;
  double cross_sum = 0.0;
  for (std::size_t t = 1; t < slot_means.size(); ++t) {
    const CVector wm = w * slot_means[t - 1];
    precision_sum += slot_means[t - 1].dot(wm).real();
    cross_sum += wm.dot(slot_means[t]).real();
  }
  ScalarGaussianStat out;
  out.var = 1.0 / (nu.mean() * precision_sum + 1.0 / prior.var);
  out.mean = out.var * (nu.mean() * cross_sum + prior.mean / prior.var);
  return clamp_eta(out, reset);
}

GammaStat update_nu(std::span<const GaussianStat> slots,
                    const ScalarGaussianStat& eta, const HermitianCov& spatial,
                    double prior_shape, double prior_rate, NuRateForm form) {
  if (slots.empty()) {
    throw DimMismatch("nu update needs at least the initial estimate");
  }
  const int steps = static_cast<int>(slots.size()) - 1;
  if (steps == 0) {
    return GammaStat(prior_shape, prior_rate);
  }
  const Index m = slots[0].mean.size();
  const HermitianCov weight = hermitian_inverse(spatial);
  double rate = prior_rate;
  for (int t = 1; t <= steps; ++t) {
    switch (form) {
      case NuRateForm::kLemma:
        rate += expected_weighted_quadratic(slots[t], slots[t - 1], eta,
                                            weight);
        break;
      case NuRateForm::kPlugIn: {
        const CVector diff = slots[t].mean - eta.mean * slots[t - 1].mean;
        rate += (diff.adjoint() * weight.matrix() * diff)(0).real();
        break;
      }
      case NuRateForm::kTraceform:
        rate += expected_weighted_quadratic_traceform(slots[t], slots[t - 1],
                                                      eta, weight);
        break;
    }
  }
  return GammaStat(prior_shape + static_cast<double>(steps) * m, rate);
}

BlockPosterior run_block(const FrameRunInput& input, const BlockOptions& opt) {
  const ChannelFrame& frame = *input.frame;
  if (input.alphabet == nullptr) {
    throw ConfigError("block run needs a constellation");
  }
  const Constellation& alphabet = *input.alphabet;
  const int k = frame.users();
  const int m = frame.antennas();
  const int total = frame.total_len();
  if (static_cast<int>(input.spatial.size()) != k) {
    throw DimMismatch("spatial covariances must cover every user");
  }

  std::vector<SpectralPd> spectral;
  spectral.reserve(k);
  for (int i = 0; i < k; ++i) {
    spectral.push_back(SpectralPd::decompose(input.spatial[i]));
  }

  std::vector<ScalarGaussianStat> eta_prior = input.eta_prior;
  if (eta_prior.empty()) {
    eta_prior.assign(k, {input.priors.eta_mean, input.priors.eta_var});
  }

  // Warm start: one pass of the online strategy provides the initial slot
  // means; eta, nu, gamma and the symbols start from their priors.
  const std::vector<SlotEstimate> warm = run_frame_online(input);

  int leading_pilots = 0;
  while (leading_pilots < total && frame.pilot_mask[leading_pilots]) {
    ++leading_pilots;
  }
  const LmmseEstimate init = lmmse_pilot_estimate(
      frame.received.leftCols(leading_pilots),
      frame.pilots.leftCols(leading_pilots), input.spatial,
      input.init_noise_var);

  // Slot index 0 holds the fixed initial estimate; slots 1..T are inferred.
  std::vector<std::vector<CVector>> mean(k);
  std::vector<std::vector<double>> trace(k), rinv_trace(k);
  std::vector<std::vector<double>> coeff1(k), coeff2(k);
  for (int i = 0; i < k; ++i) {
    mean[i].resize(total + 1);
    trace[i].assign(total + 1, 0.0);
    rinv_trace[i].assign(total + 1, 0.0);
    coeff1[i].assign(total + 1, 0.0);
    coeff2[i].assign(total + 1, 0.0);
    mean[i][0] = init.h_mean[i];
    trace[i][0] = init.h_cov[i].trace();
    rinv_trace[i][0] =
        (spectral[i].inverse.cwiseProduct(init.h_cov[i].matrix().transpose()))
            .sum()
            .real();
    for (int t = 1; t <= total; ++t) {
      mean[i][t] = warm[t - 1].users[i].h_mean;
      trace[i][t] = warm[t - 1].users[i].h_cov.trace();
      rinv_trace[i][t] = (spectral[i].inverse.cwiseProduct(
                              warm[t - 1].users[i].h_cov.matrix().transpose()))
                             .sum()
                             .real();
    }
  }

  std::vector<ScalarGaussianStat> eta = eta_prior;
  std::vector<GammaStat> nu(
      k, GammaStat(input.priors.nu_shape, input.priors.nu_rate));
  std::vector<GammaStat> gamma(
      total, GammaStat(input.priors.gamma_shape, input.priors.gamma_rate));

  CMatrix x_mean(k, total);
  RMatrix x_second(k, total), x_var(k, total);
  std::vector<std::vector<SymbolPMF>> pmfs(
      k, std::vector<SymbolPMF>(total, SymbolPMF(alphabet.priors())));
  const SymbolPMF prior_pmf(alphabet.priors());
  const Complex prior_mean = pmf_mean(prior_pmf, alphabet);
  const double prior_second = pmf_second_moment(prior_pmf, alphabet);
  for (int t = 0; t < total; ++t) {
    for (int i = 0; i < k; ++i) {
      if (frame.pilot_mask[t]) {
        const Complex p = frame.pilots(i, frame.pilot_column(t));
        x_mean(i, t) = p;
        x_second(i, t) = std::norm(p);
        x_var(i, t) = 0.0;
      } else {
        x_mean(i, t) = prior_mean;
        x_second(i, t) = prior_second;
        x_var(i, t) = std::max(0.0, prior_second - std::norm(prior_mean));
      }
    }
  }

  int iterations_run = 0;
  std::vector<SlotUserView> views(k);
  for (int sweep = 0; sweep < opt.iterations; ++sweep) {
    // Channel pass over every slot, forward in time; neighbors use the
    // freshest available means.
    for (int t = 1; t <= total; ++t) {
      const CVector& y = frame.received.col(t - 1);
      for (int i = 0; i < k; ++i) {
        const double g = gamma[t - 1].mean();
        const double c1 = g * x_second(i, t - 1);
        const double c2 = (1.0 + second_moment(eta[i])) * nu[i].mean();

        CVector res = y;
        for (int j = 0; j < k; ++j) {
          if (j == i) continue;
          res -= mean[j][t] * x_mean(j, t - 1);
        }
        const CVector& h_prev = mean[i][t - 1];
        CVector h_next;
        if (t == total) {
          h_next = opt.literal_terminal_neighbor ? (eta[i].mean * mean[i][0])
                                                 : (eta[i].mean * mean[i][t]);
        } else {
          h_next = mean[i][t + 1];
        }
        const CVector b =
            g * std::conj(x_mean(i, t - 1)) * res +
            eta[i].mean * nu[i].mean() * (spectral[i].inverse * (h_next + h_prev));
        const RVector post = spectral[i].posterior_spectrum(c1, c2);
        mean[i][t] =
            spectral[i].basis * post.asDiagonal() * (spectral[i].basis.adjoint() * b);
        coeff1[i][t] = c1;
        coeff2[i][t] = c2;
        trace[i][t] = post.sum();
        rinv_trace[i][t] = (post.array() / spectral[i].values.array()).sum();
      }
    }

    // Eta pass.
    for (int i = 0; i < k; ++i) {
      if (eta_prior[i].var <= 0.0) continue;
      double precision_sum = 0.0;
      double cross_sum = 0.0;
      for (int t = 1; t <= total; ++t) {
        const CVector wm = spectral[i].inverse * mean[i][t - 1];
        precision_sum += mean[i][t - 1].dot(wm).real();
        cross_sum += wm.dot(mean[i][t]).real();
      }
      ScalarGaussianStat next;
      next.var = 1.0 / (nu[i].mean() * precision_sum + 1.0 / eta_prior[i].var);
      next.mean = next.var * (nu[i].mean() * cross_sum +
                              eta_prior[i].mean / eta_prior[i].var);
      eta[i] = clamp_eta(next, eta_prior[i]);
    }

    // Nu pass; the shape is re-anchored to the prior every sweep so it stays
    // exactly prior + T*M.
    for (int i = 0; i < k; ++i) {
      const double e2 = second_moment(eta[i]);
      double rate = input.priors.nu_rate;
      for (int t = 1; t <= total; ++t) {
        const CVector diff = mean[i][t] - eta[i].mean * mean[i][t - 1];
        switch (opt.nu_rate) {
          case NuRateForm::kPlugIn:
            rate += quad_form(diff, spectral[i].inverse, diff);
            break;
          case NuRateForm::kLemma:
            rate += e2 * rinv_trace[i][t - 1] +
                    quad_form(diff, spectral[i].inverse, diff) +
                    rinv_trace[i][t] +
                    eta[i].var *
                        quad_form(mean[i][t - 1], spectral[i].inverse,
                                  mean[i][t - 1]);
            break;
          case NuRateForm::kTraceform:
            rate += quad_form(diff, spectral[i].inverse, diff) +
                    rinv_trace[i][t] +
                    eta[i].var * spectral[i].inv_trace *
                        mean[i][t - 1].squaredNorm() +
                    eta[i].var * spectral[i].inv_trace * trace[i][t - 1] +
                    eta[i].mean * eta[i].mean * rinv_trace[i][t - 1];
            break;
        }
      }
      nu[i] = GammaStat(
          input.priors.nu_shape + static_cast<double>(total) * m, rate);
    }

    // Symbol and noise-precision pass per slot.
    for (int t = 1; t <= total; ++t) {
      const CVector& y = frame.received.col(t - 1);
      for (int i = 0; i < k; ++i) {
        views[i].h_mean = mean[i][t];
        views[i].h_trace = trace[i][t];
        views[i].x_mean = x_mean(i, t - 1);
        views[i].x_second = x_second(i, t - 1);
        views[i].x_var = x_var(i, t - 1);
      }
      if (!frame.pilot_mask[t - 1]) {
        for (int i = 0; i < k; ++i) {
          pmfs[i][t - 1] = update_symbol(y, views, gamma[t - 1], alphabet,
                                         alphabet.priors(), i);
          x_mean(i, t - 1) = pmf_mean(pmfs[i][t - 1], alphabet);
          x_second(i, t - 1) = pmf_second_moment(pmfs[i][t - 1], alphabet);
          x_var(i, t - 1) = pmf_variance(pmfs[i][t - 1], alphabet);
          views[i].x_mean = x_mean(i, t - 1);
          views[i].x_second = x_second(i, t - 1);
          views[i].x_var = x_var(i, t - 1);
        }
      }
      gamma[t - 1] = update_gamma(y, views, input.priors.gamma_shape,
                                  input.priors.gamma_rate);
    }
    ++iterations_run;
  }

  BlockPosterior out;
  out.iterations_run = iterations_run;
  out.eta = eta;
  out.nu = nu;
  out.gamma = gamma;
  out.symbols = pmfs;
  out.channel.resize(k);
  out.detected = Eigen::MatrixXi::Constant(k, total, -1);
  for (int i = 0; i < k; ++i) {
    out.channel[i].reserve(total);
    for (int t = 1; t <= total; ++t) {
      HermitianCov cov =
          iterations_run == 0
              ? warm[t - 1].users[i].h_cov
              : HermitianCov(spectral[i].basis *
                             spectral[i]
                                 .posterior_spectrum(coeff1[i][t], coeff2[i][t])
                                 .asDiagonal() *
                             spectral[i].basis.adjoint());
      out.channel[i].emplace_back(mean[i][t], std::move(cov));
      if (!frame.pilot_mask[t - 1]) {
        out.detected(i, t - 1) = pmfs[i][t - 1].argmax();
      }
    }
  }
  return out;
}

Eigen::MatrixXi block_decisions(const BlockPosterior& post) {
  return post.detected;
}

std::vector<CMatrix> block_channel_estimates(const BlockPosterior& post) {
  const int k = static_cast<int>(post.channel.size());
  std::vector<CMatrix> out;
  if (k == 0) return out;
  const int total = static_cast<int>(post.channel[0].size());
  const Index m = total > 0 ? post.channel[0][0].mean.size() : 0;
  out.reserve(total);
  for (int t = 0; t < total; ++t) {
    CMatrix h(m, k);
    for (int i = 0; i < k; ++i) h.col(i) = post.channel[i][t].mean;
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace mimovb
