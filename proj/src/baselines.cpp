#include "mimovb/baselines.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace mimovb {
namespace {

void check_pilot_orthogonality(const CMatrix& pilots) {
  const Index p = pilots.cols();
  const CMatrix gram = pilots * pilots.adjoint();
  const CMatrix target =
      static_cast<double>(p) * CMatrix::Identity(pilots.rows(), pilots.rows());
  if ((gram - target).cwiseAbs().maxCoeff() > 1e-9 * static_cast<double>(p)) {
    throw ConfigError("pilot rows must be orthogonal with unit power");
  }
}

// Joint linear MMSE equalizer for one slot: (H^H H + N0 I)^{-1} H^H y.
CVector mmse_equalize(const CMatrix& h, const CVector& y, double noise_var) {
  const CMatrix gram =
      h.adjoint() * h + noise_var * CMatrix::Identity(h.cols(), h.cols());
  return gram.ldlt().solve(h.adjoint() * y);
}

void map_enumerate(const CMatrix& h, const CVector& y,
                   const Constellation& alphabet, double noise_var,
                   Eigen::Ref<Eigen::VectorXi> out) {
  const int k = static_cast<int>(h.cols());
  const Index s = alphabet.size();
  // Log-prior term matters only for non-uniform priors; the residual is
  // scaled by the noise precision.
  const double precision =
      1.0 / std::max(noise_var, std::numeric_limits<double>::min());
  RVector neg_log_prior(s);
  for (Index a = 0; a < s; ++a) {
    neg_log_prior(a) = alphabet.priors()(a) > 0.0
                           ? -std::log(alphabet.priors()(a))
                           : std::numeric_limits<double>::infinity();
  }

  std::vector<CVector> partial(k + 1, CVector(h.rows()));
  partial[0] = y;
  Eigen::VectorXi pick = Eigen::VectorXi::Zero(k);
  Eigen::VectorXi best = Eigen::VectorXi::Zero(k);
  double best_score = std::numeric_limits<double>::infinity();
  double prior_acc = 0.0;

  // Depth-first sweep over the alphabet^K grid with incremental residuals.
  int depth = 0;
  std::vector<Index> idx(k, 0);
  std::vector<double> prior_stack(k + 1, 0.0);
  while (depth >= 0) {
    if (depth == k) {
      const double score =
          precision * partial[k].squaredNorm() + prior_acc;
      if (score < best_score) {
        best_score = score;
        best = pick;
      }
      --depth;
      continue;
    }
    if (idx[depth] == s) {
      idx[depth] = 0;
      --depth;
      if (depth >= 0) prior_acc = prior_stack[depth];
      continue;
    }
    const Index a = idx[depth]++;
    pick(depth) = static_cast<int>(a);
    prior_stack[depth] = prior_acc;
    partial[depth + 1] = partial[depth] - h.col(depth) * alphabet.points()(a);
    prior_acc = prior_stack[depth] + neg_log_prior(a);
    ++depth;
  }
  out = best;
}

}  // namespace

LmmseEstimate lmmse_pilot_estimate(const CMatrix& received_pilot,
                                   const CMatrix& pilots,
                                   std::span<const HermitianCov> spatial,
                                   double noise_var) {
  const int users = static_cast<int>(pilots.rows());
  const Index p = pilots.cols();
  if (received_pilot.cols() != p) {
    throw DimMismatch("pilot block and received block lengths disagree");
  }
  if (static_cast<int>(spatial.size()) != users) {
    throw DimMismatch("spatial covariances must cover every user");
  }
  if (noise_var < 0.0) throw ConfigError("negative noise variance");
  check_pilot_orthogonality(pilots);

  LmmseEstimate out;
  out.h_mean.reserve(users);
  out.h_cov.reserve(users);
  for (int i = 0; i < users; ++i) {
    const CMatrix& r = spatial[i].matrix();
    const Index m = r.rows();
    const CVector correlated =
        received_pilot * pilots.row(i).adjoint() / static_cast<double>(p);
    const CMatrix gram =
        r + (noise_var / static_cast<double>(p)) * CMatrix::Identity(m, m);
    Eigen::LDLT<CMatrix> solver(gram);
    if (solver.info() != Eigen::Success) {
      throw Singular("pilot correlation matrix not invertible");
    }
    out.h_mean.push_back(r * solver.solve(correlated));
    CMatrix cov = r - r * solver.solve(r);
    out.h_cov.emplace_back(0.5 * (cov + cov.adjoint().eval()));
  }
  return out;
}

KalmanTrack kf_track(const ChannelFrame& frame, const RVector& eta,
                     std::span<const HermitianCov> spatial, double noise_var,
                     const Constellation& alphabet, RVector* cov_margin,
                     const KfOptions& options) {
  const int m = frame.antennas();
  const int k = frame.users();
  const int total = frame.total_len();
  if (eta.size() != k || static_cast<int>(spatial.size()) != k) {
    throw DimMismatch("tracker parameters must cover every user");
  }
  const Index n = static_cast<Index>(m) * k;

  CVector state = CVector::Zero(n);
  CMatrix cov = CMatrix::Zero(n, n);
  for (int i = 0; i < k; ++i) {
    cov.block(i * m, i * m, m, m) = spatial[i].matrix();
  }

  KalmanTrack out;
  out.h_est.reserve(total);
  out.detected = Eigen::MatrixXi::Constant(k, total, -1);
  if (cov_margin != nullptr) cov_margin->resize(total);

  CVector x(k);
  for (int t = 0; t < total; ++t) {
    // Predict through the Gauss-Markov transition.
    for (int i = 0; i < k; ++i) {
      state.segment(i * m, m) *= eta(i);
    }
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        cov.block(i * m, j * m, m, m) *= eta(i) * eta(j);
      }
      cov.block(i * m, i * m, m, m) +=
          (1.0 - eta(i) * eta(i)) * spatial[i].matrix();
    }

    const CVector& y = frame.received.col(t);
    bool update_state = true;
    if (frame.pilot_mask[t]) {
      x = frame.pilots.col(frame.pilot_column(t));
    } else {
      CMatrix h_pred(m, k);
      for (int i = 0; i < k; ++i) h_pred.col(i) = state.segment(i * m, m);
      const CVector eq = mmse_equalize(h_pred, y, noise_var);
      for (int i = 0; i < k; ++i) {
        const int a = alphabet.nearest(eq(i));
        out.detected(i, t) = a;
        x(i) = alphabet.points()(a);
      }
      update_state = options.decision_directed;
    }

    if (!update_state) {
      if (cov_margin != nullptr) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(cov);
        (*cov_margin)(t) = es.eigenvalues().minCoeff();
      }
      CMatrix h_pred(m, k);
      for (int i = 0; i < k; ++i) h_pred.col(i) = state.segment(i * m, m);
      out.h_est.push_back(std::move(h_pred));
      continue;
    }

    // Update with the (known or decided) symbols.
    CVector innovation = y;
    for (int i = 0; i < k; ++i) {
      innovation -= x(i) * state.segment(i * m, m);
    }
    CMatrix cov_at = CMatrix::Zero(n, m);  // P A^H
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        cov_at.block(i * m, 0, m, m) +=
            cov.block(i * m, j * m, m, m) * std::conj(x(j));
      }
    }
    CMatrix s = noise_var * CMatrix::Identity(m, m);
    for (int i = 0; i < k; ++i) {
      s += x(i) * cov_at.block(i * m, 0, m, m);
    }
    s = 0.5 * (s + s.adjoint().eval());
    const CMatrix gain = s.ldlt().solve(cov_at.adjoint()).adjoint();
    state += gain * innovation;
    cov -= gain * cov_at.adjoint();
    cov = 0.5 * (cov + cov.adjoint().eval());

    if (cov_margin != nullptr) {
      Eigen::SelfAdjointEigenSolver<CMatrix> es(cov);
      (*cov_margin)(t) = es.eigenvalues().minCoeff();
    }
    CMatrix h_filt(m, k);
    for (int i = 0; i < k; ++i) h_filt.col(i) = state.segment(i * m, m);
    out.h_est.push_back(std::move(h_filt));
  }
  return out;
}

Eigen::MatrixXi genie_detect(const ChannelFrame& frame, double noise_var,
                             const Constellation& alphabet) {
  const int k = frame.users();
  const int total = frame.total_len();
  Eigen::MatrixXi out = Eigen::MatrixXi::Constant(k, total, -1);

  double combos = 1.0;
  for (int i = 0; i < k; ++i) combos *= static_cast<double>(alphabet.size());
  const bool enumerate = combos <= 4096.0;

  for (int t = 0; t < total; ++t) {
    if (frame.pilot_mask[t]) continue;
    const CMatrix& h = frame.channel[t];
    const CVector& y = frame.received.col(t);
    if (enumerate) {
      Eigen::VectorXi best(k);
      map_enumerate(h, y, alphabet, noise_var, best);
      out.col(t) = best;
    } else {
      const CVector eq = mmse_equalize(h, y, noise_var);
      for (int i = 0; i < k; ++i) out(i, t) = alphabet.nearest(eq(i));
    }
  }
  return out;
}

Eigen::MatrixXi mmse_nearest_detect(const ChannelFrame& frame,
                                    std::span<const CMatrix> h_per_slot,
                                    double noise_var,
                                    const Constellation& alphabet) {
  const int k = frame.users();
  const int total = frame.total_len();
  if (static_cast<int>(h_per_slot.size()) != total) {
    throw DimMismatch("need one channel estimate per slot");
  }
  Eigen::MatrixXi out = Eigen::MatrixXi::Constant(k, total, -1);
  for (int t = 0; t < total; ++t) {
    if (frame.pilot_mask[t]) continue;
    const CVector eq =
        mmse_equalize(h_per_slot[t], frame.received.col(t), noise_var);
    for (int i = 0; i < k; ++i) out(i, t) = alphabet.nearest(eq(i));
  }
  return out;
}

}  // namespace mimovb
