#include "shmm/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace shmm {

namespace {

int wrap_phase(int t, int T) { return phase_of(t, T); }

}  // namespace

Eigen::MatrixXd feature_matrix(const EmissionFamily& family, int t,
                               const FeatureMap& features) {
  const int N = features.size();
  const int K = family.states();
  Eigen::MatrixXd O(N, K);
  for (int a = 0; a < N; ++a)
    for (int k = 0; k < K; ++k) O(a, k) = family.integrate_feature(k, t, features[a]);
  return O;
}

MomentSet population_moments(const SeasonalHMM& model, int t, const FeatureMap& features) {
  const int T = model.dims().T;
  const int tc = wrap_phase(t, T);
  const int tp = wrap_phase(t - 1, T);
  const int tn = wrap_phase(t + 1, T);

  const Eigen::MatrixXd O_prev = feature_matrix(model.emissions(), tp, features);
  const Eigen::MatrixXd O_cur = feature_matrix(model.emissions(), tc, features);
  const Eigen::MatrixXd O_next = feature_matrix(model.emissions(), tn, features);

  const std::vector<Eigen::VectorXd> marginals = model.transition().phase_marginals();
  const Eigen::VectorXd& pi_prev = marginals[tp - 1];
  const Eigen::VectorXd& pi_cur = marginals[tc - 1];
  const Eigen::VectorXd& pi_next = marginals[tn - 1];

  const Eigen::MatrixXd Q_prev = model.transition().matrix(tp);
  const Eigen::MatrixXd Q_cur = model.transition().matrix(tc);

  MomentSet ms;
  ms.t = tc;
  ms.L_prev = O_prev * pi_prev;
  ms.L = O_cur * pi_cur;
  ms.L_next = O_next * pi_next;
  ms.Nmat = O_cur * pi_cur.asDiagonal() * Q_cur * O_next.transpose();
  const Eigen::MatrixXd front = O_prev * pi_prev.asDiagonal() * Q_prev;
  ms.P = front * Q_cur * O_next.transpose();
  const int N = features.size();
  ms.M.resize(N);
  for (int b = 0; b < N; ++b)
    ms.M[b] = front * O_cur.row(b).transpose().asDiagonal() * Q_cur * O_next.transpose();
  return ms;
}

MomentSet empirical_moments(std::span<const std::array<double, 3>> windows,
                            const FeatureMap& features, int t, int min_windows) {
  const int W = static_cast<int>(windows.size());
  if (W < min_windows)
    throw DataError("empirical_moments: " + std::to_string(W) + " windows at phase " +
                    std::to_string(t) + ", need at least " + std::to_string(min_windows));
  const int N = features.size();

  MomentSet ms;
  ms.t = t;
  ms.L_prev = Eigen::VectorXd::Zero(N);
  ms.L = Eigen::VectorXd::Zero(N);
  ms.L_next = Eigen::VectorXd::Zero(N);
  ms.Nmat = Eigen::MatrixXd::Zero(N, N);
  ms.P = Eigen::MatrixXd::Zero(N, N);
  ms.M.assign(N, Eigen::MatrixXd::Zero(N, N));

  for (const auto& w : windows) {
    const Eigen::VectorXd fp = features.eval(w[0]);
    const Eigen::VectorXd fc = features.eval(w[1]);
    const Eigen::VectorXd fn = features.eval(w[2]);
    ms.L_prev += fp;
    ms.L += fc;
    ms.L_next += fn;
    ms.Nmat.noalias() += fc * fn.transpose();
    const Eigen::MatrixXd outer = fp * fn.transpose();
    ms.P += outer;
    for (int b = 0; b < N; ++b)
      if (fc(b) != 0.0) ms.M[b] += fc(b) * outer;
  }

  const double inv = 1.0 / static_cast<double>(W);
  ms.L_prev *= inv;
  ms.L *= inv;
  ms.L_next *= inv;
  ms.Nmat *= inv;
  ms.P *= inv;
  for (auto& m : ms.M) m *= inv;
  return ms;
}

std::vector<std::array<double, 3>> extract_windows(std::span<const double> obs, int t,
                                                   int T, int start_phase) {
  std::vector<std::array<double, 3>> windows;
  const long long n = static_cast<long long>(obs.size());
  for (long long i = 1; i + 1 < n; ++i) {
    if (phase_of(start_phase + i, T) == phase_of(t, T))
      windows.push_back({obs[i - 1], obs[i], obs[i + 1]});
  }
  return windows;
}

Eigen::MatrixXd recover_features(const MomentSet& ms, int K, SplitMix64& rng,
                                 SpectralRecovery* diagnostics, const RecoverOptions& opt) {
  const int N = ms.feature_count();
  if (K < 1) throw DataError("recover_features: K must be >= 1");
  if (N < K)
    throw DataError("recover_features: " + std::to_string(N) + " features for K = " +
                    std::to_string(K) + " states");

  if (K == 1) {
    if (diagnostics) {
      diagnostics->singular_values = Eigen::VectorXd::Ones(1);
      diagnostics->eigenvalue_separation = 1.0;
    }
    return ms.L;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ms.P, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  if (diagnostics) diagnostics->singular_values = sv;
  if (!(sv(K - 1) > opt.rank_tol * sv(0)))
    throw RankError("recover_features: K-th singular value of P(t) is " +
                    std::to_string(sv(K - 1)) + " (relative " +
                    std::to_string(sv(K - 1) / sv(0)) +
                    "), moment matrix is rank deficient");

  const Eigen::MatrixXd U = svd.matrixU().leftCols(K);
  const Eigen::MatrixXd V = svd.matrixV().leftCols(K);
  const Eigen::MatrixXd core = U.transpose() * ms.P * V;  // K x K, invertible
  const Eigen::PartialPivLU<Eigen::MatrixXd> core_lu(core);

  std::vector<Eigen::MatrixXd> B(N);
  for (int b = 0; b < N; ++b) B[b] = core_lu.solve(U.transpose() * ms.M[b] * V);

  // Random spherical contraction; retried until the spectrum separates.
  Eigen::MatrixXcd R;
  double separation = 0.0;
  int retries = 0;
  for (; retries <= opt.max_alpha_retries; ++retries) {
    Eigen::VectorXd alpha(N);
    for (int b = 0; b < N; ++b) alpha(b) = rng.normal();
    alpha /= alpha.norm();

    Eigen::MatrixXd Bmix = Eigen::MatrixXd::Zero(K, K);
    for (int b = 0; b < N; ++b) Bmix += alpha(b) * B[b];

    Eigen::EigenSolver<Eigen::MatrixXd> eig(Bmix);
    const Eigen::VectorXcd values = eig.eigenvalues();
    double radius = 0.0;
    for (int i = 0; i < K; ++i) radius = std::max(radius, std::abs(values(i)));
    double min_gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < K; ++i)
      for (int j = i + 1; j < K; ++j)
        min_gap = std::min(min_gap, std::abs(values(i) - values(j)));
    separation = radius > 0.0 ? min_gap / radius : 0.0;
    if (separation > opt.separation_tol) {
      R = eig.eigenvectors();
      break;
    }
  }
  if (diagnostics) {
    diagnostics->eigenvalue_separation = separation;
    diagnostics->alpha_retries = retries;
  }
  if (R.size() == 0)
    throw DegeneracyError(
        "recover_features: eigenvalues failed to separate after " +
        std::to_string(opt.max_alpha_retries) +
        " contractions (emission laws close to linearly dependent)");

  // O_t(b, .) are the diagonals of R^{-1} B(b) R; the readout is invariant
  // to the column scaling of R, only the column order (state labels) is
  // arbitrary. Imaginary parts are roundoff or moment noise.
  const Eigen::PartialPivLU<Eigen::MatrixXcd> R_lu(R);
  Eigen::MatrixXd O(N, K);
  double max_imag = 0.0;
  double max_real = 0.0;
  for (int b = 0; b < N; ++b) {
    const Eigen::MatrixXcd D = R_lu.solve(B[b].cast<std::complex<double>>() * R);
    for (int k = 0; k < K; ++k) {
      O(b, k) = D(k, k).real();
      max_imag = std::max(max_imag, std::abs(D(k, k).imag()));
      max_real = std::max(max_real, std::abs(D(k, k).real()));
    }
  }
  if (diagnostics) {
    diagnostics->max_imag = max_imag;
    diagnostics->imag_warning = max_imag > opt.imag_tol * std::max(max_real, 1e-300);
  }
  return O;
}

namespace {

// Completes a recovery whose feature matrix rec.O is already in place:
// pi*(t) from L = O_t pi, then
//   Q*(t) = (U~^T O_t diag(pi))^{-1} U~^T N(t) V (O_{t+1}^T V)^{-1}.
void complete_recovery(SpectralRecovery& rec, const MomentSet& ms,
                       const Eigen::MatrixXd& O_next, int K) {
  rec.pi = rec.O.colPivHouseholderQr().solve(ms.L);
  const double pi_sum = rec.pi.sum();
  if (pi_sum != 0.0) rec.pi /= pi_sum;

  Eigen::JacobiSVD<Eigen::MatrixXd> nsvd(ms.Nmat, Eigen::ComputeThinU);
  const Eigen::MatrixXd Utilde = nsvd.matrixU().leftCols(K);
  Eigen::JacobiSVD<Eigen::MatrixXd> psvd(ms.P, Eigen::ComputeThinV);
  const Eigen::MatrixXd V = psvd.matrixV().leftCols(K);

  const Eigen::MatrixXd lhs = Utilde.transpose() * rec.O * rec.pi.asDiagonal();
  const Eigen::MatrixXd mid = Utilde.transpose() * ms.Nmat * V;
  const Eigen::MatrixXd rhs = O_next.transpose() * V;

  // mid * rhs^{-1} = (rhs^{-T} mid^T)^T, then the lhs solve from the left.
  const Eigen::MatrixXd right =
      Eigen::PartialPivLU<Eigen::MatrixXd>(rhs.transpose()).solve(mid.transpose()).transpose();
  rec.Q = Eigen::PartialPivLU<Eigen::MatrixXd>(lhs).solve(right);

  // Row normalization resolves the residual eigenvector scaling.
  for (int k = 0; k < K; ++k) {
    const double rowsum = rec.Q.row(k).sum();
    if (rowsum != 0.0) rec.Q.row(k) /= rowsum;
  }
}

SpectralRecovery trivial_single_state(const MomentSet& ms) {
  SpectralRecovery rec;
  rec.t = ms.t;
  rec.O = ms.L;
  rec.pi = Eigen::VectorXd::Ones(1);
  rec.Q = Eigen::MatrixXd::Ones(1, 1);
  rec.singular_values = Eigen::VectorXd::Ones(1);
  rec.eigenvalue_separation = 1.0;
  return rec;
}

}  // namespace

SpectralRecovery recover(const MomentSet& ms, const Eigen::MatrixXd& O_next, int K,
                         SplitMix64& rng, const RecoverOptions& opt) {
  if (K == 1) return trivial_single_state(ms);
  SpectralRecovery rec;
  rec.t = ms.t;
  rec.O = recover_features(ms, K, rng, &rec, opt);
  complete_recovery(rec, ms, O_next, K);
  return rec;
}

SpectralRecovery recover(const MomentSet& ms, const MomentSet& ms_next, int K,
                         SplitMix64& rng, const RecoverOptions& opt) {
  if (K == 1) return trivial_single_state(ms);
  const Eigen::MatrixXd O_next = recover_features(ms_next, K, rng, nullptr, opt);
  return recover(ms, O_next, K, rng, opt);
}

std::vector<SpectralRecovery> recover_all(std::span<const MomentSet> sets, int K,
                                          SplitMix64& rng, const RecoverOptions& opt) {
  const int T = static_cast<int>(sets.size());
  if (T == 0) throw DataError("recover_all: no moment sets");

  std::vector<SpectralRecovery> out(T);
  for (int i = 0; i < T; ++i) {
    if (K == 1) {
      out[i] = trivial_single_state(sets[i]);
      continue;
    }
    out[i].t = sets[i].t;
    out[i].O = recover_features(sets[i], K, rng, &out[i], opt);
  }
  if (K == 1) return out;
  for (int i = 0; i < T; ++i) complete_recovery(out[i], sets[i], out[(i + 1) % T].O, K);
  return out;
}

std::vector<int> align_columns(const Eigen::MatrixXd& recovered,
                               const Eigen::MatrixXd& reference) {
  const int K = static_cast<int>(reference.cols());
  if (recovered.cols() != K || recovered.rows() != reference.rows())
    throw DataError("align_columns: shape mismatch");
  std::vector<int> p(K), best;
  for (int k = 0; k < K; ++k) p[k] = k;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int k = 0; k < K; ++k) cost += (recovered.col(p[k]) - reference.col(k)).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = p;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

}  // namespace shmm
