#ifndef SHMM_SPECTRAL_HPP
#define SHMM_SPECTRAL_HPP

#include <Eigen/Dense>
#include <array>
#include <span>
#include <vector>

#include "shmm/features.hpp"
#include "shmm/model.hpp"
#include "shmm/rng.hpp"

namespace shmm {

// Low-order feature moments of three consecutive observations centered at
// phase t (indices wrap mod T under stationarity):
//   L_prev(a)  = E[phi_a(Y_{t-1})],  L, L_next analogous
//   Nmat(a,b)  = E[phi_a(Y_t) phi_b(Y_{t+1})]
//   P(a,c)     = E[phi_a(Y_{t-1}) phi_c(Y_{t+1})]
//   M[b](a,c)  = E[phi_a(Y_{t-1}) phi_b(Y_t) phi_c(Y_{t+1})]
// In population form these factor through the feature matrices O_s, the
// stationary phase marginals pi*(s) and the transition matrices Q*(s).
struct MomentSet {
  int t = 1;
  Eigen::VectorXd L_prev, L, L_next;
  Eigen::MatrixXd Nmat, P;
  std::vector<Eigen::MatrixXd> M;  // M[b] is N x N, indexed (a, c)

  int feature_count() const { return static_cast<int>(L.size()); }
};

// Output of the moment-based recovery at one phase: the feature matrix O_t
// (up to column permutation), the phase marginal pi*(t) and the transition
// matrix Q*(t) (up to independent row/column permutations across adjacent
// phases), plus numerical diagnostics.
struct SpectralRecovery {
  int t = 1;
  Eigen::MatrixXd O;   // N x K
  Eigen::VectorXd pi;  // K
  Eigen::MatrixXd Q;   // K x K, rows normalized to sum 1

  Eigen::VectorXd singular_values;  // of P(t)
  double eigenvalue_separation = 0.0;
  int alpha_retries = 0;
  double max_imag = 0.0;  // largest |imag| across eigenpairs, pre-truncation
  bool imag_warning = false;
};

struct RecoverOptions {
  // Minimum relative K-th singular value of P(t) before declaring rank
  // deficiency.
  double rank_tol = 1e-10;
  // Required min pairwise eigenvalue gap, relative to the spectral radius.
  double separation_tol = 1e-6;
  int max_alpha_retries = 10;
  // Imaginary residue above this fraction of the spectral radius sets
  // imag_warning.
  double imag_tol = 1e-6;
};

// Exact population MomentSet of the model at phase t, assembled from the
// feature integrals, the stationary phase marginals and the transition
// matrices. The model's own initial distribution is ignored: moments are
// those of the stationary chain.
MomentSet population_moments(const SeasonalHMM& model, int t, const FeatureMap& features);

// Sample MomentSet from observation windows (y_{t-1}, y_t, y_{t+1})
// collected at phase t across periods. Throws DataError when fewer than
// `min_windows` windows are supplied.
MomentSet empirical_moments(std::span<const std::array<double, 3>> windows,
                            const FeatureMap& features, int t, int min_windows = 1);

// Windows centered at phase t extracted from one observation sequence whose
// first value has phase `start_phase`.
std::vector<std::array<double, 3>> extract_windows(std::span<const double> obs, int t,
                                                   int T, int start_phase = 1);

// Feature matrix O_t of the emission family: O(a, k) = integral of
// feature a against the state-k law at phase t.
Eigen::MatrixXd feature_matrix(const EmissionFamily& family, int t,
                               const FeatureMap& features);

// Recovers O_t from one MomentSet: rank-K SVD of P(t), observable operators
// B(b) = (U^T P V)^{-1} U^T M[b] V, a random spherical contraction with
// distinct eigenvalues, and the eigenbasis readout O_t(b, .) =
// diag(R^{-1} B(b) R). Column order (state labels) is arbitrary.
// Throws RankError on rank deficiency and DegeneracyError when no
// contraction separates the spectrum within the retry budget.
Eigen::MatrixXd recover_features(const MomentSet& ms, int K, SplitMix64& rng,
                                 SpectralRecovery* diagnostics = nullptr,
                                 const RecoverOptions& opt = {});

// Full recovery at phase t. O_{t+1} (recovered from the phase-(t+1)
// MomentSet `ms_next`) closes the transition formula
//   Q*(t) = (U~^T O_t diag(pi))^{-1} U~^T N(t) V (O_{t+1}^T V)^{-1},
// with U~ the left singular vectors of N(t) and V the right singular
// vectors of P(t). pi and the rows of Q are normalized to sum 1.
SpectralRecovery recover(const MomentSet& ms, const MomentSet& ms_next, int K,
                         SplitMix64& rng, const RecoverOptions& opt = {});

// Variant taking a precomputed next-phase feature matrix.
SpectralRecovery recover(const MomentSet& ms, const Eigen::MatrixXd& O_next, int K,
                         SplitMix64& rng, const RecoverOptions& opt = {});

// Recovery at every phase. `sets[i]` must be the MomentSet at phase i+1;
// phase t uses the feature matrix recovered at phase t+1 (wrapping to 1).
std::vector<SpectralRecovery> recover_all(std::span<const MomentSet> sets, int K,
                                          SplitMix64& rng, const RecoverOptions& opt = {});

// Column permutation p minimizing ||recovered.col(p[k]) - reference.col(k)||
// summed over k (exhaustive over permutations; K is small). Used to undo
// the per-phase state labeling of a recovery before comparing to a model.
std::vector<int> align_columns(const Eigen::MatrixXd& recovered,
                               const Eigen::MatrixXd& reference);

}  // namespace shmm

#endif  // SHMM_SPECTRAL_HPP
