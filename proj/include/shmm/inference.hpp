#ifndef SHMM_INFERENCE_HPP
#define SHMM_INFERENCE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shmm/model.hpp"

namespace shmm {

// Exact smoothing posteriors from one forward-backward pass:
//   marginal(i, k)   = P(X_{i+1} = k | Y)        for i in 0..n-1
//   pairwise[i](k,l) = P(X_{i+1}=k, X_{i+2}=l | Y) for i in 0..n-2
// together with the data log-likelihood.
struct SmoothingResult {
  Eigen::MatrixXd marginal;
  std::vector<Eigen::MatrixXd> pairwise;
  double loglik = 0.0;
};

struct FitConfig {
  int n_starts = 30;
  int short_run_iters = 50;
  int short_run_len = 500;
  double rel_tol = 1e-7;  // stop when |delta loglik| / |loglik| drops below
  int max_iters = 5000;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: one worker per hardware thread

  // When true, pi is pinned to the stationary distribution of the period
  // product after each M-step instead of being a free parameter.
  bool pi_stationary = false;

  // Family layout (mixture size and emission trig degree).
  int mixture = 1;
  int emission_degree = 1;

  // Initialization ranges and family floors.
  double beta_init_range = 1.0;
  double trig_init_range = 0.5;
  double variance_floor = 1e-6;
  double scale_floor = 1e-3;

  void validate() const;
};

struct EmOutcome {
  double loglik_before = 0.0;  // likelihood of the parameters entering the step
  bool beta_updated = false;   // false when the beta block kept its previous value
  MStepReport emission_report;
};

struct FitDiagnostics {
  std::vector<double> start_logliks;  // final short-run loglik per start
  int chosen_start = -1;
  std::vector<double> trace;      // long-run loglik per iteration
  std::vector<double> rel_diffs;  // |delta| / |loglik| per iteration
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
  std::string to_json() const;
};

struct FitResult {
  SeasonalHMM model;
  FitDiagnostics diagnostics;
};

// Log of L_{n,pi}[theta; Y], by a log-space forward pass. `start_phase` is
// the phase of the first observation. Throws DataError (naming the index)
// if some observation has zero density in every state.
double log_likelihood(const SeasonalHMM& model, std::span<const double> obs,
                      const Eigen::VectorXd& pi, int start_phase = 1);
double log_likelihood(const SeasonalHMM& model, std::span<const double> obs,
                      int start_phase = 1);

SmoothingResult forward_backward(const SeasonalHMM& model, std::span<const double> obs,
                                 const Eigen::VectorXd& pi, int start_phase = 1);
SmoothingResult forward_backward(const SeasonalHMM& model, std::span<const double> obs,
                                 int start_phase = 1);

// One EM iteration in place: E-step by forward-backward, then the three
// M-step blocks (closed-form pi, gradient ascent on the transition
// coefficients, family M-step). Returns the pre-update log-likelihood; the
// sequence of returned values over repeated calls is non-decreasing up to
// roundoff. Blocks that fail to improve keep their previous parameters.
EmOutcome em_step(SeasonalHMM& model, std::span<const double> obs, int start_phase = 1,
                  bool pi_stationary = false);

// Pure-function variant.
std::pair<SeasonalHMM, EmOutcome> em_iterate(const SeasonalHMM& model,
                                             std::span<const double> obs,
                                             int start_phase = 1,
                                             bool pi_stationary = false);

// Maximum-likelihood fit by multi-start EM: cfg.n_starts random starts get
// cfg.short_run_iters EM iterations on the first cfg.short_run_len
// observations; the start with the largest short-run log-likelihood seeds a
// long EM on the full data, stopped when the relative log-likelihood
// difference drops below cfg.rel_tol. Deterministic given (obs, cfg.seed).
// Throws FitError when every start fails to produce a finite likelihood.
FitResult fit(std::span<const double> obs, ModelDims dims, const std::string& family_tag,
              const FitConfig& cfg, int start_phase = 1);

// Most probable state path (0-based states); ties break toward the lower
// state index.
std::vector<int> viterbi(const SeasonalHMM& model, std::span<const double> obs,
                         const Eigen::VectorXd& pi, int start_phase = 1);
std::vector<int> viterbi(const SeasonalHMM& model, std::span<const double> obs,
                         int start_phase = 1);

// Global state permutation minimizing the summed squared distance between
// per-state emission parameter vectors; `permutation[k]` is the fitted
// state playing the role of reference state k, so
// fitted.permuted(permutation) is aligned with the reference.
struct Alignment {
  std::vector<int> permutation;
  double distance = 0.0;
};
Alignment align_states(const SeasonalHMM& fitted, const SeasonalHMM& reference);

// Transition-coefficient block of the EM objective,
//   g(beta) = sum_tau sum_{k,l} counts[tau-1](k,l) log Q_kl(tau),
// with its analytic gradient (flat [i][j][c] layout, matching
// PeriodicLogitTransition::coefficients). Exposed for finite-difference
// verification.
struct BetaObjective {
  double value = 0.0;
  std::vector<double> grad;
};
BetaObjective transition_objective(const PeriodicLogitTransition& tr,
                                   const std::vector<Eigen::MatrixXd>& counts);

// Random-but-scale-aware initial model used by fit(); exposed so tools and
// tests can reproduce individual starts.
SeasonalHMM random_start(ModelDims dims, const std::string& family_tag,
                         std::span<const double> obs, const FitConfig& cfg,
                         SplitMix64& rng);

}  // namespace shmm

#endif  // SHMM_INFERENCE_HPP
