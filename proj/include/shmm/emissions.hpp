#ifndef SHMM_EMISSIONS_HPP
#define SHMM_EMISSIONS_HPP

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "shmm/features.hpp"
#include "shmm/rng.hpp"
#include "shmm/types.hpp"

namespace shmm {

struct MStepOptions {
  // A state whose total posterior weight falls below this floor keeps its
  // previous parameters (reported in `skipped_states`).
  double weight_floor = 1e-10;
  // Inner coordinate-ascent rounds for families without a joint closed form.
  int inner_rounds = 3;
};

struct MStepReport {
  double objective_before = 0.0;
  double objective_after = 0.0;
  std::vector<int> skipped_states;
  // States whose proposed update was rejected because it did not improve
  // the weighted log-likelihood (previous parameters kept).
  std::vector<int> reverted_states;
};

// Periodic emission distributions: one law per (state, phase) pair, with
// phase period T. Implementations own their parameter block, provide exact
// log-densities, seeded sampling, and a weighted M-step that never
// decreases the weighted emission log-likelihood (GEM contract).
class EmissionFamily {
 public:
  virtual ~EmissionFamily() = default;

  virtual int states() const = 0;
  virtual int period() const = 0;
  virtual std::string family_tag() const = 0;
  virtual std::unique_ptr<EmissionFamily> clone() const = 0;

  // Throws DataError on violated family invariants (weights off the
  // simplex, bound violations).
  virtual void validate() const = 0;

  // Log density of y under state k at phase t, w.r.t. the family's
  // dominating measure. Throws DataError when y is outside the support.
  virtual double log_density(int k, int t, double y) const = 0;

  virtual double sample(int k, int t, SplitMix64& rng) const = 0;

  // E[Y | X = k] at phase t.
  virtual double mean(int k, int t) const = 0;

  // Integral of the feature against the state-k law at phase t. Closed
  // forms for indicator and exponential-moment features; adaptive
  // quadrature otherwise. Throws NumericalError on non-finite integrals.
  virtual double integrate_feature(int k, int t, const Feature& phi) const = 0;

  // One generalized M-step: maximizes (or at least improves) the weighted
  // log-likelihood sum_i sum_k weights(i,k) log f_{k,phase_i}(y_i).
  // `weights` is n x K and row-stochastic.
  virtual MStepReport weighted_mstep(std::span<const int> phases,
                                     std::span<const double> values,
                                     const Eigen::MatrixXd& weights,
                                     const MStepOptions& opt = {}) = 0;

  // Flattened per-state parameters, used for state alignment.
  virtual std::vector<double> state_params(int k) const = 0;

  // Relabels states: new state k takes the parameters of old state perm[k].
  virtual void permute_states(const std::vector<int>& perm) = 0;

  // Typical observation magnitude; used to pick moment-feature grids.
  virtual double scale_hint() const = 0;

  double weighted_log_likelihood(std::span<const int> phases,
                                 std::span<const double> values,
                                 const Eigen::MatrixXd& weights) const;
};

// Mixture of Gaussians with a periodic shared mean per state:
//   nu_{k,t} = sum_m weights(k,m) N(mean_at(k,t), variances(k,m))
//   mean_at(k,t) = level(k) + sum_l trig(k,2l-2) cos(2*pi*l*t/T)
//                           + trig(k,2l-1) sin(2*pi*l*t/T).
class GaussianPeriodicMean final : public EmissionFamily {
 public:
  GaussianPeriodicMean(int K, int T, int M, int degree);

  Eigen::MatrixXd weights;    // K x M, rows on the simplex
  Eigen::VectorXd level;      // K      constant mean terms
  Eigen::MatrixXd trig;       // K x 2*degree mean coefficients (cos1, sin1, ...)
  Eigen::MatrixXd variances;  // K x M, each >= variance_floor
  double variance_floor = 1e-6;

  int mixture_size() const { return static_cast<int>(weights.cols()); }
  int degree() const { return degree_; }
  double mean_at(int k, int t) const;
  void validate() const override;

  int states() const override { return static_cast<int>(weights.rows()); }
  int period() const override { return T_; }
  std::string family_tag() const override { return "gaussian_periodic_mean"; }
  std::unique_ptr<EmissionFamily> clone() const override {
    return std::make_unique<GaussianPeriodicMean>(*this);
  }
  double log_density(int k, int t, double y) const override;
  double sample(int k, int t, SplitMix64& rng) const override;
  double mean(int k, int t) const override { return mean_at(k, t); }
  double integrate_feature(int k, int t, const Feature& phi) const override;
  MStepReport weighted_mstep(std::span<const int> phases, std::span<const double> values,
                             const Eigen::MatrixXd& weights,
                             const MStepOptions& opt) override;
  std::vector<double> state_params(int k) const override;
  void permute_states(const std::vector<int>& perm) override;
  double scale_hint() const override;

 private:
  int T_;
  int degree_;
};

// Mixture of exponentials with a periodic scale factor per state:
//   nu_{k,t} = sum_m weights(k,m) Exp(rates(k,m) / scale_at(k,t))
//   scale_at(k,t) = 1 + sum_l trig(k,2l-2) cos(2*pi*l*t/T)
//                     + trig(k,2l-1) sin(2*pi*l*t/T)  (zero constant term).
// Rates are kept ascending within each state (canonical labeling).
class ExpPeriodicScale final : public EmissionFamily {
 public:
  ExpPeriodicScale(int K, int T, int M, int degree);

  Eigen::MatrixXd weights;  // K x M
  Eigen::MatrixXd rates;    // K x M, ascending per row
  Eigen::MatrixXd trig;     // K x 2*degree scale coefficients
  double scale_floor = 1e-3;

  int mixture_size() const { return static_cast<int>(weights.cols()); }
  int degree() const { return degree_; }
  // 1 + sigma_k(t); >= scale_floor for every phase (checked at
  // construction via validate() and preserved by the M-step line search).
  double scale_at(int k, int t) const;
  void validate() const override;

  int states() const override { return static_cast<int>(weights.rows()); }
  int period() const override { return T_; }
  std::string family_tag() const override { return "exp_periodic_scale"; }
  std::unique_ptr<EmissionFamily> clone() const override {
    return std::make_unique<ExpPeriodicScale>(*this);
  }
  double log_density(int k, int t, double y) const override;
  double sample(int k, int t, SplitMix64& rng) const override;
  double mean(int k, int t) const override;
  double integrate_feature(int k, int t, const Feature& phi) const override;
  MStepReport weighted_mstep(std::span<const int> phases, std::span<const double> values,
                             const Eigen::MatrixXd& weights,
                             const MStepOptions& opt) override;
  std::vector<double> state_params(int k) const override;
  void permute_states(const std::vector<int>& perm) override;
  double scale_hint() const override;

  // Scale-coefficient block of the weighted M-step objective for one state,
  // already aggregated by phase:
  //   F(delta) = sum_tau [ -R(tau) log s(tau) - A(tau) / s(tau) ],
  //   s(tau) = 1 + Z_nc(tau) . delta,
  // where R(tau) is the total posterior weight at phase tau and A(tau) the
  // weight-and-rate weighted observation total. Exposed with its analytic
  // gradient for finite-difference verification.
  struct ScaleObjective {
    double value;
    Eigen::VectorXd grad;
  };
  static ScaleObjective scale_objective(const Eigen::VectorXd& delta,
                                        const Eigen::VectorXd& weight_by_phase,
                                        const Eigen::VectorXd& rate_weighted_by_phase,
                                        int T, int degree);

 private:
  int T_;
  int degree_;
};

// Zero-inflated mixture of exponentials (time-constant): component 0 is a
// point mass at zero, components 1..M-1 are exponentials with ascending
// rates. Densities are w.r.t. (delta_0 + Lebesgue on (0, inf)):
//   f_k(0) = weights(k,0),  f_k(y) = sum_m weights(k,m) rates(k,m-1)
//            exp(-rates(k,m-1) y) for y > 0.
class ZeroInflatedExpMixture final : public EmissionFamily {
 public:
  ZeroInflatedExpMixture(int K, int T, int M);

  Eigen::MatrixXd weights;  // K x M; column 0 is the dry mass
  Eigen::MatrixXd rates;    // K x (M-1), ascending per row

  int mixture_size() const { return static_cast<int>(weights.cols()); }
  void validate() const override;

  int states() const override { return static_cast<int>(weights.rows()); }
  int period() const override { return T_; }
  std::string family_tag() const override { return "zero_inflated_exp"; }
  std::unique_ptr<EmissionFamily> clone() const override {
    return std::make_unique<ZeroInflatedExpMixture>(*this);
  }
  double log_density(int k, int t, double y) const override;
  double sample(int k, int t, SplitMix64& rng) const override;
  double mean(int k, int t) const override;
  double integrate_feature(int k, int t, const Feature& phi) const override;
  MStepReport weighted_mstep(std::span<const int> phases, std::span<const double> values,
                             const Eigen::MatrixXd& weights,
                             const MStepOptions& opt) override;
  std::vector<double> state_params(int k) const override;
  void permute_states(const std::vector<int>& perm) override;
  double scale_hint() const override;

 private:
  int T_;
};

// Smallest singular value of the emission feature matrix O_t built from the
// first `count` features of `features`. A value near zero signals linearly
// dependent emission laws at phase t (violated spectral assumption).
double linear_independence_check(const EmissionFamily& family, int t,
                                 const FeatureMap& features, int count);

}  // namespace shmm

#endif  // SHMM_EMISSIONS_HPP
