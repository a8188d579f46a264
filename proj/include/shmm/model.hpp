#ifndef SHMM_MODEL_HPP
#define SHMM_MODEL_HPP

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "shmm/emissions.hpp"
#include "shmm/transition.hpp"
#include "shmm/types.hpp"

namespace shmm {

// A seasonal hidden Markov model: K hidden states on a period-T clock,
// T-periodic transition matrices Q(t) from the trigonometric-logit family,
// T-periodic emission laws, and an initial distribution over states.
// Immutable in normal use; all operations on it are pure functions, so
// instances can be shared freely across threads.
class SeasonalHMM {
 public:
  SeasonalHMM(PeriodicLogitTransition transition, std::unique_ptr<EmissionFamily> emissions,
              Eigen::VectorXd pi);

  SeasonalHMM(const SeasonalHMM& other);
  SeasonalHMM& operator=(const SeasonalHMM& other);
  SeasonalHMM(SeasonalHMM&&) = default;
  SeasonalHMM& operator=(SeasonalHMM&&) = default;

  const ModelDims& dims() const { return transition_.dims(); }
  const PeriodicLogitTransition& transition() const { return transition_; }
  PeriodicLogitTransition& transition() { return transition_; }
  const EmissionFamily& emissions() const { return *emissions_; }
  EmissionFamily& emissions() { return *emissions_; }
  const Eigen::VectorXd& pi() const { return pi_; }
  void set_pi(Eigen::VectorXd pi);

  double log_emission(int k, int t, double y) const {
    return emissions_->log_density(k, t, y);
  }

  // Throws DataError on any violated invariant (pi off the simplex,
  // mismatched emission dimensions, family-specific bound violations).
  void validate() const;

  // FNV-1a hash over dims and all parameters; identifies the parameter
  // vector in trajectory and report metadata.
  std::string fingerprint() const;

  // Relabeled model: new state k takes the role of old state perm[k].
  // Generates exactly the permuted transition matrices and emission laws.
  SeasonalHMM permuted(const std::vector<int>& perm) const;

 private:
  PeriodicLogitTransition transition_;
  std::unique_ptr<EmissionFamily> emissions_;
  Eigen::VectorXd pi_;
};

}  // namespace shmm

#endif  // SHMM_MODEL_HPP
