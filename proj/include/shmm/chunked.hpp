#ifndef SHMM_CHUNKED_HPP
#define SHMM_CHUNKED_HPP

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "shmm/model.hpp"

namespace shmm {

// The homogeneous HMM induced by blocking a seasonal HMM over whole
// periods: hidden blocks U_j = (X_{jT+1}, ..., X_{jT+T}) on K^T states and
// observation blocks W_j = (Y_{jT+1}, ..., Y_{jT+T}). Its likelihood over
// J+1 blocks equals the seasonal model's likelihood over (J+1)T
// observations, which makes it a verification oracle for the seasonal
// forward pass. The state space is materialized, so construction is capped.
class ChunkedHMM {
 public:
  // Throws SizeError (naming K^T) when K^T exceeds `cap`.
  explicit ChunkedHMM(const SeasonalHMM& model, long long cap = 4096);

  long long num_states() const { return num_states_; }
  const Eigen::MatrixXd& transition() const { return transition_; }
  const Eigen::VectorXd& initial() const { return initial_; }

  // Block-state tuple (x_1, ..., x_T) for a state index; big-endian
  // encoding (the first coordinate varies slowest).
  std::vector<int> decode(long long u) const;
  long long encode(std::span<const int> tuple) const;

  // log g(w | u) = sum_t log f_{u_t, t}(w_t); `w` has length T.
  double block_log_density(long long u, std::span<const double> w) const;

  // Log-likelihood of a whole number of periods of observations, computed
  // by the homogeneous forward recursion on block states. Length must be a
  // positive multiple of T.
  double log_likelihood(std::span<const double> ys) const;

 private:
  SeasonalHMM model_;
  int K_;
  int T_;
  long long num_states_;
  Eigen::MatrixXd transition_;
  Eigen::VectorXd initial_;
};

inline ChunkedHMM chunk(const SeasonalHMM& model, long long cap = 4096) {
  return ChunkedHMM(model, cap);
}

}  // namespace shmm

#endif  // SHMM_CHUNKED_HPP
