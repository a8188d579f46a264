#ifndef SHMM_TRANSITION_HPP
#define SHMM_TRANSITION_HPP

#include <Eigen/Dense>
#include <vector>

#include "shmm/types.hpp"

namespace shmm {

// T-periodic transition matrices generated by trigonometric logits,
//
//   Q_ij(t) = exp(Z(t) . beta_ij) / sum_j' exp(Z(t) . beta_ij'),
//
// where Z(t) = (1, cos(2*pi*t/T), sin(2*pi*t/T), ..., cos(2*pi*d*t/T),
// sin(2*pi*d*t/T)) and the last column is the softmax reference category
// with beta_{i,K-1} fixed to zero. Fixing the reference column removes the
// per-row softmax shift non-identifiability, so distinct coefficient
// tensors produce distinct matrix paths. Every generated matrix is strictly
// positive and row-stochastic by construction.
//
// Coefficients are stored flat as beta[i][j][c] with i in 0..K-1 (row),
// j in 0..K-2 (free column) and c in 0..2d (constant, cos 1, sin 1, ...).
class PeriodicLogitTransition {
 public:
  explicit PeriodicLogitTransition(ModelDims dims);
  PeriodicLogitTransition(ModelDims dims, std::vector<double> beta);

  const ModelDims& dims() const { return dims_; }

  double beta(int i, int j, int c) const { return beta_[index(i, j, c)]; }
  double& beta(int i, int j, int c) { return beta_[index(i, j, c)]; }
  const std::vector<double>& coefficients() const { return beta_; }
  void set_coefficients(std::vector<double> beta);

  // Q(t); t is wrapped mod T, so matrix(t + T) == matrix(t) exactly.
  Eigen::MatrixXd matrix(int t) const;

  // Entrywise log of Q(t), computed stably from the logits.
  Eigen::MatrixXd log_matrix(int t) const;

  // Q(1) Q(2) ... Q(T).
  Eigen::MatrixXd period_product() const;

  // Stationary distribution of the period product, found by power
  // iteration. Throws NumericalError if the fixed-point residual does not
  // drop below 1e-10 within the iteration cap.
  Eigen::VectorXd stationary_distribution() const;

  // Stationary phase marginals pi*(1..T): pi*(1) is the stationary
  // distribution of the period product and pi*(t+1) = pi*(t) Q(t).
  // Entry [t-1] holds pi*(t).
  std::vector<Eigen::VectorXd> phase_marginals() const;

  // Relabels states: new state k takes the role of old state perm[k].
  // The result generates exactly the permuted matrices
  // Q'(t)_{kl} = Q(t)_{perm[k], perm[l]} (the logit family is closed under
  // relabeling because log-ratios against the new reference column stay
  // linear in Z(t)).
  PeriodicLogitTransition permuted(const std::vector<int>& perm) const;

 private:
  std::size_t index(int i, int j, int c) const {
    return (static_cast<std::size_t>(i) * (dims_.K - 1) + j) * dims_.trig_dim() + c;
  }

  ModelDims dims_;
  std::vector<double> beta_;
};

}  // namespace shmm

#endif  // SHMM_TRANSITION_HPP
