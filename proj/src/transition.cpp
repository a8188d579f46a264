#include "shmm/transition.hpp"

#include <cmath>

namespace shmm {

PeriodicLogitTransition::PeriodicLogitTransition(ModelDims dims) : dims_(dims) {
  dims_.validate();
  beta_.assign(static_cast<std::size_t>(dims_.K) * (dims_.K - 1) * dims_.trig_dim(), 0.0);
}

PeriodicLogitTransition::PeriodicLogitTransition(ModelDims dims, std::vector<double> beta)
    : PeriodicLogitTransition(dims) {
  set_coefficients(std::move(beta));
}

void PeriodicLogitTransition::set_coefficients(std::vector<double> beta) {
  const std::size_t want =
      static_cast<std::size_t>(dims_.K) * (dims_.K - 1) * dims_.trig_dim();
  if (beta.size() != want)
    throw DataError("PeriodicLogitTransition: expected " + std::to_string(want) +
                    " coefficients, got " + std::to_string(beta.size()));
  beta_ = std::move(beta);
}

Eigen::MatrixXd PeriodicLogitTransition::log_matrix(int t) const {
  const int K = dims_.K;
  const int phase = phase_of(t, dims_.T);
  const Eigen::VectorXd z = trig_basis(phase, dims_.T, dims_.d);

  Eigen::MatrixXd logq(K, K);
  Eigen::VectorXd logits(K);
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K - 1; ++j) {
      double v = 0.0;
      for (int c = 0; c < dims_.trig_dim(); ++c) v += z(c) * beta(i, j, c);
      logits(j) = v;
    }
    logits(K - 1) = 0.0;  // reference category
    const double norm = log_sum_exp(logits);
    for (int j = 0; j < K; ++j) logq(i, j) = logits(j) - norm;
  }
  return logq;
}

Eigen::MatrixXd PeriodicLogitTransition::matrix(int t) const {
  return log_matrix(t).array().exp().matrix();
}

Eigen::MatrixXd PeriodicLogitTransition::period_product() const {
  Eigen::MatrixXd p = matrix(1);
  for (int t = 2; t <= dims_.T; ++t) p = p * matrix(t);
  return p;
}

Eigen::VectorXd PeriodicLogitTransition::stationary_distribution() const {
  const int K = dims_.K;
  const Eigen::MatrixXd p = period_product();

  Eigen::VectorXd pi = Eigen::VectorXd::Constant(K, 1.0 / K);
  const int max_iters = 200000;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd next = p.transpose() * pi;
    next /= next.sum();
    const double diff = (next - pi).lpNorm<1>();
    pi = next;
    if (diff < 1e-15) break;
  }

  const double residual = (p.transpose() * pi - pi).lpNorm<Eigen::Infinity>();
  if (!(residual < 1e-10))
    throw NumericalError("stationary_distribution: power iteration residual " +
                         std::to_string(residual) + " above 1e-10");
  return pi;
}

std::vector<Eigen::VectorXd> PeriodicLogitTransition::phase_marginals() const {
  std::vector<Eigen::VectorXd> marginals(dims_.T);
  marginals[0] = stationary_distribution();
  for (int t = 1; t < dims_.T; ++t)
    marginals[t] = matrix(t).transpose() * marginals[t - 1];
  return marginals;
}

PeriodicLogitTransition PeriodicLogitTransition::permuted(const std::vector<int>& perm) const {
  const int K = dims_.K;
  const int C = dims_.trig_dim();
  if (static_cast<int>(perm.size()) != K)
    throw DataError("permuted: permutation size must equal K");

  // Old logit of column j in row i (reference column K-1 has logit 0).
  auto old_beta = [&](int i, int j, int c) {
    return j == K - 1 ? 0.0 : beta(i, j, c);
  };

  PeriodicLogitTransition out(dims_);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K - 1; ++j)
      for (int c = 0; c < C; ++c)
        out.beta(i, j, c) =
            old_beta(perm[i], perm[j], c) - old_beta(perm[i], perm[K - 1], c);
  return out;
}

}  // namespace shmm
