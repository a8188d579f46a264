#include "shmm/chunked.hpp"

#include <cmath>

namespace shmm {

ChunkedHMM::ChunkedHMM(const SeasonalHMM& model, long long cap)
    : model_(model), K_(model.dims().K), T_(model.dims().T) {
  num_states_ = 1;
  for (int t = 0; t < T_; ++t) {
    num_states_ *= K_;
    if (num_states_ > cap)
      throw SizeError("ChunkedHMM: K^T = " + std::to_string(model.dims().K) + "^" +
                      std::to_string(T_) + " exceeds cap " + std::to_string(cap));
  }

  const long long S = num_states_;
  std::vector<Eigen::MatrixXd> q(T_);
  for (int t = 1; t <= T_; ++t) q[t - 1] = model.transition().matrix(t);

  // Within-block chain factor: P(v_2..v_T | v_1) under Q(1..T-1), shared by
  // the initial distribution and every transition row.
  Eigen::VectorXd within(S);
  std::vector<std::vector<int>> tuples(S);
  for (long long v = 0; v < S; ++v) {
    tuples[v] = decode(v);
    double w = 1.0;
    for (int t = 1; t < T_; ++t) w *= q[t - 1](tuples[v][t - 1], tuples[v][t]);
    within(v) = w;
  }

  initial_.resize(S);
  for (long long v = 0; v < S; ++v) initial_(v) = model.pi()(tuples[v][0]) * within(v);

  transition_.resize(S, S);
  for (long long u = 0; u < S; ++u) {
    const int last = tuples[u][T_ - 1];
    for (long long v = 0; v < S; ++v)
      transition_(u, v) = q[T_ - 1](last, tuples[v][0]) * within(v);
  }

  for (long long u = 0; u < S; ++u) {
    const double rowsum = transition_.row(u).sum();
    if (std::abs(rowsum - 1.0) > 1e-10)
      throw NumericalError("ChunkedHMM: row " + std::to_string(u) + " sums to " +
                           std::to_string(rowsum));
  }
}

std::vector<int> ChunkedHMM::decode(long long u) const {
  std::vector<int> tuple(T_);
  for (int t = T_ - 1; t >= 0; --t) {
    tuple[t] = static_cast<int>(u % K_);
    u /= K_;
  }
  return tuple;
}

long long ChunkedHMM::encode(std::span<const int> tuple) const {
  long long u = 0;
  for (int t = 0; t < T_; ++t) u = u * K_ + tuple[t];
  return u;
}

double ChunkedHMM::block_log_density(long long u, std::span<const double> w) const {
  const std::vector<int> tuple = decode(u);
  double total = 0.0;
  for (int t = 0; t < T_; ++t) total += model_.log_emission(tuple[t], t + 1, w[t]);
  return total;
}

double ChunkedHMM::log_likelihood(std::span<const double> ys) const {
  const long long n = static_cast<long long>(ys.size());
  if (n == 0 || n % T_ != 0)
    throw DataError("ChunkedHMM::log_likelihood: length must be a positive multiple of T");
  const long long J = n / T_;
  const long long S = num_states_;

  Eigen::VectorXd la(S);
  for (long long u = 0; u < S; ++u)
    la(u) = std::log(initial_(u)) + block_log_density(u, ys.subspan(0, T_));

  Eigen::MatrixXd logq = transition_.array().log().matrix();
  Eigen::VectorXd next(S), terms(S);
  for (long long j = 1; j < J; ++j) {
    const auto w = ys.subspan(j * T_, T_);
    for (long long v = 0; v < S; ++v) {
      for (long long u = 0; u < S; ++u) terms(u) = la(u) + logq(u, v);
      next(v) = log_sum_exp(terms) + block_log_density(v, w);
    }
    la = next;
  }
  return log_sum_exp(la);
}

}  // namespace shmm
