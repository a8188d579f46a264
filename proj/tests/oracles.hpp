// Independent reference implementations used as test oracles. Everything in
// here deliberately avoids the library's own inference code paths: path
// enumeration for likelihoods and posteriors, a direct linear solve for
// stationary distributions, a scaled (non-log) textbook forward pass, and
// simple quadrature/grid searches.

#ifndef SHMM_TEST_ORACLES_HPP
#define SHMM_TEST_ORACLES_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "shmm/model.hpp"
#include "shmm/rng.hpp"

namespace oracles {

// All hidden paths of length n over K states.
inline void for_each_path(int K, int n, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> path(n, 0);
  while (true) {
    fn(path);
    int pos = n - 1;
    while (pos >= 0 && ++path[pos] == K) path[pos--] = 0;
    if (pos < 0) break;
  }
}

struct Enumeration {
  double loglik = 0.0;
  Eigen::MatrixXd marginal;              // n x K
  std::vector<Eigen::MatrixXd> pairwise; // n-1 of K x K
  std::vector<int> best_path;            // complete-likelihood argmax
};

// Exhaustive enumeration over all K^n hidden paths.
inline Enumeration enumerate_paths(const shmm::SeasonalHMM& model,
                                   std::span<const double> obs, const Eigen::VectorXd& pi,
                                   int start_phase = 1) {
  const int n = static_cast<int>(obs.size());
  const int K = model.dims().K;
  const int T = model.dims().T;

  std::vector<int> phase(n);
  for (int i = 0; i < n; ++i) phase[i] = shmm::phase_of(start_phase + i, T);

  Enumeration out;
  out.marginal = Eigen::MatrixXd::Zero(n, K);
  out.pairwise.assign(n - 1, Eigen::MatrixXd::Zero(K, K));
  double total = 0.0;
  double best_logp = -std::numeric_limits<double>::infinity();

  for_each_path(K, n, [&](const std::vector<int>& path) {
    double logp = std::log(pi(path[0])) + model.log_emission(path[0], phase[0], obs[0]);
    for (int i = 1; i < n; ++i) {
      logp += std::log(model.transition().matrix(phase[i - 1])(path[i - 1], path[i]));
      logp += model.log_emission(path[i], phase[i], obs[i]);
    }
    const double p = std::exp(logp);
    total += p;
    for (int i = 0; i < n; ++i) out.marginal(i, path[i]) += p;
    for (int i = 0; i + 1 < n; ++i) out.pairwise[i](path[i], path[i + 1]) += p;
    if (logp > best_logp) {
      best_logp = logp;
      out.best_path = path;
    }
  });

  out.loglik = std::log(total);
  out.marginal /= total;
  for (auto& pw : out.pairwise) pw /= total;
  return out;
}

// Stationary distribution by a direct linear solve: rows of (P^T - I) with
// the normalization sum(pi) = 1 appended.
inline Eigen::VectorXd stationary_direct(const Eigen::MatrixXd& P) {
  const int K = static_cast<int>(P.rows());
  Eigen::MatrixXd A(K + 1, K);
  A.topRows(K) = P.transpose() - Eigen::MatrixXd::Identity(K, K);
  A.bottomRows(1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(K + 1);
  b(K) = 1.0;
  return A.colPivHouseholderQr().solve(b);
}

// Scaled (non-log) textbook forward pass; returns the log-likelihood.
inline double scaled_forward(const Eigen::VectorXd& pi, const Eigen::MatrixXd& Q,
                             const Eigen::MatrixXd& emission_probs /* n x K */) {
  const int n = static_cast<int>(emission_probs.rows());
  const int K = static_cast<int>(pi.size());
  Eigen::VectorXd alpha(K);
  double loglik = 0.0;
  for (int k = 0; k < K; ++k) alpha(k) = pi(k) * emission_probs(0, k);
  double c = alpha.sum();
  loglik += std::log(c);
  alpha /= c;
  for (int i = 1; i < n; ++i) {
    Eigen::VectorXd next = Q.transpose() * alpha;
    for (int k = 0; k < K; ++k) next(k) *= emission_probs(i, k);
    c = next.sum();
    loglik += std::log(c);
    alpha = next / c;
  }
  return loglik;
}

// Adaptive Simpson quadrature (independent of the library's version).
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      double tol = 1e-10, int depth = 26) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  std::function<double(double, double, double, double, double, double, double, int)> rec =
      [&](double x0, double x1, double f0, double fmid, double f1, double acc, double t,
          int d) -> double {
    const double mid = 0.5 * (x0 + x1);
    const double lm = 0.5 * (x0 + mid), rm = 0.5 * (mid + x1);
    const double flm = f(lm), frm = f(rm);
    const double left = (mid - x0) / 6.0 * (f0 + 4.0 * flm + fmid);
    const double right = (x1 - mid) / 6.0 * (fmid + 4.0 * frm + f1);
    const double delta = left + right - acc;
    if (d <= 0 || std::abs(delta) <= 15.0 * t) return left + right + delta / 15.0;
    return rec(x0, mid, f0, flm, fmid, left, 0.5 * t, d - 1) +
           rec(mid, x1, fmid, frm, f1, right, 0.5 * t, d - 1);
  };
  return rec(a, b, fa, fm, fb, whole, tol, depth);
}

// Monotone trace check with slack.
inline bool non_decreasing(const std::vector<double>& trace, double slack = 1e-9) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i] < trace[i - 1] - slack) return false;
  return true;
}

}  // namespace oracles

#endif  // SHMM_TEST_ORACLES_HPP
