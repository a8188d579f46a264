#include "shmm/emissions.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace shmm {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_normal_pdf(double y, double mean, double var) {
  const double r = y - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + r * r / var);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Raw moment E[Y^j] for Y ~ N(mean, var): M_j = mean M_{j-1} + (j-1) var M_{j-2}.
double gaussian_raw_moment(double mean, double var, int j) {
  double m0 = 1.0, m1 = mean;
  if (j == 0) return m0;
  for (int i = 2; i <= j; ++i) {
    double m2 = mean * m1 + (i - 1) * var * m0;
    m0 = m1;
    m1 = m2;
  }
  return m1;
}

double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                            double fa, double fm, double fb, double whole, double tol,
                            int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 30);
}

// Integrates phi against the continuous density exp(log_pdf) over [lo, hi].
double quadrature_feature(const std::function<double(double)>& log_pdf, const Feature& phi,
                          double lo, double hi) {
  auto integrand = [&](double y) {
    const double lp = log_pdf(y);
    return std::isfinite(lp) ? phi.eval(y) * std::exp(lp) : 0.0;
  };
  const double v = adaptive_simpson(integrand, lo, hi, 1e-12);
  if (!std::isfinite(v))
    throw NumericalError("feature quadrature produced a non-finite integral");
  return v;
}

std::vector<int> ascending_order(const Eigen::VectorXd& keys) {
  std::vector<int> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return keys(a) < keys(b); });
  return order;
}

// Reorders columns [offset, offset + order.size()) of row k of `m` by `order`.
void reorder_row(Eigen::MatrixXd& m, int k, int offset, const std::vector<int>& order) {
  const Eigen::RowVectorXd tmp = m.row(k);
  for (std::size_t j = 0; j < order.size(); ++j)
    m(k, offset + static_cast<int>(j)) = tmp(offset + order[j]);
}

}  // namespace

double EmissionFamily::weighted_log_likelihood(std::span<const int> phases,
                                               std::span<const double> values,
                                               const Eigen::MatrixXd& w) const {
  double total = 0.0;
  const int n = static_cast<int>(values.size());
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < states(); ++k)
      if (w(i, k) > 0.0) total += w(i, k) * log_density(k, phases[i], values[i]);
  return total;
}

// ---------------------------------------------------------------------------
// GaussianPeriodicMean

GaussianPeriodicMean::GaussianPeriodicMean(int K, int T, int M, int degree)
    : T_(T), degree_(degree) {
  if (K < 1 || T < 1 || M < 1 || degree < 0)
    throw DataError("GaussianPeriodicMean: invalid dimensions");
  weights = Eigen::MatrixXd::Constant(K, M, 1.0 / M);
  level = Eigen::VectorXd::Zero(K);
  trig = Eigen::MatrixXd::Zero(K, 2 * degree);
  variances = Eigen::MatrixXd::Ones(K, M);
}

double GaussianPeriodicMean::mean_at(int k, int t) const {
  double m = level(k);
  if (degree_ > 0) m += trig_basis_nc(phase_of(t, T_), T_, degree_).dot(trig.row(k));
  return m;
}

void GaussianPeriodicMean::validate() const {
  for (int k = 0; k < states(); ++k) {
    if (std::abs(weights.row(k).sum() - 1.0) > 1e-12 || weights.row(k).minCoeff() < 0.0)
      throw DataError("GaussianPeriodicMean: weights row " + std::to_string(k) +
                      " is not a probability vector");
    if (variances.row(k).minCoeff() < variance_floor)
      throw DataError("GaussianPeriodicMean: variance below floor in state " +
                      std::to_string(k));
  }
}

double GaussianPeriodicMean::log_density(int k, int t, double y) const {
  const double m = mean_at(k, t);
  const int M = mixture_size();
  if (M == 1) return log_normal_pdf(y, m, variances(k, 0));
  Eigen::VectorXd terms(M);
  for (int c = 0; c < M; ++c)
    terms(c) = std::log(weights(k, c)) + log_normal_pdf(y, m, variances(k, c));
  return log_sum_exp(terms);
}

double GaussianPeriodicMean::sample(int k, int t, SplitMix64& rng) const {
  const int c = rng.categorical(weights.row(k), mixture_size());
  return mean_at(k, t) + std::sqrt(variances(k, c)) * rng.normal();
}

double GaussianPeriodicMean::integrate_feature(int k, int t, const Feature& phi) const {
  const double m = mean_at(k, t);
  double total = 0.0;
  switch (phi.kind) {
    case Feature::Kind::exp_moment:
      for (int c = 0; c < mixture_size(); ++c)
        total += weights(k, c) *
                 std::exp(-phi.s * m + 0.5 * phi.s * phi.s * variances(k, c));
      break;
    case Feature::Kind::indicator:
      for (int c = 0; c < mixture_size(); ++c) {
        const double sd = std::sqrt(variances(k, c));
        const double upper = std::isfinite(phi.hi) ? normal_cdf((phi.hi - m) / sd) : 1.0;
        const double lower = std::isfinite(phi.lo) ? normal_cdf((phi.lo - m) / sd) : 0.0;
        total += weights(k, c) * (upper - lower);
      }
      break;
    case Feature::Kind::moment:
      if (std::isfinite(phi.clip)) {
        const double sd = std::sqrt(variances.row(k).maxCoeff());
        total = quadrature_feature([&](double y) { return log_density(k, t, y); }, phi,
                                   m - 15.0 * sd, m + 15.0 * sd);
      } else {
        for (int c = 0; c < mixture_size(); ++c)
          total += weights(k, c) * gaussian_raw_moment(m, variances(k, c), phi.power);
      }
      break;
  }
  if (!std::isfinite(total))
    throw NumericalError("GaussianPeriodicMean: non-finite feature integral");
  return total;
}

MStepReport GaussianPeriodicMean::weighted_mstep(std::span<const int> phases,
                                                 std::span<const double> values,
                                                 const Eigen::MatrixXd& w,
                                                 const MStepOptions& opt) {
  const int n = static_cast<int>(values.size());
  const int M = mixture_size();
  const int P = 1 + 2 * degree_;  // regression coefficients per state
  MStepReport report;
  report.objective_before = weighted_log_likelihood(phases, values, w);

  // Regressors depend on the phase only.
  Eigen::MatrixXd design(T_, P);
  for (int t = 1; t <= T_; ++t) {
    design(t - 1, 0) = 1.0;
    if (degree_ > 0) design.row(t - 1).tail(2 * degree_) = trig_basis_nc(t, T_, degree_);
  }

  for (int k = 0; k < states(); ++k) {
    const double total_weight = w.col(k).sum();
    if (total_weight < opt.weight_floor) {
      report.skipped_states.push_back(k);
      continue;
    }

    const Eigen::VectorXd old_weights = weights.row(k).transpose();
    const double old_level = level(k);
    const Eigen::VectorXd old_trig = trig.row(k).transpose();
    const Eigen::VectorXd old_vars = variances.row(k).transpose();
    double state_before = 0.0;
    for (int i = 0; i < n; ++i)
      if (w(i, k) > 0.0) state_before += w(i, k) * log_density(k, phases[i], values[i]);

    // Inner responsibilities over mixture components (log space).
    Eigen::MatrixXd resp(n, M);
    for (int i = 0; i < n; ++i) {
      if (w(i, k) <= 0.0) {
        resp.row(i).setZero();
        continue;
      }
      if (M == 1) {
        resp(i, 0) = w(i, k);
        continue;
      }
      const double m = mean_at(k, phases[i]);
      Eigen::VectorXd lp(M);
      for (int c = 0; c < M; ++c)
        lp(c) = std::log(weights(k, c)) + log_normal_pdf(values[i], m, variances(k, c));
      const double norm = log_sum_exp(lp);
      for (int c = 0; c < M; ++c) resp(i, c) = w(i, k) * std::exp(lp(c) - norm);
    }

    const Eigen::VectorXd comp_weight = resp.colwise().sum().transpose();
    weights.row(k) = (comp_weight / total_weight).cwiseMax(0.0).transpose();
    weights.row(k) /= weights.row(k).sum();

    // Weighted least squares for (level, trig) with precision weights from
    // the current variances, pooled over components.
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(P, P);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(P);
    for (int i = 0; i < n; ++i) {
      double omega = 0.0;
      for (int c = 0; c < M; ++c) omega += resp(i, c) / variances(k, c);
      if (omega <= 0.0) continue;
      const auto z = design.row(phases[i] - 1);
      xtx.noalias() += omega * z.transpose() * z;
      xty.noalias() += omega * values[i] * z.transpose();
    }
    const Eigen::VectorXd coef = xtx.colPivHouseholderQr().solve(xty);
    level(k) = coef(0);
    if (degree_ > 0) trig.row(k) = coef.tail(2 * degree_).transpose();

    // Closed-form weighted variances around the updated mean.
    for (int c = 0; c < M; ++c) {
      if (comp_weight(c) <= opt.weight_floor) continue;
      double ss = 0.0;
      for (int i = 0; i < n; ++i) {
        if (resp(i, c) <= 0.0) continue;
        const double r = values[i] - mean_at(k, phases[i]);
        ss += resp(i, c) * r * r;
      }
      variances(k, c) = std::max(variance_floor, ss / comp_weight(c));
    }

    const std::vector<int> order = ascending_order(variances.row(k).transpose());
    reorder_row(weights, k, 0, order);
    reorder_row(variances, k, 0, order);

    double state_after = 0.0;
    for (int i = 0; i < n; ++i)
      if (w(i, k) > 0.0) state_after += w(i, k) * log_density(k, phases[i], values[i]);
    if (state_after < state_before) {
      weights.row(k) = old_weights.transpose();
      level(k) = old_level;
      trig.row(k) = old_trig.transpose();
      variances.row(k) = old_vars.transpose();
      report.reverted_states.push_back(k);
    }
  }

  report.objective_after = weighted_log_likelihood(phases, values, w);
  return report;
}

std::vector<double> GaussianPeriodicMean::state_params(int k) const {
  std::vector<double> p;
  p.push_back(level(k));
  for (int c = 0; c < trig.cols(); ++c) p.push_back(trig(k, c));
  for (int c = 0; c < mixture_size(); ++c) p.push_back(weights(k, c));
  for (int c = 0; c < mixture_size(); ++c) p.push_back(variances(k, c));
  return p;
}

void GaussianPeriodicMean::permute_states(const std::vector<int>& perm) {
  const GaussianPeriodicMean old = *this;
  for (int k = 0; k < states(); ++k) {
    weights.row(k) = old.weights.row(perm[k]);
    level(k) = old.level(perm[k]);
    trig.row(k) = old.trig.row(perm[k]);
    variances.row(k) = old.variances.row(perm[k]);
  }
}

double GaussianPeriodicMean::scale_hint() const {
  double hint = 0.0;
  for (int k = 0; k < states(); ++k)
    hint = std::max(hint, std::abs(level(k)) + trig.row(k).cwiseAbs().sum() +
                              std::sqrt(variances.row(k).maxCoeff()));
  return std::max(hint, 1e-12);
}

// ---------------------------------------------------------------------------
// ExpPeriodicScale

ExpPeriodicScale::ExpPeriodicScale(int K, int T, int M, int degree)
    : T_(T), degree_(degree) {
  if (K < 1 || T < 1 || M < 1 || degree < 0)
    throw DataError("ExpPeriodicScale: invalid dimensions");
  weights = Eigen::MatrixXd::Constant(K, M, 1.0 / M);
  rates = Eigen::MatrixXd::Ones(K, M);
  for (int c = 0; c < M; ++c) rates.col(c).array() = c + 1.0;
  trig = Eigen::MatrixXd::Zero(K, 2 * degree);
}

double ExpPeriodicScale::scale_at(int k, int t) const {
  double s = 1.0;
  if (degree_ > 0) s += trig_basis_nc(phase_of(t, T_), T_, degree_).dot(trig.row(k));
  return s;
}

void ExpPeriodicScale::validate() const {
  for (int k = 0; k < states(); ++k) {
    if (std::abs(weights.row(k).sum() - 1.0) > 1e-12 || weights.row(k).minCoeff() < 0.0)
      throw DataError("ExpPeriodicScale: weights row " + std::to_string(k) +
                      " is not a probability vector");
    if (rates.row(k).minCoeff() <= 0.0)
      throw DataError("ExpPeriodicScale: non-positive rate in state " + std::to_string(k));
    for (int t = 1; t <= T_; ++t)
      if (scale_at(k, t) < scale_floor)
        throw DataError("ExpPeriodicScale: scale below floor at state " +
                        std::to_string(k) + ", phase " + std::to_string(t));
  }
}

double ExpPeriodicScale::log_density(int k, int t, double y) const {
  if (y < 0.0)
    throw DataError("ExpPeriodicScale: observation " + std::to_string(y) +
                    " outside the support [0, inf)");
  const double s = scale_at(k, t);
  const int M = mixture_size();
  Eigen::VectorXd terms(M);
  for (int c = 0; c < M; ++c) {
    const double r = rates(k, c) / s;
    terms(c) = std::log(weights(k, c)) + std::log(r) - r * y;
  }
  return log_sum_exp(terms);
}

double ExpPeriodicScale::sample(int k, int t, SplitMix64& rng) const {
  const int c = rng.categorical(weights.row(k), mixture_size());
  return rng.exponential(rates(k, c) / scale_at(k, t));
}

double ExpPeriodicScale::mean(int k, int t) const {
  double m = 0.0;
  for (int c = 0; c < mixture_size(); ++c) m += weights(k, c) / rates(k, c);
  return m * scale_at(k, t);
}

double ExpPeriodicScale::integrate_feature(int k, int t, const Feature& phi) const {
  const double s = scale_at(k, t);
  double total = 0.0;
  switch (phi.kind) {
    case Feature::Kind::exp_moment:
      for (int c = 0; c < mixture_size(); ++c) {
        const double r = rates(k, c) / s;
        total += weights(k, c) * r / (r + phi.s);
      }
      break;
    case Feature::Kind::indicator: {
      if (phi.hi <= 0.0) break;
      const double lo = std::max(phi.lo, 0.0);
      for (int c = 0; c < mixture_size(); ++c) {
        const double r = rates(k, c) / s;
        const double upper = std::isfinite(phi.hi) ? std::exp(-r * phi.hi) : 0.0;
        total += weights(k, c) * (std::exp(-r * lo) - upper);
      }
      break;
    }
    case Feature::Kind::moment:
      if (std::isfinite(phi.clip)) {
        const double span = 50.0 * s / rates.row(k).minCoeff();
        total = quadrature_feature([&](double y) { return log_density(k, t, y); }, phi,
                                   0.0, span);
      } else {
        for (int c = 0; c < mixture_size(); ++c) {
          const double r = rates(k, c) / s;
          total += weights(k, c) * factorial(phi.power) / std::pow(r, phi.power);
        }
      }
      break;
  }
  if (!std::isfinite(total))
    throw NumericalError("ExpPeriodicScale: non-finite feature integral");
  return total;
}

ExpPeriodicScale::ScaleObjective ExpPeriodicScale::scale_objective(
    const Eigen::VectorXd& delta, const Eigen::VectorXd& weight_by_phase,
    const Eigen::VectorXd& rate_weighted_by_phase, int T, int degree) {
  ScaleObjective out;
  out.value = 0.0;
  out.grad = Eigen::VectorXd::Zero(2 * degree);
  for (int t = 1; t <= T; ++t) {
    const double R = weight_by_phase(t - 1);
    const double A = rate_weighted_by_phase(t - 1);
    if (R == 0.0 && A == 0.0) continue;
    const Eigen::VectorXd z = trig_basis_nc(t, T, degree);
    const double s = 1.0 + z.dot(delta);
    out.value += -R * std::log(s) - A / s;
    out.grad += (-R / s + A / (s * s)) * z;
  }
  return out;
}

MStepReport ExpPeriodicScale::weighted_mstep(std::span<const int> phases,
                                             std::span<const double> values,
                                             const Eigen::MatrixXd& w,
                                             const MStepOptions& opt) {
  const int n = static_cast<int>(values.size());
  const int M = mixture_size();
  MStepReport report;
  report.objective_before = weighted_log_likelihood(phases, values, w);

  for (int k = 0; k < states(); ++k) {
    const double total_weight = w.col(k).sum();
    if (total_weight < opt.weight_floor) {
      report.skipped_states.push_back(k);
      continue;
    }

    const Eigen::VectorXd old_weights = weights.row(k).transpose();
    const Eigen::VectorXd old_rates = rates.row(k).transpose();
    const Eigen::VectorXd old_trig = trig.row(k).transpose();
    double state_before = 0.0;
    for (int i = 0; i < n; ++i)
      if (w(i, k) > 0.0) state_before += w(i, k) * log_density(k, phases[i], values[i]);

    for (int round = 0; round < opt.inner_rounds; ++round) {
      // Responsibilities under the current parameters.
      Eigen::MatrixXd resp(n, M);
      for (int i = 0; i < n; ++i) {
        if (w(i, k) <= 0.0) {
          resp.row(i).setZero();
          continue;
        }
        const double s = scale_at(k, phases[i]);
        Eigen::VectorXd lp(M);
        for (int c = 0; c < M; ++c) {
          const double r = rates(k, c) / s;
          lp(c) = std::log(weights(k, c)) + std::log(r) - r * values[i];
        }
        const double norm = log_sum_exp(lp);
        for (int c = 0; c < M; ++c) resp(i, c) = w(i, k) * std::exp(lp(c) - norm);
      }

      const Eigen::VectorXd comp_weight = resp.colwise().sum().transpose();
      weights.row(k) = (comp_weight / total_weight).cwiseMax(0.0).transpose();
      weights.row(k) /= weights.row(k).sum();

      // Closed-form rates given the scale path.
      for (int c = 0; c < M; ++c) {
        if (comp_weight(c) <= opt.weight_floor) continue;
        double scaled_sum = 0.0;
        for (int i = 0; i < n; ++i)
          if (resp(i, c) > 0.0)
            scaled_sum += resp(i, c) * values[i] / scale_at(k, phases[i]);
        if (scaled_sum > 0.0) rates(k, c) = comp_weight(c) / scaled_sum;
      }

      if (degree_ == 0) continue;

      // Scale coefficients: gradient ascent with backtracking, keeping
      // 1 + sigma_k(t) >= scale_floor at every phase.
      Eigen::VectorXd weight_by_phase = Eigen::VectorXd::Zero(T_);
      Eigen::VectorXd rate_weighted = Eigen::VectorXd::Zero(T_);
      for (int i = 0; i < n; ++i) {
        if (w(i, k) <= 0.0) continue;
        double a = 0.0;
        for (int c = 0; c < M; ++c) a += resp(i, c) * rates(k, c);
        weight_by_phase(phases[i] - 1) += w(i, k);
        rate_weighted(phases[i] - 1) += a * values[i];
      }

      Eigen::VectorXd delta = trig.row(k).transpose();
      auto feasible = [&](const Eigen::VectorXd& cand) {
        for (int t = 1; t <= T_; ++t)
          if (1.0 + trig_basis_nc(t, T_, degree_).dot(cand) < scale_floor) return false;
        return true;
      };
      ScaleObjective cur = scale_objective(delta, weight_by_phase, rate_weighted, T_, degree_);
      for (int it = 0; it < 25; ++it) {
        const double gnorm = cur.grad.lpNorm<Eigen::Infinity>();
        if (gnorm < 1e-10 * std::max(1.0, std::abs(cur.value))) break;
        double step = 1.0 / std::max(1.0, gnorm);
        bool moved = false;
        for (int bt = 0; bt < 40; ++bt) {
          Eigen::VectorXd cand = delta + step * cur.grad;
          if (feasible(cand)) {
            ScaleObjective next =
                scale_objective(cand, weight_by_phase, rate_weighted, T_, degree_);
            if (next.value > cur.value) {
              delta = cand;
              cur = next;
              moved = true;
              break;
            }
          }
          step *= 0.5;
        }
        if (!moved) break;
      }
      trig.row(k) = delta.transpose();
    }

    const std::vector<int> order = ascending_order(rates.row(k).transpose());
    reorder_row(weights, k, 0, order);
    reorder_row(rates, k, 0, order);

    double state_after = 0.0;
    for (int i = 0; i < n; ++i)
      if (w(i, k) > 0.0) state_after += w(i, k) * log_density(k, phases[i], values[i]);
    if (state_after < state_before) {
      weights.row(k) = old_weights.transpose();
      rates.row(k) = old_rates.transpose();
      trig.row(k) = old_trig.transpose();
      report.reverted_states.push_back(k);
    }
  }

  report.objective_after = weighted_log_likelihood(phases, values, w);
  return report;
}

std::vector<double> ExpPeriodicScale::state_params(int k) const {
  std::vector<double> p;
  for (int c = 0; c < mixture_size(); ++c) p.push_back(weights(k, c));
  for (int c = 0; c < mixture_size(); ++c) p.push_back(rates(k, c));
  for (int c = 0; c < trig.cols(); ++c) p.push_back(trig(k, c));
  return p;
}

void ExpPeriodicScale::permute_states(const std::vector<int>& perm) {
  const ExpPeriodicScale old = *this;
  for (int k = 0; k < states(); ++k) {
    weights.row(k) = old.weights.row(perm[k]);
    rates.row(k) = old.rates.row(perm[k]);
    trig.row(k) = old.trig.row(perm[k]);
  }
}

double ExpPeriodicScale::scale_hint() const {
  double hint = 0.0;
  for (int k = 0; k < states(); ++k)
    hint = std::max(hint, (1.0 + trig.row(k).cwiseAbs().sum()) / rates.row(k).minCoeff());
  return std::max(hint, 1e-12);
}

// ---------------------------------------------------------------------------
// ZeroInflatedExpMixture

ZeroInflatedExpMixture::ZeroInflatedExpMixture(int K, int T, int M) : T_(T) {
  if (K < 1 || T < 1 || M < 2)
    throw DataError("ZeroInflatedExpMixture: needs K >= 1, T >= 1 and M >= 2");
  weights = Eigen::MatrixXd::Constant(K, M, 1.0 / M);
  rates = Eigen::MatrixXd::Ones(K, M - 1);
  for (int c = 0; c + 1 < M; ++c) rates.col(c).array() = c + 1.0;
}

void ZeroInflatedExpMixture::validate() const {
  for (int k = 0; k < states(); ++k) {
    if (std::abs(weights.row(k).sum() - 1.0) > 1e-12 || weights.row(k).minCoeff() < 0.0)
      throw DataError("ZeroInflatedExpMixture: weights row " + std::to_string(k) +
                      " is not a probability vector");
    if (rates.row(k).minCoeff() <= 0.0)
      throw DataError("ZeroInflatedExpMixture: non-positive rate in state " +
                      std::to_string(k));
  }
}

double ZeroInflatedExpMixture::log_density(int k, int /*t*/, double y) const {
  if (y < 0.0)
    throw DataError("ZeroInflatedExpMixture: observation " + std::to_string(y) +
                    " outside the support [0, inf)");
  if (y == 0.0) return std::log(weights(k, 0));
  const int M = mixture_size();
  Eigen::VectorXd terms(M - 1);
  for (int c = 1; c < M; ++c)
    terms(c - 1) =
        std::log(weights(k, c)) + std::log(rates(k, c - 1)) - rates(k, c - 1) * y;
  return log_sum_exp(terms);
}

double ZeroInflatedExpMixture::sample(int k, int /*t*/, SplitMix64& rng) const {
  const int c = rng.categorical(weights.row(k), mixture_size());
  if (c == 0) return 0.0;
  return rng.exponential(rates(k, c - 1));
}

double ZeroInflatedExpMixture::mean(int k, int /*t*/) const {
  double m = 0.0;
  for (int c = 1; c < mixture_size(); ++c) m += weights(k, c) / rates(k, c - 1);
  return m;
}

double ZeroInflatedExpMixture::integrate_feature(int k, int t, const Feature& phi) const {
  double total = 0.0;
  const double at_zero = phi.eval(0.0);
  switch (phi.kind) {
    case Feature::Kind::exp_moment:
      total = weights(k, 0) * at_zero;
      for (int c = 1; c < mixture_size(); ++c)
        total += weights(k, c) * rates(k, c - 1) / (rates(k, c - 1) + phi.s);
      break;
    case Feature::Kind::indicator: {
      total = weights(k, 0) * at_zero;
      const double lo = std::max(phi.lo, 0.0);
      if (phi.hi > 0.0)
        for (int c = 1; c < mixture_size(); ++c) {
          const double r = rates(k, c - 1);
          const double upper = std::isfinite(phi.hi) ? std::exp(-r * phi.hi) : 0.0;
          total += weights(k, c) * (std::exp(-r * lo) - upper);
        }
      break;
    }
    case Feature::Kind::moment:
      total = weights(k, 0) * at_zero;
      if (std::isfinite(phi.clip)) {
        // Continuous part; the atom contributed phi(0) above.
        const double span = 50.0 / rates.row(k).minCoeff();
        auto log_pos = [&](double y) { return y > 0.0 ? log_density(k, t, y) : -kInf; };
        total += quadrature_feature(log_pos, phi, 0.0, span);
      } else {
        for (int c = 1; c < mixture_size(); ++c)
          total += weights(k, c) * factorial(phi.power) /
                   std::pow(rates(k, c - 1), phi.power);
      }
      break;
  }
  if (!std::isfinite(total))
    throw NumericalError("ZeroInflatedExpMixture: non-finite feature integral");
  return total;
}

MStepReport ZeroInflatedExpMixture::weighted_mstep(std::span<const int> phases,
                                                   std::span<const double> values,
                                                   const Eigen::MatrixXd& w,
                                                   const MStepOptions& opt) {
  const int n = static_cast<int>(values.size());
  const int M = mixture_size();
  MStepReport report;
  report.objective_before = weighted_log_likelihood(phases, values, w);

  for (int k = 0; k < states(); ++k) {
    const double total_weight = w.col(k).sum();
    if (total_weight < opt.weight_floor) {
      report.skipped_states.push_back(k);
      continue;
    }

    const Eigen::VectorXd old_weights = weights.row(k).transpose();
    const Eigen::VectorXd old_rates = rates.row(k).transpose();
    double state_before = 0.0;
    for (int i = 0; i < n; ++i)
      if (w(i, k) > 0.0) state_before += w(i, k) * log_density(k, phases[i], values[i]);

    // At y = 0 the point mass is the only component with positive density,
    // so responsibilities are closed form.
    Eigen::VectorXd comp_weight = Eigen::VectorXd::Zero(M);
    Eigen::VectorXd weighted_sum = Eigen::VectorXd::Zero(M);
    for (int i = 0; i < n; ++i) {
      if (w(i, k) <= 0.0) continue;
      if (values[i] == 0.0) {
        comp_weight(0) += w(i, k);
        continue;
      }
      Eigen::VectorXd lp(M - 1);
      for (int c = 1; c < M; ++c)
        lp(c - 1) = std::log(weights(k, c)) + std::log(rates(k, c - 1)) -
                    rates(k, c - 1) * values[i];
      const double norm = log_sum_exp(lp);
      for (int c = 1; c < M; ++c) {
        const double r = w(i, k) * std::exp(lp(c - 1) - norm);
        comp_weight(c) += r;
        weighted_sum(c) += r * values[i];
      }
    }

    weights.row(k) = (comp_weight / total_weight).cwiseMax(0.0).transpose();
    weights.row(k) /= weights.row(k).sum();
    for (int c = 1; c < M; ++c)
      if (comp_weight(c) > opt.weight_floor && weighted_sum(c) > 0.0)
        rates(k, c - 1) = comp_weight(c) / weighted_sum(c);

    const std::vector<int> order = ascending_order(rates.row(k).transpose());
    reorder_row(weights, k, 1, order);
    reorder_row(rates, k, 0, order);

    double state_after = 0.0;
    for (int i = 0; i < n; ++i)
      if (w(i, k) > 0.0) state_after += w(i, k) * log_density(k, phases[i], values[i]);
    if (state_after < state_before) {
      weights.row(k) = old_weights.transpose();
      rates.row(k) = old_rates.transpose();
      report.reverted_states.push_back(k);
    }
  }

  report.objective_after = weighted_log_likelihood(phases, values, w);
  return report;
}

std::vector<double> ZeroInflatedExpMixture::state_params(int k) const {
  std::vector<double> p;
  for (int c = 0; c < mixture_size(); ++c) p.push_back(weights(k, c));
  for (int c = 0; c + 1 < mixture_size(); ++c) p.push_back(rates(k, c));
  return p;
}

void ZeroInflatedExpMixture::permute_states(const std::vector<int>& perm) {
  const ZeroInflatedExpMixture old = *this;
  for (int k = 0; k < states(); ++k) {
    weights.row(k) = old.weights.row(perm[k]);
    rates.row(k) = old.rates.row(perm[k]);
  }
}

double ZeroInflatedExpMixture::scale_hint() const {
  double hint = 0.0;
  for (int k = 0; k < states(); ++k) hint = std::max(hint, 1.0 / rates.row(k).minCoeff());
  return std::max(hint, 1e-12);
}

// ---------------------------------------------------------------------------

double linear_independence_check(const EmissionFamily& family, int t,
                                 const FeatureMap& features, int count) {
  const int K = family.states();
  if (count > features.size())
    throw DataError("linear_independence_check: feature map has " +
                    std::to_string(features.size()) + " features, " +
                    std::to_string(count) + " requested");
  if (count < K)
    throw DataError("linear_independence_check: need at least K = " + std::to_string(K) +
                    " features");
  Eigen::MatrixXd O(count, K);
  for (int a = 0; a < count; ++a)
    for (int k = 0; k < K; ++k) O(a, k) = family.integrate_feature(k, t, features[a]);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(O);
  return svd.singularValues().minCoeff();
}

}  // namespace shmm
