#include "shmm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <thread>

#include <json.hpp>

namespace shmm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Tables {
  std::vector<Eigen::MatrixXd> logq;  // [tau-1] for tau = 1..T
  Eigen::MatrixXd logf;               // n x K
  std::vector<int> phase;             // n entries in 1..T
};

Tables build_tables(const SeasonalHMM& model, std::span<const double> obs, int start_phase) {
  const int n = static_cast<int>(obs.size());
  const int K = model.dims().K;
  const int T = model.dims().T;
  if (n == 0) throw DataError("empty observation sequence");

  Tables tb;
  tb.logq.resize(T);
  for (int t = 1; t <= T; ++t) tb.logq[t - 1] = model.transition().log_matrix(t);

  tb.phase.resize(n);
  tb.logf.resize(n, K);
  for (int i = 0; i < n; ++i) {
    const int t = phase_of(start_phase + i, T);
    tb.phase[i] = t;
    double best = -kInf;
    for (int k = 0; k < K; ++k) {
      tb.logf(i, k) = model.log_emission(k, t, obs[i]);
      best = std::max(best, tb.logf(i, k));
    }
    if (!std::isfinite(best))
      throw DataError("observation " + std::to_string(i) +
                      " has zero emission density in every state");
  }
  return tb;
}

Eigen::MatrixXd forward_pass(const Tables& tb, const Eigen::VectorXd& pi) {
  const int n = static_cast<int>(tb.phase.size());
  const int K = static_cast<int>(pi.size());
  Eigen::MatrixXd la(n, K);
  for (int k = 0; k < K; ++k) la(0, k) = std::log(pi(k)) + tb.logf(0, k);
  Eigen::VectorXd terms(K);
  for (int i = 1; i < n; ++i) {
    const Eigen::MatrixXd& lq = tb.logq[tb.phase[i - 1] - 1];
    for (int l = 0; l < K; ++l) {
      for (int k = 0; k < K; ++k) terms(k) = la(i - 1, k) + lq(k, l);
      la(i, l) = log_sum_exp(terms) + tb.logf(i, l);
    }
  }
  return la;
}

}  // namespace

double log_likelihood(const SeasonalHMM& model, std::span<const double> obs,
                      const Eigen::VectorXd& pi, int start_phase) {
  const Tables tb = build_tables(model, obs, start_phase);
  const Eigen::MatrixXd la = forward_pass(tb, pi);
  const int n = static_cast<int>(obs.size());
  Eigen::VectorXd last = la.row(n - 1).transpose();
  return log_sum_exp(last);
}

double log_likelihood(const SeasonalHMM& model, std::span<const double> obs,
                      int start_phase) {
  return log_likelihood(model, obs, model.pi(), start_phase);
}

SmoothingResult forward_backward(const SeasonalHMM& model, std::span<const double> obs,
                                 const Eigen::VectorXd& pi, int start_phase) {
  const Tables tb = build_tables(model, obs, start_phase);
  const int n = static_cast<int>(obs.size());
  const int K = model.dims().K;

  const Eigen::MatrixXd la = forward_pass(tb, pi);

  Eigen::MatrixXd lb(n, K);
  lb.row(n - 1).setZero();
  Eigen::VectorXd terms(K);
  for (int i = n - 2; i >= 0; --i) {
    const Eigen::MatrixXd& lq = tb.logq[tb.phase[i] - 1];
    for (int k = 0; k < K; ++k) {
      for (int l = 0; l < K; ++l) terms(l) = lq(k, l) + tb.logf(i + 1, l) + lb(i + 1, l);
      lb(i, k) = log_sum_exp(terms);
    }
  }

  SmoothingResult res;
  Eigen::VectorXd last = la.row(n - 1).transpose();
  res.loglik = log_sum_exp(last);

  res.marginal.resize(n, K);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < K; ++k) res.marginal(i, k) = std::exp(la(i, k) + lb(i, k) - res.loglik);
    const double rowsum = res.marginal.row(i).sum();
    res.marginal.row(i) /= rowsum;
  }

  res.pairwise.resize(n - 1);
  for (int i = 0; i + 1 < n; ++i) {
    const Eigen::MatrixXd& lq = tb.logq[tb.phase[i] - 1];
    Eigen::MatrixXd& pw = res.pairwise[i];
    pw.resize(K, K);
    for (int k = 0; k < K; ++k)
      for (int l = 0; l < K; ++l)
        pw(k, l) =
            std::exp(la(i, k) + lq(k, l) + tb.logf(i + 1, l) + lb(i + 1, l) - res.loglik);
    pw /= pw.sum();
  }
  return res;
}

SmoothingResult forward_backward(const SeasonalHMM& model, std::span<const double> obs,
                                 int start_phase) {
  return forward_backward(model, obs, model.pi(), start_phase);
}

BetaObjective transition_objective(const PeriodicLogitTransition& tr,
                                   const std::vector<Eigen::MatrixXd>& counts) {
  const ModelDims& dims = tr.dims();
  const int K = dims.K;
  const int C = dims.trig_dim();
  BetaObjective out;
  out.grad.assign(tr.coefficients().size(), 0.0);

  for (int t = 1; t <= dims.T; ++t) {
    const Eigen::MatrixXd& cnt = counts[t - 1];
    if (cnt.size() == 0 || cnt.cwiseAbs().sum() == 0.0) continue;
    const Eigen::MatrixXd logq = tr.log_matrix(t);
    const Eigen::VectorXd z = trig_basis(t, dims.T, dims.d);

    for (int i = 0; i < K; ++i) {
      const double row_total = cnt.row(i).sum();
      for (int l = 0; l < K; ++l)
        if (cnt(i, l) != 0.0) out.value += cnt(i, l) * logq(i, l);
      for (int j = 0; j < K - 1; ++j) {
        const double coeff = cnt(i, j) - row_total * std::exp(logq(i, j));
        if (coeff == 0.0) continue;
        const std::size_t base = (static_cast<std::size_t>(i) * (K - 1) + j) * C;
        for (int c = 0; c < C; ++c) out.grad[base + c] += coeff * z(c);
      }
    }
  }
  return out;
}

namespace {

// Gradient ascent with backtracking on the transition-coefficient block.
// Returns true when the coefficients changed (objective improved).
bool improve_beta(PeriodicLogitTransition& tr, const std::vector<Eigen::MatrixXd>& counts) {
  const int max_outer = 100;
  const double grad_tol = 1e-6;

  std::vector<double> beta = tr.coefficients();
  if (beta.empty()) return false;
  const std::size_t dim = beta.size();

  BetaObjective cur = transition_objective(tr, counts);
  const double start_value = cur.value;
  std::vector<double> prev_beta, prev_grad;
  double step = 1.0;

  for (int it = 0; it < max_outer; ++it) {
    double gnorm = 0.0;
    for (double g : cur.grad) gnorm = std::max(gnorm, std::abs(g));
    if (gnorm < grad_tol) break;

    // Barzilai-Borwein step length after the first move, safeguarded by
    // backtracking below.
    if (!prev_beta.empty()) {
      double sy = 0.0, yy = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double s = beta[c] - prev_beta[c];
        const double y = cur.grad[c] - prev_grad[c];
        sy += s * y;
        yy += y * y;
      }
      step = (yy > 0.0 && std::isfinite(sy / yy)) ? std::abs(sy / yy) : 1.0;
      step = std::clamp(step, 1e-12, 1e6);
    } else {
      step = 1.0 / std::max(1.0, gnorm);
    }

    bool moved = false;
    for (int bt = 0; bt < 50; ++bt) {
      std::vector<double> cand = beta;
      for (std::size_t c = 0; c < dim; ++c) cand[c] += step * cur.grad[c];
      PeriodicLogitTransition trial(tr.dims(), cand);
      BetaObjective next = transition_objective(trial, counts);
      if (std::isfinite(next.value) && next.value > cur.value) {
        prev_beta = std::move(beta);
        prev_grad = std::move(cur.grad);
        beta = std::move(cand);
        cur = std::move(next);
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }

  if (cur.value > start_value) {
    tr.set_coefficients(beta);
    return true;
  }
  return false;
}

}  // namespace

EmOutcome em_step(SeasonalHMM& model, std::span<const double> obs, int start_phase,
                  bool pi_stationary) {
  const int n = static_cast<int>(obs.size());
  const int K = model.dims().K;
  const int T = model.dims().T;

  const SmoothingResult sm = forward_backward(model, obs, model.pi(), start_phase);

  EmOutcome outcome;
  outcome.loglik_before = sm.loglik;

  // (i) initial distribution.
  if (pi_stationary) {
    // Deferred until after the transition update below.
  } else {
    Eigen::VectorXd pi = sm.marginal.row(0).transpose();
    pi = pi.cwiseMax(0.0);
    pi /= pi.sum();
    model.set_pi(pi);
  }

  // (ii) transition coefficients: counts aggregated by phase.
  std::vector<Eigen::MatrixXd> counts(T, Eigen::MatrixXd::Zero(K, K));
  std::vector<int> phases(n);
  for (int i = 0; i < n; ++i) phases[i] = phase_of(start_phase + i, T);
  for (int i = 0; i + 1 < n; ++i) counts[phases[i] - 1] += sm.pairwise[i];
  outcome.beta_updated = improve_beta(model.transition(), counts);

  if (pi_stationary) model.set_pi(model.transition().stationary_distribution());

  // (iii) emission parameters.
  outcome.emission_report = model.emissions().weighted_mstep(phases, obs, sm.marginal);
  return outcome;
}

std::pair<SeasonalHMM, EmOutcome> em_iterate(const SeasonalHMM& model,
                                             std::span<const double> obs, int start_phase,
                                             bool pi_stationary) {
  SeasonalHMM updated = model;
  EmOutcome outcome = em_step(updated, obs, start_phase, pi_stationary);
  return {std::move(updated), outcome};
}

void FitConfig::validate() const {
  if (n_starts < 1) throw DataError("FitConfig: n_starts must be >= 1");
  if (rel_tol <= 0.0) throw DataError("FitConfig: rel_tol must be > 0");
  if (max_iters < 1) throw DataError("FitConfig: max_iters must be >= 1");
  if (short_run_iters < 0 || short_run_len < 1)
    throw DataError("FitConfig: invalid short-run settings");
  if (mixture < 1 || emission_degree < 0) throw DataError("FitConfig: invalid family layout");
}

namespace {

double data_quantile(std::vector<double> sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(h);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + (h - i) * (sorted[i + 1] - sorted[i]);
}

Eigen::VectorXd dirichlet_uniform(int m, SplitMix64& rng) {
  Eigen::VectorXd w(m);
  for (int c = 0; c < m; ++c) w(c) = -std::log(1.0 - rng.uniform());
  w /= w.sum();
  return w;
}

}  // namespace

SeasonalHMM random_start(ModelDims dims, const std::string& family_tag,
                         std::span<const double> obs, const FitConfig& cfg,
                         SplitMix64& rng) {
  dims.validate();
  const int K = dims.K;
  const int M = cfg.mixture;
  const int de = cfg.emission_degree;

  std::vector<double> sorted(obs.begin(), obs.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> positive;
  for (double y : sorted)
    if (y > 0.0) positive.push_back(y);
  const double n = static_cast<double>(sorted.size());
  double mean = 0.0;
  for (double y : sorted) mean += y;
  mean /= std::max(1.0, n);
  double var = 0.0;
  for (double y : sorted) var += (y - mean) * (y - mean);
  var = std::max(cfg.variance_floor, var / std::max(1.0, n - 1.0));
  const double sd = std::sqrt(var);

  PeriodicLogitTransition transition(dims);
  {
    std::vector<double> beta(transition.coefficients().size());
    for (double& b : beta) b = cfg.beta_init_range * (2.0 * rng.uniform() - 1.0);
    transition.set_coefficients(beta);
  }

  std::unique_ptr<EmissionFamily> emissions;
  if (family_tag == "gaussian_periodic_mean") {
    auto fam = std::make_unique<GaussianPeriodicMean>(K, dims.T, M, de);
    fam->variance_floor = cfg.variance_floor;
    for (int k = 0; k < K; ++k) {
      fam->level(k) = data_quantile(sorted, 0.05 + 0.9 * rng.uniform());
      fam->weights.row(k) = dirichlet_uniform(M, rng).transpose();
      for (int c = 0; c < M; ++c)
        fam->variances(k, c) = std::max(cfg.variance_floor, var * (0.3 + 1.2 * rng.uniform()));
      for (int c = 0; c < 2 * de; ++c)
        fam->trig(k, c) = cfg.trig_init_range * sd * (2.0 * rng.uniform() - 1.0);
    }
    emissions = std::move(fam);
  } else if (family_tag == "exp_periodic_scale") {
    if (positive.empty()) throw DataError("random_start: no positive observations");
    auto fam = std::make_unique<ExpPeriodicScale>(K, dims.T, M, de);
    fam->scale_floor = cfg.scale_floor;
    const double amp = 0.9 * cfg.trig_init_range / std::max(1, 2 * de);
    for (int k = 0; k < K; ++k) {
      fam->weights.row(k) = dirichlet_uniform(M, rng).transpose();
      for (int c = 0; c < M; ++c) {
        const double q = data_quantile(positive, 0.1 + 0.8 * rng.uniform());
        fam->rates(k, c) = 1.0 / std::max(q, 1e-8);
      }
      for (int c = 0; c < 2 * de; ++c)
        fam->trig(k, c) = amp * (2.0 * rng.uniform() - 1.0);
      Eigen::VectorXd row = fam->rates.row(k).transpose();
      std::sort(row.data(), row.data() + row.size());
      fam->rates.row(k) = row.transpose();
    }
    emissions = std::move(fam);
  } else if (family_tag == "zero_inflated_exp") {
    if (M < 2) throw DataError("random_start: zero_inflated_exp needs mixture >= 2");
    if (positive.empty()) throw DataError("random_start: no positive observations");
    auto fam = std::make_unique<ZeroInflatedExpMixture>(K, dims.T, M);
    const double dry = 1.0 - static_cast<double>(positive.size()) / std::max(1.0, n);
    for (int k = 0; k < K; ++k) {
      const double p0 = std::clamp(dry + 0.4 * (rng.uniform() - 0.5), 0.02, 0.98);
      Eigen::VectorXd rest = dirichlet_uniform(M - 1, rng) * (1.0 - p0);
      fam->weights(k, 0) = p0;
      for (int c = 1; c < M; ++c) fam->weights(k, c) = rest(c - 1);
      for (int c = 0; c + 1 < M; ++c) {
        const double q = data_quantile(positive, 0.1 + 0.8 * rng.uniform());
        fam->rates(k, c) = 1.0 / std::max(q, 1e-8);
      }
      Eigen::VectorXd row = fam->rates.row(k).transpose();
      std::sort(row.data(), row.data() + row.size());
      fam->rates.row(k) = row.transpose();
    }
    emissions = std::move(fam);
  } else {
    throw DataError("random_start: unknown emission family '" + family_tag + "'");
  }

  return SeasonalHMM(std::move(transition), std::move(emissions),
                     Eigen::VectorXd::Constant(K, 1.0 / K));
}

FitResult fit(std::span<const double> obs, ModelDims dims, const std::string& family_tag,
              const FitConfig& cfg, int start_phase) {
  cfg.validate();
  dims.validate();
  const int n = static_cast<int>(obs.size());
  if (n == 0) throw DataError("fit: empty observation sequence");

  const int short_len = std::min<int>(cfg.short_run_len, n);
  const auto short_obs = obs.subspan(0, short_len);

  struct StartOutcome {
    SeasonalHMM initial;
    double loglik = -kInf;
    std::string error;
  };

  auto run_start = [&](int s) -> StartOutcome {
    SplitMix64 rng(split_seed(cfg.seed, static_cast<std::uint64_t>(s)));
    SeasonalHMM initial = random_start(dims, family_tag, obs, cfg, rng);
    StartOutcome out{initial, -kInf, {}};
    try {
      SeasonalHMM current = initial;
      for (int it = 0; it < cfg.short_run_iters; ++it)
        em_step(current, short_obs, start_phase, cfg.pi_stationary);
      out.loglik = log_likelihood(current, short_obs, start_phase);
    } catch (const Error& e) {
      out.error = e.what();
    }
    return out;
  };

  std::vector<StartOutcome> outcomes;
  outcomes.reserve(cfg.n_starts);
  const int workers = cfg.threads > 0
                          ? cfg.threads
                          : std::max(1u, std::thread::hardware_concurrency());
  if (workers <= 1 || cfg.n_starts == 1) {
    for (int s = 0; s < cfg.n_starts; ++s) outcomes.push_back(run_start(s));
  } else {
    std::vector<std::future<StartOutcome>> futures;
    futures.reserve(cfg.n_starts);
    for (int s = 0; s < cfg.n_starts; ++s)
      futures.push_back(std::async(std::launch::async, run_start, s));
    for (auto& f : futures) outcomes.push_back(f.get());
  }

  FitDiagnostics diag;
  {
    // Rough identifiability heuristic: flag short series.
    SplitMix64 probe_rng(split_seed(cfg.seed, 0));
    const SeasonalHMM probe = random_start(dims, family_tag, obs, cfg, probe_rng);
    std::size_t params = probe.transition().coefficients().size() + dims.K - 1;
    for (int k = 0; k < dims.K; ++k) params += probe.emissions().state_params(k).size();
    if (static_cast<std::size_t>(n) < 10 * params)
      diag.warnings.push_back("series length " + std::to_string(n) +
                              " is below 10x the parameter count (" +
                              std::to_string(params) + " parameters)");
  }
  int best = -1;
  for (int s = 0; s < cfg.n_starts; ++s) {
    diag.start_logliks.push_back(outcomes[s].loglik);
    if (std::isfinite(outcomes[s].loglik) &&
        (best < 0 || outcomes[s].loglik > outcomes[best].loglik))
      best = s;
  }
  if (best < 0) {
    std::string msg = "fit: every start failed to produce a finite likelihood;";
    for (int s = 0; s < cfg.n_starts; ++s)
      msg += " start " + std::to_string(s) + ": " +
             (outcomes[s].error.empty() ? "loglik -inf" : outcomes[s].error) + ";";
    throw FitError(msg);
  }
  diag.chosen_start = best;

  // Long EM from the selected initial point on the full data.
  SeasonalHMM model = outcomes[best].initial;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const EmOutcome outcome = em_step(model, obs, start_phase, cfg.pi_stationary);
    diag.trace.push_back(outcome.loglik_before);
    ++diag.iterations;
    if (it > 0) {
      const double prev = diag.trace[it - 1];
      const double rel = std::abs(diag.trace[it] - prev) / std::max(1e-300, std::abs(prev));
      diag.rel_diffs.push_back(rel);
      if (rel < cfg.rel_tol) {
        diag.converged = true;
        break;
      }
    }
  }
  diag.trace.push_back(log_likelihood(model, obs, start_phase));

  return FitResult{std::move(model), std::move(diag)};
}

std::vector<int> viterbi(const SeasonalHMM& model, std::span<const double> obs,
                         const Eigen::VectorXd& pi, int start_phase) {
  const Tables tb = build_tables(model, obs, start_phase);
  const int n = static_cast<int>(obs.size());
  const int K = model.dims().K;

  Eigen::MatrixXd score(n, K);
  Eigen::MatrixXi back(n, K);
  for (int k = 0; k < K; ++k) score(0, k) = std::log(pi(k)) + tb.logf(0, k);

  for (int i = 1; i < n; ++i) {
    const Eigen::MatrixXd& lq = tb.logq[tb.phase[i - 1] - 1];
    for (int l = 0; l < K; ++l) {
      double best = -kInf;
      int arg = 0;
      for (int k = 0; k < K; ++k) {
        const double v = score(i - 1, k) + lq(k, l);
        if (v > best) {  // strict: ties keep the lower index
          best = v;
          arg = k;
        }
      }
      score(i, l) = best + tb.logf(i, l);
      back(i, l) = arg;
    }
  }

  std::vector<int> path(n);
  {
    double best = -kInf;
    int arg = 0;
    for (int k = 0; k < K; ++k)
      if (score(n - 1, k) > best) {
        best = score(n - 1, k);
        arg = k;
      }
    path[n - 1] = arg;
  }
  for (int i = n - 2; i >= 0; --i) path[i] = back(i + 1, path[i + 1]);
  return path;
}

std::vector<int> viterbi(const SeasonalHMM& model, std::span<const double> obs,
                         int start_phase) {
  return viterbi(model, obs, model.pi(), start_phase);
}

Alignment align_states(const SeasonalHMM& fitted, const SeasonalHMM& reference) {
  const int K = fitted.dims().K;
  if (reference.dims().K != K)
    throw DataError("align_states: state counts differ");

  std::vector<std::vector<double>> fit_params(K), ref_params(K);
  for (int k = 0; k < K; ++k) {
    fit_params[k] = fitted.emissions().state_params(k);
    ref_params[k] = reference.emissions().state_params(k);
    if (fit_params[k].size() != ref_params[k].size())
      throw DataError("align_states: emission parameter layouts differ");
  }

  auto cost = [&](int ref_k, int fit_k) {
    double c = 0.0;
    for (std::size_t a = 0; a < ref_params[ref_k].size(); ++a) {
      const double d = fit_params[fit_k][a] - ref_params[ref_k][a];
      c += d * d;
    }
    return c;
  };

  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  Alignment best;
  best.distance = kInf;
  std::vector<int> p = perm;
  do {
    double total = 0.0;
    for (int k = 0; k < K; ++k) total += cost(k, p[k]);
    if (total < best.distance) {
      best.distance = total;
      best.permutation = p;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

std::string FitDiagnostics::to_json() const {
  nlohmann::json j;
  j["start_logliks"] = start_logliks;
  j["chosen_start"] = chosen_start;
  j["iterations"] = iterations;
  j["converged"] = converged;
  nlohmann::json trace_rows = nlohmann::json::array();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    nlohmann::json row;
    row["iteration"] = i;
    row["loglik"] = trace[i];
    if (i >= 1 && i - 1 < rel_diffs.size()) row["rel_diff"] = rel_diffs[i - 1];
    trace_rows.push_back(row);
  }
  j["trace"] = trace_rows;
  j["warnings"] = warnings;
  return j.dump(2);
}

}  // namespace shmm
