#include "shmm/validate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <thread>

#include "shmm/inference.hpp"
#include "shmm/simulate.hpp"

namespace shmm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Order-statistic quantile (inverse empirical CDF): the ceil(n*p)-th
// smallest value. With two points the 2.5%/97.5% band is exactly min/max.
double order_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return kNaN;
  auto rank = static_cast<long long>(std::ceil(p * static_cast<double>(sorted.size())));
  rank = std::clamp<long long>(rank, 1, static_cast<long long>(sorted.size()));
  return sorted[static_cast<std::size_t>(rank - 1)];
}

// Interpolating quantile for the QQ grid.
double linear_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return kNaN;
  if (sorted.size() == 1) return sorted[0];
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(h);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + (h - i) * (sorted[i + 1] - sorted[i]);
}

std::vector<double> default_qq_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 99; ++i) grid.push_back(i / 100.0);
  grid.push_back(0.995);
  grid.push_back(0.999);
  return grid;
}

std::vector<double> default_annual_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 9; ++i) grid.push_back(i / 10.0);
  return grid;
}

BandCell make_cell(double observed, bool defined, std::vector<double> sims) {
  BandCell cell;
  cell.observed = observed;
  cell.defined = defined;
  std::vector<double> usable;
  for (double v : sims)
    if (!std::isnan(v)) usable.push_back(v);
  if (usable.empty()) {
    cell.sim_mean = cell.lo = cell.hi = kNaN;
    return cell;
  }
  double mean = 0.0;
  for (double v : usable) mean += v;
  cell.sim_mean = mean / static_cast<double>(usable.size());
  std::sort(usable.begin(), usable.end());
  cell.lo = order_quantile(usable, 0.025);
  cell.hi = order_quantile(usable, 0.975);
  return cell;
}

std::vector<double> annual_maxima(const std::vector<double>& values,
                                  const std::vector<int>& year) {
  std::vector<double> maxima;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i == 0 || year[i] != year[i - 1]) maxima.push_back(values[i]);
    maxima.back() = std::max(maxima.back(), values[i]);
  }
  return maxima;
}

void write_band_csv(const std::string& path, const char* index_name,
                    const BandTable& table) {
  std::ofstream out(path);
  if (!out) throw DataError("validation report: cannot write '" + path + "'");
  out << index_name << ",observed,sim_mean,lo,hi\n";
  char buf[256];
  for (std::size_t i = 0; i < table.cells.size(); ++i) {
    const BandCell& c = table.cells[i];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n", table.index[i],
                  c.defined ? c.observed : kNaN, c.sim_mean, c.lo, c.hi);
    out << buf;
  }
}

}  // namespace

double BandTable::coverage() const {
  long long inside = 0, defined = 0;
  for (const BandCell& c : cells) {
    if (!c.defined || std::isnan(c.lo) || std::isnan(c.hi)) continue;
    ++defined;
    if (c.observed >= c.lo && c.observed <= c.hi) ++inside;
  }
  return defined == 0 ? kNaN
                      : static_cast<double>(inside) / static_cast<double>(defined);
}

std::vector<DayStats> daily_stats(const std::vector<double>& values,
                                  const std::vector<int>& day_of_year, int period,
                                  int smoothing_window, double dry_threshold) {
  if (values.size() != day_of_year.size())
    throw DataError("daily_stats: values and day_of_year lengths differ");

  std::vector<std::vector<double>> by_day(period);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int d = day_of_year[i];
    if (d < 1 || d > period)
      throw DataError("daily_stats: day_of_year " + std::to_string(d) +
                      " outside 1.." + std::to_string(period));
    by_day[d - 1].push_back(values[i]);
  }

  std::vector<std::string> short_days;
  std::vector<DayStats> stats(period);
  for (int d = 1; d <= period; ++d) {
    // Pool a centered window of neighboring days (circular calendar).
    std::vector<double> pool;
    for (int w = -smoothing_window; w <= smoothing_window; ++w) {
      const int src = ((d - 1 + w) % period + period) % period;
      pool.insert(pool.end(), by_day[src].begin(), by_day[src].end());
    }
    if (pool.size() < 2) {
      short_days.push_back(std::to_string(d));
      continue;
    }

    DayStats& s = stats[d - 1];
    s.day = d;
    s.n = static_cast<long long>(pool.size());
    const double n = static_cast<double>(pool.size());
    double mean = 0.0;
    for (double y : pool) mean += y;
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0, wet = 0.0;
    for (double y : pool) {
      const double r = y - mean;
      m2 += r * r;
      m3 += r * r * r;
      m4 += r * r * r * r;
      if (y > dry_threshold) wet += 1.0;
    }
    s.mean = mean;
    s.variance = m2 / (n - 1.0);
    s.wet_frequency = wet / n;
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (m2 > 0.0) {
      s.skewness = m3 / std::pow(m2, 1.5);
      s.kurtosis = m4 / (m2 * m2);
      s.moments_defined = true;
    } else {
      s.skewness = kNaN;
      s.kurtosis = kNaN;
    }
  }

  if (!short_days.empty()) {
    std::string msg = "daily_stats: fewer than 2 observations for day(s)";
    for (std::size_t i = 0; i < short_days.size() && i < 12; ++i) msg += " " + short_days[i];
    if (short_days.size() > 12)
      msg += " (+" + std::to_string(short_days.size() - 12) + " more)";
    throw DataError(msg);
  }
  return stats;
}

SpellHistogram spell_distribution(const std::vector<double>& values, SpellKind kind,
                                  double dry_threshold, int max_len) {
  if (values.empty()) throw DataError("spell_distribution: empty series");
  SpellHistogram hist;
  hist.counts.assign(max_len, 0);

  auto matches = [&](double y) {
    return kind == SpellKind::dry ? y <= dry_threshold : y > dry_threshold;
  };

  long long run = 0;
  auto flush = [&]() {
    if (run == 0) return;
    if (run <= max_len)
      ++hist.counts[static_cast<std::size_t>(run - 1)];
    else
      ++hist.overflow;
    ++hist.total;
    run = 0;
  };
  for (double y : values) {
    if (matches(y)) {
      ++run;
    } else {
      flush();
    }
  }
  flush();
  return hist;
}

ValidationReport bootstrap_report(const SeasonalHMM& model, const DailySeries& observed,
                                  int reps, std::uint64_t seed,
                                  const ValidateOptions& opt) {
  if (reps < 1) throw DataError("bootstrap_report: reps must be >= 1");
  if (observed.size() < 2) throw DataError("bootstrap_report: observed series too short");
  const int T = model.dims().T;
  const int K = model.dims().K;
  const long long n = static_cast<long long>(observed.size());

  const std::vector<double> qq_grid = opt.qq_grid.empty() ? default_qq_grid() : opt.qq_grid;
  const std::vector<double> annual_grid =
      opt.annual_max_grid.empty() ? default_annual_grid() : opt.annual_max_grid;

  ValidationReport report;
  report.period = T;
  report.reps = reps;
  report.seed = seed;
  report.dry_threshold = opt.dry_threshold;
  report.model_fingerprint = model.fingerprint();

  // Replicates follow the observed calendar: same length, same phase of the
  // first day, initial state from the stationary phase marginal.
  const int start_phase = observed.day_of_year.front();
  const Eigen::VectorXd init =
      model.transition().phase_marginals()[start_phase - 1];

  // Observed statistics.
  const std::vector<DayStats> obs_stats = daily_stats(
      observed.values, observed.day_of_year, T, opt.smoothing_window, opt.dry_threshold);
  const SpellHistogram obs_dry = spell_distribution(observed.values, SpellKind::dry,
                                                    opt.dry_threshold, opt.max_spell_len);
  const SpellHistogram obs_wet = spell_distribution(observed.values, SpellKind::wet,
                                                    opt.dry_threshold, opt.max_spell_len);
  std::vector<double> obs_sorted = observed.values;
  std::sort(obs_sorted.begin(), obs_sorted.end());
  std::vector<double> obs_annual = annual_maxima(observed.values, observed.year);
  std::sort(obs_annual.begin(), obs_annual.end());

  // Per-replicate statistic rows.
  struct RepStats {
    std::vector<DayStats> days;
    std::vector<double> dry_freq, wet_freq;
    std::vector<double> qq;
    std::vector<double> annual;
  };

  auto spell_freq = [&](const SpellHistogram& h) {
    std::vector<double> freq(h.counts.size() + 1, 0.0);
    const double total = static_cast<double>(std::max<long long>(1, h.total));
    for (std::size_t l = 0; l < h.counts.size(); ++l)
      freq[l] = static_cast<double>(h.counts[l]) / total;
    freq.back() = static_cast<double>(h.overflow) / total;
    return freq;
  };

  auto run_rep = [&](int r) {
    const Trajectory traj =
        simulate_from(model, n, split_seed(seed, static_cast<std::uint64_t>(r)),
                      start_phase, init);
    RepStats rs;
    rs.days = daily_stats(traj.values, observed.day_of_year, T, opt.smoothing_window,
                          opt.dry_threshold);
    rs.dry_freq = spell_freq(spell_distribution(traj.values, SpellKind::dry,
                                                opt.dry_threshold, opt.max_spell_len));
    rs.wet_freq = spell_freq(spell_distribution(traj.values, SpellKind::wet,
                                                opt.dry_threshold, opt.max_spell_len));
    std::vector<double> sorted = traj.values;
    std::sort(sorted.begin(), sorted.end());
    for (double p : qq_grid) rs.qq.push_back(linear_quantile(sorted, p));
    std::vector<double> annual = annual_maxima(traj.values, observed.year);
    std::sort(annual.begin(), annual.end());
    for (double p : annual_grid) rs.annual.push_back(linear_quantile(annual, p));
    return rs;
  };

  std::vector<RepStats> rep_stats(reps);
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  if (workers <= 1 || reps == 1) {
    for (int r = 0; r < reps; ++r) rep_stats[r] = run_rep(r);
  } else {
    std::vector<std::future<RepStats>> futures;
    futures.reserve(reps);
    for (int r = 0; r < reps; ++r)
      futures.push_back(std::async(std::launch::async, run_rep, r));
    for (int r = 0; r < reps; ++r) rep_stats[r] = futures[r].get();
  }

  // Daily tables.
  auto day_table = [&](auto get, auto defined) {
    BandTable table;
    for (int d = 1; d <= T; ++d) {
      table.index.push_back(d);
      std::vector<double> sims;
      sims.reserve(reps);
      for (const RepStats& rs : rep_stats)
        sims.push_back(defined(rs.days[d - 1]) ? get(rs.days[d - 1]) : kNaN);
      table.cells.push_back(
          make_cell(get(obs_stats[d - 1]), defined(obs_stats[d - 1]), std::move(sims)));
    }
    return table;
  };
  auto always = [](const DayStats&) { return true; };
  auto moments_ok = [](const DayStats& s) { return s.moments_defined; };
  report.mean_by_day = day_table([](const DayStats& s) { return s.mean; }, always);
  report.variance_by_day = day_table([](const DayStats& s) { return s.variance; }, always);
  report.skewness_by_day =
      day_table([](const DayStats& s) { return s.skewness; }, moments_ok);
  report.kurtosis_by_day =
      day_table([](const DayStats& s) { return s.kurtosis; }, moments_ok);
  report.wet_frequency_by_day =
      day_table([](const DayStats& s) { return s.wet_frequency; }, always);

  // Spell tables (relative frequencies; the last row is the overflow
  // bucket for runs longer than max_spell_len).
  auto spell_table = [&](const SpellHistogram& obs_hist, bool dry) {
    BandTable table;
    const std::vector<double> obs_freq = spell_freq(obs_hist);
    for (std::size_t l = 0; l < obs_freq.size(); ++l) {
      table.index.push_back(static_cast<double>(l + 1));
      std::vector<double> sims;
      sims.reserve(reps);
      for (const RepStats& rs : rep_stats)
        sims.push_back(dry ? rs.dry_freq[l] : rs.wet_freq[l]);
      table.cells.push_back(make_cell(obs_freq[l], true, std::move(sims)));
    }
    return table;
  };
  report.dry_spells = spell_table(obs_dry, true);
  report.wet_spells = spell_table(obs_wet, false);

  // Quantile-quantile table.
  for (std::size_t g = 0; g < qq_grid.size(); ++g) {
    report.qq.index.push_back(qq_grid[g]);
    std::vector<double> sims;
    sims.reserve(reps);
    for (const RepStats& rs : rep_stats) sims.push_back(rs.qq[g]);
    report.qq.cells.push_back(
        make_cell(linear_quantile(obs_sorted, qq_grid[g]), true, std::move(sims)));
  }

  // Annual maxima.
  for (std::size_t g = 0; g < annual_grid.size(); ++g) {
    report.annual_max.index.push_back(annual_grid[g]);
    std::vector<double> sims;
    sims.reserve(reps);
    for (const RepStats& rs : rep_stats) sims.push_back(rs.annual[g]);
    report.annual_max.cells.push_back(
        make_cell(linear_quantile(obs_annual, annual_grid[g]), true, std::move(sims)));
  }

  // State frequencies by day of year from the decoded path.
  const std::vector<int> path = viterbi(model, observed.values, init, start_phase);
  report.state_frequency = Eigen::MatrixXd::Zero(T, K);
  Eigen::VectorXd day_count = Eigen::VectorXd::Zero(T);
  for (std::size_t i = 0; i < path.size(); ++i) {
    report.state_frequency(observed.day_of_year[i] - 1, path[i]) += 1.0;
    day_count(observed.day_of_year[i] - 1) += 1.0;
  }
  for (int d = 0; d < T; ++d)
    if (day_count(d) > 0.0) report.state_frequency.row(d) /= day_count(d);

  return report;
}

void ValidationReport::write_csv_dir(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  const auto path = [&](const char* name) {
    return (std::filesystem::path(dir) / name).string();
  };
  write_band_csv(path("daily_mean.csv"), "day", mean_by_day);
  write_band_csv(path("daily_variance.csv"), "day", variance_by_day);
  write_band_csv(path("daily_skewness.csv"), "day", skewness_by_day);
  write_band_csv(path("daily_kurtosis.csv"), "day", kurtosis_by_day);
  write_band_csv(path("wet_frequency.csv"), "day", wet_frequency_by_day);
  write_band_csv(path("dry_spells.csv"), "length", dry_spells);
  write_band_csv(path("wet_spells.csv"), "length", wet_spells);
  write_band_csv(path("qq.csv"), "p", qq);
  write_band_csv(path("annual_max.csv"), "p", annual_max);

  std::ofstream sf(path("state_frequency.csv"));
  if (!sf) throw DataError("validation report: cannot write state_frequency.csv");
  sf << "day";
  for (int k = 0; k < state_frequency.cols(); ++k) sf << ",state" << (k + 1);
  sf << "\n";
  char buf[64];
  for (int d = 0; d < state_frequency.rows(); ++d) {
    sf << (d + 1);
    for (int k = 0; k < state_frequency.cols(); ++k) {
      std::snprintf(buf, sizeof(buf), ",%.17g", state_frequency(d, k));
      sf << buf;
    }
    sf << "\n";
  }

  std::ofstream summary(path("summary.json"));
  if (!summary) throw DataError("validation report: cannot write summary.json");
  summary << summary_json() << "\n";
}

std::string ValidationReport::summary_json() const {
  nlohmann::json j;
  j["period"] = period;
  j["reps"] = reps;
  j["seed"] = seed;
  j["dry_threshold"] = dry_threshold;
  j["model_fingerprint"] = model_fingerprint;
  nlohmann::json cov;
  cov["daily_mean"] = mean_by_day.coverage();
  cov["daily_variance"] = variance_by_day.coverage();
  cov["daily_skewness"] = skewness_by_day.coverage();
  cov["daily_kurtosis"] = kurtosis_by_day.coverage();
  cov["wet_frequency"] = wet_frequency_by_day.coverage();
  cov["dry_spells"] = dry_spells.coverage();
  cov["wet_spells"] = wet_spells.coverage();
  cov["qq"] = qq.coverage();
  cov["annual_max"] = annual_max.coverage();
  j["coverage"] = cov;
  return j.dump(2);
}

}  // namespace shmm
