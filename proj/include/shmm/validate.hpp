#ifndef SHMM_VALIDATE_HPP
#define SHMM_VALIDATE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "shmm/dataio.hpp"
#include "shmm/model.hpp"

namespace shmm {

// Per-day-of-year sample statistics, pooled over years (and optionally over
// a centered window of neighboring days). Variance is the unbiased sample
// variance; skewness and kurtosis are the central-moment ratios
// m3 / m2^(3/2) and m4 / m2^2 (population central moments). Cells with zero
// variance report them as NaN with moments_defined = false.
struct DayStats {
  int day = 0;
  long long n = 0;
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;
  double wet_frequency = 0.0;
  bool moments_defined = false;
};

std::vector<DayStats> daily_stats(const std::vector<double>& values,
                                  const std::vector<int>& day_of_year, int period,
                                  int smoothing_window = 0, double dry_threshold = 0.0);

// Counts of maximal runs: dry runs are values <= threshold, wet runs are
// values > threshold. counts[l-1] holds runs of exact length l for
// l = 1..max_len; longer runs land in `overflow`.
enum class SpellKind { dry, wet };
struct SpellHistogram {
  std::vector<long long> counts;
  long long overflow = 0;
  long long total = 0;
};
SpellHistogram spell_distribution(const std::vector<double>& values, SpellKind kind,
                                  double dry_threshold = 0.0, int max_len = 30);

struct ValidateOptions {
  double dry_threshold = 0.0;
  int smoothing_window = 0;
  int max_spell_len = 30;
  std::vector<double> qq_grid;  // defaults to 0.01..0.99 step 0.01, 0.995, 0.999
  std::vector<double> annual_max_grid;  // defaults to 0.1..0.9 step 0.1
};

// One table cell: the observed statistic against the across-replicate mean
// and the 2.5% / 97.5% order-statistic quantiles.
struct BandCell {
  double observed = 0.0;
  double sim_mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool defined = true;  // false when the observed statistic is undefined
};

struct BandTable {
  std::vector<double> index;  // day of year, spell length, or grid probability
  std::vector<BandCell> cells;

  // Fraction of defined cells whose observed value lies inside [lo, hi].
  double coverage() const;
};

struct ValidationReport {
  int period = 365;
  int reps = 0;
  std::uint64_t seed = 0;
  double dry_threshold = 0.0;
  std::string model_fingerprint;

  BandTable mean_by_day, variance_by_day, skewness_by_day, kurtosis_by_day,
      wet_frequency_by_day;
  BandTable dry_spells, wet_spells;  // relative frequency per length
  BandTable qq;                      // observed vs simulated quantiles
  BandTable annual_max;              // quantiles of the annual maxima
  Eigen::MatrixXd state_frequency;   // period x K, from the decoded path

  // One CSV per table plus summary.json with the coverage fractions.
  void write_csv_dir(const std::string& dir) const;
  std::string summary_json() const;
};

// Parametric bootstrap: `reps` seeded simulations of the observed series'
// length and calendar, every statistic computed identically on each
// replicate and on the observations, bands from the across-replicate 2.5%
// and 97.5% order statistics. Deterministic given the seed.
ValidationReport bootstrap_report(const SeasonalHMM& model, const DailySeries& observed,
                                  int reps, std::uint64_t seed,
                                  const ValidateOptions& opt = {});

}  // namespace shmm

#endif  // SHMM_VALIDATE_HPP
