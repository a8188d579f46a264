// Command-line front end: fit / simulate / validate / spectral-demo / check.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "shmm/assumptions.hpp"
#include "shmm/dataio.hpp"
#include "shmm/inference.hpp"
#include "shmm/presets.hpp"
#include "shmm/simulate.hpp"
#include "shmm/spectral.hpp"
#include "shmm/validate.hpp"

namespace {

namespace fs = std::filesystem;

struct DataFlags {
  std::string path;
  std::string format = "daily";  // daily | values
  std::string date_col = "DATE";
  std::string value_col = "RR";
  std::string quality_col;
  std::string delim = ",";
  double scale = 1.0;
  bool keep_negative = false;
  std::uint64_t impute_seed = 0;
};

void add_data_flags(CLI::App* cmd, DataFlags& flags) {
  cmd->add_option("--data", flags.path, "input data file")->required();
  cmd->add_option("--format", flags.format, "data layout: daily (date+value columns) or values (last column per row)")
      ->check(CLI::IsMember({"daily", "values"}));
  cmd->add_option("--date-col", flags.date_col, "date column name (daily format)");
  cmd->add_option("--value-col", flags.value_col, "value column name (daily format)");
  cmd->add_option("--quality-col", flags.quality_col, "quality flag column; flag 9 marks missing");
  cmd->add_option("--delim", flags.delim, "field delimiter");
  cmd->add_option("--scale", flags.scale, "multiply every value (0.1 converts ECA&D RR to mm)");
  cmd->add_flag("--keep-negative", flags.keep_negative, "do not treat negative values as missing");
  cmd->add_option("--impute-seed", flags.impute_seed, "seed for missing-value imputation");
}

shmm::DailySeries read_daily(const DataFlags& flags) {
  shmm::IngestConfig cfg;
  cfg.date_column = flags.date_col;
  cfg.value_column = flags.value_col;
  cfg.quality_column = flags.quality_col;
  cfg.delimiter = flags.delim.empty() ? ',' : flags.delim[0];
  cfg.scale = flags.scale;
  cfg.negative_is_missing = !flags.keep_negative;
  cfg.seed = flags.impute_seed;
  return shmm::ingest(flags.path, cfg);
}

// Plain numeric series: the last field of each row; a leading non-numeric
// row (header) is skipped.
std::vector<double> read_values(const DataFlags& flags) {
  std::ifstream in(flags.path);
  if (!in) throw shmm::DataError("cannot open '" + flags.path + "'");
  const char delim = flags.delim.empty() ? ',' : flags.delim[0];
  std::vector<double> values;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto pos = line.find_last_of(delim);
    const std::string field = pos == std::string::npos ? line : line.substr(pos + 1);
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || (end != nullptr && *end != '\0' && !std::isspace(*end))) {
      if (values.empty()) continue;  // header row
      throw shmm::DataError("unparseable value at line " + std::to_string(line_no));
    }
    values.push_back(v * flags.scale);
  }
  if (values.empty()) throw shmm::DataError("no values in '" + flags.path + "'");
  return values;
}

shmm::SeasonalHMM load_model_or_preset(const std::string& model_path,
                                       const std::string& preset) {
  if (!model_path.empty()) return shmm::load_model(model_path);
  if (preset == "sim-study") return shmm::sim_study_model();
  throw shmm::DataError("need --model FILE or --preset sim-study");
}

void write_trajectory_csv(const std::string& path, const shmm::Trajectory& traj,
                          bool keep_states) {
  std::ofstream out(path);
  if (!out) throw shmm::DataError("cannot write '" + path + "'");
  out << (keep_states ? "index,state,value\n" : "index,value\n");
  char buf[80];
  for (std::size_t i = 0; i < traj.values.size(); ++i) {
    if (keep_states)
      std::snprintf(buf, sizeof(buf), "%zu,%d,%.17g\n", i + 1, traj.states[i] + 1,
                    traj.values[i]);
    else
      std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i + 1, traj.values[i]);
    out << buf;
  }
}

int cmd_fit(const DataFlags& data, const std::string& preset, std::string family,
            shmm::ModelDims dims, shmm::FitConfig cfg, int start_phase,
            const std::string& out_dir) {
  if (preset == "precip") {
    dims = {4, 365, 2};
    cfg.mixture = 3;
    family = "zero_inflated_exp";
  } else if (preset == "sim-study") {
    dims = {2, 365, 1};
    cfg.mixture = 1;
    cfg.emission_degree = 1;
    family = "gaussian_periodic_mean";
  }

  std::vector<double> values;
  if (data.format == "daily") {
    const shmm::DailySeries series = read_daily(data);
    values = series.values;
    start_phase = series.day_of_year.empty() ? start_phase : series.day_of_year.front();
  } else {
    values = read_values(data);
  }

  const shmm::FitResult result = shmm::fit(values, dims, family, cfg, start_phase);
  for (const std::string& w : result.diagnostics.warnings)
    std::cerr << "warning: " << w << "\n";

  fs::create_directories(out_dir);
  shmm::save_model(result.model, (fs::path(out_dir) / "model.json").string());
  std::ofstream diag((fs::path(out_dir) / "fit_diagnostics.json").string());
  diag << result.diagnostics.to_json() << "\n";

  std::printf("fit: %zu observations, chosen start %d, %d long-run iterations%s\n",
              values.size(), result.diagnostics.chosen_start,
              result.diagnostics.iterations,
              result.diagnostics.converged ? "" : " (iteration cap reached)");
  std::printf("fit: final log-likelihood %.6f\n", result.diagnostics.trace.back());
  std::printf("fit: model written to %s\n",
              (fs::path(out_dir) / "model.json").string().c_str());
  return 0;
}

int cmd_simulate(const std::string& model_path, const std::string& preset, long long length,
                 int reps, std::uint64_t seed, bool keep_states,
                 const std::string& out_dir) {
  const shmm::SeasonalHMM model = load_model_or_preset(model_path, preset);
  const std::vector<shmm::Trajectory> batch = shmm::simulate_batch(model, length, reps, seed);
  fs::create_directories(out_dir);
  char name[64];
  for (int r = 0; r < reps; ++r) {
    std::snprintf(name, sizeof(name), "rep_%04d.csv", r + 1);
    write_trajectory_csv((fs::path(out_dir) / name).string(), batch[r], keep_states);
  }
  std::printf("simulate: wrote %d replicate(s) of length %lld to %s (model %s)\n", reps,
              length, out_dir.c_str(), model.fingerprint().c_str());
  return 0;
}

int cmd_validate(const std::string& model_path, const DataFlags& data, int reps,
                 std::uint64_t seed, const shmm::ValidateOptions& opt,
                 const std::string& out_dir) {
  const shmm::SeasonalHMM model = shmm::load_model(model_path);
  const shmm::DailySeries series = read_daily(data);
  const shmm::ValidationReport report = shmm::bootstrap_report(model, series, reps, seed, opt);
  report.write_csv_dir(out_dir);
  std::printf("validate: %d replicates of %zu observations\n", reps, series.size());
  std::printf("validate: coverage mean %.3f, wet frequency %.3f, variance %.3f\n",
              report.mean_by_day.coverage(), report.wet_frequency_by_day.coverage(),
              report.variance_by_day.coverage());
  std::printf("validate: report written to %s\n", out_dir.c_str());
  return 0;
}

int cmd_spectral_demo(int states, int period, std::uint64_t seed, int features,
                      long long windows, double tolerance, const std::string& out_file) {
  shmm::SplitMix64 rng(seed);
  const shmm::SeasonalHMM model = shmm::random_spectral_model(states, period, rng);
  const shmm::FeatureMap fmap =
      shmm::FeatureMap::exp_moments(features, 0.5 / model.emissions().scale_hint());

  std::vector<shmm::MomentSet> sets;
  for (int t = 1; t <= period; ++t)
    sets.push_back(shmm::population_moments(model, t, fmap));
  const std::vector<shmm::SpectralRecovery> recs = shmm::recover_all(sets, states, rng);

  const std::vector<Eigen::VectorXd> marginals = model.transition().phase_marginals();
  std::vector<std::vector<int>> perms(period);
  for (int t = 1; t <= period; ++t)
    perms[t - 1] =
        shmm::align_columns(recs[t - 1].O, shmm::feature_matrix(model.emissions(), t, fmap));

  std::string table = "t,err_O,err_pi,err_Q\n";
  double worst = 0.0;
  char buf[160];
  for (int t = 1; t <= period; ++t) {
    const auto& rec = recs[t - 1];
    const auto& p = perms[t - 1];
    const auto& pnext = perms[t % period];
    const Eigen::MatrixXd O_true = shmm::feature_matrix(model.emissions(), t, fmap);
    const Eigen::MatrixXd Q_true = model.transition().matrix(t);

    double err_o = 0.0, err_pi = 0.0, err_q = 0.0;
    for (int k = 0; k < states; ++k) {
      err_o = std::max(err_o, (rec.O.col(p[k]) - O_true.col(k)).lpNorm<Eigen::Infinity>());
      err_pi = std::max(err_pi, std::abs(rec.pi(p[k]) - marginals[t - 1](k)));
      for (int l = 0; l < states; ++l)
        err_q = std::max(err_q, std::abs(rec.Q(p[k], pnext[l]) - Q_true(k, l)));
    }
    worst = std::max({worst, err_o, err_pi, err_q});
    std::snprintf(buf, sizeof(buf), "%d,%.3e,%.3e,%.3e\n", t, err_o, err_pi, err_q);
    table += buf;
  }

  if (windows > 0) {
    // Empirical counterpart on simulated data, reported for context.
    const shmm::Trajectory traj =
        shmm::simulate(model, windows * period + 2, shmm::split_seed(seed, 1));
    double emp_err = 0.0;
    for (int t = 1; t <= period; ++t) {
      const auto win = shmm::extract_windows(traj.values, t, period);
      const shmm::MomentSet ms = shmm::empirical_moments(win, fmap, t);
      const Eigen::MatrixXd O_true = shmm::feature_matrix(model.emissions(), t, fmap);
      const Eigen::MatrixXd O_emp = shmm::recover_features(ms, states, rng);
      const auto p = shmm::align_columns(O_emp, O_true);
      for (int k = 0; k < states; ++k)
        emp_err = std::max(emp_err, (O_emp.col(p[k]) - O_true.col(k)).lpNorm<Eigen::Infinity>());
    }
    std::snprintf(buf, sizeof(buf), "empirical O error at %lld windows/phase: %.3e\n",
                  windows, emp_err);
    table += buf;
  }

  std::fputs(table.c_str(), stdout);
  std::printf("max population recovery error: %.3e (tolerance %.1e)\n", worst, tolerance);
  if (!out_file.empty()) {
    std::ofstream out(out_file);
    out << table;
  }
  if (worst > tolerance) {
    std::fprintf(stderr, "spectral-demo: recovery error above tolerance\n");
    return 2;
  }
  return 0;
}

int cmd_check(const std::string& model_path, const std::string& preset, double tol,
              const std::string& out_file) {
  const shmm::SeasonalHMM model = load_model_or_preset(model_path, preset);
  const shmm::AssumptionReport report = shmm::check_assumptions(model, tol);
  const std::string text = report.to_text();
  std::fputs(text.c_str(), stdout);
  if (!out_file.empty()) {
    std::ofstream out(out_file);
    out << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seasonal hidden Markov models: fitting, simulation, validation"};
  app.require_subcommand(1);

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit a model by multi-start EM");
  DataFlags fit_data;
  add_data_flags(fit_cmd, fit_data);
  std::string fit_family = "zero_inflated_exp";
  std::string fit_preset;
  shmm::ModelDims fit_dims{4, 365, 2};
  shmm::FitConfig fit_cfg;
  fit_cfg.mixture = 3;
  int fit_start_phase = 1;
  std::string fit_out = "out";
  std::string pi_mode = "free";
  fit_cmd->add_option("--family", fit_family, "emission family tag")
      ->check(CLI::IsMember({"gaussian_periodic_mean", "exp_periodic_scale", "zero_inflated_exp"}));
  fit_cmd->add_option("--preset", fit_preset, "sim-study or precip (overrides dims/family)")
      ->check(CLI::IsMember({"sim-study", "precip"}));
  fit_cmd->add_option("--states", fit_dims.K, "hidden state count K");
  fit_cmd->add_option("--period", fit_dims.T, "period length T");
  fit_cmd->add_option("--degree", fit_dims.d, "transition trig degree d");
  fit_cmd->add_option("--mixture", fit_cfg.mixture, "mixture size M");
  fit_cmd->add_option("--emission-degree", fit_cfg.emission_degree, "emission trig degree");
  fit_cmd->add_option("--starts", fit_cfg.n_starts, "number of random starts");
  fit_cmd->add_option("--short-iters", fit_cfg.short_run_iters, "EM iterations per short run");
  fit_cmd->add_option("--short-len", fit_cfg.short_run_len, "observations per short run");
  fit_cmd->add_option("--rel-tol", fit_cfg.rel_tol, "relative log-likelihood stop");
  fit_cmd->add_option("--max-iters", fit_cfg.max_iters, "long-run iteration cap");
  fit_cmd->add_option("--seed", fit_cfg.seed, "RNG seed");
  fit_cmd->add_option("--threads", fit_cfg.threads, "worker cap (0 = hardware)");
  fit_cmd->add_option("--pi-mode", pi_mode, "free | stationary")
      ->check(CLI::IsMember({"free", "stationary"}));
  fit_cmd->add_option("--variance-floor", fit_cfg.variance_floor, "Gaussian variance floor");
  fit_cmd->add_option("--scale-floor", fit_cfg.scale_floor, "exponential scale floor");
  fit_cmd->add_option("--start-phase", fit_start_phase, "phase of the first observation (values format)");
  fit_cmd->add_option("--out", fit_out, "output directory")->required();

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "simulate trajectories from a model");
  std::string sim_model, sim_preset, sim_out = "out";
  long long sim_length = 365;
  int sim_reps = 1;
  std::uint64_t sim_seed = 0;
  bool sim_states = false;
  sim_cmd->add_option("--model", sim_model, "model document (JSON)");
  sim_cmd->add_option("--preset", sim_preset, "sim-study")->check(CLI::IsMember({"sim-study"}));
  sim_cmd->add_option("--length", sim_length, "trajectory length")->required();
  sim_cmd->add_option("--reps", sim_reps, "replicate count");
  sim_cmd->add_option("--seed", sim_seed, "RNG seed");
  sim_cmd->add_flag("--keep-states", sim_states, "include the hidden state column");
  sim_cmd->add_option("--out", sim_out, "output directory")->required();

  // validate
  auto* val_cmd = app.add_subcommand("validate", "parametric-bootstrap validation report");
  std::string val_model, val_out = "out";
  DataFlags val_data;
  add_data_flags(val_cmd, val_data);
  int val_reps = 1000;
  std::uint64_t val_seed = 0;
  shmm::ValidateOptions val_opt;
  val_cmd->add_option("--model", val_model, "model document (JSON)")->required();
  val_cmd->add_option("--reps", val_reps, "bootstrap replicate count");
  val_cmd->add_option("--seed", val_seed, "RNG seed");
  val_cmd->add_option("--dry-threshold", val_opt.dry_threshold, "wet/dry threshold (mm)");
  val_cmd->add_option("--window", val_opt.smoothing_window, "day pooling half-window");
  val_cmd->add_option("--max-spell", val_opt.max_spell_len, "spell histogram cap");
  val_cmd->add_option("--out", val_out, "output directory")->required();

  // spectral-demo
  auto* spec_cmd = app.add_subcommand("spectral-demo",
                                      "moment-based recovery round-trip on a random model");
  int spec_states = 2, spec_period = 4, spec_features = 0;
  long long spec_windows = 0;
  std::uint64_t spec_seed = 0;
  double spec_tol = 1e-8;
  std::string spec_out;
  spec_cmd->add_option("--states", spec_states, "hidden state count");
  spec_cmd->add_option("--period", spec_period, "period length");
  spec_cmd->add_option("--seed", spec_seed, "RNG seed");
  spec_cmd->add_option("--features", spec_features, "feature count (default 2K)");
  spec_cmd->add_option("--windows", spec_windows, "also run empirical recovery with this many windows per phase");
  spec_cmd->add_option("--tolerance", spec_tol, "max admissible recovery error");
  spec_cmd->add_option("--out", spec_out, "write the error table to this file");

  // check
  auto* check_cmd = app.add_subcommand("check", "numerical assumption report for a model");
  std::string check_model, check_preset, check_out;
  double check_tol = 1e-8;
  check_cmd->add_option("--model", check_model, "model document (JSON)");
  check_cmd->add_option("--preset", check_preset, "sim-study")
      ->check(CLI::IsMember({"sim-study"}));
  check_cmd->add_option("--tol", check_tol, "relative determinant tolerance");
  check_cmd->add_option("--out", check_out, "write the report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the error and usage
    return 1;
  }

  try {
    if (fit_cmd->parsed()) {
      fit_cfg.pi_stationary = (pi_mode == "stationary");
      return cmd_fit(fit_data, fit_preset, fit_family, fit_dims, fit_cfg, fit_start_phase,
                     fit_out);
    }
    if (sim_cmd->parsed())
      return cmd_simulate(sim_model, sim_preset, sim_length, sim_reps, sim_seed, sim_states,
                          sim_out);
    if (val_cmd->parsed()) return cmd_validate(val_model, val_data, val_reps, val_seed,
                                               val_opt, val_out);
    if (spec_cmd->parsed()) {
      if (spec_features <= 0) spec_features = 2 * spec_states;
      return cmd_spectral_demo(spec_states, spec_period, spec_seed, spec_features,
                               spec_windows, spec_tol, spec_out);
    }
    if (check_cmd->parsed()) return cmd_check(check_model, check_preset, check_tol, check_out);
  } catch (const shmm::FitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const shmm::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
