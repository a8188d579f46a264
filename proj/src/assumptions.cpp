#include "shmm/assumptions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace shmm {

bool AssumptionReport::any_singular() const {
  return std::any_of(phases.begin(), phases.end(),
                     [](const PhaseEntry& p) { return p.singular; });
}

double AssumptionReport::min_sigma_min_O() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : phases) m = std::min(m, p.sigma_min_O);
  return m;
}

std::string AssumptionReport::to_text() const {
  std::ostringstream out;
  char line[256];
  out << "assumption check (det tol " << det_tol << ", " << feature_count
      << " features)\n";
  out << "  alpha (min transition prob): " << alpha << "\n";
  out << "  irreducible: " << (irreducible ? "yes" : "no") << "\n";
  out << "  period-product spectral gap: " << spectral_gap
      << (ergodic ? " (ergodic)" : " (NOT ergodic)") << "\n";
  out << "  beta identifiable (T > 2d): " << (beta_identifiable ? "yes" : "no") << "\n";
  out << "  t |det Q(t)| flag min_entry sigma_min(O_t)\n";
  for (const auto& p : phases) {
    std::snprintf(line, sizeof(line), "  %4d %.6e %s %.6e %.6e\n", p.t, p.abs_det,
                  p.singular ? "SINGULAR" : "ok      ", p.min_entry, p.sigma_min_O);
    out << line;
  }
  if (any_singular()) out << "  WARNING: singular transition matrices flagged above\n";
  return out.str();
}

AssumptionReport check_assumptions(const SeasonalHMM& model, double tol) {
  // Exponential-moment features on a grid matched to the emission scale;
  // closed-form integrals for every built-in family.
  const int N = std::max(2 * model.dims().K, 4);
  const double base = 0.5 / model.emissions().scale_hint();
  return check_assumptions(model, tol, FeatureMap::exp_moments(N, base));
}

AssumptionReport check_assumptions(const SeasonalHMM& model, double tol,
                                   const FeatureMap& features) {
  const ModelDims& dims = model.dims();
  AssumptionReport report;
  report.det_tol = tol;
  report.beta_identifiable = dims.beta_identifiable();
  report.feature_count = features.size();

  double alpha = std::numeric_limits<double>::infinity();
  bool irreducible = true;
  for (int t = 1; t <= dims.T; ++t) {
    const Eigen::MatrixXd q = model.transition().matrix(t);
    AssumptionReport::PhaseEntry entry;
    entry.t = t;
    entry.min_entry = q.minCoeff();
    irreducible = irreducible && entry.min_entry > 0.0;
    alpha = std::min(alpha, entry.min_entry);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(q);
    entry.abs_det = std::abs(q.determinant());
    entry.singular = entry.abs_det < tol * svd.singularValues().maxCoeff();

    entry.sigma_min_O =
        linear_independence_check(model.emissions(), t, features, features.size());
    report.phases.push_back(entry);
  }
  report.alpha = alpha;
  report.irreducible = irreducible;

  const Eigen::MatrixXd product = model.transition().period_product();
  Eigen::EigenSolver<Eigen::MatrixXd> eig(product, /*computeEigenvectors=*/false);
  std::vector<double> mags;
  for (int i = 0; i < dims.K; ++i) mags.push_back(std::abs(eig.eigenvalues()(i)));
  std::sort(mags.begin(), mags.end(), std::greater<>());
  report.spectral_gap = dims.K > 1 ? 1.0 - mags[1] : 1.0;
  report.ergodic = report.spectral_gap > 0.0;
  return report;
}

}  // namespace shmm
