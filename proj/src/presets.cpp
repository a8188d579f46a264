#include "shmm/presets.hpp"

#include "shmm/assumptions.hpp"
#include "shmm/emissions.hpp"

namespace shmm {

SeasonalHMM sim_study_model() {
  const ModelDims dims{2, 365, 1};
  PeriodicLogitTransition transition(dims);
  const double beta1[3] = {1.0, 0.7, 0.5};
  const double beta2[3] = {-1.0, -0.6, 0.7};
  for (int c = 0; c < 3; ++c) {
    transition.beta(0, 0, c) = beta1[c];
    transition.beta(1, 0, c) = beta2[c];
  }

  auto emissions = std::make_unique<GaussianPeriodicMean>(2, 365, 1, 1);
  emissions->level << -1.0, 2.0;
  emissions->variances << 1.0, 0.25;
  emissions->trig.row(0) << 2.5, 4.0;
  emissions->trig.row(1) << -1.5, 3.5;

  Eigen::VectorXd pi(2);
  pi << 0.5, 0.5;
  return SeasonalHMM(std::move(transition), std::move(emissions), pi);
}

SeasonalHMM random_spectral_model(int K, int T, SplitMix64& rng, double det_min,
                                  double sigma_min) {
  const ModelDims dims{K, T, 1};
  for (int attempt = 0; attempt < 1000; ++attempt) {
    PeriodicLogitTransition transition(dims);
    {
      std::vector<double> beta(transition.coefficients().size());
      for (std::size_t c = 0; c < beta.size(); ++c) beta[c] = 1.5 * (2.0 * rng.uniform() - 1.0);
      transition.set_coefficients(beta);
    }

    auto emissions = std::make_unique<GaussianPeriodicMean>(K, T, 1, 0);
    for (int k = 0; k < K; ++k) {
      emissions->level(k) = 3.0 * k + rng.uniform();
      emissions->variances(k, 0) = 0.5 + 0.2 * k + 0.3 * rng.uniform();
    }

    SeasonalHMM model(std::move(transition), std::move(emissions),
                      Eigen::VectorXd::Constant(K, 1.0 / K));

    const AssumptionReport report = check_assumptions(model, 1e-12);
    bool admissible = report.min_sigma_min_O() > sigma_min;
    for (const auto& phase : report.phases)
      admissible = admissible && phase.abs_det > det_min;
    if (admissible) return model;
  }
  throw NumericalError("random_spectral_model: no admissible model after 1000 attempts");
}

}  // namespace shmm
