#ifndef SHMM_PRESETS_HPP
#define SHMM_PRESETS_HPP

#include "shmm/model.hpp"
#include "shmm/rng.hpp"

namespace shmm {

// The two-state Gaussian benchmark model (K=2, T=365, d=1, single Gaussian
// component per state with a first-order periodic mean).
SeasonalHMM sim_study_model();

// A random model suitable for exact spectral round-trips: Gaussian
// emissions with well-separated means/variances and moderate seasonal
// logits, rejection-sampled until every phase passes the screens
// |det Q(t)| > det_min and sigma_min(O_t) > sigma_min (with exponential
// moment features of size 2K).
SeasonalHMM random_spectral_model(int K, int T, SplitMix64& rng, double det_min = 0.01,
                                  double sigma_min = 0.05);

}  // namespace shmm

#endif  // SHMM_PRESETS_HPP
