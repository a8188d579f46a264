#ifndef SHMM_ASSUMPTIONS_HPP
#define SHMM_ASSUMPTIONS_HPP

#include <string>
#include <vector>

#include "shmm/features.hpp"
#include "shmm/model.hpp"

namespace shmm {

// Numerical verification of the identifiability/consistency assumptions on
// one concrete parameter: per-phase invertibility of Q(t), irreducibility,
// ergodicity of the period product, the uniform transition lower bound, and
// linear independence of the emission laws (smallest singular value of the
// feature matrix O_t). Advisory only; never mutates the model.
struct AssumptionReport {
  struct PhaseEntry {
    int t = 0;
    double abs_det = 0.0;
    bool singular = false;     // |det Q(t)| below tol * sigma_max(Q(t))
    double min_entry = 0.0;    // min_{i,j} Q_ij(t)
    double sigma_min_O = 0.0;  // smallest singular value of O_t
  };

  std::vector<PhaseEntry> phases;
  double det_tol = 0.0;
  double alpha = 0.0;         // min over t, i, j of Q_ij(t)
  bool irreducible = false;   // all entries positive
  double spectral_gap = 0.0;  // 1 - |lambda_2| of Q(1)...Q(T)
  bool ergodic = false;
  bool beta_identifiable = false;  // T > 2d
  int feature_count = 0;

  bool any_singular() const;
  double min_sigma_min_O() const;
  std::string to_text() const;
};

// `tol` is relative to the largest singular value of each Q(t); defaults
// follow the library convention of 1e-8.
AssumptionReport check_assumptions(const SeasonalHMM& model, double tol = 1e-8);

// Variant with an explicit feature map for the emission-independence proxy.
AssumptionReport check_assumptions(const SeasonalHMM& model, double tol,
                                   const FeatureMap& features);

}  // namespace shmm

#endif  // SHMM_ASSUMPTIONS_HPP
