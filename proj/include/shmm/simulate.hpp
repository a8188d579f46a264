#ifndef SHMM_SIMULATE_HPP
#define SHMM_SIMULATE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "shmm/model.hpp"

namespace shmm {

// One simulated path. States are 0-based (CSV output writes them 1-based).
struct Trajectory {
  std::vector<int> states;
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::string model_fingerprint;
};

// Simulates n steps: X_1 ~ pi, X_{t+1} | X_t ~ Q(phase(t)), then
// Y_t ~ nu_{X_t, phase(t)} (the whole state path is drawn before the
// observations). Bit-reproducible given the seed.
Trajectory simulate(const SeasonalHMM& model, long long n, std::uint64_t seed);

// Same, but the first value sits at `start_phase` and the initial state is
// drawn from `initial` (e.g. the stationary phase marginal when continuing
// a calendar that does not start at phase 1).
Trajectory simulate_from(const SeasonalHMM& model, long long n, std::uint64_t seed,
                         int start_phase, const Eigen::VectorXd& initial);

// `reps` independent trajectories; replicate r uses the child stream
// split_seed(seed, r), so the batch is reproducible and replicates are
// independent by construction.
std::vector<Trajectory> simulate_batch(const SeasonalHMM& model, long long n, int reps,
                                       std::uint64_t seed);

}  // namespace shmm

#endif  // SHMM_SIMULATE_HPP
