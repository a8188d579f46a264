#include "shmm/simulate.hpp"

namespace shmm {

Trajectory simulate_from(const SeasonalHMM& model, long long n, std::uint64_t seed,
                         int start_phase, const Eigen::VectorXd& initial) {
  if (n < 1) throw DataError("simulate: n must be >= 1");
  const int K = model.dims().K;
  const int T = model.dims().T;

  SplitMix64 rng(seed);
  Trajectory traj;
  traj.seed = seed;
  traj.model_fingerprint = model.fingerprint();
  traj.states.resize(n);
  traj.values.resize(n);

  std::vector<Eigen::MatrixXd> q(T);
  for (int t = 1; t <= T; ++t) q[t - 1] = model.transition().matrix(t);

  traj.states[0] = rng.categorical(initial, K);
  for (long long i = 0; i + 1 < n; ++i) {
    const Eigen::MatrixXd& qt = q[phase_of(start_phase + i, T) - 1];
    traj.states[i + 1] = rng.categorical(qt.row(traj.states[i]), K);
  }
  for (long long i = 0; i < n; ++i)
    traj.values[i] =
        model.emissions().sample(traj.states[i], phase_of(start_phase + i, T), rng);
  return traj;
}

Trajectory simulate(const SeasonalHMM& model, long long n, std::uint64_t seed) {
  return simulate_from(model, n, seed, 1, model.pi());
}

std::vector<Trajectory> simulate_batch(const SeasonalHMM& model, long long n, int reps,
                                       std::uint64_t seed) {
  if (reps < 1) throw DataError("simulate_batch: reps must be >= 1");
  std::vector<Trajectory> out;
  out.reserve(reps);
  for (int r = 0; r < reps; ++r)
    out.push_back(simulate(model, n, split_seed(seed, static_cast<std::uint64_t>(r))));
  return out;
}

}  // namespace shmm
