#include "shmm/model.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>

namespace shmm {

SeasonalHMM::SeasonalHMM(PeriodicLogitTransition transition,
                         std::unique_ptr<EmissionFamily> emissions, Eigen::VectorXd pi)
    : transition_(std::move(transition)), emissions_(std::move(emissions)), pi_(std::move(pi)) {
  if (!emissions_) throw DataError("SeasonalHMM: null emission family");
  validate();
}

SeasonalHMM::SeasonalHMM(const SeasonalHMM& other)
    : transition_(other.transition_), emissions_(other.emissions_->clone()), pi_(other.pi_) {}

SeasonalHMM& SeasonalHMM::operator=(const SeasonalHMM& other) {
  if (this != &other) {
    transition_ = other.transition_;
    emissions_ = other.emissions_->clone();
    pi_ = other.pi_;
  }
  return *this;
}

void SeasonalHMM::set_pi(Eigen::VectorXd pi) {
  if (pi.size() != dims().K) throw DataError("SeasonalHMM: pi has wrong size");
  pi_ = std::move(pi);
}

void SeasonalHMM::validate() const {
  const ModelDims& d = dims();
  d.validate();
  if (pi_.size() != d.K)
    throw DataError("SeasonalHMM: pi has size " + std::to_string(pi_.size()) +
                    ", expected K = " + std::to_string(d.K));
  if (pi_.minCoeff() < 0.0 || std::abs(pi_.sum() - 1.0) > 1e-12)
    throw DataError("SeasonalHMM: pi is not a probability vector");
  if (emissions_->states() != d.K)
    throw DataError("SeasonalHMM: emission family has " +
                    std::to_string(emissions_->states()) + " states, expected " +
                    std::to_string(d.K));
  if (emissions_->period() != d.T)
    throw DataError("SeasonalHMM: emission family has period " +
                    std::to_string(emissions_->period()) + ", expected " +
                    std::to_string(d.T));
  emissions_->validate();
}

namespace {

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= UINT64_C(0x100000001B3);
  }
}

void fnv_mix_double(std::uint64_t& h, double v) { fnv_mix(h, &v, sizeof(v)); }

}  // namespace

std::string SeasonalHMM::fingerprint() const {
  std::uint64_t h = UINT64_C(0xCBF29CE484222325);
  const ModelDims& d = dims();
  fnv_mix(h, &d.K, sizeof(d.K));
  fnv_mix(h, &d.T, sizeof(d.T));
  fnv_mix(h, &d.d, sizeof(d.d));
  for (double v : transition_.coefficients()) fnv_mix_double(h, v);
  for (int k = 0; k < d.K; ++k) fnv_mix_double(h, pi_(k));
  const std::string tag = emissions_->family_tag();
  fnv_mix(h, tag.data(), tag.size());
  for (int k = 0; k < d.K; ++k)
    for (double v : emissions_->state_params(k)) fnv_mix_double(h, v);

  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

SeasonalHMM SeasonalHMM::permuted(const std::vector<int>& perm) const {
  const int K = dims().K;
  if (static_cast<int>(perm.size()) != K)
    throw DataError("SeasonalHMM::permuted: permutation size must equal K");
  Eigen::VectorXd pi(K);
  for (int k = 0; k < K; ++k) pi(k) = pi_(perm[k]);
  auto em = emissions_->clone();
  em->permute_states(perm);
  return SeasonalHMM(transition_.permuted(perm), std::move(em), std::move(pi));
}

}  // namespace shmm
