#ifndef SHMM_TYPES_HPP
#define SHMM_TYPES_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace shmm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files, unusable observations, schema mismatches.
class DataError : public Error {
 public:
  using Error::Error;
};

// Iterative solves that fail to converge, non-finite intermediates.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Construction requests that exceed a configured cap (chunked state space).
class SizeError : public Error {
 public:
  using Error::Error;
};

// Rank deficiency in moment matrices (violated invertibility/independence).
class RankError : public Error {
 public:
  using Error::Error;
};

// Persistent eigenvalue collisions in the spectral recovery.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

// No EM start produced a usable likelihood.
class FitError : public Error {
 public:
  using Error::Error;
};

// Dimensions of a seasonal hidden Markov model: K hidden states, period T,
// and trigonometric degree d of the transition logits. States are indexed
// 0..K-1 throughout the library; time phases are 1..T (reduced mod T).
struct ModelDims {
  int K = 1;
  int T = 1;
  int d = 0;

  void validate() const {
    if (K < 1) throw DataError("ModelDims: K must be >= 1, got " + std::to_string(K));
    if (T < 1) throw DataError("ModelDims: T must be >= 1, got " + std::to_string(T));
    if (d < 0) throw DataError("ModelDims: d must be >= 0, got " + std::to_string(d));
  }

  // The transition coefficients are only identifiable from the matrices
  // Q(1..T) when T > 2d. Advisory, not fatal.
  bool beta_identifiable() const { return T > 2 * d; }

  int trig_dim() const { return 2 * d + 1; }

  bool operator==(const ModelDims&) const = default;
};

// Phase of the 1-based time index t, wrapped into 1..T.
inline int phase_of(long long t, int T) {
  long long m = (t - 1) % T;
  if (m < 0) m += T;
  return static_cast<int>(m) + 1;
}

// Z(t) = (1, cos(2*pi*t/T), sin(2*pi*t/T), ..., cos(2*pi*d*t/T), sin(2*pi*d*t/T)).
Eigen::VectorXd trig_basis(int t, int T, int degree);

// Same basis without the constant term; used for zero-constant trigonometric
// polynomials (emission scale and mean offsets).
Eigen::VectorXd trig_basis_nc(int t, int T, int degree);

// log(sum_i exp(x_i)) with max shift; returns -inf when all entries are -inf.
double log_sum_exp(const double* x, int n);

inline double log_sum_exp(const Eigen::VectorXd& x) {
  return log_sum_exp(x.data(), static_cast<int>(x.size()));
}

}  // namespace shmm

#endif  // SHMM_TYPES_HPP
