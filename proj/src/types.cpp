#include "shmm/types.hpp"

#include <cmath>
#include <limits>

namespace shmm {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

Eigen::VectorXd trig_basis(int t, int T, int degree) {
  Eigen::VectorXd z(2 * degree + 1);
  z(0) = 1.0;
  const double w = kTwoPi * static_cast<double>(t) / static_cast<double>(T);
  for (int l = 1; l <= degree; ++l) {
    z(2 * l - 1) = std::cos(l * w);
    z(2 * l) = std::sin(l * w);
  }
  return z;
}

Eigen::VectorXd trig_basis_nc(int t, int T, int degree) {
  Eigen::VectorXd z(2 * degree);
  const double w = kTwoPi * static_cast<double>(t) / static_cast<double>(T);
  for (int l = 1; l <= degree; ++l) {
    z(2 * l - 2) = std::cos(l * w);
    z(2 * l - 1) = std::sin(l * w);
  }
  return z;
}

double log_sum_exp(const double* x, int n) {
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) m = std::max(m, x[i]);
  if (!std::isfinite(m)) return m;  // all -inf (or contains +inf)
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(x[i] - m);
  return m + std::log(s);
}

}  // namespace shmm
