#ifndef SHMM_FEATURES_HPP
#define SHMM_FEATURES_HPP

#include <Eigen/Dense>
#include <vector>

#include "shmm/types.hpp"

namespace shmm {

// One test function phi used to project emission distributions onto
// moments. Three kinds are supported:
//   indicator:  1[lo <= y < hi]          (hi may be +inf)
//   exp_moment: exp(-s * y)
//   moment:     min(y, clip)^power       (clip = +inf disables clipping)
struct Feature {
  enum class Kind { indicator, exp_moment, moment };

  Kind kind = Kind::indicator;
  double lo = 0.0;
  double hi = 0.0;
  double s = 0.0;
  int power = 1;
  double clip = std::numeric_limits<double>::infinity();

  static Feature indicator(double lo, double hi) {
    Feature f;
    f.kind = Kind::indicator;
    f.lo = lo;
    f.hi = hi;
    return f;
  }
  static Feature exp_moment(double s) {
    Feature f;
    f.kind = Kind::exp_moment;
    f.s = s;
    return f;
  }
  static Feature moment(int power, double clip = std::numeric_limits<double>::infinity()) {
    Feature f;
    f.kind = Kind::moment;
    f.power = power;
    f.clip = clip;
    return f;
  }

  double eval(double y) const;
};

// A finite family of test functions. The emission feature matrix O_t has
// entry (a, k) = integral of feature a against the state-k emission law at
// phase t; it has full column rank K whenever the K emission laws are
// linearly independent and enough features are used.
class FeatureMap {
 public:
  FeatureMap() = default;
  explicit FeatureMap(std::vector<Feature> features) : features_(std::move(features)) {}

  int size() const { return static_cast<int>(features_.size()); }
  const Feature& operator[](int a) const { return features_[a]; }
  const std::vector<Feature>& features() const { return features_; }

  Eigen::VectorXd eval(double y) const {
    Eigen::VectorXd v(size());
    for (int a = 0; a < size(); ++a) v(a) = features_[a].eval(y);
    return v;
  }

  // Histogram-bin indicators with edges at empirical quantiles of `data`.
  // When the data contains exact zeros (zero-inflated series) the first
  // feature is a dedicated dry indicator 1[y <= 0] and the remaining bins
  // cover the positive part. Throws DataError if fewer than `count`
  // distinct bins can be formed.
  static FeatureMap histogram(const std::vector<double>& data, int count);

  // exp(-s_a * y) on the grid s_a = a * base, a = 1..count.
  static FeatureMap exp_moments(int count, double base);

  // Monic moments y^a for a = 1..count, clipped at `clip`.
  static FeatureMap moments(int count, double clip);

 private:
  std::vector<Feature> features_;
};

}  // namespace shmm

#endif  // SHMM_FEATURES_HPP
