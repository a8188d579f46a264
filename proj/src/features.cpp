#include "shmm/features.hpp"

#include <algorithm>
#include <cmath>

namespace shmm {

double Feature::eval(double y) const {
  switch (kind) {
    case Kind::indicator:
      return (y >= lo && y < hi) ? 1.0 : 0.0;
    case Kind::exp_moment:
      return std::exp(-s * y);
    case Kind::moment: {
      double v = std::min(y, clip);
      return std::pow(v, power);
    }
  }
  return 0.0;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const auto n = sorted.size();
  if (n == 1) return sorted[0];
  double h = p * static_cast<double>(n - 1);
  auto i = static_cast<std::size_t>(h);
  if (i + 1 >= n) return sorted.back();
  double w = h - static_cast<double>(i);
  return sorted[i] + w * (sorted[i + 1] - sorted[i]);
}

}  // namespace

FeatureMap FeatureMap::histogram(const std::vector<double>& data, int count) {
  if (count < 1) throw DataError("FeatureMap::histogram: count must be >= 1");
  if (data.empty()) throw DataError("FeatureMap::histogram: empty data");

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<Feature> feats;

  bool has_zero = std::any_of(data.begin(), data.end(), [](double y) { return y <= 0.0; });
  std::vector<double> pos;
  for (double y : data)
    if (y > 0.0) pos.push_back(y);

  int bins = count;
  if (has_zero) {
    // Dry indicator absorbs the point mass at zero.
    feats.push_back(Feature::indicator(-inf, std::nextafter(0.0, 1.0)));
    bins -= 1;
    if (bins == 0) return FeatureMap(std::move(feats));
    if (pos.empty())
      throw DataError("FeatureMap::histogram: no positive values to bin");
  }

  std::vector<double> sorted = has_zero ? pos : data;
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> edges;
  for (int a = 1; a < bins; ++a)
    edges.push_back(quantile_sorted(sorted, static_cast<double>(a) / bins));
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  double prev = has_zero ? std::nextafter(0.0, 1.0) : -inf;
  for (double e : edges) {
    feats.push_back(Feature::indicator(prev, e));
    prev = e;
  }
  feats.push_back(Feature::indicator(prev, inf));

  if (static_cast<int>(feats.size()) < count)
    throw DataError("FeatureMap::histogram: only " + std::to_string(feats.size()) +
                    " distinct bins available, " + std::to_string(count) + " requested");
  return FeatureMap(std::move(feats));
}

FeatureMap FeatureMap::exp_moments(int count, double base) {
  if (count < 1 || base <= 0.0)
    throw DataError("FeatureMap::exp_moments: need count >= 1 and base > 0");
  std::vector<Feature> feats;
  for (int a = 1; a <= count; ++a) feats.push_back(Feature::exp_moment(a * base));
  return FeatureMap(std::move(feats));
}

FeatureMap FeatureMap::moments(int count, double clip) {
  if (count < 1) throw DataError("FeatureMap::moments: count must be >= 1");
  std::vector<Feature> feats;
  for (int a = 1; a <= count; ++a) feats.push_back(Feature::moment(a, clip));
  return FeatureMap(std::move(feats));
}

}  // namespace shmm
