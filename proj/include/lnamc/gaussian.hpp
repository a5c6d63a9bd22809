#pragma once

// Normal distribution helpers and sets of disjoint closed intervals.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lnamc/error.hpp"

namespace lnamc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// P(Z <= z) for a standard normal Z.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// P(Z > z), accurate in the upper tail.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

struct Interval {
  double lower = -kInf;
  double upper = kInf;

  bool contains(double x) const { return lower <= x && x <= upper; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

// Sorted set of pairwise disjoint closed intervals. Intervals that share an
// endpoint intersect and are rejected.
class IntervalSet {
 public:
  IntervalSet() = default;

  explicit IntervalSet(std::vector<Interval> intervals) : items_(std::move(intervals)) {
    for (const auto& iv : items_) {
      if (std::isnan(iv.lower) || std::isnan(iv.upper)) throw Error("interval bound is NaN");
      if (iv.lower > iv.upper) throw Error("interval lower bound exceeds upper bound");
      if (iv.lower == kInf || iv.upper == -kInf) throw Error("interval is empty");
    }
    std::sort(items_.begin(), items_.end(),
              [](const Interval& a, const Interval& b) { return a.lower < b.lower || (a.lower == b.lower && a.upper < b.upper); });
    for (std::size_t i = 1; i < items_.size(); ++i)
      if (items_[i].lower <= items_[i - 1].upper) throw Error("intervals overlap");
  }

  const std::vector<Interval>& intervals() const { return items_; }
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }

  bool contains(double x) const {
    return std::any_of(items_.begin(), items_.end(), [x](const Interval& iv) { return iv.contains(x); });
  }

  friend bool operator==(const IntervalSet&, const IntervalSet&) = default;

 private:
  std::vector<Interval> items_;
};

// Mass of N(mean, sd^2) on [lower, upper], sd > 0.
inline double normal_mass(double mean, double sd, const Interval& iv) {
  const double zl = (iv.lower - mean) / sd;
  const double zu = (iv.upper - mean) / sd;
  if (zl >= 0.0) return std::max(0.0, normal_sf(zl) - normal_sf(zu));
  if (zu <= 0.0) return std::max(0.0, normal_cdf(zu) - normal_cdf(zl));
  return std::max(0.0, 1.0 - normal_cdf(zl) - normal_sf(zu));
}

}  // namespace lnamc
