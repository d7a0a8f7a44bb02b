#pragma once

// Finite target sets A with fast membership.

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>
#include <vector>

#include "bcrw/errors.hpp"
#include "bcrw/lattice.hpp"

namespace bcrw {

class TargetSet {
 public:
  TargetSet() = default;
  TargetSet(int dim, std::vector<Point> points) : dim_(dim) {
    if (points.empty()) throw Error(ErrorCode::EmptySet, "target set is empty");
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    points_ = std::move(points);
    lo_.fill(std::numeric_limits<std::int32_t>::max());
    hi_.fill(std::numeric_limits<std::int32_t>::min());
    for (const auto& p : points_) {
      for (int i = 0; i < kMaxDim; ++i) {
        if (i >= dim_ && p[i] != 0) throw Error(ErrorCode::InvalidArgument, "target point has coordinates beyond dim");
        lo_[i] = std::min(lo_[i], p[i]);
        hi_[i] = std::max(hi_[i], p[i]);
      }
    }
    if (points_.size() > kLinearScan) hash_.insert(points_.begin(), points_.end());
  }

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<Point>& points() const noexcept { return points_; }
  const Point& lower() const noexcept { return lo_; }
  const Point& upper() const noexcept { return hi_; }

  bool contains(const Point& x) const noexcept {
    for (int i = 0; i < dim_; ++i)
      if (x[i] < lo_[i] || x[i] > hi_[i]) return false;
    if (points_.size() <= kLinearScan) return std::find(points_.begin(), points_.end(), x) != points_.end();
    return hash_.contains(x);
  }

  bool intersects(const TargetSet& other) const {
    const auto& small = size() <= other.size() ? *this : other;
    const auto& big = size() <= other.size() ? other : *this;
    return std::any_of(small.points_.begin(), small.points_.end(), [&](const Point& p) { return big.contains(p); });
  }

  TargetSet translated(const Point& c) const {
    std::vector<Point> pts;
    pts.reserve(points_.size());
    for (const auto& p : points_) pts.push_back(p + c);
    return TargetSet(dim_, std::move(pts));
  }

  TargetSet united(const TargetSet& other) const {
    auto pts = points_;
    pts.insert(pts.end(), other.points_.begin(), other.points_.end());
    return TargetSet(dim_, std::move(pts));
  }

 private:
  static constexpr std::size_t kLinearScan = 8;
  int dim_ = 0;
  std::vector<Point> points_;
  Point lo_{}, hi_{};
  std::unordered_set<Point, PointHash> hash_;
};

/// Rad(A) = max_{a in A} ||a|| (with ||0|| = 0.5).
inline double set_radius(const JumpDistribution& theta, const TargetSet& a) {
  double r = 0.0;
  for (const auto& p : a.points()) r = std::max(r, theta.norm(p));
  return r;
}

/// dist(x, A) = min_{a in A} ||x - a|| (0.5 when x is in A).
inline double set_distance(const JumpDistribution& theta, const Point& x, const TargetSet& a) {
  double r = std::numeric_limits<double>::infinity();
  for (const auto& p : a.points()) r = std::min(r, theta.norm(x - p));
  return r;
}

/// Euclidean diameter.
inline double set_diameter(const TargetSet& a) {
  double d = 0.0;
  const auto& pts = a.points();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, euclidean_norm(pts[i] - pts[j]));
  return d;
}

}  // namespace bcrw
