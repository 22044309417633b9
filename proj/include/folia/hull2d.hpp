#pragma once

#include <algorithm>

#include "folia/common.hpp"

namespace folia {

inline double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

/// Convex hull by monotone chain. Returns vertices in counter-clockwise
/// order without repeating the first point. Collinear boundary points are
/// dropped; an input whose points are all collinear is rejected.
inline std::vector<Vec2> convex_hull_2d(std::vector<Vec2> pts) {
  if (pts.size() < 3) throw DataError("convex_hull_2d: need at least 3 points");
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return a == b; }),
            pts.end());
  const int n = int(pts.size());
  if (n < 3) throw DataError("convex_hull_2d: fewer than 3 distinct points");
  std::vector<Vec2> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const int lower = k + 1;
  for (int i = n - 2; i >= 0; --i) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3) throw DataError("convex_hull_2d: points are collinear");
  return hull;
}

inline double hull_perimeter(const std::vector<Vec2>& hull) {
  double len = 0.0;
  for (size_t i = 0; i < hull.size(); ++i)
    len += (hull[(i + 1) % hull.size()] - hull[i]).norm();
  return len;
}

/// True if `p` is inside or on a CCW convex polygon.
inline bool point_in_convex_polygon(const std::vector<Vec2>& hull, const Vec2& p,
                                    double tol = 1e-12) {
  for (size_t i = 0; i < hull.size(); ++i)
    if (cross2(hull[i], hull[(i + 1) % hull.size()], p) < -tol) return false;
  return true;
}

/// `count` points spaced uniformly by arc length along the hull boundary,
/// each moved `inward_margin` toward the interior perpendicular to its edge.
/// The walk starts at vertex 0.
inline std::vector<Vec2> sample_hull_boundary(const std::vector<Vec2>& hull, int count,
                                              double inward_margin = 0.0) {
  if (hull.size() < 3) throw DataError("sample_hull_boundary: degenerate hull");
  if (count < 1) throw DataError("sample_hull_boundary: count must be positive");
  const double perim = hull_perimeter(hull);
  std::vector<Vec2> out;
  out.reserve(count);
  const int n = int(hull.size());
  int edge = 0;
  double edge_start = 0.0;
  double edge_len = (hull[1 % n] - hull[0]).norm();
  for (int i = 0; i < count; ++i) {
    const double target = perim * double(i) / count;
    while (target > edge_start + edge_len && edge + 1 < n) {
      edge_start += edge_len;
      ++edge;
      edge_len = (hull[(edge + 1) % n] - hull[edge]).norm();
    }
    const Vec2 a = hull[edge], b = hull[(edge + 1) % n];
    const double t = edge_len > 0.0 ? (target - edge_start) / edge_len : 0.0;
    Vec2 p = a + t * (b - a);
    if (inward_margin != 0.0) {
      const Vec2 dir = (b - a).normalized();
      const Vec2 inward(-dir.y(), dir.x());  // interior lies left of a CCW edge
      p += inward_margin * inward;
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace folia
