#pragma once

#include <map>

#include "folia/mesh.hpp"

namespace folia {

/// Axis-aligned box centered at `center` with full side lengths `size`.
inline TriMesh make_box(const Vec3& center, const Vec3& size) {
  TriMesh m;
  const Vec3 h = 0.5 * size;
  for (int i = 0; i < 8; ++i) {
    m.vertices.push_back(center + Vec3((i & 1) ? h.x() : -h.x(),
                                       (i & 2) ? h.y() : -h.y(),
                                       (i & 4) ? h.z() : -h.z()));
  }
  // faces wound outward
  const int quads[6][4] = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4},
                           {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
  for (const auto& q : quads) {
    m.faces.push_back({q[0], q[1], q[2]});
    m.faces.push_back({q[0], q[2], q[3]});
  }
  return m;
}

/// Tube swept along a polyline with circular cross-section, closed with end
/// fans. Ring frames are propagated along the curve to avoid twist.
inline TriMesh make_tube(const std::vector<Vec3>& polyline, double radius, int segments = 16) {
  if (polyline.size() < 2) throw DataError("make_tube: need at least 2 polyline points");
  if (!(radius > 0.0)) throw DataError("make_tube: radius must be positive");
  TriMesh m;
  const int n = int(polyline.size());
  Vec3 prev_tangent = (polyline[1] - polyline[0]).normalized();
  Vec3 u = prev_tangent.cross(Vec3(0, 0, 1));
  if (u.norm() < 1e-6) u = prev_tangent.cross(Vec3(0, 1, 0));
  u.normalize();
  Vec3 v = prev_tangent.cross(u).normalized();
  for (int i = 0; i < n; ++i) {
    Vec3 tangent;
    if (i == 0)
      tangent = (polyline[1] - polyline[0]).normalized();
    else if (i == n - 1)
      tangent = (polyline[n - 1] - polyline[n - 2]).normalized();
    else
      tangent = (polyline[i + 1] - polyline[i - 1]).normalized();
    // rotate the frame minimally from the previous tangent
    const Vec3 axis = prev_tangent.cross(tangent);
    const double s = axis.norm(), c = prev_tangent.dot(tangent);
    if (s > 1e-12) {
      const Mat3 r = rotation_exp(axis / s * std::atan2(s, c));
      u = (r * u).normalized();
      v = (r * v).normalized();
    }
    prev_tangent = tangent;
    for (int k = 0; k < segments; ++k) {
      const double a = 2.0 * M_PI * k / segments;
      m.vertices.push_back(polyline[i] + radius * (std::cos(a) * u + std::sin(a) * v));
    }
  }
  for (int i = 0; i + 1 < n; ++i) {
    for (int k = 0; k < segments; ++k) {
      const int k2 = (k + 1) % segments;
      const int a = i * segments + k, b = i * segments + k2;
      const int c = (i + 1) * segments + k, d = (i + 1) * segments + k2;
      m.faces.push_back({a, b, c});
      m.faces.push_back({b, d, c});
    }
  }
  // cap fans
  const int c0 = int(m.vertices.size());
  m.vertices.push_back(polyline.front());
  const int c1 = int(m.vertices.size());
  m.vertices.push_back(polyline.back());
  for (int k = 0; k < segments; ++k) {
    const int k2 = (k + 1) % segments;
    m.faces.push_back({c0, k2, k});
    m.faces.push_back({c1, (n - 1) * segments + k, (n - 1) * segments + k2});
  }
  return m;
}

/// Straight closed cylinder from `a` to `b`.
inline TriMesh make_cylinder(const Vec3& a, const Vec3& b, double radius,
                             int segments = 16, int rings = 8) {
  if (rings < 1) rings = 1;
  std::vector<Vec3> line;
  for (int i = 0; i <= rings; ++i) line.push_back(a + (b - a) * (double(i) / rings));
  return make_tube(line, radius, segments);
}

/// Icosphere of given radius; `subdivisions` levels of 4-way refinement.
inline TriMesh make_icosphere(const Vec3& center, double radius, int subdivisions = 3) {
  TriMesh m;
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  auto add = [&](double x, double y, double z) {
    m.vertices.push_back(Vec3(x, y, z).normalized());
  };
  add(-1, t, 0); add(1, t, 0); add(-1, -t, 0); add(1, -t, 0);
  add(0, -1, t); add(0, 1, t); add(0, -1, -t); add(0, 1, -t);
  add(t, 0, -1); add(t, 0, 1); add(-t, 0, -1); add(-t, 0, 1);
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int i, int j) {
      const auto key = std::minmax(i, j);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = int(m.vertices.size());
      m.vertices.push_back((m.vertices[i] + m.vertices[j]).normalized());
      midpoint[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.faces = std::move(next);
  }
  for (Vec3& v : m.vertices) v = center + radius * v;
  return m;
}

}  // namespace folia
