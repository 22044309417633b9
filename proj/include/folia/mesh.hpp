#pragma once

#include <array>
#include <vector>

#include "folia/common.hpp"
#include "folia/sim3.hpp"

namespace folia {

/// Indexed triangle mesh, vertices in meters.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  bool empty() const { return faces.empty(); }

  void require_valid() const {
    const int n = int(vertices.size());
    for (const auto& f : faces) {
      for (int k = 0; k < 3; ++k)
        if (f[k] < 0 || f[k] >= n) throw DataError("TriMesh: face index out of range");
      if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
        throw DataError("TriMesh: degenerate face");
    }
  }

  Vec3 face_normal(int i) const {
    const auto& f = faces[i];
    const Vec3 n = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
    const double len = n.norm();
    return len > 1e-18 ? Vec3(n / len) : Vec3(0, 0, 1);
  }

  double face_area(int i) const {
    const auto& f = faces[i];
    return 0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
  }

  double total_area() const {
    double a = 0.0;
    for (int i = 0; i < int(faces.size()); ++i) a += face_area(i);
    return a;
  }

  /// Area-weighted vertex normals.
  std::vector<Vec3> vertex_normals() const {
    std::vector<Vec3> normals(vertices.size(), Vec3::Zero());
    for (const auto& f : faces) {
      const Vec3 n = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
      for (int k = 0; k < 3; ++k) normals[f[k]] += n;
    }
    for (Vec3& n : normals) {
      const double len = n.norm();
      if (len > 1e-18) n /= len;
    }
    return normals;
  }

  void transform(const Sim3Transform& t) {
    for (Vec3& v : vertices) v = t.apply(v);
  }

  void append(const TriMesh& other) {
    const int base = int(vertices.size());
    vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
    for (const auto& f : other.faces)
      faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  }

  /// Signed volume via the divergence theorem; exact for closed meshes.
  double signed_volume() const {
    double v = 0.0;
    for (const auto& f : faces)
      v += vertices[f[0]].dot(vertices[f[1]].cross(vertices[f[2]])) / 6.0;
    return v;
  }

  /// Volume centroid (divergence theorem); falls back to the vertex mean for
  /// meshes with near-zero enclosed volume.
  Vec3 volume_centroid() const {
    double vol = 0.0;
    Vec3 c = Vec3::Zero();
    for (const auto& f : faces) {
      const Vec3 &a = vertices[f[0]], &b = vertices[f[1]], &d = vertices[f[2]];
      const double v6 = a.dot(b.cross(d));
      vol += v6 / 6.0;
      c += v6 / 24.0 * (a + b + d);  // tetra centroid is (a+b+d+0)/4
    }
    if (std::abs(vol) < 1e-12) {
      if (vertices.empty()) throw DataError("volume_centroid: empty mesh");
      Vec3 m = Vec3::Zero();
      for (const Vec3& v : vertices) m += v;
      return m / double(vertices.size());
    }
    return c / vol;
  }
};

}  // namespace folia
