#pragma once

#include <algorithm>

#include "folia/mesh.hpp"

namespace folia {

/// `count` points sampled uniformly by area over the mesh surface.
inline std::vector<Vec3> sample_mesh_surface(const TriMesh& mesh, int count, Rng& rng) {
  if (count < 0) throw DataError("sample_mesh_surface: negative count");
  if (mesh.faces.empty()) throw DataError("sample_mesh_surface: mesh has no faces");
  std::vector<double> cum(mesh.faces.size());
  double total = 0.0;
  for (size_t i = 0; i < mesh.faces.size(); ++i) {
    total += mesh.face_area(int(i));
    cum[i] = total;
  }
  if (!(total > 0.0)) throw DataError("sample_mesh_surface: zero surface area");
  std::vector<Vec3> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double r = rng.uniform() * total;
    const size_t fi =
        std::min(size_t(std::lower_bound(cum.begin(), cum.end(), r) - cum.begin()),
                 mesh.faces.size() - 1);
    const auto& f = mesh.faces[fi];
    double u = rng.uniform(), v = rng.uniform();
    if (u + v > 1.0) { u = 1.0 - u; v = 1.0 - v; }
    out.push_back(mesh.vertices[f[0]] +
                  u * (mesh.vertices[f[1]] - mesh.vertices[f[0]]) +
                  v * (mesh.vertices[f[2]] - mesh.vertices[f[0]]));
  }
  return out;
}

}  // namespace folia
