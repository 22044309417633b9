#pragma once

#include <unordered_map>

#include "folia/fruit_estimate.hpp"
#include "folia/mesh.hpp"

namespace folia {

/// Zero iso-surface of `field` over [lo, hi] by marching tetrahedra (six
/// tets per cube sharing the main diagonal, so neighbouring cubes tile
/// consistently and the result is watertight for surfaces closed inside the
/// box). Inside is field < 0; triangles are wound with outward normals.
template <typename Field>
inline TriMesh polygonize(Field&& field, const Vec3& lo, const Vec3& hi, double cell) {
  if (!(cell > 0.0)) throw DataError("polygonize: cell size must be positive");
  const int nx = std::max(1, int(std::ceil((hi.x() - lo.x()) / cell)));
  const int ny = std::max(1, int(std::ceil((hi.y() - lo.y()) / cell)));
  const int nz = std::max(1, int(std::ceil((hi.z() - lo.z()) / cell)));
  const int64_t corners = int64_t(nx + 1) * (ny + 1) * (nz + 1);
  if (corners > (int64_t(1) << 25))
    throw DataError("polygonize: grid too large for the requested cell size");
  const auto corner_id = [&](int i, int j, int k) {
    return (int64_t(i) * (ny + 1) + j) * (nz + 1) + k;
  };
  const auto corner_pos = [&](int i, int j, int k) {
    return Vec3(lo.x() + i * cell, lo.y() + j * cell, lo.z() + k * cell);
  };

  std::vector<double> values(size_t(nx + 1) * (ny + 1) * (nz + 1));
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j)
      for (int k = 0; k <= nz; ++k)
        values[corner_id(i, j, k)] = field(corner_pos(i, j, k));

  TriMesh mesh;
  std::unordered_map<uint64_t, int> edge_vertex;
  const auto edge_point = [&](int64_t ids[8], const Vec3 pos[8], const double val[8],
                              int a, int b) {
    int64_t ca = ids[a], cb = ids[b];
    Vec3 pa = pos[a], pb = pos[b];
    double da = val[a], db = val[b];
    if (ca > cb) {
      std::swap(ca, cb);
      std::swap(pa, pb);
      std::swap(da, db);
    }
    const uint64_t key = (uint64_t(ca) << 32) | uint64_t(cb);
    const auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    const double t = da / (da - db);
    const int idx = int(mesh.vertices.size());
    mesh.vertices.push_back(pa + t * (pb - pa));
    edge_vertex.emplace(key, idx);
    return idx;
  };

  // cube corners: bit order v0..v7 picked so the main diagonal is v0-v6
  const int off[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                         {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  const int tets[6][4] = {{0, 1, 2, 6}, {0, 2, 3, 6}, {0, 3, 7, 6},
                          {0, 7, 4, 6}, {0, 4, 5, 6}, {0, 5, 1, 6}};

  const auto emit = [&](int v0, int v1, int v2, const Vec3& inside_corner) {
    if (v0 == v1 || v1 == v2 || v2 == v0) return;
    const Vec3 a = mesh.vertices[v0], b = mesh.vertices[v1], c = mesh.vertices[v2];
    const Vec3 n = (b - a).cross(c - a);
    if (n.squaredNorm() < 1e-30) return;
    const Vec3 centroid = (a + b + c) / 3.0;
    if (n.dot(centroid - inside_corner) >= 0.0)
      mesh.faces.push_back({v0, v1, v2});
    else
      mesh.faces.push_back({v0, v2, v1});
  };

  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      for (int k = 0; k < nz; ++k) {
        int64_t ids[8];
        Vec3 pos[8];
        double val[8];
        for (int c = 0; c < 8; ++c) {
          ids[c] = corner_id(i + off[c][0], j + off[c][1], k + off[c][2]);
          pos[c] = corner_pos(i + off[c][0], j + off[c][1], k + off[c][2]);
          val[c] = values[ids[c]];
        }
        for (const auto& tet : tets) {
          int in[4], out[4];
          int n_in = 0, n_out = 0;
          for (int t = 0; t < 4; ++t) {
            if (val[tet[t]] < 0.0) in[n_in++] = tet[t];
            else out[n_out++] = tet[t];
          }
          if (n_in == 0 || n_in == 4) continue;
          if (n_in == 1) {
            emit(edge_point(ids, pos, val, in[0], out[0]),
                 edge_point(ids, pos, val, in[0], out[1]),
                 edge_point(ids, pos, val, in[0], out[2]), pos[in[0]]);
          } else if (n_in == 3) {
            emit(edge_point(ids, pos, val, in[0], out[0]),
                 edge_point(ids, pos, val, in[1], out[0]),
                 edge_point(ids, pos, val, in[2], out[0]), pos[in[0]]);
          } else {
            const int e00 = edge_point(ids, pos, val, in[0], out[0]);
            const int e01 = edge_point(ids, pos, val, in[0], out[1]);
            const int e10 = edge_point(ids, pos, val, in[1], out[0]);
            const int e11 = edge_point(ids, pos, val, in[1], out[1]);
            emit(e00, e01, e10, pos[in[0]]);
            emit(e10, e01, e11, pos[in[0]]);
          }
        }
      }
    }
  }
  return mesh;
}

/// Fruit iso-surface as a world-space mesh. `resolution` is the world-space
/// cell size; canonical marching uses resolution * scale so output vertices
/// carry at most that much world-distance error.
inline TriMesh extract_mesh(const FruitEstimate& est, double resolution) {
  est.require_valid();
  const double s = est.world_to_canonical.scale;
  const double cell = resolution * s;
  const Vec3 half(est.code.a + 2.0 * cell, est.code.b + 2.0 * cell,
                  est.code.c + 2.0 * cell);
  TriMesh canon = polygonize(
      [&](const Vec3& p) { return superellipsoid_sdf(est.code, p); }, -half, half, cell);
  if (canon.faces.empty()) throw DataError("extract_mesh: empty iso-surface");
  canon.transform(est.world_to_canonical.inverse());
  return canon;
}

/// The n highest-canonical-z surface points, used as peduncle anchors.
inline std::vector<Vec3> peduncle_points_canonical(const FruitEstimate& est, int n,
                                                   double coarse_resolution) {
  const TriMesh canon = polygonize(
      [&](const Vec3& p) { return superellipsoid_sdf(est.code, p); },
      -Vec3(est.code.a + 0.1, est.code.b + 0.1, est.code.c + 0.1),
      Vec3(est.code.a + 0.1, est.code.b + 0.1, est.code.c + 0.1),
      coarse_resolution * est.world_to_canonical.scale);
  if (canon.vertices.empty()) throw DataError("peduncle_points: empty iso-surface");
  std::vector<Vec3> verts = canon.vertices;
  std::sort(verts.begin(), verts.end(), [](const Vec3& a, const Vec3& b) {
    if (a.z() != b.z()) return a.z() > b.z();
    if (a.x() != b.x()) return a.x() < b.x();
    return a.y() < b.y();
  });
  if (int(verts.size()) > n) verts.resize(n);
  return verts;
}

}  // namespace folia
