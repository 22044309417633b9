#pragma once

#include <limits>
#include <unordered_map>

#include "folia/mesh.hpp"

namespace folia {

/// Closest point on triangle abc to p; also reports the barycentric
/// coordinates of the result. Ericson's region-walk formulation.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                      const Vec3& c, Vec3* bary = nullptr) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  auto set_bary = [&](double u, double v, double w) {
    if (bary) *bary = Vec3(u, v, w);
  };
  if (d1 <= 0.0 && d2 <= 0.0) { set_bary(1, 0, 0); return a; }

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) { set_bary(0, 1, 0); return b; }

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    set_bary(1 - v, v, 0);
    return a + v * ab;
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) { set_bary(0, 0, 1); return c; }

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    set_bary(1 - w, 0, w);
    return a + w * ac;
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    set_bary(0, 1 - w, w);
    return b + w * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  set_bary(1 - v - w, v, w);
  return a + ab * v + ac * w;
}

struct RayHit {
  bool hit = false;
  double t = std::numeric_limits<double>::infinity();
  int face = -1;
  Vec3 point = Vec3::Zero();
};

struct ClosestHit {
  double distance = std::numeric_limits<double>::infinity();
  int face = -1;
  Vec3 point = Vec3::Zero();
  Vec3 bary = Vec3::Zero();
};

/// BVH over mesh triangles: closest-point and first-ray-hit queries, plus
/// signed distance with the angle-weighted pseudo-normal sign test. The
/// sign is meaningful for closed meshes only.
class MeshQuery {
 public:
  explicit MeshQuery(const TriMesh& mesh) : mesh_(mesh) {
    mesh.require_valid();
    if (mesh.faces.empty()) throw DataError("MeshQuery: mesh has no faces");
    build_pseudo_normals();
    tri_order_.resize(mesh.faces.size());
    for (size_t i = 0; i < tri_order_.size(); ++i) tri_order_[i] = int(i);
    centroids_.resize(mesh.faces.size());
    for (size_t i = 0; i < mesh.faces.size(); ++i) {
      const auto& f = mesh.faces[i];
      centroids_[i] =
          (mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0;
    }
    nodes_.reserve(2 * mesh.faces.size());
    build_node(0, int(mesh.faces.size()));
    centroids_.clear();
  }

  const TriMesh& mesh() const { return mesh_; }

  ClosestHit closest_point(const Vec3& p) const {
    ClosestHit best;
    double best_sq = std::numeric_limits<double>::infinity();
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (aabb_dist_sq(node, p) >= best_sq) continue;
      if (node.count > 0) {
        for (int i = node.start; i < node.start + node.count; ++i) {
          const int fi = tri_order_[i];
          const auto& f = mesh_.faces[fi];
          Vec3 bary;
          const Vec3 cp = closest_point_on_triangle(
              p, mesh_.vertices[f[0]], mesh_.vertices[f[1]], mesh_.vertices[f[2]], &bary);
          const double d2 = (p - cp).squaredNorm();
          if (d2 < best_sq) {
            best_sq = d2;
            best.face = fi;
            best.point = cp;
            best.bary = bary;
          }
        }
      } else {
        // visit nearer child first
        const double dl = aabb_dist_sq(nodes_[node.left], p);
        const double dr = aabb_dist_sq(nodes_[node.right], p);
        if (dl < dr) {
          if (dr < best_sq) stack[top++] = node.right;
          if (dl < best_sq) stack[top++] = node.left;
        } else {
          if (dl < best_sq) stack[top++] = node.left;
          if (dr < best_sq) stack[top++] = node.right;
        }
      }
    }
    best.distance = std::sqrt(best_sq);
    return best;
  }

  double distance(const Vec3& p) const { return closest_point(p).distance; }

  /// Signed distance, negative inside. Sign from the pseudo-normal of the
  /// closest feature (face, edge, or vertex by barycentric classification).
  double signed_distance(const Vec3& p) const {
    const ClosestHit h = closest_point(p);
    const Vec3 n = feature_normal(h);
    const double s = (p - h.point).dot(n);
    return s >= 0.0 ? h.distance : -h.distance;
  }

  RayHit raycast(const Vec3& origin, const Vec3& dir, double t_min = 1e-9,
                 double t_max = std::numeric_limits<double>::infinity()) const {
    RayHit best;
    best.t = t_max;
    const Vec3 inv(1.0 / dir.x(), 1.0 / dir.y(), 1.0 / dir.z());
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (!aabb_hit(node, origin, inv, t_min, best.t)) continue;
      if (node.count > 0) {
        for (int i = node.start; i < node.start + node.count; ++i) {
          const int fi = tri_order_[i];
          double t;
          if (intersect_triangle(origin, dir, fi, t_min, best.t, &t)) {
            best.hit = true;
            best.t = t;
            best.face = fi;
          }
        }
      } else {
        stack[top++] = node.left;
        stack[top++] = node.right;
      }
    }
    if (best.hit) best.point = origin + best.t * dir;
    else best.t = std::numeric_limits<double>::infinity();
    return best;
  }

 private:
  struct Node {
    Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
    int left = -1, right = -1;
    int start = 0, count = 0;  // count > 0 marks a leaf
  };

  static uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (uint64_t(uint32_t(a)) << 32) | uint32_t(b);
  }

  void build_pseudo_normals() {
    face_normals_.resize(mesh_.faces.size());
    vertex_normals_.assign(mesh_.vertices.size(), Vec3::Zero());
    for (size_t i = 0; i < mesh_.faces.size(); ++i) {
      const auto& f = mesh_.faces[i];
      const Vec3 a = mesh_.vertices[f[0]], b = mesh_.vertices[f[1]],
                 c = mesh_.vertices[f[2]];
      Vec3 n = (b - a).cross(c - a);
      const double len = n.norm();
      n = len > 1e-18 ? Vec3(n / len) : Vec3(0, 0, 0);
      face_normals_[i] = n;
      for (int k = 0; k < 3; ++k) {
        // Vec3 default-constructs uninitialized; seed explicitly
        edge_normals_.try_emplace(edge_key(f[k], f[(k + 1) % 3]), Vec3::Zero())
            .first->second += n;
        const Vec3 e1 = (mesh_.vertices[f[(k + 1) % 3]] - mesh_.vertices[f[k]]).normalized();
        const Vec3 e2 = (mesh_.vertices[f[(k + 2) % 3]] - mesh_.vertices[f[k]]).normalized();
        const double ang = std::acos(std::clamp(e1.dot(e2), -1.0, 1.0));
        vertex_normals_[f[k]] += ang * n;
      }
    }
  }

  Vec3 feature_normal(const ClosestHit& h) const {
    constexpr double kTol = 1e-9;
    const auto& f = mesh_.faces[h.face];
    int zero = -1, zeros = 0;
    for (int k = 0; k < 3; ++k)
      if (h.bary[k] < kTol) { zero = k; ++zeros; }
    if (zeros == 0) return face_normals_[h.face];
    if (zeros == 1)  // on the edge opposite the vanishing coordinate
      return edge_normals_.at(edge_key(f[(zero + 1) % 3], f[(zero + 2) % 3]));
    for (int k = 0; k < 3; ++k)
      if (h.bary[k] >= kTol) return vertex_normals_[f[k]];
    return face_normals_[h.face];
  }

  int build_node(int start, int count) {
    const int idx = int(nodes_.size());
    nodes_.push_back(Node{});
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (int i = start; i < start + count; ++i) {
      const auto& f = mesh_.faces[tri_order_[i]];
      for (int k = 0; k < 3; ++k) {
        lo = lo.cwiseMin(mesh_.vertices[f[k]]);
        hi = hi.cwiseMax(mesh_.vertices[f[k]]);
      }
    }
    nodes_[idx].lo = lo;
    nodes_[idx].hi = hi;
    if (count <= 4) {
      nodes_[idx].start = start;
      nodes_[idx].count = count;
      return idx;
    }
    Vec3 clo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 chi = -clo;
    for (int i = start; i < start + count; ++i) {
      clo = clo.cwiseMin(centroids_[tri_order_[i]]);
      chi = chi.cwiseMax(centroids_[tri_order_[i]]);
    }
    int axis = 0;
    (chi - clo).maxCoeff(&axis);
    const int mid = start + count / 2;
    std::nth_element(tri_order_.begin() + start, tri_order_.begin() + mid,
                     tri_order_.begin() + start + count, [&](int a, int b) {
                       return centroids_[a][axis] < centroids_[b][axis];
                     });
    const int left = build_node(start, mid - start);
    const int right = build_node(mid, start + count - mid);
    nodes_[idx].left = left;
    nodes_[idx].right = right;
    return idx;
  }

  double aabb_dist_sq(const Node& n, const Vec3& p) const {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double d = std::max({n.lo[k] - p[k], 0.0, p[k] - n.hi[k]});
      d2 += d * d;
    }
    return d2;
  }

  bool aabb_hit(const Node& n, const Vec3& o, const Vec3& inv, double t0, double t1) const {
    for (int k = 0; k < 3; ++k) {
      double ta = (n.lo[k] - o[k]) * inv[k];
      double tb = (n.hi[k] - o[k]) * inv[k];
      if (inv[k] < 0.0) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
    return true;
  }

  bool intersect_triangle(const Vec3& o, const Vec3& d, int fi, double t_min,
                          double t_max, double* t_out) const {
    const auto& f = mesh_.faces[fi];
    const Vec3 a = mesh_.vertices[f[0]];
    const Vec3 e1 = mesh_.vertices[f[1]] - a, e2 = mesh_.vertices[f[2]] - a;
    const Vec3 pv = d.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-14) return false;
    const double inv_det = 1.0 / det;
    const Vec3 tv = o - a;
    const double u = tv.dot(pv) * inv_det;
    if (u < 0.0 || u > 1.0) return false;
    const Vec3 qv = tv.cross(e1);
    const double v = d.dot(qv) * inv_det;
    if (v < 0.0 || u + v > 1.0) return false;
    const double t = e2.dot(qv) * inv_det;
    if (t < t_min || t >= t_max) return false;
    *t_out = t;
    return true;
  }

  TriMesh mesh_;
  std::vector<Node> nodes_;
  std::vector<int> tri_order_;
  std::vector<Vec3> centroids_;
  std::vector<Vec3> face_normals_;
  std::vector<Vec3> vertex_normals_;
  std::unordered_map<uint64_t, Vec3> edge_normals_;
};

}  // namespace folia
