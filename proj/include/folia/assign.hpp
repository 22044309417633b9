#pragma once

#include <limits>
#include <vector>

#include "folia/pca.hpp"
#include "folia/scene.hpp"

namespace folia {

struct AssignParams {
  double line_residual = 0.01;
  double occlusion_radius = 0.02;
  double cluster_voxel = 0.005;
};

struct FruitAssignment {
  int fruit_instance = -1;
  int leaf_instance = -1;
  int branch_cluster = -1;
  bool occluded = false;
};

struct MultiFruitAssignment {
  std::vector<std::vector<Vec3>> branch_clusters;
  std::vector<FruitAssignment> fruits;
};

namespace detail {

inline double line_max_residual(const std::vector<Vec3>& pts) {
  if (pts.size() < 3) return 0.0;
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : pts) mean += p;
  mean /= double(pts.size());
  bool spread = false;
  for (const Vec3& p : pts)
    if ((p - mean).norm() > 1e-12) spread = true;
  if (!spread) return 0.0;
  const PcaResult pca = pca_axes(pts);
  const Vec3 axis = pca.axes.col(0);
  double worst = 0.0;
  for (const Vec3& p : pts) {
    const Vec3 d = p - pca.mean;
    worst = std::max(worst, (d - d.dot(axis) * axis).norm());
  }
  return worst;
}

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-18) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace detail

/// Splits a merged branch cloud into straight runs. Clusters grow greedily
/// from the first unassigned point, absorbing the nearest remaining point
/// while the cluster still fits a line within the residual threshold.
inline std::vector<std::vector<Vec3>> cluster_branch_lines(
    const std::vector<Vec3>& points, double residual_threshold = 0.01) {
  if (!(residual_threshold > 0.0))
    throw DataError("cluster_branch_lines: residual threshold must be positive");
  const size_t n = points.size();
  std::vector<bool> assigned(n, false);
  std::vector<std::vector<Vec3>> clusters;
  size_t done = 0;
  while (done < n) {
    size_t seed = 0;
    while (assigned[seed]) ++seed;
    std::vector<Vec3> cluster = {points[seed]};
    assigned[seed] = true;
    ++done;

    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    for (size_t i = 0; i < n; ++i)
      if (!assigned[i]) dist[i] = (points[i] - points[seed]).norm();

    while (done < n) {
      size_t next = n;
      for (size_t i = 0; i < n; ++i)
        if (!assigned[i] && (next == n || dist[i] < dist[next])) next = i;
      if (next == n) break;
      cluster.push_back(points[next]);
      if (detail::line_max_residual(cluster) > residual_threshold) {
        cluster.pop_back();
        break;
      }
      assigned[next] = true;
      ++done;
      for (size_t i = 0; i < n; ++i)
        if (!assigned[i])
          dist[i] = std::min(dist[i], (points[i] - points[next]).norm());
    }
    clusters.push_back(std::move(cluster));
  }
  return clusters;
}

/// Pairs every fruit instance with the leaf most directly between it and
/// the camera and with the nearest branch cluster. A fruit whose best leaf
/// stays clear of the camera ray is reported unoccluded; missing part
/// classes leave the matching index at -1.
inline MultiFruitAssignment assign_multi_fruit(const LabeledScene& scene,
                                               const AssignParams& params = {}) {
  MultiFruitAssignment out;
  std::vector<Vec3> branch_all;
  for (const auto& cloud : scene.clouds)
    if (cloud.label == PartLabel::branch)
      branch_all.insert(branch_all.end(), cloud.points.begin(), cloud.points.end());
  if (!branch_all.empty())
    out.branch_clusters = cluster_branch_lines(
        voxel_downsample(branch_all, params.cluster_voxel), params.line_residual);

  const Vec3 eye = scene.camera.position();
  for (const auto& cloud : scene.clouds) {
    if (cloud.label != PartLabel::fruit || cloud.points.empty()) continue;
    FruitAssignment fa;
    fa.fruit_instance = cloud.instance_id;
    const Vec3 c = centroid(cloud.points);

    double best_mean = std::numeric_limits<double>::infinity();
    double best_min = std::numeric_limits<double>::infinity();
    for (const auto& leaf : scene.clouds) {
      if (leaf.label != PartLabel::leaf || leaf.points.empty()) continue;
      double sum = 0.0;
      double lo = std::numeric_limits<double>::infinity();
      for (const Vec3& p : leaf.points) {
        const double d = detail::point_segment_distance(p, c, eye);
        sum += d;
        lo = std::min(lo, d);
      }
      const double mean = sum / double(leaf.points.size());
      if (mean < best_mean) {
        best_mean = mean;
        best_min = lo;
        fa.leaf_instance = leaf.instance_id;
      }
    }
    fa.occluded = fa.leaf_instance >= 0 && best_min <= params.occlusion_radius;

    double best_branch = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < out.branch_clusters.size(); ++k)
      for (const Vec3& p : out.branch_clusters[k]) {
        const double d = (p - c).norm();
        if (d < best_branch) {
          best_branch = d;
          fa.branch_cluster = int(k);
        }
      }
    out.fruits.push_back(fa);
  }
  return out;
}

}  // namespace folia
