#pragma once

#include "folia/camera.hpp"
#include "folia/point_cloud.hpp"

namespace folia {

/// Camera plus labeled observation: what the estimator is allowed to see.
struct LabeledScene {
  CameraModel camera;
  std::vector<LabeledPointCloud> clouds;
  std::vector<Vec3> free_points;  // centers of observed-empty cells

  std::vector<Vec3> points_with_label(PartLabel label) const {
    std::vector<Vec3> out;
    for (const auto& c : clouds)
      if (c.label == label) out.insert(out.end(), c.points.begin(), c.points.end());
    return out;
  }

  const LabeledPointCloud* find(PartLabel label, int instance_id) const {
    for (const auto& c : clouds)
      if (c.label == label && c.instance_id == instance_id) return &c;
    return nullptr;
  }

  std::vector<int> instances_with_label(PartLabel label) const {
    std::vector<int> ids;
    for (const auto& c : clouds)
      if (c.label == label) ids.push_back(c.instance_id);
    return ids;
  }
};

/// Union of two observations of the same static scene. Free space observed
/// in either view is genuinely free because nothing but the leaf moves, and
/// leaf cells are never fruit cells.
inline LabeledScene fuse_scenes(const LabeledScene& a, const LabeledScene& b) {
  LabeledScene out = a;
  for (const auto& c : b.clouds) {
    LabeledPointCloud* dst = nullptr;
    for (auto& existing : out.clouds)
      if (existing.label == c.label && existing.instance_id == c.instance_id)
        dst = &existing;
    if (dst)
      dst->points.insert(dst->points.end(), c.points.begin(), c.points.end());
    else
      out.clouds.push_back(c);
  }
  out.free_points.insert(out.free_points.end(), b.free_points.begin(),
                         b.free_points.end());
  return out;
}

}  // namespace folia
