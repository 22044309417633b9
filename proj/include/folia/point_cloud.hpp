#pragma once

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "folia/common.hpp"

namespace folia {

enum class PartLabel : int { fruit = 0, leaf = 1, branch = 2, robot = 3 };

inline const char* to_string(PartLabel l) {
  switch (l) {
    case PartLabel::fruit: return "fruit";
    case PartLabel::leaf: return "leaf";
    case PartLabel::branch: return "branch";
    case PartLabel::robot: return "robot";
  }
  return "?";
}

inline PartLabel part_label_from_string(const std::string& s) {
  if (s == "fruit") return PartLabel::fruit;
  if (s == "leaf") return PartLabel::leaf;
  if (s == "branch") return PartLabel::branch;
  if (s == "robot") return PartLabel::robot;
  throw DataError("unknown part label: " + s);
}

/// One segmented instance: points in meters with a semantic label.
struct LabeledPointCloud {
  std::vector<Vec3> points;
  PartLabel label = PartLabel::fruit;
  int instance_id = 0;

  void require_valid() const {
    if (instance_id < 0) throw DataError("LabeledPointCloud: negative instance id");
    for (const Vec3& p : points)
      if (!finite(p)) throw DataError("LabeledPointCloud: non-finite point");
  }
};

inline Vec3 centroid(const std::vector<Vec3>& pts) {
  if (pts.empty()) throw DataError("centroid: empty point set");
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : pts) c += p;
  return c / double(pts.size());
}

/// Downsample to one representative point per voxel: the input point nearest
/// the voxel center, ties broken by input order. Deterministic.
inline std::vector<Vec3> voxel_downsample(const std::vector<Vec3>& pts, double resolution) {
  if (resolution <= 0.0) throw DataError("voxel_downsample: resolution must be positive");
  struct Best {
    double d2;
    std::size_t idx;
  };
  std::vector<std::int64_t> keys(pts.size());
  auto cell_of = [&](const Vec3& p, int k) {
    return (std::int64_t)std::floor(p[k] / resolution);
  };
  std::unordered_map<std::int64_t, Best> best;
  best.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::int64_t cx = cell_of(pts[i], 0), cy = cell_of(pts[i], 1), cz = cell_of(pts[i], 2);
    const std::int64_t key = ((cx + (1 << 20)) << 42) | ((cy + (1 << 20)) << 21) | (cz + (1 << 20));
    keys[i] = key;
    const Vec3 center((cx + 0.5) * resolution, (cy + 0.5) * resolution, (cz + 0.5) * resolution);
    const double d2 = (pts[i] - center).squaredNorm();
    auto it = best.find(key);
    if (it == best.end() || d2 < it->second.d2) best[key] = {d2, i};
  }
  // emit in first-appearance order for determinism
  std::vector<Vec3> out;
  out.reserve(best.size());
  std::unordered_set<std::int64_t> done;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (done.insert(keys[i]).second) out.push_back(pts[best[keys[i]].idx]);
  }
  return out;
}

}  // namespace folia
