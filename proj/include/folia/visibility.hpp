#pragma once

#include <set>

#include "folia/grid.hpp"
#include "folia/mesh.hpp"
#include "folia/scene.hpp"

namespace folia {

using HitSet = std::set<int64_t>;

struct VisibilityParams {
  double resolution = 0.003;
  Vec3 grid_origin = Vec3::Zero();
  int stride = 4;          // pixel stride; 1 for evaluation runs
  double max_range = 1.5;  // meters
  int free_space_cap = 20000;
};

/// First occupied cell along each sampled pixel ray; kept iff fruit-labeled.
/// The camera's own cell is skipped so an occupied start cell cannot shadow
/// the whole image.
inline HitSet raycast_hits(const OccupancyGrid& grid, const CameraModel& camera,
                           int stride, double max_range) {
  if (stride < 1) throw DataError("raycast_hits: stride must be >= 1");
  HitSet hits;
  const Vec3 eye = camera.position();
  const int64_t eye_key = OccupancyGrid::pack(grid.cell_of(eye));
  for (int v = 0; v < camera.height; v += stride) {
    for (int u = 0; u < camera.width; u += stride) {
      const Vec3 dir = camera.pixel_ray(u, v);
      traverse_grid(grid, eye, dir, max_range, [&](const CellIndex& c) {
        const int64_t key = OccupancyGrid::pack(c);
        if (key == eye_key) return true;
        const uint8_t labels = grid.labels_at(key);
        if (labels == 0) return true;
        if (labels & OccupancyGrid::label_bit(PartLabel::fruit)) hits.insert(key);
        return false;
      });
    }
  }
  return hits;
}

/// Centers of cells each sampled ray crossed strictly before its first
/// occupied cell (the camera cell excluded), capped by farthest-first
/// subsampling so downstream losses stay bounded.
inline std::vector<Vec3> free_space_points(const OccupancyGrid& grid,
                                           const CameraModel& camera,
                                           const VisibilityParams& params) {
  std::set<int64_t> free_cells;
  const Vec3 eye = camera.position();
  const int64_t eye_key = OccupancyGrid::pack(grid.cell_of(eye));
  for (int v = 0; v < camera.height; v += params.stride) {
    for (int u = 0; u < camera.width; u += params.stride) {
      const Vec3 dir = camera.pixel_ray(u, v);
      std::vector<int64_t> pending;
      traverse_grid(grid, eye, dir, params.max_range, [&](const CellIndex& c) {
        const int64_t key = OccupancyGrid::pack(c);
        if (key == eye_key) return true;
        if (grid.occupied(key)) return false;
        pending.push_back(key);
        return true;
      });
      free_cells.insert(pending.begin(), pending.end());
    }
  }
  std::vector<Vec3> centers;
  centers.reserve(free_cells.size());
  for (int64_t key : free_cells) centers.push_back(grid.cell_center(OccupancyGrid::unpack(key)));
  if (int(centers.size()) <= params.free_space_cap) return centers;

  // Decimate on a coarse lattice to a pool slightly above the cap, then
  // exact farthest-first down to the cap. The bin size is tuned against the
  // full set each round so the pool never lands under the cap.
  Vec3 lo = centers[0], hi = centers[0];
  for (const Vec3& p : centers) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double cap = double(params.free_space_cap);
  double bin = std::cbrt(std::max(1e-9, (hi - lo).prod()) / (1.6 * cap));
  std::vector<Vec3> pool;
  for (int rounds = 0; rounds < 40; ++rounds) {
    std::set<int64_t> seen;
    std::vector<Vec3> kept;
    for (const Vec3& p : centers) {
      const CellIndex c = {int(std::floor((p.x() - lo.x()) / bin)),
                           int(std::floor((p.y() - lo.y()) / bin)),
                           int(std::floor((p.z() - lo.z()) / bin))};
      if (seen.insert(OccupancyGrid::pack(c)).second) kept.push_back(p);
    }
    if (double(kept.size()) >= 1.2 * cap && double(kept.size()) <= 3.0 * cap) {
      pool = std::move(kept);
      break;
    }
    if (double(kept.size()) < 1.2 * cap) bin /= 1.3;
    else bin *= 1.2;
    if (rounds == 39 || bin < params.resolution) {
      pool = double(kept.size()) >= cap ? std::move(kept) : centers;
      break;
    }
  }
  if (pool.empty()) pool = centers;

  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : pool) mean += p;
  mean /= double(pool.size());
  size_t start = 0;
  for (size_t i = 1; i < pool.size(); ++i)
    if ((pool[i] - mean).squaredNorm() > (pool[start] - mean).squaredNorm()) start = i;

  std::vector<Vec3> out;
  out.reserve(params.free_space_cap);
  std::vector<double> dist(pool.size(), std::numeric_limits<double>::infinity());
  size_t pick = start;
  for (int k = 0; k < params.free_space_cap; ++k) {
    out.push_back(pool[pick]);
    double best = -1.0;
    size_t next = 0;
    for (size_t i = 0; i < pool.size(); ++i) {
      const double d = (pool[i] - pool[pick]).squaredNorm();
      if (d < dist[i]) dist[i] = d;
      if (dist[i] > best) {
        best = dist[i];
        next = i;
      }
    }
    pick = next;
  }
  return out;
}

/// Deterministic point coverage of a mesh surface: a barycentric lattice per
/// face with spacing at most `spacing`. The occupancy grid dedupes, so
/// duplicated shared-edge points are harmless.
inline std::vector<Vec3> mesh_raster_points(const TriMesh& mesh, double spacing) {
  if (!(spacing > 0.0)) throw DataError("mesh_raster_points: spacing must be positive");
  std::vector<Vec3> out;
  for (const auto& f : mesh.faces) {
    const Vec3 a = mesh.vertices[f[0]], b = mesh.vertices[f[1]], c = mesh.vertices[f[2]];
    const double longest =
        std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
    const int n = std::max(1, int(std::ceil(longest / spacing)));
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n - i; ++j)
        out.push_back(a + (b - a) * (double(i) / n) + (c - a) * (double(j) / n));
  }
  return out;
}

struct PredictedState {
  std::vector<Vec3> fruit_points;
  std::vector<Vec3> leaf_points;
  std::vector<Vec3> robot_points;
};

struct VisibilityCounts {
  int n_vis = 0;   // fruit cells visible after the action but not before
  int n_post = 0;  // all fruit cells visible after the action
  int n_max = 0;   // fruit cells visible with every occluder removed
  int initial_visible = 0;
  double fraction() const { return n_max > 0 ? double(n_vis) / n_max : 0.0; }
  double post_fraction() const { return n_max > 0 ? double(n_post) / n_max : 0.0; }
  double initial_fraction() const {
    return n_max > 0 ? double(initial_visible) / n_max : 0.0;
  }
};

/// Counts newly visible fruit cells for a predicted scene state against the
/// initial observation, plus the best achievable count from the fruit alone.
inline VisibilityCounts visibility_counts_points(const LabeledScene& observed,
                                                 const PredictedState& predicted,
                                                 const VisibilityParams& params) {
  OccupancyGrid init_grid{params.resolution, params.grid_origin, {}};
  init_grid.insert_points(observed.points_with_label(PartLabel::fruit), PartLabel::fruit);
  init_grid.insert_points(observed.points_with_label(PartLabel::leaf), PartLabel::leaf);
  init_grid.insert_points(observed.points_with_label(PartLabel::branch), PartLabel::branch);
  const HitSet h_init =
      raycast_hits(init_grid, observed.camera, params.stride, params.max_range);

  OccupancyGrid pred_grid{params.resolution, params.grid_origin, {}};
  pred_grid.insert_points(predicted.fruit_points, PartLabel::fruit);
  pred_grid.insert_points(predicted.leaf_points, PartLabel::leaf);
  pred_grid.insert_points(predicted.robot_points, PartLabel::robot);
  const HitSet h_k =
      raycast_hits(pred_grid, observed.camera, params.stride, params.max_range);

  OccupancyGrid fruit_grid{params.resolution, params.grid_origin, {}};
  fruit_grid.insert_points(predicted.fruit_points, PartLabel::fruit);
  const HitSet h_max =
      raycast_hits(fruit_grid, observed.camera, params.stride, params.max_range);

  VisibilityCounts counts;
  for (int64_t key : h_k)
    if (!h_init.count(key)) ++counts.n_vis;
  counts.n_post = int(h_k.size());
  counts.n_max = int(h_max.size());
  counts.initial_visible = int(h_init.size());
  return counts;
}

inline VisibilityCounts visibility_counts(const LabeledScene& observed,
                                          const TriMesh& fruit_mesh,
                                          const std::vector<Vec3>& deformed_leaf_points,
                                          const TriMesh* gripper_mesh,
                                          const VisibilityParams& params) {
  if (fruit_mesh.faces.empty())
    throw DataError("visibility_counts: fruit mesh required");
  PredictedState predicted;
  predicted.fruit_points = mesh_raster_points(fruit_mesh, params.resolution * 0.5);
  predicted.leaf_points = deformed_leaf_points;
  if (gripper_mesh)
    predicted.robot_points = mesh_raster_points(*gripper_mesh, params.resolution * 0.5);
  return visibility_counts_points(observed, predicted, params);
}

}  // namespace folia
