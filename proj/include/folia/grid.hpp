#pragma once

#include <unordered_map>

#include "folia/point_cloud.hpp"

namespace folia {

using CellIndex = std::array<int, 3>;

/// Sparse voxel occupancy over a fixed origin/resolution lattice. Each
/// occupied cell carries the bitmask of part labels inserted into it.
struct OccupancyGrid {
  double resolution = 0.003;
  Vec3 origin = Vec3::Zero();
  std::unordered_map<int64_t, uint8_t> cells;

  static constexpr int kBias = 1 << 20;  // 21 bits per axis

  static int64_t pack(const CellIndex& c) {
    return (int64_t(c[0] + kBias) << 42) | (int64_t(c[1] + kBias) << 21) |
           int64_t(c[2] + kBias);
  }

  static CellIndex unpack(int64_t key) {
    return {int((key >> 42) & 0x1FFFFF) - kBias, int((key >> 21) & 0x1FFFFF) - kBias,
            int(key & 0x1FFFFF) - kBias};
  }

  CellIndex cell_of(const Vec3& p) const {
    return {int(std::floor((p.x() - origin.x()) / resolution)),
            int(std::floor((p.y() - origin.y()) / resolution)),
            int(std::floor((p.z() - origin.z()) / resolution))};
  }

  Vec3 cell_center(const CellIndex& c) const {
    return origin + resolution * Vec3(c[0] + 0.5, c[1] + 0.5, c[2] + 0.5);
  }

  static uint8_t label_bit(PartLabel label) { return uint8_t(1u << int(label)); }

  void insert_points(const std::vector<Vec3>& points, PartLabel label) {
    const uint8_t bit = label_bit(label);
    for (const Vec3& p : points) {
      if (!finite(p)) throw DataError("OccupancyGrid: non-finite point");
      cells[pack(cell_of(p))] |= bit;
    }
  }

  uint8_t labels_at(int64_t key) const {
    const auto it = cells.find(key);
    return it == cells.end() ? 0 : it->second;
  }

  bool occupied(int64_t key) const { return cells.find(key) != cells.end(); }

  bool has_label(int64_t key, PartLabel label) const {
    return (labels_at(key) & label_bit(label)) != 0;
  }
};

/// Walks the cells pierced by the ray origin + t*dir for t in [0, max_range],
/// front to back without skipping, starting at the origin's own cell. `visit`
/// receives the cell index and returns false to stop.
template <typename F>
inline void traverse_grid(const OccupancyGrid& grid, const Vec3& origin,
                          const Vec3& dir, double max_range, F&& visit) {
  const double res = grid.resolution;
  CellIndex c = grid.cell_of(origin);
  int step[3];
  double t_max[3], t_delta[3];
  for (int k = 0; k < 3; ++k) {
    const double rel = (origin[k] - grid.origin[k]) / res;
    if (dir[k] > 1e-15) {
      step[k] = 1;
      t_max[k] = (std::floor(rel) + 1.0 - rel) * res / dir[k];
      t_delta[k] = res / dir[k];
    } else if (dir[k] < -1e-15) {
      step[k] = -1;
      t_max[k] = (rel - std::floor(rel)) * res / -dir[k];
      t_delta[k] = res / -dir[k];
    } else {
      step[k] = 0;
      t_max[k] = t_delta[k] = std::numeric_limits<double>::infinity();
    }
  }
  if (!visit(c)) return;
  while (true) {
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    if (t_max[axis] > max_range) return;
    c[axis] += step[axis];
    t_max[axis] += t_delta[axis];
    if (!visit(c)) return;
  }
}

}  // namespace folia
