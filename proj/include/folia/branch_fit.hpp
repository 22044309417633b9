#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "folia/arap.hpp"
#include "folia/pca.hpp"
#include "folia/primitives.hpp"

namespace folia {

/// Completed branch geometry: a cylinder mesh deformed onto the observed
/// branch points, with the principal axis and averaged radius it started
/// from.
struct BranchModel {
  TriMesh mesh;
  Vec3 axis = Vec3::UnitZ();
  double radius = 0.0;
  std::vector<double> energy_curve;
};

struct BranchFitParams {
  Vec3 view_origin = Vec3::Zero();
  double correspondence_threshold = 0.01;
  int radius_planes = 10;
  int segments = 16;
  int rings = 8;
  int max_iterations = 30;
  SolveParams solve;
};

namespace detail {

/// Straight cylinder through the point set: endpoints at the extremes of
/// the principal-axis projection, radius averaged over slab bins.
inline BranchModel init_branch_cylinder(const std::vector<Vec3>& points,
                                        const BranchFitParams& params) {
  if (points.size() < 10) throw DataError("fit_branch: need at least 10 branch points");
  const PcaResult pca = pca_axes(points);
  if (pca.variances[0] < 4.0 * pca.variances[1])
    throw DataError("fit_branch: points have no dominant axis");

  const Vec3 axis = pca.axes.col(0);
  double t_min = std::numeric_limits<double>::infinity();
  double t_max = -std::numeric_limits<double>::infinity();
  for (const Vec3& p : points) {
    const double t = (p - pca.mean).dot(axis);
    t_min = std::min(t_min, t);
    t_max = std::max(t_max, t);
  }

  const int bins = std::max(1, params.radius_planes);
  std::vector<double> bin_sum(static_cast<size_t>(bins), 0.0);
  std::vector<int> bin_count(static_cast<size_t>(bins), 0);
  const double span = std::max(t_max - t_min, 1e-12);
  for (const Vec3& p : points) {
    const Vec3 d = p - pca.mean;
    const double t = d.dot(axis);
    const int b = std::min(bins - 1, int((t - t_min) / span * bins));
    bin_sum[size_t(b)] += (d - t * axis).norm();
    ++bin_count[size_t(b)];
  }
  double radius = 0.0;
  int filled = 0;
  for (int b = 0; b < bins; ++b) {
    if (bin_count[size_t(b)] == 0) continue;
    radius += bin_sum[size_t(b)] / double(bin_count[size_t(b)]);
    ++filled;
  }
  radius /= double(filled);
  if (radius < 1e-6) throw DataError("fit_branch: points are collinear, radius is zero");

  BranchModel model;
  model.axis = axis;
  model.radius = radius;
  model.mesh = make_cylinder(pca.mean + t_min * axis, pca.mean + t_max * axis, radius,
                             params.segments, params.rings);
  return model;
}

/// Deformation graph over the rest mesh: one node per vertex, one
/// unit-weight edge per unique mesh edge.
inline DeformationGraph branch_graph(const TriMesh& rest) {
  DeformationGraph g;
  g.nodes = rest.vertices;
  g.roles.assign(rest.vertices.size(), NodeRole::deformable);
  g.vein.assign(rest.vertices.size(), false);
  std::set<std::pair<int, int>> seen;
  for (const auto& f : rest.faces) {
    for (int k = 0; k < 3; ++k) {
      int i = f[k], j = f[(k + 1) % 3];
      if (i > j) std::swap(i, j);
      if (seen.insert({i, j}).second) g.edges.push_back({i, j, 1.0});
    }
  }
  return g;
}

/// One fitting pass: match points to visible vertices of the current
/// surface, pin each matched vertex to the mean of its points, and solve
/// the deformation of the rest cylinder under those handles. Returns the
/// pass energy and overwrites `current`; the handle count goes out through
/// `n_handles`.
inline double fit_branch_pass(const TriMesh& rest, const DeformationGraph& base,
                              std::vector<Vec3>& current, const std::vector<Vec3>& points,
                              const BranchFitParams& params, int* n_handles = nullptr) {
  TriMesh view;
  view.vertices = current;
  view.faces = rest.faces;
  const std::vector<Vec3> normals = view.vertex_normals();

  const size_t n = current.size();
  std::vector<Vec3> target_sum(n, Vec3::Zero());
  std::vector<int> target_count(n, 0);
  for (const Vec3& p : points) {
    int best = -1;
    double best_d = params.correspondence_threshold;
    for (size_t v = 0; v < n; ++v) {
      if (normals[v].dot(params.view_origin - current[v]) <= 0.0) continue;
      const double d = (p - current[v]).norm();
      if (d < best_d) {
        best_d = d;
        best = int(v);
      }
    }
    if (best >= 0) {
      target_sum[size_t(best)] += p;
      ++target_count[size_t(best)];
    }
  }

  DeformationGraph g = base;
  g.node_displacement.assign(n, Vec3::Zero());
  int handles = 0;
  for (size_t v = 0; v < n; ++v) {
    if (target_count[v] == 0) continue;
    g.roles[v] = NodeRole::gripped;
    g.node_displacement[v] = target_sum[v] / double(target_count[v]) - g.nodes[v];
    ++handles;
  }
  if (n_handles) *n_handles = handles;
  if (handles == 0) return std::numeric_limits<double>::infinity();

  const DeformationResult r = solve_deformation(g, params.solve);
  current = r.deformed_nodes;
  return r.energy;
}

}  // namespace detail

/// Complete a branch from its partial point cloud: PCA gives the axis and
/// endpoints, slab-averaged radial distances give the radius, and the
/// resulting cylinder is deformed onto the points. Each iteration matches
/// points to visible vertices of the current surface within the
/// correspondence threshold and deforms the rest cylinder under those
/// handles; the loop ends once the deformation energy no longer decreases,
/// keeping the last improving surface.
inline BranchModel fit_branch(const std::vector<Vec3>& points, const BranchFitParams& params) {
  BranchModel model = detail::init_branch_cylinder(points, params);
  const TriMesh rest = model.mesh;
  const DeformationGraph graph = detail::branch_graph(rest);

  double prev_energy = std::numeric_limits<double>::infinity();
  for (int it = 0; it < std::max(1, params.max_iterations); ++it) {
    int handles = 0;
    std::vector<Vec3> candidate = model.mesh.vertices;
    const double energy =
        detail::fit_branch_pass(rest, graph, candidate, points, params, &handles);
    if (handles == 0) {
      if (it == 0)
        throw DataError("fit_branch: no branch points within the correspondence threshold");
      break;
    }
    if (energy >= prev_energy - 1e-12) break;
    prev_energy = energy;
    model.mesh.vertices = candidate;
    model.energy_curve.push_back(energy);
  }
  return model;
}

/// One extra fitting iteration on an already fitted model, rebuilding the
/// rest cylinder from the same points. Returns the iteration energy and
/// updates the mesh; on a converged model the matches are unchanged, so
/// the energy is not meaningfully below the final fitted one.
inline double refit_branch(BranchModel& model, const std::vector<Vec3>& points,
                           const BranchFitParams& params) {
  const BranchModel init = detail::init_branch_cylinder(points, params);
  if (init.mesh.vertices.size() != model.mesh.vertices.size())
    throw DataError("refit_branch: model was not fitted to these points");
  const DeformationGraph graph = detail::branch_graph(init.mesh);

  std::vector<Vec3> current = model.mesh.vertices;
  const double energy = detail::fit_branch_pass(init.mesh, graph, current, points, params);
  if (std::isfinite(energy)) model.mesh.vertices = current;
  return energy;
}

}  // namespace folia
