#pragma once

#include <algorithm>
#include <limits>
#include <ostream>

#include "folia/pca.hpp"
#include "folia/point_cloud.hpp"

namespace folia {

/// Grasp-and-pull action: gripper pose plus a prescribed displacement of the
/// grasped patch.
struct GraspAction {
  Vec3 grasp_point = Vec3::Zero();
  Mat3 gripper_orientation = Mat3::Identity();
  Vec3 displacement = Vec3::Zero();

  void require_valid(double max_displacement = 0.08) const {
    if (!finite(grasp_point) || !finite(displacement))
      throw DataError("GraspAction: non-finite field");
    const Mat3 should_be_identity =
        gripper_orientation.transpose() * gripper_orientation - Mat3::Identity();
    if (should_be_identity.norm() > 1e-6 || gripper_orientation.determinant() < 0.0)
      throw DataError("GraspAction: orientation is not a proper rotation");
    if (displacement.norm() > max_displacement + 1e-12)
      throw DataError("GraspAction: displacement exceeds the configured maximum");
  }
};

enum class NodeRole : int { fixed = 0, deformable = 1, gripped = 2 };

inline const char* to_string(NodeRole r) {
  switch (r) {
    case NodeRole::fixed: return "fixed";
    case NodeRole::deformable: return "deformable";
    case NodeRole::gripped: return "gripped";
  }
  return "?";
}

struct GraphEdge {
  int i = 0;  // i < j
  int j = 0;
  double weight = 1.0;
};

/// Sparse embedded deformation graph. Branch nodes are fixed, leaf nodes
/// deform freely, gripper-grid nodes carry the prescribed displacement.
struct DeformationGraph {
  std::vector<Vec3> nodes;
  std::vector<NodeRole> roles;
  std::vector<bool> vein;
  std::vector<GraphEdge> edges;
  Vec3 gripper_displacement = Vec3::Zero();
  // per-node displacements override the shared one when present (mesh
  // handles with individual targets)
  std::vector<Vec3> node_displacement;

  int count(NodeRole r) const {
    int n = 0;
    for (const NodeRole role : roles)
      if (role == r) ++n;
    return n;
  }

  /// Prescribed target for constrained nodes; rest position otherwise.
  Vec3 target(int i) const {
    if (roles[size_t(i)] != NodeRole::gripped) return nodes[size_t(i)];
    return nodes[size_t(i)] + (node_displacement.empty() ? gripper_displacement
                                                         : node_displacement[size_t(i)]);
  }
};

struct GraphParams {
  double voxel_resolution = 0.005;
  double edge_radius = 0.02;
  double vein_threshold = 0.012;
  double gripper_square = 0.025;
  double grasp_attach_radius = 0.02;
  std::size_t min_leaf_points = 20;
};

/// Builds the deformation graph for one action: voxel-downsampled branch
/// (fixed) and leaf (deformable) points plus a 5x5 gripper grid (gripped),
/// vein flags from the leaf's PCA centre line, edges within the connection
/// radius. Throws if the gripper cannot transmit force to a fixed node or
/// the graph splits into disconnected clusters.
inline DeformationGraph build_graph(const std::vector<Vec3>& leaf_points,
                                    const std::vector<Vec3>& branch_points,
                                    const GraspAction& action,
                                    const GraphParams& params = GraphParams{}) {
  action.require_valid();
  if (leaf_points.size() < params.min_leaf_points)
    throw DataError("build_graph: too few leaf points");
  double grasp_gap = std::numeric_limits<double>::infinity();
  for (const Vec3& p : leaf_points)
    grasp_gap = std::min(grasp_gap, (p - action.grasp_point).norm());
  if (grasp_gap > params.grasp_attach_radius)
    throw DataError("build_graph: grasp point is not on the leaf");

  DeformationGraph g;
  g.gripper_displacement = action.displacement;
  const auto add = [&](const std::vector<Vec3>& pts, NodeRole role) {
    for (const Vec3& p : pts) {
      g.nodes.push_back(p);
      g.roles.push_back(role);
      g.vein.push_back(false);
    }
  };
  add(voxel_downsample(branch_points, params.voxel_resolution), NodeRole::fixed);
  const std::vector<Vec3> leaf_nodes =
      voxel_downsample(leaf_points, params.voxel_resolution);
  add(leaf_nodes, NodeRole::deformable);

  // gripper pad: a 5x5 grid spanning the square orthogonal to the approach
  // axis (third column of the gripper orientation)
  const double step = params.gripper_square / 4.0;
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j) {
      const Vec3 local(i * step, j * step, 0.0);
      g.nodes.push_back(action.grasp_point + action.gripper_orientation * local);
      g.roles.push_back(NodeRole::gripped);
      g.vein.push_back(false);
    }

  // vein band: deformable nodes close to the leaf's first principal axis
  const PcaResult pca = pca_axes(leaf_nodes);
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.roles[i] != NodeRole::deformable) continue;
    const Vec3 d = g.nodes[i] - pca.mean;
    const double off_axis = (d - d.dot(pca.axes.col(0)) * pca.axes.col(0)).norm();
    g.vein[i] = off_axis < params.vein_threshold;
  }

  const int n = int(g.nodes.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if ((g.nodes[size_t(i)] - g.nodes[size_t(j)]).norm() > params.edge_radius)
        continue;
      const int veins = int(g.vein[size_t(i)]) + int(g.vein[size_t(j)]);
      g.edges.push_back({i, j, veins == 2 ? 3.0 : veins == 1 ? 2.0 : 1.0});
    }

  // breadth-first sweep from the gripped pad; force must reach a fixed node
  // and nothing may be left in a separate cluster
  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  for (const GraphEdge& e : g.edges) {
    adj[size_t(e.i)].push_back(e.j);
    adj[size_t(e.j)].push_back(e.i);
  }
  std::vector<char> seen(size_t(n), 0);
  std::vector<int> queue;
  for (int i = 0; i < n; ++i)
    if (g.roles[size_t(i)] == NodeRole::gripped) {
      seen[size_t(i)] = 1;
      queue.push_back(i);
    }
  bool reaches_fixed = false;
  for (size_t head = 0; head < queue.size(); ++head) {
    const int u = queue[head];
    if (g.roles[size_t(u)] == NodeRole::fixed) reaches_fixed = true;
    for (const int v : adj[size_t(u)])
      if (!seen[size_t(v)]) {
        seen[size_t(v)] = 1;
        queue.push_back(v);
      }
  }
  if (!reaches_fixed)
    throw DataError("build_graph: gripped nodes cannot transmit force to a fixed node");
  if (int(queue.size()) != n)
    throw DataError("build_graph: graph is split into disconnected clusters");
  return g;
}

/// Plain text dump for visualization tooling: one `node x y z role vein`
/// line per node, then `edge i j w` lines, then the prescribed gripper
/// displacement as `disp dx dy dz`.
inline void write_graph(std::ostream& out, const DeformationGraph& g) {
  for (size_t i = 0; i < g.nodes.size(); ++i)
    out << "node " << g.nodes[i].x() << ' ' << g.nodes[i].y() << ' '
        << g.nodes[i].z() << ' ' << to_string(g.roles[i]) << ' '
        << int(g.vein[i]) << '\n';
  for (const GraphEdge& e : g.edges)
    out << "edge " << e.i << ' ' << e.j << ' ' << e.weight << '\n';
  out << "disp " << g.gripper_displacement.x() << ' ' << g.gripper_displacement.y()
      << ' ' << g.gripper_displacement.z() << '\n';
}

}  // namespace folia
