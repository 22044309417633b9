#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>
#include <vector>

#include "folia/branch_fit.hpp"
#include "folia/fruit_estimate.hpp"
#include "folia/hull2d.hpp"
#include "folia/mesh_query.hpp"
#include "folia/rbf.hpp"
#include "folia/visibility.hpp"

namespace folia {

/// Parallel-jaw stand-in for the robot arm: two finger plates flanking the
/// gripping square plus a wrist cylinder behind them. Local frame: grasp
/// point at the origin, approach axis +z, fingers closing along x, so the
/// leaf sheet passes through the gap between the plates.
struct GripperProxy {
  double finger_width = 0.025;
  double finger_thickness = 0.01;
  double finger_length = 0.04;
  double finger_gap = 0.025;
  double wrist_radius = 0.03;
  double wrist_length = 0.08;
  double pre_grasp_offset = 0.05;

  void require_valid() const {
    for (double v : {finger_width, finger_thickness, finger_length, finger_gap,
                     wrist_radius, wrist_length, pre_grasp_offset})
      if (!(v > 0.0)) throw DataError("GripperProxy: dimensions must be positive");
  }

  TriMesh local_mesh() const {
    require_valid();
    const double off = finger_gap / 2.0 + finger_thickness / 2.0;
    const Vec3 finger(finger_thickness, finger_width, finger_length);
    TriMesh m = make_box(Vec3(-off, 0.0, -finger_length / 2.0), finger);
    m.append(make_box(Vec3(off, 0.0, -finger_length / 2.0), finger));
    m.append(make_cylinder(Vec3(0.0, 0.0, -finger_length - wrist_length),
                           Vec3(0.0, 0.0, -finger_length), wrist_radius, 16, 2));
    return m;
  }

  TriMesh posed_mesh(const Vec3& grasp_point, const Mat3& orientation) const {
    TriMesh m = local_mesh();
    for (Vec3& v : m.vertices) v = grasp_point + orientation * v;
    return m;
  }
};

/// Right-handed frame whose third column is the given approach direction.
inline Mat3 approach_frame(const Vec3& approach) {
  const double n = approach.norm();
  if (!(n > 1e-12)) throw DataError("approach_frame: zero direction");
  const Vec3 z = approach / n;
  Vec3 x = z.cross(Vec3::UnitZ());
  if (x.norm() < 1e-6) x = z.cross(Vec3::UnitY());
  x.normalize();
  Mat3 f;
  f.col(0) = x;
  f.col(1) = z.cross(x);
  f.col(2) = z;
  return f;
}

/// The 14 pull directions: the signed world axes, then the cube diagonals.
inline std::vector<Vec3> pull_directions() {
  std::vector<Vec3> dirs;
  dirs.reserve(14);
  for (int a = 0; a < 3; ++a)
    for (int s : {1, -1}) {
      Vec3 d = Vec3::Zero();
      d[a] = double(s);
      dirs.push_back(d);
    }
  const double inv = 1.0 / std::sqrt(3.0);
  for (int sx : {1, -1})
    for (int sy : {1, -1})
      for (int sz : {1, -1}) dirs.push_back(inv * Vec3(sx, sy, sz));
  return dirs;
}

struct GraspSite {
  Vec3 point = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();
  Vec2 hull_uv = Vec2::Zero();
};

/// Grasp sites spaced uniformly by arc length along the leaf's 2D convex
/// hull, nudged toward the interior, lifted through the PCA plane, and
/// snapped to the nearest leaf point. The gripper approaches along the
/// camera ray so the finger gap straddles the leaf sheet.
inline std::vector<GraspSite> generate_grasp_sites(const std::vector<Vec3>& leaf_points,
                                                   const Vec3& camera_position,
                                                   int count = 15,
                                                   double inward_margin = 0.01) {
  if (count < 1) throw DataError("generate_grasp_sites: count must be positive");
  const PcaResult pca = pca_axes(leaf_points);
  std::vector<Vec2> uv;
  uv.reserve(leaf_points.size());
  for (const Vec3& p : leaf_points) {
    const Vec3 d = p - pca.mean;
    uv.push_back(Vec2(d.dot(pca.axes.col(0)), d.dot(pca.axes.col(1))));
  }
  const std::vector<Vec2> hull = convex_hull_2d(uv);
  const std::vector<Vec2> samples = sample_hull_boundary(hull, count, inward_margin);

  std::vector<GraspSite> sites;
  sites.reserve(samples.size());
  for (const Vec2& s : samples) {
    const Vec3 lifted = pca.mean + s.x() * pca.axes.col(0) + s.y() * pca.axes.col(1);
    size_t best = 0;
    for (size_t i = 1; i < leaf_points.size(); ++i)
      if ((leaf_points[i] - lifted).squaredNorm() <
          (leaf_points[best] - lifted).squaredNorm())
        best = i;
    GraspSite site;
    site.point = leaf_points[best];
    site.hull_uv = s;
    site.orientation = approach_frame(site.point - camera_position);
    sites.push_back(site);
  }
  return sites;
}

struct CandidatePair {
  GraspSite site;
  Vec3 direction = Vec3::UnitZ();
  int grasp_index = 0;
  int direction_index = 0;
};

/// Grasp sites crossed with pull directions. A pair survives only when the
/// direction stays within the angle limit of the vector from the site to
/// its nearest branch point, so pulls that rip the leaf away from its
/// branch are never proposed. Without branch points every pair is kept.
inline std::vector<CandidatePair> generate_candidate_pairs(
    const std::vector<GraspSite>& sites, const std::vector<Vec3>& branch_points,
    double max_angle_deg = 120.0) {
  const std::vector<Vec3> dirs = pull_directions();
  const double cos_limit = std::cos(max_angle_deg * M_PI / 180.0);
  std::vector<CandidatePair> pairs;
  for (size_t gi = 0; gi < sites.size(); ++gi) {
    Vec3 to_branch = Vec3::Zero();
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& b : branch_points) {
      const double d = (b - sites[gi].point).squaredNorm();
      if (d < best) {
        best = d;
        to_branch = b - sites[gi].point;
      }
    }
    const bool have_branch = std::isfinite(best) && to_branch.norm() > 1e-12;
    const Vec3 tb = have_branch ? Vec3(to_branch.normalized()) : Vec3::Zero();
    for (size_t di = 0; di < dirs.size(); ++di) {
      if (have_branch && dirs[di].dot(tb) <= cos_limit) continue;
      pairs.push_back({sites[gi], dirs[di], int(gi), int(di)});
    }
  }
  return pairs;
}

/// One grasp-and-pull proposal at a specific distance with its predicted
/// outcome. The score stays zero until selection and is meaningful only for
/// feasible candidates.
struct ActionCandidate {
  GraspAction action;
  double move_distance = 0.0;
  int grasp_index = 0;
  int direction_index = 0;
  bool feasible = false;
  int n_vis = 0;   // fruit cells revealed beyond the initial observation
  int n_post = 0;  // fruit cells visible after the action
  double energy = 0.0;
  double score = 0.0;
};

struct CollisionParams {
  double margin = 0.005;
  double step = 0.005;
  double sample_spacing = 0.005;
};

namespace detail {

/// Gripper reference positions along the approach from the pre-grasp pose
/// and onward through the pull, spaced at most `step` apart.
inline std::vector<Vec3> sweep_offsets(const GraspAction& action, double move_distance,
                                       const GripperProxy& gripper, double step) {
  if (!(step > 0.0)) throw DataError("sweep_offsets: step must be positive");
  const Vec3 approach = action.gripper_orientation.col(2);
  std::vector<Vec3> offsets;
  const int n_in = std::max(1, int(std::ceil(gripper.pre_grasp_offset / step)));
  for (int i = 0; i <= n_in; ++i)
    offsets.push_back(-(1.0 - double(i) / n_in) * gripper.pre_grasp_offset * approach);
  if (move_distance > 0.0 && action.displacement.norm() > 1e-12) {
    const Vec3 dir = action.displacement.normalized();
    const int n_out = std::max(1, int(std::ceil(move_distance / step)));
    for (int i = 1; i <= n_out; ++i)
      offsets.push_back(double(i) / n_out * move_distance * dir);
  }
  return offsets;
}

inline void mesh_bounds(const TriMesh& mesh, Vec3& lo, Vec3& hi) {
  if (mesh.vertices.empty()) throw DataError("mesh_bounds: empty mesh");
  lo = hi = mesh.vertices[0];
  for (const Vec3& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
}

inline double aabb_distance(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  const Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
  return d.norm();
}

}  // namespace detail

/// Swept feasibility test: true when the gripper can approach from its
/// pre-grasp pose and pull through the full distance without any surface
/// sample coming within the margin of the fruit template or the branch
/// mesh, and no deformed leaf point ends up within the margin of the fruit.
inline bool collision_free(const GraspAction& action, double move_distance,
                           const FruitEstimate& fruit, const MeshQuery& branch_query,
                           const GripperProxy& gripper,
                           const std::vector<Vec3>& deformed_leaf,
                           const CollisionParams& params = {}) {
  if (!(params.margin > 0.0)) throw DataError("collision_free: margin must be positive");
  for (const Vec3& p : deformed_leaf)
    if (fruit.world_sdf(p) < params.margin) return false;

  const TriMesh local = gripper.local_mesh();
  const std::vector<Vec3> samples = mesh_raster_points(local, params.sample_spacing);
  Vec3 blo, bhi;
  detail::mesh_bounds(branch_query.mesh(), blo, bhi);
  for (const Vec3& off :
       detail::sweep_offsets(action, move_distance, gripper, params.step)) {
    const Vec3 base = action.grasp_point + off;
    for (const Vec3& s : samples) {
      const Vec3 x = base + action.gripper_orientation * s;
      if (fruit.world_sdf(x) < params.margin) return false;
      if (detail::aabb_distance(x, blo, bhi) < params.margin &&
          branch_query.signed_distance(x) < params.margin)
        return false;
    }
  }
  return true;
}

struct ScoreNormalization {
  double nvis_min = 0.0, nvis_max = 0.0;
  double energy_min = 0.0, energy_max = 0.0;
};

enum class PlanPolicy : int { lmap = 0, random = 1, upward = 2, minoverlap = 3 };

inline const char* to_string(PlanPolicy p) {
  switch (p) {
    case PlanPolicy::lmap: return "lmap";
    case PlanPolicy::random: return "random";
    case PlanPolicy::upward: return "upward";
    case PlanPolicy::minoverlap: return "minoverlap";
  }
  return "?";
}

struct PlanResult {
  PlanPolicy policy = PlanPolicy::lmap;
  std::vector<ActionCandidate> candidates;
  int chosen_index = -1;
  ScoreNormalization normalization;
  int n_max = 0;
  int initial_visible = 0;
  bool no_action_needed = false;

  const ActionCandidate& chosen() const {
    if (chosen_index < 0 || chosen_index >= int(candidates.size()))
      throw DataError("PlanResult: no chosen action");
    return candidates[size_t(chosen_index)];
  }

  double initial_fraction() const {
    return n_max > 0 ? double(initial_visible) / n_max : 0.0;
  }
};

/// Min-max normalizes visibility and energy over the feasible candidates
/// (a constant column maps to 0.5), scores each as normalized visibility
/// minus lambda times normalized energy, and picks the argmax. Ties fall to
/// the lower raw energy, then to the earlier candidate.
inline void score_and_select(PlanResult& plan, double lambda = 1.0) {
  if (!std::isfinite(lambda) || lambda < 0.0)
    throw DataError("score_and_select: lambda must be non-negative");
  std::vector<size_t> feasible;
  for (size_t i = 0; i < plan.candidates.size(); ++i)
    if (plan.candidates[i].feasible) feasible.push_back(i);
  if (feasible.empty()) throw DataError("score_and_select: no feasible candidate");

  ScoreNormalization norm;
  norm.nvis_min = norm.nvis_max = double(plan.candidates[feasible[0]].n_vis);
  norm.energy_min = norm.energy_max = plan.candidates[feasible[0]].energy;
  for (size_t i : feasible) {
    const ActionCandidate& c = plan.candidates[i];
    norm.nvis_min = std::min(norm.nvis_min, double(c.n_vis));
    norm.nvis_max = std::max(norm.nvis_max, double(c.n_vis));
    norm.energy_min = std::min(norm.energy_min, c.energy);
    norm.energy_max = std::max(norm.energy_max, c.energy);
  }
  const auto rescale = [](double v, double lo, double hi) {
    return hi > lo ? (v - lo) / (hi - lo) : 0.5;
  };

  int best = -1;
  for (size_t i : feasible) {
    ActionCandidate& c = plan.candidates[i];
    c.score = rescale(double(c.n_vis), norm.nvis_min, norm.nvis_max) -
              lambda * rescale(c.energy, norm.energy_min, norm.energy_max);
    if (best < 0 || c.score > plan.candidates[size_t(best)].score ||
        (c.score == plan.candidates[size_t(best)].score &&
         c.energy < plan.candidates[size_t(best)].energy))
      best = int(i);
  }
  plan.chosen_index = best;
  plan.normalization = norm;
}

inline PlanResult score_and_select(std::vector<ActionCandidate> candidates,
                                   double lambda = 1.0) {
  PlanResult plan;
  plan.candidates = std::move(candidates);
  score_and_select(plan, lambda);
  return plan;
}

/// The completed scene a plan is built on: the fitted fruit template with
/// its extracted mesh, the completed branch, and the observed points of the
/// leaf being manipulated and its branch.
struct PlanningScene {
  FruitEstimate fruit;
  TriMesh fruit_mesh;
  BranchModel branch;
  std::vector<Vec3> leaf_points;
  std::vector<Vec3> branch_points;
  int leaf_instance = -1;
};

struct PlannerParams {
  int n_grasp_points = 15;
  double inward_margin = 0.01;
  std::vector<double> distances = {0.02, 0.04, 0.06, 0.08};
  double direction_angle_max_deg = 120.0;
  double early_stop_fraction = 0.95;
  double lambda = 1.0;
  bool act_when_visible = false;
  GripperProxy gripper;
  CollisionParams collision;
  GraphParams graph;
  SolveParams solve;
  VisibilityParams visibility;
  double densify_support = 0.04;
};

namespace detail {

/// Per-scene visibility cache. The initial hit set, the fruit raster grid,
/// and the rays that hit the bare fruit are fixed across candidates; an
/// occluder can only remove fruit hits from those rays, never add hits on
/// other rays, so evaluating a candidate walks just the cached rays against
/// the fruit grid plus that candidate's occluder grid.
class VisibilityOracle {
 public:
  VisibilityOracle(const LabeledScene& observed, const TriMesh& fruit_mesh,
                   const VisibilityParams& params)
      : camera_(observed.camera), params_(params) {
    if (fruit_mesh.faces.empty()) throw DataError("VisibilityOracle: fruit mesh required");
    OccupancyGrid init{params.resolution, params.grid_origin, {}};
    init.insert_points(observed.points_with_label(PartLabel::fruit), PartLabel::fruit);
    init.insert_points(observed.points_with_label(PartLabel::leaf), PartLabel::leaf);
    init.insert_points(observed.points_with_label(PartLabel::branch), PartLabel::branch);
    h_init_ = raycast_hits(init, camera_, params.stride, params.max_range);

    fruit_grid_ = OccupancyGrid{params.resolution, params.grid_origin, {}};
    fruit_grid_.insert_points(mesh_raster_points(fruit_mesh, params.resolution * 0.5),
                              PartLabel::fruit);

    const Vec3 eye = camera_.position();
    const int64_t eye_key = OccupancyGrid::pack(fruit_grid_.cell_of(eye));
    HitSet h_max;
    for (int v = 0; v < camera_.height; v += params.stride)
      for (int u = 0; u < camera_.width; u += params.stride) {
        const Vec3 dir = camera_.pixel_ray(u, v);
        traverse_grid(fruit_grid_, eye, dir, params.max_range, [&](const CellIndex& c) {
          const int64_t key = OccupancyGrid::pack(c);
          if (key == eye_key) return true;
          if (!fruit_grid_.occupied(key)) return true;
          h_max.insert(key);
          fruit_rays_.push_back(dir);
          return false;
        });
      }
    n_max_ = int(h_max.size());
  }

  int n_max() const { return n_max_; }
  int initial_visible() const { return int(h_init_.size()); }

  struct Counts {
    int n_vis = 0;
    int n_post = 0;
  };

  Counts evaluate(const std::vector<Vec3>& occluder_points,
                  const TriMesh* gripper_mesh) const {
    OccupancyGrid occ{params_.resolution, params_.grid_origin, {}};
    occ.insert_points(occluder_points, PartLabel::leaf);
    if (gripper_mesh)
      occ.insert_points(mesh_raster_points(*gripper_mesh, params_.resolution * 0.5),
                        PartLabel::robot);
    const Vec3 eye = camera_.position();
    const int64_t eye_key = OccupancyGrid::pack(fruit_grid_.cell_of(eye));
    HitSet h_k;
    for (const Vec3& dir : fruit_rays_) {
      traverse_grid(fruit_grid_, eye, dir, params_.max_range, [&](const CellIndex& c) {
        const int64_t key = OccupancyGrid::pack(c);
        if (key == eye_key) return true;
        if (fruit_grid_.occupied(key)) {
          h_k.insert(key);
          return false;
        }
        return !occ.occupied(key);
      });
    }
    Counts counts;
    counts.n_post = int(h_k.size());
    for (int64_t key : h_k)
      if (!h_init_.count(key)) ++counts.n_vis;
    return counts;
  }

 private:
  CameraModel camera_;
  VisibilityParams params_;
  HitSet h_init_;
  OccupancyGrid fruit_grid_;
  std::vector<Vec3> fruit_rays_;
  int n_max_ = 0;
};

}  // namespace detail

/// Full planning pass for one leaf: grasp sites on the hull, branch-aware
/// direction filtering, then per candidate a deformation solve, a swept
/// collision test, and a visibility prediction, with each pair's distance
/// schedule cut short once the predicted visibility clears the early-stop
/// fraction of the bare-fruit maximum. Skips planning entirely when the
/// fruit is already visible enough, unless configured to act anyway.
inline PlanResult plan_leaf_actions(const LabeledScene& observed,
                                    const PlanningScene& completed,
                                    const PlannerParams& params = {}) {
  completed.fruit.require_valid();
  if (completed.leaf_points.empty())
    throw DataError("plan_leaf_actions: no leaf points");
  if (params.distances.empty())
    throw DataError("plan_leaf_actions: empty distance schedule");

  const detail::VisibilityOracle oracle(observed, completed.fruit_mesh,
                                        params.visibility);
  PlanResult plan;
  plan.policy = PlanPolicy::lmap;
  plan.n_max = oracle.n_max();
  plan.initial_visible = oracle.initial_visible();
  if (!params.act_when_visible && plan.n_max > 0 &&
      double(plan.initial_visible) >=
          params.early_stop_fraction * double(plan.n_max)) {
    plan.no_action_needed = true;
    return plan;
  }

  const std::vector<GraspSite> sites =
      generate_grasp_sites(completed.leaf_points, observed.camera.position(),
                           params.n_grasp_points, params.inward_margin);
  const std::vector<CandidatePair> pairs = generate_candidate_pairs(
      sites, completed.branch_points, params.direction_angle_max_deg);
  const MeshQuery branch_query(completed.branch.mesh);

  for (const CandidatePair& pair : pairs) {
    for (double d : params.distances) {
      GraspAction action;
      action.grasp_point = pair.site.point;
      action.gripper_orientation = pair.site.orientation;
      action.displacement = d * pair.direction;

      const DeformationGraph graph = build_graph(
          completed.leaf_points, completed.branch_points, action, params.graph);
      const DeformationResult solved = solve_deformation(graph, params.solve);
      const std::vector<Vec3> deformed_leaf =
          densify(graph, solved, completed.leaf_points, params.densify_support);

      ActionCandidate cand;
      cand.action = action;
      cand.move_distance = d;
      cand.grasp_index = pair.grasp_index;
      cand.direction_index = pair.direction_index;
      cand.energy = solved.energy;
      cand.feasible = collision_free(action, d, completed.fruit, branch_query,
                                     params.gripper, deformed_leaf, params.collision);
      bool early = false;
      if (cand.feasible) {
        const TriMesh gripper_mesh = params.gripper.posed_mesh(
            action.grasp_point + action.displacement, action.gripper_orientation);
        const auto counts = oracle.evaluate(deformed_leaf, &gripper_mesh);
        cand.n_vis = counts.n_vis;
        cand.n_post = counts.n_post;
        early = plan.n_max > 0 &&
                double(cand.n_post) >=
                    params.early_stop_fraction * double(plan.n_max);
      }
      plan.candidates.push_back(cand);
      if (early) break;
    }
  }
  score_and_select(plan, params.lambda);
  return plan;
}

namespace detail {

/// Spatial hash over obstacle points for the heuristic baselines' sweep
/// test against raw observed geometry.
struct PointHash {
  double cell = 0.005;
  std::unordered_map<int64_t, std::vector<Vec3>> bins;

  PointHash(const std::vector<Vec3>& pts, double cell_size) : cell(cell_size) {
    if (!(cell > 0.0)) throw DataError("PointHash: cell size must be positive");
    for (const Vec3& p : pts) bins[key_of(p)].push_back(p);
  }

  int64_t key_of(const Vec3& p) const {
    return OccupancyGrid::pack({int(std::floor(p.x() / cell)),
                                int(std::floor(p.y() / cell)),
                                int(std::floor(p.z() / cell))});
  }

  bool any_within(const Vec3& x, double r) const {
    const int span = int(std::ceil(r / cell));
    const int cx = int(std::floor(x.x() / cell));
    const int cy = int(std::floor(x.y() / cell));
    const int cz = int(std::floor(x.z() / cell));
    for (int dx = -span; dx <= span; ++dx)
      for (int dy = -span; dy <= span; ++dy)
        for (int dz = -span; dz <= span; ++dz) {
          const auto it =
              bins.find(OccupancyGrid::pack({cx + dx, cy + dy, cz + dz}));
          if (it == bins.end()) continue;
          for (const Vec3& p : it->second)
            if ((p - x).squaredNorm() <= r * r) return true;
        }
    return false;
  }
};

inline bool pose_clear_of_points(const Vec3& base, const Mat3& orientation,
                                 const std::vector<Vec3>& samples,
                                 const PointHash& obstacles, double margin) {
  for (const Vec3& s : samples)
    if (obstacles.any_within(base + orientation * s, margin)) return false;
  return true;
}

/// Longest clear pull along `direction` up to `max_distance`, walked in
/// `step` increments; negative when even the approach sweep is blocked.
inline double clear_pull_length(const GraspSite& site, const Vec3& direction,
                                double max_distance, const GripperProxy& gripper,
                                const std::vector<Vec3>& samples,
                                const PointHash& obstacles, bool approach_clear,
                                const CollisionParams& params) {
  if (!approach_clear) return -1.0;
  double clear = 0.0;
  const int n = std::max(1, int(std::ceil(max_distance / params.step)));
  for (int i = 1; i <= n; ++i) {
    const double s = max_distance * double(i) / n;
    if (!pose_clear_of_points(site.point + s * direction, site.orientation, samples,
                              obstacles, params.margin))
      break;
    clear = s;
  }
  return clear;
}

}  // namespace detail

/// Image-plane overlap in pixels between the posed gripper and the mask of
/// the given leaf points.
inline int projected_overlap(const CameraModel& camera, const TriMesh& gripper_mesh,
                             const std::vector<Vec3>& leaf_points,
                             double spacing = 0.003) {
  std::set<int64_t> mask;
  double u = 0.0, v = 0.0;
  for (const Vec3& p : leaf_points)
    if (camera.project(p, u, v) && camera.in_image(u, v))
      mask.insert((int64_t(std::floor(u)) << 20) | int64_t(std::floor(v)));
  std::set<int64_t> seen;
  int overlap = 0;
  for (const Vec3& p : mesh_raster_points(gripper_mesh, spacing)) {
    if (!camera.project(p, u, v) || !camera.in_image(u, v)) continue;
    const int64_t key = (int64_t(std::floor(u)) << 20) | int64_t(std::floor(v));
    if (!seen.insert(key).second) continue;
    if (mask.count(key)) ++overlap;
  }
  return overlap;
}

/// Baseline policies over the same grasp sites and direction set as the
/// full planner, but with no angle filter, no deformation model, and no
/// visibility prediction. Random picks uniformly with no checks at all; the
/// two heuristics sweep the gripper against the observed points of
/// everything except the manipulated leaf, then grasp as far from the
/// branch as possible, upward pulling straight up and minoverlap choosing
/// the direction whose final gripper pose overlaps the leaf mask least.
inline PlanResult plan_baseline(PlanPolicy policy, const LabeledScene& observed,
                                const PlanningScene& completed, std::uint64_t seed,
                                const PlannerParams& params = {}) {
  if (policy == PlanPolicy::lmap) return plan_leaf_actions(observed, completed, params);
  if (params.distances.empty())
    throw DataError("plan_baseline: empty distance schedule");

  const std::vector<GraspSite> sites =
      generate_grasp_sites(completed.leaf_points, observed.camera.position(),
                           params.n_grasp_points, params.inward_margin);
  const std::vector<CandidatePair> pairs =
      generate_candidate_pairs(sites, {}, params.direction_angle_max_deg);

  PlanResult plan;
  plan.policy = policy;
  for (const CandidatePair& pair : pairs)
    for (double d : params.distances) {
      ActionCandidate cand;
      cand.action.grasp_point = pair.site.point;
      cand.action.gripper_orientation = pair.site.orientation;
      cand.action.displacement = d * pair.direction;
      cand.move_distance = d;
      cand.grasp_index = pair.grasp_index;
      cand.direction_index = pair.direction_index;
      plan.candidates.push_back(cand);
    }
  if (plan.candidates.empty()) throw DataError("plan_baseline: no candidates");

  if (policy == PlanPolicy::random) {
    Rng rng(seed);
    plan.chosen_index = int(rng.index(plan.candidates.size()));
    return plan;
  }

  std::vector<Vec3> obstacles;
  for (const auto& cloud : observed.clouds) {
    if (cloud.label == PartLabel::leaf &&
        (completed.leaf_instance < 0 || cloud.instance_id == completed.leaf_instance))
      continue;
    obstacles.insert(obstacles.end(), cloud.points.begin(), cloud.points.end());
  }
  const detail::PointHash hash(voxel_downsample(obstacles, params.collision.margin / 2.0),
                               params.collision.margin);
  const std::vector<Vec3> samples =
      mesh_raster_points(params.gripper.local_mesh(), params.collision.sample_spacing);

  std::vector<char> approach_clear(sites.size(), 0);
  for (size_t gi = 0; gi < sites.size(); ++gi) {
    GraspAction probe;
    probe.grasp_point = sites[gi].point;
    probe.gripper_orientation = sites[gi].orientation;
    bool ok = true;
    for (const Vec3& off :
         detail::sweep_offsets(probe, 0.0, params.gripper, params.collision.step))
      if (!detail::pose_clear_of_points(sites[gi].point + off, sites[gi].orientation,
                                        samples, hash, params.collision.margin)) {
        ok = false;
        break;
      }
    approach_clear[gi] = ok ? 1 : 0;
  }

  const double max_dist =
      *std::max_element(params.distances.begin(), params.distances.end());
  std::unordered_map<int64_t, double> pull_clear;
  for (const CandidatePair& pair : pairs)
    pull_clear[int64_t(pair.grasp_index) * 100 + pair.direction_index] =
        detail::clear_pull_length(pair.site, pair.direction, max_dist, params.gripper,
                                  samples, hash,
                                  approach_clear[size_t(pair.grasp_index)] != 0,
                                  params.collision);
  for (ActionCandidate& c : plan.candidates)
    c.feasible = pull_clear.at(int64_t(c.grasp_index) * 100 + c.direction_index) >=
                 c.move_distance - 1e-12;

  std::vector<double> site_branch_dist(sites.size(), 0.0);
  for (size_t gi = 0; gi < sites.size(); ++gi) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& b : completed.branch_points)
      best = std::min(best, (b - sites[gi].point).norm());
    site_branch_dist[gi] = std::isfinite(best) ? best : 0.0;
  }

  const int up_index = 2;  // +y in pull_directions() order, world up
  int best = -1;
  for (size_t i = 0; i < plan.candidates.size(); ++i) {
    const ActionCandidate& c = plan.candidates[i];
    if (policy == PlanPolicy::upward && c.direction_index != up_index) continue;
    const auto rank = [&](const ActionCandidate& a) {
      return std::make_pair(!a.feasible, -site_branch_dist[size_t(a.grasp_index)]);
    };
    if (best < 0 || rank(c) < rank(plan.candidates[size_t(best)]) ||
        (rank(c) == rank(plan.candidates[size_t(best)]) &&
         c.move_distance > plan.candidates[size_t(best)].move_distance))
      best = int(i);
  }
  if (best < 0) throw DataError("plan_baseline: no candidate for policy");

  if (policy == PlanPolicy::minoverlap) {
    const int site = plan.candidates[size_t(best)].grasp_index;
    const bool want_feasible = plan.candidates[size_t(best)].feasible;
    int best_overlap = std::numeric_limits<int>::max();
    int pick = -1;
    for (size_t i = 0; i < plan.candidates.size(); ++i) {
      const ActionCandidate& c = plan.candidates[i];
      if (c.grasp_index != site || c.feasible != want_feasible) continue;
      const TriMesh posed = params.gripper.posed_mesh(
          c.action.grasp_point + c.action.displacement, c.action.gripper_orientation);
      const int overlap =
          projected_overlap(observed.camera, posed, completed.leaf_points);
      if (overlap < best_overlap) {
        best_overlap = overlap;
        pick = int(i);
      }
    }
    best = pick;
  }
  plan.chosen_index = best;
  return plan;
}

}  // namespace folia
