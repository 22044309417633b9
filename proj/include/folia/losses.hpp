#pragma once

#include "folia/fruit_estimate.hpp"
#include "folia/marching.hpp"

namespace folia {

struct LossWeights {
  double w_sur = 1.0;
  double w_neg = 2.0;
  double w_ped = 0.1;
  double w_reg = 1.0;
  double w_neg_completed_branch = 0.1;

  void require_valid() const {
    for (double w : {w_sur, w_neg, w_ped, w_reg, w_neg_completed_branch})
      if (!std::isfinite(w) || w < 0.0) throw DataError("LossWeights: negative weight");
  }
};

/// Point sets feeding the scene-consistent objective, all in one frame.
struct FitScene {
  std::vector<Vec3> fruit_points;
  std::vector<Vec3> negative_points;          // observed leaf/branch/free space
  std::vector<Vec3> completed_branch_points;  // down-weighted negatives
  std::vector<Vec3> branch_samples;           // peduncle correspondence targets
};

/// Mean squared template SDF over the fruit points.
inline double surface_loss(const FruitEstimate& est, const std::vector<Vec3>& fruit) {
  if (fruit.empty()) throw DataError("surface_loss: empty fruit cloud");
  double acc = 0.0;
  for (const Vec3& p : fruit) acc += sq(est.canonical_sdf(p));
  return acc / double(fruit.size());
}

/// Weighted mean hinge pushing negative points out of the fruit interior.
inline double negative_loss(const FruitEstimate& est, const std::vector<Vec3>& points,
                            const std::vector<double>& point_weights) {
  if (points.size() != point_weights.size())
    throw DataError("negative_loss: weight count mismatch");
  double acc = 0.0, wsum = 0.0;
  for (size_t i = 0; i < points.size(); ++i) {
    if (point_weights[i] < 0.0) throw DataError("negative_loss: negative weight");
    acc += point_weights[i] * std::max(0.0, -est.canonical_sdf(points[i]));
    wsum += point_weights[i];
  }
  return wsum > 0.0 ? acc / wsum : 0.0;
}

/// Peduncle anchors: fixed canonical surface points near the canonical top,
/// paired with their nearest branch samples at refresh time. Freezing both
/// keeps the objective differentiable between refreshes.
struct PeduncleAnchors {
  std::vector<Vec3> canonical_points;
  std::vector<Vec3> targets;
};

inline PeduncleAnchors make_peduncle_anchors(const FruitEstimate& est,
                                             const std::vector<Vec3>& branch_samples,
                                             int n_ped = 10,
                                             double coarse_resolution = 0.01) {
  if (branch_samples.empty())
    throw DataError("make_peduncle_anchors: empty branch sample set");
  PeduncleAnchors anchors;
  anchors.canonical_points = peduncle_points_canonical(est, n_ped, coarse_resolution);
  for (const Vec3& q : anchors.canonical_points) {
    const Vec3 w = est.to_world(q);
    double best = std::numeric_limits<double>::infinity();
    Vec3 target = branch_samples.front();
    for (const Vec3& b : branch_samples) {
      const double d = (w - b).squaredNorm();
      if (d < best) {
        best = d;
        target = b;
      }
    }
    anchors.targets.push_back(target);
  }
  return anchors;
}

inline double peduncle_loss_frozen(const FruitEstimate& est,
                                   const PeduncleAnchors& anchors) {
  if (anchors.canonical_points.empty()) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < anchors.canonical_points.size(); ++i)
    acc += (est.to_world(anchors.canonical_points[i]) - anchors.targets[i]).squaredNorm();
  return acc / double(anchors.canonical_points.size());
}

/// Fresh-correspondence peduncle loss (anchors rebuilt on every call).
inline double peduncle_loss(const FruitEstimate& est,
                            const std::vector<Vec3>& branch_samples, int n_ped = 10,
                            double coarse_resolution = 0.01) {
  return peduncle_loss_frozen(
      est, make_peduncle_anchors(est, branch_samples, n_ped, coarse_resolution));
}

inline double reg_loss(const ShapeCode& code) {
  return (code.as_vector() - CodeVec::Ones()).squaredNorm();
}

struct LossBreakdown {
  double surface = 0.0, negative = 0.0, peduncle = 0.0, reg = 0.0;
  double total = 0.0;
};

inline LossBreakdown total_loss(const FruitEstimate& est, const FitScene& scene,
                                const LossWeights& weights,
                                const PeduncleAnchors* anchors = nullptr) {
  weights.require_valid();
  LossBreakdown out;
  out.surface = surface_loss(est, scene.fruit_points);
  std::vector<Vec3> neg = scene.negative_points;
  std::vector<double> w(neg.size(), 1.0);
  neg.insert(neg.end(), scene.completed_branch_points.begin(),
             scene.completed_branch_points.end());
  w.insert(w.end(), scene.completed_branch_points.size(),
           weights.w_neg_completed_branch);
  out.negative = neg.empty() ? 0.0 : negative_loss(est, neg, w);
  if (anchors)
    out.peduncle = peduncle_loss_frozen(est, *anchors);
  else if (!scene.branch_samples.empty())
    out.peduncle = peduncle_loss(est, scene.branch_samples);
  out.reg = reg_loss(est.code);
  out.total = weights.w_sur * out.surface + weights.w_neg * out.negative +
              weights.w_ped * out.peduncle + weights.w_reg * out.reg;
  return out;
}

/// Gradient of the frozen-anchor objective over (code, scale, translation,
/// rotation tangent). The rotation step is the right-multiplied retraction
/// R <- R exp([w]x), so tangent gradients are taken at w = 0.
struct LossGradient {
  double loss = 0.0;
  LossBreakdown parts;
  CodeVec code = CodeVec::Zero();
  double scale = 0.0;
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();
};

inline LossGradient total_loss_gradient(const FruitEstimate& est, const FitScene& scene,
                                        const LossWeights& weights,
                                        const PeduncleAnchors& anchors) {
  weights.require_valid();
  if (scene.fruit_points.empty())
    throw DataError("total_loss_gradient: empty fruit cloud");
  LossGradient g;
  const double s = est.world_to_canonical.scale;
  const Mat3& R = est.world_to_canonical.rotation;
  const Vec3& t = est.world_to_canonical.translation;

  // chain for canonical query q = s R p + t: a canonical-space gradient gq
  // lands on the parameters as below
  const auto accumulate_map = [&](const Vec3& p, const Vec3& gq) {
    g.scale += gq.dot(R * p);
    g.translation += gq;
    g.rotation += s * p.cross(R.transpose() * gq);
  };

  const double n_sur = double(scene.fruit_points.size());
  for (const Vec3& p : scene.fruit_points) {
    const SdfDerivatives der = superellipsoid_sdf_grad(est.code, est.canonical(p));
    g.parts.surface += sq(der.d) / n_sur;
    const double coeff = weights.w_sur * 2.0 * der.d / n_sur;
    g.code += coeff * der.dcode;
    accumulate_map(p, coeff * der.dx);
  }

  double neg_wsum = double(scene.negative_points.size()) +
                    weights.w_neg_completed_branch *
                        double(scene.completed_branch_points.size());
  if (neg_wsum > 0.0) {
    const auto hinge = [&](const Vec3& p, double w) {
      const Vec3 q = est.canonical(p);
      const SdfDerivatives der = superellipsoid_sdf_grad(est.code, q);
      if (der.d >= 0.0) return;
      g.parts.negative += -der.d * w / neg_wsum;
      const double coeff = -weights.w_neg * w / neg_wsum;
      g.code += coeff * der.dcode;
      accumulate_map(p, coeff * der.dx);
    };
    for (const Vec3& p : scene.negative_points) hinge(p, 1.0);
    for (const Vec3& p : scene.completed_branch_points)
      hinge(p, weights.w_neg_completed_branch);
  }

  if (!anchors.canonical_points.empty()) {
    const double n_ped = double(anchors.canonical_points.size());
    for (size_t i = 0; i < anchors.canonical_points.size(); ++i) {
      const Vec3& q = anchors.canonical_points[i];
      const Vec3 u = est.to_world(q);
      const Vec3 e = u - anchors.targets[i];
      g.parts.peduncle += e.squaredNorm() / n_ped;
      const Vec3 gu = weights.w_ped * 2.0 / n_ped * e;
      g.scale += gu.dot(-u / s);
      g.translation += -(1.0 / s) * (R * gu);
      g.rotation += gu.cross(u);
    }
  }

  g.parts.reg = reg_loss(est.code);
  g.code += weights.w_reg * 2.0 * (est.code.as_vector() - CodeVec::Ones());

  g.parts.total = weights.w_sur * g.parts.surface + weights.w_neg * g.parts.negative +
                  weights.w_ped * g.parts.peduncle + weights.w_reg * g.parts.reg;
  g.loss = g.parts.total;
  return g;
}

}  // namespace folia
