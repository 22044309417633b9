#pragma once

#include "folia/losses.hpp"

namespace folia {

struct OptimizeConfig {
  int budget = 500;
  double lr_code = 1e-2;
  double lr_scale = 1e-2;
  double lr_translation = 1e-2;
  double lr_rotation = 5e-3;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double early_stop_rel = 1e-6;
  int early_stop_window = 20;
  int peduncle_refresh = 25;
  int n_peduncle = 10;
  double peduncle_mesh_resolution = 0.01;  // world meters
};

struct OptimizeResult {
  FruitEstimate estimate;
  std::vector<double> loss_curve;
  double final_loss = 0.0;
  int iterations = 0;
};

namespace detail {

/// The optimization runs in a fruit-normalized frame (centroid shifted out,
/// RMS spread scaled to 1) so the fixed init s=1, R=I, t=centroid and the
/// fixed step sizes behave the same for any fruit size. Peduncle distances
/// are world-metric, so that term is re-weighted by sigma^2.
struct NormalizedFrame {
  Vec3 mu = Vec3::Zero();
  double sigma = 1.0;

  static NormalizedFrame from_fruit(const std::vector<Vec3>& fruit) {
    if (fruit.size() < 10) throw DataError("optimize_fruit: need at least 10 fruit points");
    NormalizedFrame f;
    for (const Vec3& p : fruit) f.mu += p;
    f.mu /= double(fruit.size());
    double acc = 0.0;
    for (const Vec3& p : fruit) acc += (p - f.mu).squaredNorm();
    f.sigma = std::sqrt(acc / double(fruit.size()));
    if (!(f.sigma > 1e-9)) throw DataError("optimize_fruit: degenerate fruit cloud");
    return f;
  }

  Vec3 to_norm(const Vec3& p) const { return (p - mu) / sigma; }

  std::vector<Vec3> to_norm(const std::vector<Vec3>& pts) const {
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const Vec3& p : pts) out.push_back(to_norm(p));
    return out;
  }

  /// norm-frame estimate (canonical = s' R' p_norm + t') to world frame
  Sim3Transform compose_world(const Sim3Transform& t_norm) const {
    Sim3Transform w;
    w.scale = t_norm.scale / sigma;
    w.rotation = t_norm.rotation;
    w.translation = t_norm.translation - (t_norm.scale / sigma) * (t_norm.rotation * mu);
    return w;
  }

  Sim3Transform decompose_world(const Sim3Transform& t_world) const {
    Sim3Transform n;
    n.scale = t_world.scale * sigma;
    n.rotation = t_world.rotation;
    n.translation = t_world.translation + t_world.scale * (t_world.rotation * mu);
    return n;
  }
};

}  // namespace detail

/// First-order fit of the scene-consistent objective: Adam over the packed
/// state (code, scale, translation, rotation tangent) with per-group step
/// sizes, box projection on the code, and periodic peduncle-anchor refresh.
/// Returns the best iterate seen, so the result never regresses past init.
inline OptimizeResult optimize_fruit(const FitScene& world_scene,
                                     const LossWeights& weights,
                                     const OptimizeConfig& cfg = {},
                                     const FruitEstimate* warm_start = nullptr) {
  weights.require_valid();
  const detail::NormalizedFrame frame =
      detail::NormalizedFrame::from_fruit(world_scene.fruit_points);

  FitScene scene;
  scene.fruit_points = frame.to_norm(world_scene.fruit_points);
  scene.negative_points = frame.to_norm(world_scene.negative_points);
  scene.completed_branch_points = frame.to_norm(world_scene.completed_branch_points);
  scene.branch_samples = frame.to_norm(world_scene.branch_samples);

  LossWeights w = weights;
  w.w_ped = weights.w_ped * frame.sigma * frame.sigma;

  FruitEstimate est;
  if (warm_start) {
    est = *warm_start;
    est.world_to_canonical = frame.decompose_world(warm_start->world_to_canonical);
  }
  est.code = est.code.clamped();

  // peduncle mesh resolution is a world length; scale into the norm frame
  const double ped_res = cfg.peduncle_mesh_resolution / frame.sigma;
  PeduncleAnchors anchors;
  const auto refresh_anchors = [&]() {
    if (scene.branch_samples.empty() || w.w_ped == 0.0) {
      anchors = PeduncleAnchors{};
      return;
    }
    // anchors only need a coarse cap, so keep the marching lattice small
    // even if the scale iterate has wandered
    const double span = std::max({est.code.a, est.code.b, est.code.c}) + 0.1;
    const double cell =
        std::max(ped_res, 2.0 * span / (32.0 * est.world_to_canonical.scale));
    anchors = make_peduncle_anchors(est, scene.branch_samples, cfg.n_peduncle, cell);
  };

  OptimizeResult result;
  refresh_anchors();
  double best_loss = total_loss(est, scene, w, &anchors).total;
  FruitEstimate best_est = est;
  result.loss_curve.push_back(best_loss);

  CodeVec m_code = CodeVec::Zero(), v_code = CodeVec::Zero();
  double m_s = 0.0, v_s = 0.0;
  Vec3 m_t = Vec3::Zero(), v_t = Vec3::Zero();
  Vec3 m_w = Vec3::Zero(), v_w = Vec3::Zero();

  for (int iter = 0; iter < cfg.budget; ++iter) {
    if (iter > 0 && cfg.peduncle_refresh > 0 && iter % cfg.peduncle_refresh == 0)
      refresh_anchors();

    const LossGradient grad = total_loss_gradient(est, scene, w, anchors);
    if (!std::isfinite(grad.loss))
      throw NumericalError("optimize_fruit: loss diverged at iteration " +
                           std::to_string(iter));

    const double bc1 = 1.0 - std::pow(cfg.beta1, iter + 1);
    const double bc2 = 1.0 - std::pow(cfg.beta2, iter + 1);
    const auto adam = [&](double g, double& m, double& v, double lr) {
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      return -lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.adam_eps);
    };

    CodeVec code = est.code.as_vector();
    for (int i = 0; i < 5; ++i)
      code[i] += adam(grad.code[i], m_code[i], v_code[i], cfg.lr_code);
    est.code = ShapeCode::from_vector(code).clamped();

    est.world_to_canonical.scale = std::max(
        1e-3, est.world_to_canonical.scale +
                  adam(grad.scale, m_s, v_s, cfg.lr_scale));
    for (int i = 0; i < 3; ++i)
      est.world_to_canonical.translation[i] +=
          adam(grad.translation[i], m_t[i], v_t[i], cfg.lr_translation);
    Vec3 step;
    for (int i = 0; i < 3; ++i)
      step[i] = adam(grad.rotation[i], m_w[i], v_w[i], cfg.lr_rotation);
    est.world_to_canonical.rotation = est.world_to_canonical.rotation * rotation_exp(step);
    if ((iter + 1) % 50 == 0)
      est.world_to_canonical.rotation =
          project_to_rotation(est.world_to_canonical.rotation);

    const double loss = total_loss(est, scene, w, &anchors).total;
    if (!std::isfinite(loss))
      throw NumericalError("optimize_fruit: loss diverged at iteration " +
                           std::to_string(iter));
    result.loss_curve.push_back(loss);
    if (loss < best_loss) {
      best_loss = loss;
      best_est = est;
    }
    result.iterations = iter + 1;

    const int wnd = cfg.early_stop_window;
    if (int(result.loss_curve.size()) > wnd) {
      const double prev = result.loss_curve[result.loss_curve.size() - 1 - wnd];
      const double cur = result.loss_curve.back();
      if (prev - cur < cfg.early_stop_rel * std::max(std::abs(prev), 1e-12)) break;
    }
  }

  best_est.world_to_canonical = frame.compose_world(best_est.world_to_canonical);
  if (result.iterations > 0)
    best_est.world_to_canonical.rotation =
        project_to_rotation(best_est.world_to_canonical.rotation);
  result.estimate = best_est;
  result.final_loss = best_loss;
  return result;
}

/// Post-action refinement: warm start from the prior estimate with the
/// peduncle and completed-branch weights dropped to 0.01.
inline OptimizeResult reestimate(const FitScene& fused_scene, const FruitEstimate& prior,
                                 const LossWeights& weights,
                                 const OptimizeConfig& cfg = {}) {
  LossWeights w = weights;
  w.w_ped = 0.01;
  w.w_neg_completed_branch = 0.01;
  return optimize_fruit(fused_scene, w, cfg, &prior);
}

}  // namespace folia
