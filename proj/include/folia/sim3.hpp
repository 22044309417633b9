#pragma once

#include <Eigen/SVD>

#include "folia/common.hpp"

namespace folia {

/// Similarity transform x -> s*R*x + t (7 DOF: uniform scale, rotation,
/// translation). Used both ways in the pipeline: world->canonical for fruit
/// estimates and rigid camera poses (s = 1).
struct Sim3Transform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Sim3Transform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }

  /// Direction part only (no translation, no scale). Unit length preserved.
  Vec3 rotate(const Vec3& d) const { return rotation * d; }

  Sim3Transform inverse() const {
    Sim3Transform inv;
    inv.scale = 1.0 / scale;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.scale) * (inv.rotation * translation);
    return inv;
  }

  /// Composition: (a*b).apply(p) == a.apply(b.apply(p)).
  friend Sim3Transform operator*(const Sim3Transform& a, const Sim3Transform& b) {
    Sim3Transform c;
    c.scale = a.scale * b.scale;
    c.rotation = a.rotation * b.rotation;
    c.translation = a.scale * (a.rotation * b.translation) + a.translation;
    return c;
  }

  bool valid(double tol = 1e-9) const {
    if (!(scale > 0.0) || !std::isfinite(scale) || !finite(translation)) return false;
    if (!rotation.allFinite()) return false;
    const Mat3 rtr = rotation.transpose() * rotation;
    if ((rtr - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(rotation.determinant() - 1.0) <= tol;
  }

  void require_valid() const {
    if (!valid(1e-7)) throw DataError("Sim3Transform: invalid transform");
  }
};

inline Vec3 apply_sim3(const Sim3Transform& t, const Vec3& p) { return t.apply(p); }

/// Nearest proper rotation to an arbitrary 3x3 matrix (sign-corrected SVD).
inline Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

}  // namespace folia
