#pragma once

#include "folia/common.hpp"
#include "folia/sim3.hpp"

namespace folia {

/// Pinhole camera. Image x right, y down, optical axis +z in the camera
/// frame; `pose` is the rigid world-from-camera transform. Continuous pixel
/// coordinates put pixel (u, v)'s center at (u + 0.5, v + 0.5).
struct CameraModel {
  double fx = 300.0, fy = 300.0;
  double cx = 160.0, cy = 120.0;
  int width = 320, height = 240;
  Sim3Transform pose;  // world-from-camera, scale must stay 1

  void require_valid() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw DataError("CameraModel: focal lengths must be positive");
    if (cx < 0.0 || cx > width || cy < 0.0 || cy > height)
      throw DataError("CameraModel: principal point outside image bounds");
    pose.require_valid();
    if (std::abs(pose.scale - 1.0) > 1e-9) throw DataError("CameraModel: pose must be rigid");
  }

  Vec3 position() const { return pose.translation; }

  /// Unit world-space direction of the ray through the center of pixel (u, v).
  Vec3 pixel_ray(double u, double v) const {
    const Vec3 dir_cam((u + 0.5 - cx) / fx, (v + 0.5 - cy) / fy, 1.0);
    return pose.rotate(dir_cam.normalized());
  }

  /// Project a world point; returns false when behind the camera.
  bool project(const Vec3& p_world, double& u, double& v) const {
    const Vec3 pc = pose.inverse().apply(p_world);
    if (pc.z() <= 1e-9) return false;
    u = fx * pc.x() / pc.z() + cx;
    v = fy * pc.y() / pc.z() + cy;
    return true;
  }

  bool in_image(double u, double v) const {
    return u >= 0.0 && u < double(width) && v >= 0.0 && v < double(height);
  }

  /// Default desk-scale camera at the world origin looking along +z with
  /// world +y up (camera y-down axis maps to world -y).
  static CameraModel desk_default() {
    CameraModel c;
    Mat3 r;
    r << -1, 0, 0, 0, -1, 0, 0, 0, 1;
    c.pose.rotation = r;
    return c;
  }
};

}  // namespace folia
