#pragma once

#include <Eigen/Eigenvalues>

#include "folia/common.hpp"

namespace folia {

struct PcaResult {
  Vec3 mean = Vec3::Zero();
  Mat3 axes = Mat3::Identity();  // columns, descending variance
  Vec3 variances = Vec3::Zero();
};

/// Principal axes of a point set. Axes are orthonormal columns ordered by
/// descending variance, with a fixed sign convention so results are
/// reproducible: each of the first two axes has its largest-magnitude
/// component positive, the third is their cross product.
inline PcaResult pca_axes(const std::vector<Vec3>& points) {
  if (points.size() < 2) throw DataError("pca_axes: need at least 2 points");
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : points) mean += p;
  mean /= double(points.size());

  bool distinct = false;
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : points) {
    const Vec3 d = p - mean;
    if (d.norm() > 1e-12) distinct = true;
    cov += d * d.transpose();
  }
  if (!distinct) throw DataError("pca_axes: all points coincide");
  cov /= double(points.size());

  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  if (es.info() != Eigen::Success) throw NumericalError("pca_axes: eigensolver failed");

  PcaResult r;
  r.mean = mean;
  // SelfAdjointEigenSolver orders ascending; flip to descending.
  for (int i = 0; i < 3; ++i) {
    r.variances[i] = std::max(0.0, es.eigenvalues()[2 - i]);
    r.axes.col(i) = es.eigenvectors().col(2 - i);
  }
  for (int i = 0; i < 2; ++i) {
    int biggest = 0;
    for (int k = 1; k < 3; ++k)
      if (std::abs(r.axes(k, i)) > std::abs(r.axes(biggest, i))) biggest = k;
    if (r.axes(biggest, i) < 0.0) r.axes.col(i) = -r.axes.col(i);
  }
  r.axes.col(2) = r.axes.col(0).cross(r.axes.col(1));
  return r;
}

}  // namespace folia
