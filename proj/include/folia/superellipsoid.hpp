#pragma once

#include "folia/common.hpp"

namespace folia {

using CodeVec = Eigen::Matrix<double, 5, 1>;

/// Superellipsoid shape parameters, all box-constrained to [0.2, 2.0].
/// (1,1,1,1,1) is the unit sphere and doubles as the regularizer target.
struct ShapeCode {
  double a = 1.0, b = 1.0, c = 1.0;
  double e1 = 1.0, e2 = 1.0;

  static constexpr double kMin = 0.2;
  static constexpr double kMax = 2.0;

  CodeVec as_vector() const {
    CodeVec v;
    v << a, b, c, e1, e2;
    return v;
  }

  static ShapeCode from_vector(const CodeVec& v) {
    return ShapeCode{v[0], v[1], v[2], v[3], v[4]};
  }

  bool valid() const {
    const CodeVec v = as_vector();
    for (int i = 0; i < 5; ++i)
      if (!std::isfinite(v[i]) || v[i] < kMin || v[i] > kMax) return false;
    return true;
  }

  ShapeCode clamped() const {
    CodeVec v = as_vector();
    for (int i = 0; i < 5; ++i) v[i] = std::clamp(v[i], kMin, kMax);
    return from_vector(v);
  }

  void require_valid() const {
    if (!valid()) throw DataError("ShapeCode: parameter out of [0.2, 2.0]");
  }
};

/// Inside-outside field F(x): 1 on the surface, < 1 inside. F(beta x) =
/// beta^(2/e1) F(x), which turns F into the radial distance surrogate below.
inline double superellipsoid_implicit(const ShapeCode& z, const Vec3& x) {
  const double qx = std::abs(x.x()) / z.a;
  const double qy = std::abs(x.y()) / z.b;
  const double qz = std::abs(x.z()) / z.c;
  const double g = std::pow(qx, 2.0 / z.e2) + std::pow(qy, 2.0 / z.e2);
  return std::pow(g, z.e2 / z.e1) + std::pow(qz, 2.0 / z.e1);
}

/// Signed radial distance surrogate: ||x|| (1 - F(x)^(-e1/2)). Negative
/// inside, zero on the surface, positive outside; exact for spheres.
inline double superellipsoid_sdf(const ShapeCode& z, const Vec3& x) {
  const double r = x.norm();
  if (r < 1e-12) return -std::min({z.a, z.b, z.c});
  const double f = std::max(superellipsoid_implicit(z, x), 1e-18);
  return r * (1.0 - std::pow(f, -z.e1 / 2.0));
}

struct SdfDerivatives {
  double d = 0.0;
  Vec3 dx = Vec3::Zero();
  CodeVec dcode = CodeVec::Zero();
};

/// Value plus analytic gradients in the query point and all five code
/// parameters. Derivatives at the coordinate-plane kinks (any |component|
/// near zero) take the one-sided zero branch.
inline SdfDerivatives superellipsoid_sdf_grad(const ShapeCode& z, const Vec3& x) {
  SdfDerivatives out;
  const double r = x.norm();
  if (r < 1e-12) {
    out.d = -std::min({z.a, z.b, z.c});
    return out;
  }
  const double qx = std::abs(x.x()) / z.a;
  const double qy = std::abs(x.y()) / z.b;
  const double qz = std::abs(x.z()) / z.c;
  const double px = std::pow(qx, 2.0 / z.e2);
  const double py = std::pow(qy, 2.0 / z.e2);
  const double pz = std::pow(qz, 2.0 / z.e1);
  const double g = px + py;
  const double w = g > 0.0 ? std::pow(g, z.e2 / z.e1) : 0.0;
  const double f = std::max(w + pz, 1e-18);

  const double f_pow = std::pow(f, -z.e1 / 2.0);  // F^(-e1/2)
  out.d = r * (1.0 - f_pow);

  // dF/d(everything)
  const double gw = g > 1e-300 ? std::pow(g, z.e2 / z.e1 - 1.0) : 0.0;
  double dF_dx = 0.0, dF_dy = 0.0, dF_dz = 0.0;
  if (qx > 1e-14 && gw > 0.0)
    dF_dx = (2.0 / z.e1) * gw * std::pow(qx, 2.0 / z.e2 - 1.0) *
            (x.x() > 0 ? 1.0 : -1.0) / z.a;
  if (qy > 1e-14 && gw > 0.0)
    dF_dy = (2.0 / z.e1) * gw * std::pow(qy, 2.0 / z.e2 - 1.0) *
            (x.y() > 0 ? 1.0 : -1.0) / z.b;
  if (qz > 1e-14)
    dF_dz = (2.0 / z.e1) * std::pow(qz, 2.0 / z.e1 - 1.0) *
            (x.z() > 0 ? 1.0 : -1.0) / z.c;

  const double dF_da = -(2.0 / z.e1) * gw * px / z.a;
  const double dF_db = -(2.0 / z.e1) * gw * py / z.b;
  const double dF_dc = -(2.0 / z.e1) * pz / z.c;

  double dF_de1 = 0.0;
  if (w > 0.0 && g > 1e-300) dF_de1 += w * std::log(g) * (-z.e2 / (z.e1 * z.e1));
  if (pz > 0.0 && qz > 1e-300) dF_de1 += pz * std::log(qz) * (-2.0 / (z.e1 * z.e1));

  double dF_de2 = 0.0;
  if (w > 0.0 && g > 1e-300) {
    double dg_de2 = 0.0;
    if (px > 0.0 && qx > 1e-300) dg_de2 += px * std::log(qx) * (-2.0 / (z.e2 * z.e2));
    if (py > 0.0 && qy > 1e-300) dg_de2 += py * std::log(qy) * (-2.0 / (z.e2 * z.e2));
    dF_de2 = w * (std::log(g) / z.e1 + (z.e2 / z.e1) * dg_de2 / g);
  }

  // d = r (1 - F^(-e1/2))
  const double k = (z.e1 / 2.0) * std::pow(f, -z.e1 / 2.0 - 1.0);
  out.dx = (x / r) * (1.0 - f_pow) + r * k * Vec3(dF_dx, dF_dy, dF_dz);
  out.dcode[0] = r * k * dF_da;
  out.dcode[1] = r * k * dF_db;
  out.dcode[2] = r * k * dF_dc;
  out.dcode[3] = r * f_pow * (0.5 * std::log(f) + (z.e1 / 2.0) * dF_de1 / f);
  out.dcode[4] = r * k * dF_de2;
  return out;
}

}  // namespace folia
