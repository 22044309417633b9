#pragma once

#include "folia/arap.hpp"

namespace folia {

/// Carries the sparse node displacements onto a dense point set and
/// returns the displaced points, blending with normalized compactly
/// supported radial weights w(r) = ((s - r)/(s r))^2, support radius s.
/// The weight diverges as r -> 0, so node displacements are reproduced
/// exactly at node positions; a dense point outside every node's support
/// stays where it was.
inline std::vector<Vec3> densify(const DeformationGraph& g,
                                 const DeformationResult& result,
                                 const std::vector<Vec3>& dense_points,
                                 double support = 0.04) {
  if (result.deformed_nodes.size() != g.nodes.size())
    throw DataError("densify: result does not match the graph");
  if (!(support > 0.0)) throw DataError("densify: support radius must be positive");

  std::vector<Vec3> out;
  out.reserve(dense_points.size());
  for (const Vec3& x : dense_points) {
    if (!finite(x)) throw DataError("densify: non-finite dense point");
    Vec3 weighted = Vec3::Zero();
    double wsum = 0.0;
    Vec3 exact = Vec3::Zero();
    bool at_node = false;
    for (size_t i = 0; i < g.nodes.size(); ++i) {
      const double r = (x - g.nodes[i]).norm();
      if (r >= support) continue;
      const Vec3 disp = result.deformed_nodes[i] - g.nodes[i];
      if (r < 1e-12) {
        at_node = true;
        exact = disp;
        break;
      }
      const double w = ((support - r) / (support * r)) * ((support - r) / (support * r));
      weighted += w * disp;
      wsum += w;
    }
    if (at_node)
      out.push_back(x + exact);
    else if (wsum > 0.0)
      out.push_back(x + weighted / wsum);
    else
      out.push_back(x);
  }
  return out;
}

}  // namespace folia
