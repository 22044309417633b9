#pragma once

#include <Eigen/SVD>
#include <Eigen/Sparse>

#include "folia/deform_graph.hpp"

namespace folia {

struct ArapEval {
  double energy = 0.0;
  std::vector<Mat3> rotations;
};

/// As-rigid-as-possible energy of a candidate deformation: each node gets
/// the proper rotation that best maps the rest offsets of the edges it owns
/// (the lower-index endpoint owns the edge) onto the deformed offsets, and
/// the energy is the weighted sum of the residuals at those rotations.
inline ArapEval arap_energy(const DeformationGraph& g,
                            const std::vector<Vec3>& deformed) {
  if (deformed.size() != g.nodes.size())
    throw DataError("arap_energy: candidate size does not match the graph");
  const size_t n = g.nodes.size();
  std::vector<Mat3> cov(n, Mat3::Zero());
  for (const GraphEdge& e : g.edges) {
    const Vec3 rest = g.nodes[size_t(e.i)] - g.nodes[size_t(e.j)];
    const Vec3 now = deformed[size_t(e.i)] - deformed[size_t(e.j)];
    cov[size_t(e.i)] += e.weight * rest * now.transpose();
  }
  ArapEval out;
  out.rotations.assign(n, Mat3::Identity());
  for (size_t i = 0; i < n; ++i) {
    if (cov[i].isZero(0.0)) continue;  // owns no edges; rotation is free
    Eigen::JacobiSVD<Mat3> svd(cov[i], Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixV() * svd.matrixU().transpose();
    if (r.determinant() < 0.0) {
      Mat3 flip = Mat3::Identity();
      flip(2, 2) = -1.0;  // smallest singular direction
      r = svd.matrixV() * flip * svd.matrixU().transpose();
    }
    out.rotations[i] = r;
  }
  for (const GraphEdge& e : g.edges) {
    const Vec3 rest = g.nodes[size_t(e.i)] - g.nodes[size_t(e.j)];
    const Vec3 now = deformed[size_t(e.i)] - deformed[size_t(e.j)];
    out.energy +=
        e.weight * (now - out.rotations[size_t(e.i)] * rest).squaredNorm();
  }
  return out;
}

struct DeformationResult {
  std::vector<Vec3> deformed_nodes;
  std::vector<Mat3> node_rotations;
  double energy = 0.0;
  std::vector<double> energy_curve;
};

struct SolveParams {
  int max_iterations = 200;
  double rel_tolerance = 1e-6;
};

/// Minimizes the ARAP energy subject to the graph's hard constraints
/// (gripped nodes at their prescribed targets, fixed nodes at rest) by
/// alternating the per-node rotation fit with an exact solve of the weighted
/// Laplacian system over the free nodes. Both half-steps are exact
/// minimizations, so the energy never increases.
inline DeformationResult solve_deformation(const DeformationGraph& g,
                                           const SolveParams& params = SolveParams{}) {
  const int n = int(g.nodes.size());
  if (n == 0) throw DataError("solve_deformation: empty graph");

  std::vector<int> free_index(size_t(n), -1);
  int n_free = 0;
  for (int i = 0; i < n; ++i)
    if (g.roles[size_t(i)] == NodeRole::deformable) free_index[size_t(i)] = n_free++;

  // every free node must connect through free nodes to some constrained
  // node, else its component floats and the reduced system is singular
  {
    std::vector<std::vector<int>> adj(static_cast<size_t>(n));
    for (const GraphEdge& e : g.edges) {
      adj[size_t(e.i)].push_back(e.j);
      adj[size_t(e.j)].push_back(e.i);
    }
    std::vector<char> seen(size_t(n), 0);
    std::vector<int> queue;
    for (int i = 0; i < n; ++i)
      if (free_index[size_t(i)] < 0) {
        seen[size_t(i)] = 1;
        queue.push_back(i);
      }
    for (size_t head = 0; head < queue.size(); ++head)
      for (const int v : adj[size_t(queue[head])])
        if (!seen[size_t(v)]) {
          seen[size_t(v)] = 1;
          queue.push_back(v);
        }
    for (int i = 0; i < n; ++i)
      if (!seen[size_t(i)])
        throw DataError("solve_deformation: floppy component with no constraint");
  }

  std::vector<Vec3> pos(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) pos[size_t(i)] = g.target(i);

  DeformationResult result;
  if (n_free > 0) {
    // constant weighted Laplacian over the free nodes; constrained columns
    // move to the right-hand side each iteration
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n_free);
    for (const GraphEdge& e : g.edges) {
      const int fi = free_index[size_t(e.i)], fj = free_index[size_t(e.j)];
      if (fi >= 0) diag[fi] += e.weight;
      if (fj >= 0) diag[fj] += e.weight;
      if (fi >= 0 && fj >= 0) {
        trip.emplace_back(fi, fj, -e.weight);
        trip.emplace_back(fj, fi, -e.weight);
      }
    }
    for (int k = 0; k < n_free; ++k) trip.emplace_back(k, k, diag[k]);
    Eigen::SparseMatrix<double> laplacian(n_free, n_free);
    laplacian.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(laplacian);
    if (llt.info() != Eigen::Success)
      throw NumericalError("solve_deformation: singular global system");

    double prev_energy = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < params.max_iterations; ++iter) {
      const ArapEval eval = arap_energy(g, pos);
      result.energy_curve.push_back(eval.energy);
      result.node_rotations = eval.rotations;
      if (prev_energy - eval.energy <
          params.rel_tolerance * std::max(prev_energy, 1e-12))
        break;
      prev_energy = eval.energy;

      Eigen::MatrixX3d rhs = Eigen::MatrixX3d::Zero(n_free, 3);
      for (const GraphEdge& e : g.edges) {
        const Vec3 rotated =
            eval.rotations[size_t(e.i)] * (g.nodes[size_t(e.i)] - g.nodes[size_t(e.j)]);
        const int fi = free_index[size_t(e.i)], fj = free_index[size_t(e.j)];
        if (fi >= 0) rhs.row(fi) += e.weight * rotated.transpose();
        if (fj >= 0) rhs.row(fj) -= e.weight * rotated.transpose();
        if (fi >= 0 && fj < 0) rhs.row(fi) += e.weight * pos[size_t(e.j)].transpose();
        if (fj >= 0 && fi < 0) rhs.row(fj) += e.weight * pos[size_t(e.i)].transpose();
      }
      const Eigen::MatrixX3d solved = llt.solve(rhs);
      if (!solved.allFinite())
        throw NumericalError("solve_deformation: global solve produced non-finite positions");
      for (int i = 0; i < n; ++i)
        if (free_index[size_t(i)] >= 0) pos[size_t(i)] = solved.row(free_index[size_t(i)]);
    }
  }

  const ArapEval final_eval = arap_energy(g, pos);
  result.deformed_nodes = pos;
  result.node_rotations = final_eval.rotations;
  result.energy = final_eval.energy;
  if (result.energy_curve.empty() || result.energy_curve.back() != final_eval.energy)
    result.energy_curve.push_back(final_eval.energy);
  return result;
}

/// Companion dump to write_graph: deformed node positions and the minimized
/// energy, one `dnode x y z` line per node then `energy e`.
inline void write_deformation(std::ostream& out, const DeformationResult& r) {
  for (const Vec3& p : r.deformed_nodes)
    out << "dnode " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  out << "energy " << r.energy << '\n';
}

}  // namespace folia
