#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "dwinv/boundary_trace.hpp"
#include "dwinv/grid.hpp"
#include "dwinv/util.hpp"
#include "dwinv/wave.hpp"

namespace dwinv {

/// The measurement dnu u on Sigma1, recomputed from interior values with a
/// second-order one-sided stencil. This is deliberately NOT the ghost
/// relation that enforces the boundary condition, so inversions cannot read
/// the imposed condition back (the inverse-crime guard).
inline BoundaryTrace neumann_trace(const WaveTrajectory& traj) {
  const DomainMesh& mesh = *traj.mesh;
  BoundaryTrace tr(mesh, traj.tg);
  double i2x = 1.0 / (2.0 * mesh.hx);
  for (int n = 0; n < tr.n_samples(); ++n) {
    const Eigen::VectorXd& u = traj.u[static_cast<size_t>(n)];
    for (size_t j = 0; j < mesh.gamma1.size(); ++j) {
      int id = mesh.gamma1[j];
      tr.values(n, static_cast<Eigen::Index>(j)) =
          (3.0 * u[id] - 4.0 * u[id - 1] + u[id - 2]) * i2x;
    }
  }
  return tr;
}

inline BoundaryTrace velocity_trace(const WaveTrajectory& traj) {
  const DomainMesh& mesh = *traj.mesh;
  BoundaryTrace tr(mesh, traj.tg);
  for (int n = 0; n < tr.n_samples(); ++n)
    for (size_t j = 0; j < mesh.gamma1.size(); ++j)
      tr.values(n, static_cast<Eigen::Index>(j)) =
          traj.v[static_cast<size_t>(n)][mesh.gamma1[j]];
  return tr;
}

inline double l2_sigma1_norm(const BoundaryTrace& trace) {
  return std::sqrt(integrate_sigma1(trace));
}

/// Discrete surrogate of the B_{1/2,1}(Gamma1) norm.
///
/// 1-D: Gamma1 is one point, the norm degenerates to |b|. 2-D: odd-reflect
/// the side values across the endpoints (where corners carry the Dirichlet
/// condition), expand in sin(n pi y) — a type-I discrete sine transform —
/// and weight the coefficients by (1 + (n pi)^2)^{1/4}. Exactly positively
/// homogeneous by linearity of the transform.
inline double besov_half_norm(const DampingField& b) {
  const DomainMesh& mesh = *b.mesh;
  if (mesh.dim == 1) return std::abs(b.values[0]);
  int m = mesh.ny;  // values live at y_j = j/m, j = 1..m-1
  constexpr double kPi = 3.14159265358979323846;
  double norm = 0;
  for (int n = 1; n < m; ++n) {
    double c = 0;
    for (int j = 1; j < m; ++j)
      c += b.values[j - 1] * std::sin(n * kPi * static_cast<double>(j) / m);
    c *= 2.0 / m;
    double xi = n * kPi;
    norm += std::pow(1.0 + xi * xi, 0.25) * std::abs(c);
  }
  return norm;
}

/// Time grid with the step halved and the sample count doubled, so that the
/// even samples of the fine grid land exactly on the coarse samples.
inline TimeGrid refine_time_grid(const TimeGrid& tg) {
  return TimeGrid{tg.tau, tg.tau / (2.0 * tg.n_steps), 2 * tg.n_steps, tg.cfl_factor};
}

/// Restriction of a trace computed on a 2x-refined mesh/time grid back onto
/// the coarse grids: every second time sample, every second gamma1 node. Used
/// to manufacture measured data that does not share the coarse solver's
/// discretization error.
inline BoundaryTrace restrict_to_coarse(const BoundaryTrace& fine, const DomainMesh& coarse_mesh,
                                        const TimeGrid& coarse_tg) {
  const DomainMesh& fm = *fine.mesh;
  if (fm.dim != coarse_mesh.dim || fm.nx != 2 * coarse_mesh.nx ||
      (fm.dim == 2 && fm.ny != 2 * coarse_mesh.ny))
    throw config_error("restrict_to_coarse: fine mesh is not a 2x refinement");
  if (fine.n_samples() - 1 != 2 * coarse_tg.n_steps)
    throw config_error("restrict_to_coarse: fine time grid is not a 2x refinement");
  BoundaryTrace out(coarse_mesh, coarse_tg);
  for (int n = 0; n <= coarse_tg.n_steps; ++n)
    for (size_t j = 0; j < coarse_mesh.gamma1.size(); ++j) {
      // gamma1 runs along x = 1 by increasing y in both meshes; coarse node
      // j sits at y = (j+1) h_c = (2j+2) h_f, the fine node 2j+1
      Eigen::Index jf = coarse_mesh.dim == 1 ? 0 : static_cast<Eigen::Index>(2 * j + 1);
      out.values(n, static_cast<Eigen::Index>(j)) = fine.values(2 * n, jf);
    }
  return out;
}

/// Adds i.i.d. uniform noise of amplitude level * max|trace| from a seeded
/// generator; level 0 returns the input bit-exactly.
inline BoundaryTrace add_noise(const BoundaryTrace& trace, double level, uint64_t seed) {
  if (level < 0) throw config_error("add_noise: level must be nonnegative");
  BoundaryTrace out = trace;
  if (level == 0.0) return out;
  double amp = level * trace.values.cwiseAbs().maxCoeff();
  std::mt19937_64 rng(seed);
  for (Eigen::Index n = 0; n < out.values.rows(); ++n)
    for (Eigen::Index j = 0; j < out.values.cols(); ++j)
      out.values(n, j) += amp * uniform_pm1(rng);
  return out;
}

}  // namespace dwinv
