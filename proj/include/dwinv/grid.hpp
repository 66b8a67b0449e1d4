#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <type_traits>
#include <vector>

#include "dwinv/util.hpp"

namespace dwinv {

enum class NodeClass : uint8_t { interior, gamma0, gamma1 };

/// Uniform tensor grid on [0,1] (dim 1) or [0,1]^2 (dim 2).
///
/// Boundary partition: gamma0 carries the homogeneous Dirichlet condition,
/// gamma1 the damped (Robin-in-time) condition. In 2-D gamma1 is the open
/// side {x=1}; the four corners belong to gamma0 so the damped condition
/// stays away from corner singularities.
///
/// Node ordering is lexicographic: id = iy*(nx+1) + ix, coordinates
/// (ix*hx, iy*hy). Immutable after construction.
struct DomainMesh {
  int dim = 1;
  int nx = 0;  // cells along x
  int ny = 0;  // cells along y (0 in 1-D)
  double hx = 0;
  double hy = 0;
  double h = 0;  // min(hx, hy); the spacing that governs the CFL bound
  std::vector<std::array<double, 2>> nodes;
  std::vector<NodeClass> node_class;
  std::vector<int> gamma0;  // sorted node ids
  std::vector<int> gamma1;  // sorted node ids
  std::vector<std::array<double, 2>> outward_normal;  // zero for interior nodes

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int node_id(int ix, int iy) const { return iy * (nx + 1) + ix; }
  bool is_boundary(int id) const { return node_class[id] != NodeClass::interior; }
};

inline DomainMesh build_interval_mesh(int n_cells) {
  if (n_cells < 2) throw config_error("build_interval_mesh: n_cells must be >= 2");
  DomainMesh m;
  m.dim = 1;
  m.nx = n_cells;
  m.ny = 0;
  m.hx = 1.0 / n_cells;
  m.hy = 0.0;
  m.h = m.hx;
  m.nodes.resize(n_cells + 1);
  m.node_class.assign(n_cells + 1, NodeClass::interior);
  m.outward_normal.assign(n_cells + 1, {0.0, 0.0});
  for (int i = 0; i <= n_cells; ++i) m.nodes[i] = {i * m.hx, 0.0};
  m.node_class[0] = NodeClass::gamma0;
  m.node_class[n_cells] = NodeClass::gamma1;
  m.gamma0 = {0};
  m.gamma1 = {n_cells};
  m.outward_normal[0] = {-1.0, 0.0};
  m.outward_normal[n_cells] = {1.0, 0.0};
  return m;
}

inline DomainMesh build_rectangle_mesh(int nx, int ny) {
  if (nx < 2 || ny < 2) throw config_error("build_rectangle_mesh: nx, ny must be >= 2");
  DomainMesh m;
  m.dim = 2;
  m.nx = nx;
  m.ny = ny;
  m.hx = 1.0 / nx;
  m.hy = 1.0 / ny;
  m.h = std::min(m.hx, m.hy);
  int n = (nx + 1) * (ny + 1);
  m.nodes.resize(n);
  m.node_class.assign(n, NodeClass::interior);
  m.outward_normal.assign(n, {0.0, 0.0});
  for (int iy = 0; iy <= ny; ++iy)
    for (int ix = 0; ix <= nx; ++ix) m.nodes[m.node_id(ix, iy)] = {ix * m.hx, iy * m.hy};
  for (int iy = 0; iy <= ny; ++iy) {
    for (int ix = 0; ix <= nx; ++ix) {
      bool bx = (ix == 0 || ix == nx);
      bool by = (iy == 0 || iy == ny);
      if (!bx && !by) continue;
      int id = m.node_id(ix, iy);
      if (ix == nx && !by) {
        m.node_class[id] = NodeClass::gamma1;
        m.gamma1.push_back(id);
        m.outward_normal[id] = {1.0, 0.0};
      } else {
        m.node_class[id] = NodeClass::gamma0;
        m.gamma0.push_back(id);
        double nxv = (ix == 0) ? -1.0 : (ix == nx ? 1.0 : 0.0);
        double nyv = (iy == 0) ? -1.0 : (iy == ny ? 1.0 : 0.0);
        double len = std::sqrt(nxv * nxv + nyv * nyv);
        m.outward_normal[id] = {nxv / len, nyv / len};
      }
    }
  }
  return m;
}

/// Uniform time grid with n_steps * dt = tau and dt <= cfl_factor * h.
struct TimeGrid {
  double tau = 0;
  double dt = 0;
  int n_steps = 0;
  double cfl_factor = 0;
};

inline double default_cfl_factor(int dim) { return dim == 1 ? 0.9 : 0.6; }

inline TimeGrid make_time_grid(double tau, const DomainMesh& mesh, double cfl_factor = 0) {
  if (tau <= 0) throw config_error("make_time_grid: tau must be positive");
  if (cfl_factor == 0) cfl_factor = default_cfl_factor(mesh.dim);
  if (cfl_factor <= 0 || cfl_factor > 1)
    throw config_error("make_time_grid: cfl_factor must lie in (0, 1]");
  TimeGrid tg;
  tg.tau = tau;
  tg.cfl_factor = cfl_factor;
  tg.n_steps = static_cast<int>(std::ceil(tau / (cfl_factor * mesh.h) - 1e-12));
  if (tg.n_steps < 2) tg.n_steps = 2;
  tg.dt = tau / tg.n_steps;
  return tg;
}

/// Scalar field sampled at every mesh node.
struct GridFunction {
  const DomainMesh* mesh = nullptr;
  Eigen::VectorXd values;

  GridFunction() = default;
  explicit GridFunction(const DomainMesh& m)
      : mesh(&m), values(Eigen::VectorXd::Zero(m.n_nodes())) {}
  GridFunction(const DomainMesh& m, Eigen::VectorXd v) : mesh(&m), values(std::move(v)) {
    if (values.size() != m.n_nodes())
      throw config_error("GridFunction: value count does not match mesh");
  }

  double& operator[](int id) { return values[id]; }
  double operator[](int id) const { return values[id]; }
};

template <class F>
GridFunction sample(const DomainMesh& mesh, F&& f) {
  GridFunction g(mesh);
  for (int id = 0; id < mesh.n_nodes(); ++id) {
    const auto& p = mesh.nodes[id];
    if constexpr (std::is_invocable_v<F, double, double>)
      g.values[id] = f(p[0], p[1]);
    else
      g.values[id] = f(p[0]);
  }
  return g;
}

/// Trapezoid quadrature weights over Omega, one per node.
inline Eigen::VectorXd omega_weights(const DomainMesh& mesh) {
  Eigen::VectorXd w(mesh.n_nodes());
  if (mesh.dim == 1) {
    w.setConstant(mesh.hx);
    w[0] *= 0.5;
    w[mesh.nx] *= 0.5;
    return w;
  }
  auto wx = [&](int ix) { return (ix == 0 || ix == mesh.nx) ? 0.5 * mesh.hx : mesh.hx; };
  auto wy = [&](int iy) { return (iy == 0 || iy == mesh.ny) ? 0.5 * mesh.hy : mesh.hy; };
  for (int iy = 0; iy <= mesh.ny; ++iy)
    for (int ix = 0; ix <= mesh.nx; ++ix) w[mesh.node_id(ix, iy)] = wx(ix) * wy(iy);
  return w;
}

inline double integrate_omega(const GridFunction& f) {
  return omega_weights(*f.mesh).dot(f.values);
}

inline double inner_l2(const GridFunction& f, const GridFunction& g) {
  if (f.mesh != g.mesh) throw config_error("inner_l2: mesh mismatch");
  return (omega_weights(*f.mesh).array() * f.values.array() * g.values.array()).sum();
}

inline double norm_l2(const GridFunction& f) { return std::sqrt(inner_l2(f, f)); }

/// Quadrature weights on Gamma1, one per gamma1 node, in gamma1 order.
///
/// 1-D: Gamma1 is a single point; its weight is 1 (point evaluation).
/// 2-D: trapezoid over the full side {x=1}; the corner contributions are
/// dropped along with the corner nodes, so each gamma1 node weighs hy.
inline Eigen::VectorXd gamma1_weights(const DomainMesh& mesh) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(mesh.gamma1.size()));
  if (mesh.dim == 1) {
    w.setConstant(1.0);
  } else {
    w.setConstant(mesh.hy);
  }
  return w;
}

inline double integrate_gamma1(const Eigen::VectorXd& f_on_gamma1, const DomainMesh& mesh) {
  if (f_on_gamma1.size() != static_cast<Eigen::Index>(mesh.gamma1.size()))
    throw config_error("integrate_gamma1: value count does not match gamma1");
  return gamma1_weights(mesh).dot(f_on_gamma1);
}

/// Restrict a grid function to the gamma1 nodes, in gamma1 order.
inline Eigen::VectorXd restrict_gamma1(const GridFunction& f) {
  const auto& g1 = f.mesh->gamma1;
  Eigen::VectorXd out(static_cast<Eigen::Index>(g1.size()));
  for (size_t k = 0; k < g1.size(); ++k) out[static_cast<Eigen::Index>(k)] = f.values[g1[k]];
  return out;
}

}  // namespace dwinv
