#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <memory>
#include <tuple>
#include <vector>

#include "dwinv/boundary_trace.hpp"
#include "dwinv/grid.hpp"
#include "dwinv/util.hpp"

namespace dwinv {

/// Weighted symmetric form of the mixed Dirichlet-Neumann Laplacian.
///
/// Unknowns are the non-Dirichlet nodes (interior + gamma1). Dirichlet rows
/// are eliminated; the homogeneous Neumann condition on gamma1 enters through
/// ghost-node reflection. S = -(W * Delta_h) restricted to the unknowns,
/// where W holds the trapezoid weights, so S is symmetric positive definite
/// and the generalized problem S phi = lambda W phi is the discrete
/// eigenproblem of -Delta with these boundary conditions.
struct MixedLaplacian {
  const DomainMesh* mesh = nullptr;
  std::vector<int> dof_of_node;  // -1 on gamma0
  std::vector<int> node_of_dof;
  Eigen::SparseMatrix<double> S;
  Eigen::VectorXd w;  // trapezoid weight per dof

  int n_dofs() const { return static_cast<int>(node_of_dof.size()); }

  const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& factorization() const {
    if (!ldlt_) {
      ldlt_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
      ldlt_->compute(S);
      if (ldlt_->info() != Eigen::Success)
        throw numerical_error("mixed Laplacian factorization failed");
    }
    return *ldlt_;
  }

  Eigen::VectorXd to_dofs(const Eigen::VectorXd& full) const {
    Eigen::VectorXd d(n_dofs());
    for (int p = 0; p < n_dofs(); ++p) d[p] = full[node_of_dof[p]];
    return d;
  }

  Eigen::VectorXd to_full(const Eigen::VectorXd& dofs) const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh->n_nodes());
    for (int p = 0; p < n_dofs(); ++p) f[node_of_dof[p]] = dofs[p];
    return f;
  }

 private:
  mutable std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

inline MixedLaplacian assemble_mixed_laplacian(const DomainMesh& mesh) {
  MixedLaplacian L;
  L.mesh = &mesh;
  L.dof_of_node.assign(mesh.n_nodes(), -1);
  for (int id = 0; id < mesh.n_nodes(); ++id) {
    if (mesh.node_class[id] == NodeClass::gamma0) continue;
    L.dof_of_node[id] = static_cast<int>(L.node_of_dof.size());
    L.node_of_dof.push_back(id);
  }
  int n = L.n_dofs();
  Eigen::VectorXd wfull = omega_weights(mesh);
  L.w.resize(n);
  for (int p = 0; p < n; ++p) L.w[p] = wfull[L.node_of_dof[p]];

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(n) * (mesh.dim == 1 ? 3 : 5));
  double ax = 1.0 / (mesh.hx * mesh.hx);
  double ay = mesh.dim == 2 ? 1.0 / (mesh.hy * mesh.hy) : 0.0;
  auto add = [&](int p, int q, double v) { trip.emplace_back(p, q, v); };

  for (int p = 0; p < n; ++p) {
    int id = L.node_of_dof[p];
    double wp = L.w[p];
    int ix, iy;
    if (mesh.dim == 1) {
      ix = id;
      iy = 0;
    } else {
      ix = id % (mesh.nx + 1);
      iy = id / (mesh.nx + 1);
    }
    bool on_gamma1 = mesh.node_class[id] == NodeClass::gamma1;
    // x direction
    add(p, p, 2.0 * wp * ax);
    int west = mesh.dim == 1 ? id - 1 : mesh.node_id(ix - 1, iy);
    if (on_gamma1) {
      add(p, L.dof_of_node[west], -2.0 * wp * ax);
    } else {
      if (L.dof_of_node[west] >= 0) add(p, L.dof_of_node[west], -wp * ax);
      int east = mesh.dim == 1 ? id + 1 : mesh.node_id(ix + 1, iy);
      if (L.dof_of_node[east] >= 0) add(p, L.dof_of_node[east], -wp * ax);
    }
    // y direction
    if (mesh.dim == 2) {
      add(p, p, 2.0 * wp * ay);
      int south = mesh.node_id(ix, iy - 1);
      int north = mesh.node_id(ix, iy + 1);
      if (L.dof_of_node[south] >= 0) add(p, L.dof_of_node[south], -wp * ay);
      if (L.dof_of_node[north] >= 0) add(p, L.dof_of_node[north], -wp * ay);
    }
  }
  L.S.resize(n, n);
  L.S.setFromTriplets(trip.begin(), trip.end());
  L.S.makeCompressed();
  return L;
}

/// First K eigenpairs (lambda_k, phi_k) of -Delta_h with the mixed boundary
/// conditions, lambda ascending, phi_k vanishing on gamma0 and orthonormal in
/// the trapezoid-weighted L2 inner product.
struct EigenBasis {
  const DomainMesh* mesh = nullptr;
  Eigen::VectorXd lambda;
  Eigen::MatrixXd Phi;      // n_nodes x K
  Eigen::VectorXd w_omega;  // trapezoid weights, cached for projections

  int count() const { return static_cast<int>(lambda.size()); }

  GridFunction phi(int k) const {
    if (k < 0 || k >= count()) throw config_error("EigenBasis::phi: index out of range");
    return GridFunction(*mesh, Phi.col(k));
  }

  Eigen::VectorXd project(const Eigen::VectorXd& full) const {
    return Phi.transpose() * (w_omega.array() * full.array()).matrix();
  }

  Eigen::VectorXd synthesize(const Eigen::VectorXd& coeffs) const { return Phi * coeffs; }
};

namespace detail {

struct Subproblem1D {
  Eigen::VectorXd lambda;
  Eigen::MatrixXd vecs;  // n_dofs x n_dofs, W-orthonormal columns
};

inline void canonicalize_sign(Eigen::MatrixXd& vecs) {
  for (Eigen::Index k = 0; k < vecs.cols(); ++k) {
    Eigen::Index i = 0;
    while (i < vecs.rows() && vecs(i, k) == 0.0) ++i;
    if (i < vecs.rows() && vecs(i, k) < 0.0) vecs.col(k) = -vecs.col(k);
  }
}

/// -u'' on (0,1), u(0)=0, u'(1)=0 via ghost reflection; dofs x_1..x_n.
inline Subproblem1D solve_mixed_1d(int n_cells, double h) {
  int n = n_cells;
  Eigen::VectorXd diag = Eigen::VectorXd::Constant(n, 2.0 / (h * h));
  Eigen::VectorXd sub = Eigen::VectorXd::Constant(n - 1, -1.0 / (h * h));
  sub[n - 2] = -std::sqrt(2.0) / (h * h);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success)
    throw numerical_error("1-D mixed eigensolve did not converge");
  Subproblem1D out;
  out.lambda = es.eigenvalues();
  // back-transform T = W^{-1/2} S W^{-1/2}: phi = W^{-1/2} y
  Eigen::VectorXd winv = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(h));
  winv[n - 1] = std::sqrt(2.0 / h);
  out.vecs = winv.asDiagonal() * es.eigenvectors();
  canonicalize_sign(out.vecs);
  return out;
}

/// -u'' on (0,1), u(0)=u(1)=0; dofs x_1..x_{n-1}.
inline Subproblem1D solve_dirichlet_1d(int n_cells, double h) {
  int n = n_cells - 1;
  Eigen::VectorXd diag = Eigen::VectorXd::Constant(n, 2.0 / (h * h));
  Eigen::VectorXd sub = Eigen::VectorXd::Constant(n - 1, -1.0 / (h * h));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success)
    throw numerical_error("1-D Dirichlet eigensolve did not converge");
  Subproblem1D out;
  out.lambda = es.eigenvalues();
  out.vecs = es.eigenvectors() / std::sqrt(h);
  canonicalize_sign(out.vecs);
  return out;
}

}  // namespace detail

/// 1-D: tridiagonal symmetric solve. 2-D: the operator separates on the
/// tensor grid, so eigenpairs are products of the two 1-D subproblems
/// (mixed in x, Dirichlet in y); this is exact for the assembled 5-point
/// operator, not an approximation.
inline EigenBasis eigen_decompose(const DomainMesh& mesh, int K) {
  EigenBasis basis;
  basis.mesh = &mesh;
  basis.w_omega = omega_weights(mesh);
  if (mesh.dim == 1) {
    if (K < 1 || K > mesh.nx)
      throw config_error(strfmt("eigen_decompose: K must lie in [1, %d]", mesh.nx));
    auto sp = detail::solve_mixed_1d(mesh.nx, mesh.hx);
    basis.lambda = sp.lambda.head(K);
    basis.Phi = Eigen::MatrixXd::Zero(mesh.n_nodes(), K);
    basis.Phi.bottomRows(mesh.nx) = sp.vecs.leftCols(K);
    return basis;
  }
  int max_k = mesh.nx * (mesh.ny - 1);
  if (K < 1 || K > max_k)
    throw config_error(strfmt("eigen_decompose: K must lie in [1, %d]", max_k));
  auto spx = detail::solve_mixed_1d(mesh.nx, mesh.hx);
  auto spy = detail::solve_dirichlet_1d(mesh.ny, mesh.hy);
  std::vector<std::tuple<double, int, int>> order;
  order.reserve(static_cast<size_t>(max_k));
  for (int m = 0; m < mesh.nx; ++m)
    for (int n = 0; n < mesh.ny - 1; ++n)
      order.emplace_back(spx.lambda[m] + spy.lambda[n], m, n);
  std::sort(order.begin(), order.end());
  basis.lambda.resize(K);
  basis.Phi = Eigen::MatrixXd::Zero(mesh.n_nodes(), K);
  for (int k = 0; k < K; ++k) {
    auto [lam, m, n] = order[static_cast<size_t>(k)];
    basis.lambda[k] = lam;
    for (int iy = 1; iy < mesh.ny; ++iy)
      for (int ix = 1; ix <= mesh.nx; ++ix)
        basis.Phi(mesh.node_id(ix, iy), k) = spx.vecs(ix - 1, m) * spy.vecs(iy - 1, n);
  }
  return basis;
}

/// Dense reference path on the assembled operator; O(n^3), for cross-checks
/// and small meshes.
inline EigenBasis eigen_decompose_dense(const DomainMesh& mesh, int K) {
  MixedLaplacian L = assemble_mixed_laplacian(mesh);
  int n = L.n_dofs();
  if (K < 1 || K > n) throw config_error(strfmt("eigen_decompose_dense: K must lie in [1, %d]", n));
  Eigen::VectorXd dinv = L.w.array().rsqrt();
  Eigen::MatrixXd T = dinv.asDiagonal() * Eigen::MatrixXd(L.S) * dinv.asDiagonal();
  T = 0.5 * (T + T.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  if (es.info() != Eigen::Success) throw numerical_error("dense eigensolve did not converge");
  Eigen::MatrixXd vecs = dinv.asDiagonal() * es.eigenvectors().leftCols(K);
  detail::canonicalize_sign(vecs);
  EigenBasis basis;
  basis.mesh = &mesh;
  basis.w_omega = omega_weights(mesh);
  basis.lambda = es.eigenvalues().head(K);
  basis.Phi = Eigen::MatrixXd::Zero(mesh.n_nodes(), K);
  for (int p = 0; p < n; ++p) basis.Phi.row(L.node_of_dof[p]) = vecs.row(p);
  return basis;
}

/// Solution of Delta w = 0, w|gamma0 = 0, dnu w|gamma1 = datum.
struct HarmonicExtension {
  Eigen::VectorXd datum;  // one value per gamma1 node
  GridFunction w;
  double residual = 0;  // scaled linear-system residual, sup norm
};

inline Eigen::VectorXd neumann_load(const MixedLaplacian& L, const Eigen::VectorXd& datum) {
  const DomainMesh& mesh = *L.mesh;
  if (datum.size() != static_cast<Eigen::Index>(mesh.gamma1.size()))
    throw config_error("neumann_load: datum size does not match gamma1");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(L.n_dofs());
  for (size_t j = 0; j < mesh.gamma1.size(); ++j) {
    int p = L.dof_of_node[mesh.gamma1[j]];
    rhs[p] = 2.0 * L.w[p] * datum[static_cast<Eigen::Index>(j)] / mesh.hx;
  }
  return rhs;
}

inline HarmonicExtension harmonic_extend(const MixedLaplacian& L, const Eigen::VectorXd& datum) {
  Eigen::VectorXd rhs = neumann_load(L, datum);
  Eigen::VectorXd sol = L.factorization().solve(rhs);
  if (L.factorization().info() != Eigen::Success)
    throw numerical_error("harmonic_extend: linear solve failed");
  HarmonicExtension ext;
  ext.datum = datum;
  ext.w = GridFunction(*L.mesh, L.to_full(sol));
  double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
  ext.residual = (L.S * sol - rhs).lpNorm<Eigen::Infinity>() / scale;
  return ext;
}

inline HarmonicExtension harmonic_extend(const DomainMesh& mesh, const Eigen::VectorXd& datum) {
  MixedLaplacian L = assemble_mixed_laplacian(mesh);
  return harmonic_extend(L, datum);
}

/// Lift of a time-dependent Neumann datum: G(t_n) = harmonic extension of
/// g(., t_n), with G'' by second differences in t and G'(0) one-sided.
struct TimeDependentExtension {
  const DomainMesh* mesh = nullptr;
  TimeGrid tg;
  std::vector<Eigen::VectorXd> G;    // full-node vectors, n_steps+1 samples
  std::vector<Eigen::VectorXd> Gtt;  // same shape
  Eigen::VectorXd Gdot0;
  bool zero = false;  // datum identically zero; all fields are zero vectors
};

inline TimeDependentExtension extend_time_dependent(const DomainMesh& mesh,
                                                    const BoundaryTrace& g) {
  if (g.mesh != &mesh) throw config_error("extend_time_dependent: trace mesh mismatch");
  int N = g.tg.n_steps;
  TimeDependentExtension ext;
  ext.mesh = &mesh;
  ext.tg = g.tg;
  ext.zero = g.values.cwiseAbs().maxCoeff() == 0.0;
  ext.G.assign(static_cast<size_t>(N) + 1, Eigen::VectorXd::Zero(mesh.n_nodes()));
  ext.Gtt.assign(static_cast<size_t>(N) + 1, Eigen::VectorXd::Zero(mesh.n_nodes()));
  ext.Gdot0 = Eigen::VectorXd::Zero(mesh.n_nodes());
  if (ext.zero) return ext;

  MixedLaplacian L = assemble_mixed_laplacian(mesh);
  L.factorization();
  for (int n = 0; n <= N; ++n) {
    Eigen::VectorXd datum = g.values.row(n).transpose();
    ext.G[static_cast<size_t>(n)] = L.to_full(L.factorization().solve(neumann_load(L, datum)));
  }
  double dt2 = g.tg.dt * g.tg.dt;
  for (int n = 1; n < N; ++n)
    ext.Gtt[static_cast<size_t>(n)] =
        (ext.G[static_cast<size_t>(n) + 1] - 2.0 * ext.G[static_cast<size_t>(n)] +
         ext.G[static_cast<size_t>(n) - 1]) /
        dt2;
  if (N >= 3) {
    ext.Gtt[0] = (2.0 * ext.G[0] - 5.0 * ext.G[1] + 4.0 * ext.G[2] - ext.G[3]) / dt2;
    ext.Gtt[static_cast<size_t>(N)] =
        (2.0 * ext.G[static_cast<size_t>(N)] - 5.0 * ext.G[static_cast<size_t>(N) - 1] +
         4.0 * ext.G[static_cast<size_t>(N) - 2] - ext.G[static_cast<size_t>(N) - 3]) /
        dt2;
  } else {
    ext.Gtt[0] = (ext.G[0] - 2.0 * ext.G[1] + ext.G[2]) / dt2;
    ext.Gtt[static_cast<size_t>(N)] = ext.Gtt[0];
  }
  ext.Gdot0 = (-3.0 * ext.G[0] + 4.0 * ext.G[1] - ext.G[2]) / (2.0 * g.tg.dt);
  return ext;
}

struct VanishingSet {
  double fraction = 0;
  bool degenerate = false;  // field identically zero on gamma1
};

/// Fraction of gamma1 nodes where |phi| < eps * max over gamma1 of |phi|.
inline VanishingSet vanishing_set_fraction(const GridFunction& phi, double eps) {
  if (eps <= 0) throw config_error("vanishing_set_fraction: eps must be positive");
  const DomainMesh& mesh = *phi.mesh;
  double mx = 0;
  for (int id : mesh.gamma1) mx = std::max(mx, std::abs(phi.values[id]));
  if (mx == 0.0) return {1.0, true};
  int count = 0;
  for (int id : mesh.gamma1)
    if (std::abs(phi.values[id]) < eps * mx) ++count;
  return {static_cast<double>(count) / static_cast<double>(mesh.gamma1.size()), false};
}

}  // namespace dwinv
