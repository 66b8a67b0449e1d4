#pragma once

#include <Eigen/Dense>

#include "dwinv/grid.hpp"
#include "dwinv/util.hpp"

namespace dwinv {

/// Time series of a scalar field on the gamma1 nodes over [0, tau].
/// Row n holds the sample at t_n = n*dt; column j corresponds to
/// mesh.gamma1[j]. Sample count is tg.n_steps + 1.
struct BoundaryTrace {
  const DomainMesh* mesh = nullptr;
  TimeGrid tg;
  Eigen::MatrixXd values;  // (n_steps+1) x |gamma1|

  BoundaryTrace() = default;
  BoundaryTrace(const DomainMesh& m, const TimeGrid& t)
      : mesh(&m),
        tg(t),
        values(Eigen::MatrixXd::Zero(t.n_steps + 1,
                                     static_cast<Eigen::Index>(m.gamma1.size()))) {}

  int n_samples() const { return static_cast<int>(values.rows()); }
  int n_nodes() const { return static_cast<int>(values.cols()); }
  double t(int n) const { return n * tg.dt; }

  void check_compatible(const BoundaryTrace& o, const char* who) const {
    if (mesh != o.mesh || values.rows() != o.values.rows() ||
        values.cols() != o.values.cols())
      throw config_error(std::string(who) + ": incompatible traces");
  }
};

inline BoundaryTrace operator+(const BoundaryTrace& a, const BoundaryTrace& b) {
  a.check_compatible(b, "trace sum");
  BoundaryTrace r = a;
  r.values += b.values;
  return r;
}

inline BoundaryTrace operator-(const BoundaryTrace& a, const BoundaryTrace& b) {
  a.check_compatible(b, "trace difference");
  BoundaryTrace r = a;
  r.values -= b.values;
  return r;
}

inline BoundaryTrace operator*(double s, const BoundaryTrace& a) {
  BoundaryTrace r = a;
  r.values *= s;
  return r;
}

/// g(y, t) sampled on gamma1 nodes and the time grid. In 1-D the callable
/// receives (x=1, t); in 2-D (y-coordinate of the node, t).
template <class F>
BoundaryTrace sample_trace(const DomainMesh& mesh, const TimeGrid& tg, F&& g) {
  BoundaryTrace tr(mesh, tg);
  for (int n = 0; n <= tg.n_steps; ++n) {
    double t = n * tg.dt;
    for (size_t j = 0; j < mesh.gamma1.size(); ++j) {
      const auto& p = mesh.nodes[mesh.gamma1[j]];
      double coord = mesh.dim == 1 ? p[0] : p[1];
      tr.values(n, static_cast<Eigen::Index>(j)) = g(coord, t);
    }
  }
  return tr;
}

inline Eigen::VectorXd time_weights(const TimeGrid& tg) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(tg.n_steps + 1, tg.dt);
  w[0] *= 0.5;
  w[tg.n_steps] *= 0.5;
  return w;
}

/// Squared L2(Sigma1) norm: trapezoid in time and over Gamma1 of trace^2.
inline double integrate_sigma1(const BoundaryTrace& trace) {
  if (trace.n_samples() < 2) throw config_error("integrate_sigma1: need >= 2 time samples");
  Eigen::VectorXd wt = time_weights(trace.tg);
  Eigen::VectorXd ws = gamma1_weights(*trace.mesh);
  return wt.dot((trace.values.array().square().matrix()) * ws);
}

}  // namespace dwinv
