#pragma once

#include <Eigen/Dense>

namespace smpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Discrete-time linear plant x+ = A x + B u + w with w ~ N(0, Gamma_w).
struct LinearSystem {
  MatrixXd A;
  MatrixXd B;
  MatrixXd Gamma_w;

  LinearSystem(MatrixXd A_, MatrixXd B_, MatrixXd Gamma_w_);

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
};

// Origin-containing polyhedron { x : H x <= h } with h > 0 elementwise.
struct Polytope {
  MatrixXd H;
  VectorXd h;

  Polytope(MatrixXd H_, VectorXd h_);

  int rows() const { return static_cast<int>(H.rows()); }
  int dim() const { return static_cast<int>(H.cols()); }
};

// Ellipsoid { x : x' W^{-1} x <= r^2 } described by its shape matrix W (symmetric
// positive definite) and radius r >= 0.
struct Ellipsoid {
  MatrixXd W;
  double r;

  Ellipsoid(MatrixXd W_, double r_);
};

// Membership with a small relative slack so boundary points do not flap:
// x' W^{-1} x <= r^2 (1 + 1e-9). Uses a linear solve, never an explicit inverse.
bool ellipsoid_contains(const Ellipsoid& e, const VectorXd& x);

// Weighted norm ||x||_W = sqrt(x' W^{-1} x).
double shape_norm(const MatrixXd& W, const VectorXd& x);

// Largest r such that E(W, r) fits inside the polytope:
// r = min_i h_i / sqrt(H_i W H_i').
double inscribed_radius(const MatrixXd& W, const Polytope& p);

// For two ellipsoids sharing a shape matrix, the Pontryagin difference
// E(W, r1) - E(W, r2) is E(W, r1 - r2); clamps at zero when r2 > r1 would
// leave nothing. Negative inputs are rejected.
double same_shape_difference(double r1, double r2);

// One step of the plant dynamics.
VectorXd simulate_step(const LinearSystem& sys, const VectorXd& x,
                       const VectorXd& u, const VectorXd& w);

// Symmetric inverse square root of a positive definite matrix.
MatrixXd inv_sqrt(const MatrixXd& W);

bool is_symmetric(const MatrixXd& M, double rel_tol = 1e-9);

}  // namespace smpc
