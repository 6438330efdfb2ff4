#include "smpc/model.hpp"

#include <cmath>
#include <stdexcept>

namespace smpc {

bool is_symmetric(const MatrixXd& M, double rel_tol) {
  if (M.rows() != M.cols()) return false;
  double scale = M.cwiseAbs().maxCoeff();
  if (scale == 0.0) return true;
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

LinearSystem::LinearSystem(MatrixXd A_, MatrixXd B_, MatrixXd Gamma_w_)
    : A(std::move(A_)), B(std::move(B_)), Gamma_w(std::move(Gamma_w_)) {
  if (A.rows() != A.cols()) throw std::invalid_argument("A must be square");
  if (B.rows() != A.rows()) throw std::invalid_argument("B row count must match A");
  if (Gamma_w.rows() != A.rows() || Gamma_w.cols() != A.rows())
    throw std::invalid_argument("Gamma_w must be n x n");
  if (!is_symmetric(Gamma_w)) throw std::invalid_argument("Gamma_w must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Gamma_w, Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues().minCoeff();
  double hi = es.eigenvalues().maxCoeff();
  if (lo < -1e-12 * std::max(hi, 1.0))
    throw std::invalid_argument("Gamma_w must be positive semidefinite");
}

Polytope::Polytope(MatrixXd H_, VectorXd h_) : H(std::move(H_)), h(std::move(h_)) {
  if (H.rows() != h.size()) throw std::invalid_argument("H and h row counts differ");
  if (H.rows() == 0) throw std::invalid_argument("polytope needs at least one row");
  for (int i = 0; i < H.rows(); ++i) {
    if (!(h(i) > 0.0))
      throw std::invalid_argument("polytope must contain the origin strictly (h > 0)");
    if (H.row(i).norm() == 0.0)
      throw std::invalid_argument("polytope has a zero row");
  }
}

Ellipsoid::Ellipsoid(MatrixXd W_, double r_) : W(std::move(W_)), r(r_) {
  if (!is_symmetric(W)) throw std::invalid_argument("shape matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(W, Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues().minCoeff();
  double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 1e-12 * std::max(hi, 0.0)))
    throw std::invalid_argument("shape matrix must be positive definite");
  if (!(r >= 0.0)) throw std::invalid_argument("radius must be nonnegative");
}

double shape_norm(const MatrixXd& W, const VectorXd& x) {
  if (x.size() != W.rows()) throw std::invalid_argument("dimension mismatch");
  VectorXd y = W.ldlt().solve(x);
  double q = x.dot(y);
  return q > 0.0 ? std::sqrt(q) : 0.0;
}

bool ellipsoid_contains(const Ellipsoid& e, const VectorXd& x) {
  VectorXd y = e.W.ldlt().solve(x);
  double q = x.dot(y);
  return q <= e.r * e.r * (1.0 + 1e-9);
}

double inscribed_radius(const MatrixXd& W, const Polytope& p) {
  if (p.dim() != W.rows()) throw std::invalid_argument("dimension mismatch");
  double r = std::numeric_limits<double>::infinity();
  for (int i = 0; i < p.rows(); ++i) {
    VectorXd hi = p.H.row(i).transpose();
    double denom = std::sqrt(hi.dot(W * hi));
    if (denom == 0.0) continue;
    r = std::min(r, p.h(i) / denom);
  }
  return r;
}

double same_shape_difference(double r1, double r2) {
  if (r1 < 0.0 || r2 < 0.0) throw std::invalid_argument("radii must be nonnegative");
  return std::max(r1 - r2, 0.0);
}

VectorXd simulate_step(const LinearSystem& sys, const VectorXd& x,
                       const VectorXd& u, const VectorXd& w) {
  if (x.size() != sys.n() || u.size() != sys.m() || w.size() != sys.n())
    throw std::invalid_argument("dimension mismatch");
  return sys.A * x + sys.B * u + w;
}

MatrixXd inv_sqrt(const MatrixXd& W) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(W);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eigendecomposition failed");
  VectorXd ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0)
    throw std::invalid_argument("matrix must be positive definite");
  VectorXd d = ev.array().rsqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace smpc
