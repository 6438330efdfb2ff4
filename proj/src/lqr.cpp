#include "smpc/lqr.hpp"

#include <stdexcept>

namespace smpc {

namespace {

void require_psd(const MatrixXd& M, const char* name, bool strict) {
  if (!is_symmetric(M)) throw std::invalid_argument(std::string(name) + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues().minCoeff();
  double hi = std::max(es.eigenvalues().maxCoeff(), 1.0);
  if (strict ? !(lo > 1e-12 * hi) : (lo < -1e-12 * hi))
    throw std::invalid_argument(std::string(name) +
                                (strict ? " must be positive definite"
                                        : " must be positive semidefinite"));
}

}  // namespace

LqrResult solve_lqr(const LinearSystem& sys, const MatrixXd& Q, const MatrixXd& R) {
  const int n = sys.n();
  const int m = sys.m();
  if (Q.rows() != n || Q.cols() != n) throw std::invalid_argument("Q must be n x n");
  if (R.rows() != m || R.cols() != m) throw std::invalid_argument("R must be m x m");
  require_psd(Q, "Q", false);
  require_psd(R, "R", true);

  const MatrixXd& A = sys.A;
  const MatrixXd& B = sys.B;
  MatrixXd P = Q;
  bool converged = false;
  for (int it = 0; it < 10000; ++it) {
    MatrixXd S = R + B.transpose() * P * B;
    MatrixXd Pn = Q + A.transpose() * P * A -
                  A.transpose() * P * B * S.ldlt().solve(B.transpose() * P * A);
    Pn = 0.5 * (Pn + Pn.transpose());
    double num = (Pn - P).norm();
    double den = std::max(Pn.norm(), 1e-300);
    P = Pn;
    if (num <= 1e-12 * den) {
      converged = true;
      break;
    }
    if (!P.allFinite()) throw std::runtime_error("Riccati iteration diverged");
  }
  if (!converged) throw std::runtime_error("Riccati iteration did not converge");

  LqrResult out;
  out.P = P;
  MatrixXd S = R + B.transpose() * P * B;
  out.K = -S.ldlt().solve(B.transpose() * P * A);
  out.A_K = A + B * out.K;
  if (spectral_radius(out.A_K) >= 1.0)
    throw std::runtime_error("LQR closed loop is not stable; check stabilizability");
  return out;
}

double spectral_radius(const MatrixXd& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("matrix must be square");
  if (M.rows() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace smpc
