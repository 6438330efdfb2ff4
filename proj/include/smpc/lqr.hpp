#pragma once

#include "smpc/model.hpp"

namespace smpc {

struct LqrResult {
  MatrixXd K;    // u = K x, stabilizing
  MatrixXd P;    // stationary Riccati solution
  MatrixXd A_K;  // closed loop A + B K
};

// Infinite-horizon discrete LQR. Iterates the Riccati recursion from P = Q
// to a fixed point (relative Frobenius tolerance 1e-12, at most 10000 steps),
// then K = -(R + B'PB)^{-1} B'PA. Throws if Q or R fail their definiteness
// requirements or the iteration diverges.
LqrResult solve_lqr(const LinearSystem& sys, const MatrixXd& Q, const MatrixXd& R);

double spectral_radius(const MatrixXd& M);

}  // namespace smpc
