#pragma once

#include <utility>
#include <vector>

#include "smpc/offline.hpp"
#include "smpc/socp.hpp"

namespace smpc {

// First-input handling: A leaves v_0 free, B enforces H_u v_0 <= h_u,
// C scales the bound with the relaxation, H_u v_0 <= gamma_u h_u.
enum class Strategy { A, B, C };

// z_l = F[l] x + G[l] v with v the stacked input sequence; F[l] = A^l.
struct CondensedDynamics {
  std::vector<MatrixXd> F;  // l = 0..N, each n x n
  std::vector<MatrixXd> G;  // l = 0..N, each n x (N m)
};

CondensedDynamics condense(const LinearSystem& sys, int N);

struct OcpSolution {
  MatrixXd z;  // (N+1) x n nominal states, row l
  MatrixXd v;  // N x m nominal inputs, row l
  double gamma_x = 1.0;
  double gamma_u = 1.0;
  double t = 0.0;       // epigraph value, max(gamma_x - 1, gamma_u - 1)
  double J_p = 0.0;     // quadratic tracking cost
  double J_total = 0.0; // J_p + eta * t
  SolveStatus status = SolveStatus::iteration_limit;
  Strategy strategy = Strategy::A;  // meaningful for the relaxed controller only
  KktResiduals kkt;
  int newton_steps = 0;
};

// Assemble the relaxed OCP as a conic program over y = (v, gamma_x, gamma_u, t):
// quadratic tracking cost plus eta * t; per-step cones
//   ||W_x^{-1/2} z_l|| <= gamma_x r_x - rho(1 - lambda^l),   l = 1..N-1
//   ||W_u^{-1/2} v_l|| <= gamma_u r_u - rho(1 - lambda^l),   l = 1..N-1
// two terminal cones on z_N (shape W_x, radii gamma_x r_x and gamma_u r_u,
// both tightened by rho(1 - lambda^N)); linear rows gamma >= 1, t >= gamma - 1,
// t >= 0, plus the strategy's v_0 rows. Refuses structurally empty designs.
ConicProblem build_ocp(const DesignArtifacts& d, const VectorXd& x, Strategy s);

SolverSettings ocp_solver_settings();

// Build, warm-start, and solve; unpacks the trajectory and costs.
OcpSolution solve_ocp(const DesignArtifacts& d, const VectorXd& x, Strategy s,
                      const SolverSettings& st = ocp_solver_settings());

// One controller evaluation: u_k is the first optimal input block. Throws on
// any non-optimal solver exit, with status and residuals in the message.
std::pair<VectorXd, OcpSolution> control_step(const DesignArtifacts& d,
                                              const VectorXd& x, Strategy s);

// True iff x lies in the terminal ellipsoid E_{W_x}(r_xu), where the optimal
// policy coincides with the unconstrained LQR law.
bool lqr_shortcut_applicable(const DesignArtifacts& d, const VectorXd& x);

// One-step shift of an optimal trajectory after noise w lands:
//   z+_l = z*_{l+1} + A_K^l w,          l = 0..N-1
//   z+_N = A_K z*_N + A_K^N w
//   v+_l = v*_{l+1} + K A_K^l w,        l = 0..N-2
//   v+_{N-1} = K z*_N + K A_K^{N-1} w
std::pair<MatrixXd, MatrixXd> candidate_shift(const OcpSolution& sol,
                                              const VectorXd& w,
                                              const DesignArtifacts& d);

// Smallest relaxations making the shifted trajectory feasible (closed form).
std::pair<double, double> candidate_gammas(const MatrixXd& z_plus,
                                           const MatrixXd& v_plus,
                                           const DesignArtifacts& d);

// Largest tube radius certified by the optimal trajectory at each step, and
// the chance bound it implies. A step whose nominal point already sits on or
// outside the unrelaxed ellipsoid admits no positive radius; it is flagged
// undefined and its probability reported as zero.
struct BoundRow {
  int ell = 0;
  bool x_defined = false;
  bool u_defined = false;
  double rho_x = 0.0;  // valid when x_defined
  double rho_u = 0.0;  // valid when u_defined
  double p_x = 0.0;
  double p_u = 0.0;
};

// Rows l = 1..N; the terminal row uses the joint radius r_xu for both
// components.
std::vector<BoundRow> aposteriori_bounds(const OcpSolution& sol,
                                         const DesignArtifacts& d);

}  // namespace smpc
