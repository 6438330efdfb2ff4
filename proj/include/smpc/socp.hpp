#pragma once

#include <vector>

#include "smpc/model.hpp"

namespace smpc {

// Second-order cone constraint ||A y + b|| <= c'y + d.
struct Cone {
  MatrixXd A;
  VectorXd b;
  VectorXd c;
  double d = 0.0;
};

// min 1/2 y'Qhat y + chat'y  s.t. cones, G y <= g. Qhat must be symmetric
// PSD; G may have zero rows when there are no linear inequalities.
struct ConicProblem {
  MatrixXd Qhat;
  VectorXd chat;
  std::vector<Cone> cones;
  MatrixXd G;
  VectorXd g;

  int dim() const { return static_cast<int>(chat.size()); }
};

enum class SolveStatus { optimal, infeasible, iteration_limit };

struct KktResiduals {
  double stationarity = 0.0;
  double feasibility = 0.0;
  double complementarity = 0.0;

  double worst() const;
};

struct SolverSettings {
  double gap_tol = 1e-8;       // outer stop: (2 #cones + #rows)/t <= gap_tol
  double newton_tol = 1e-9;    // inner stop: half squared Newton decrement
  int max_newton = 200;        // per centering
  int max_outer = 40;
  double phase1_tol = 1e-9;    // slack above this => infeasible
  double phase1_box = 1e6;     // variable box during phase one
};

struct ConicSolution {
  VectorXd y;
  double objective = 0.0;
  SolveStatus status = SolveStatus::iteration_limit;
  // Residuals of the problem rescaled to unit data norm (cost divided by the
  // largest cost coefficient); status optimal guarantees all three <= 1e-6.
  KktResiduals kkt;
  // Multipliers in original problem units, one per cone / linear row, for the
  // norm-form constraints ||A_i y + b_i|| - c_i'y - d_i <= 0 and G y - g <= 0.
  VectorXd cone_duals;
  VectorXd linear_duals;
  int newton_steps = 0;
  int outer_steps = 0;
  std::vector<double> outer_objectives;  // raw objective after each centering
};

// Log-barrier interior-point solve. Runs phase one first to find a strictly
// feasible start (or detect infeasibility), then follows the central path
// t <- 10 t from t = 1.
ConicSolution solve(const ConicProblem& p, const SolverSettings& s = {});

// Same, but skip phase one when y0 is already strictly feasible.
ConicSolution solve_from(const ConicProblem& p, const VectorXd& y0,
                         const SolverSettings& s = {});

struct Phase1Result {
  VectorXd y;      // candidate start (original variables)
  double s;        // optimal relaxation slack; <= 0 within tolerance iff feasible
  bool feasible;
};

// Minimize the uniform constraint relaxation s (floored at -1, variables
// boxed) to produce a strictly feasible start or an infeasibility verdict.
Phase1Result phase1(const ConicProblem& p, const SolverSettings& s = {});

// Residuals of the original (unscaled) problem at a candidate primal-dual
// point: stationarity ||Qhat y + chat + sum dual * constraint gradient||_inf
// with norm-form cone gradients, worst primal violation, and worst
// |dual * slack| product.
KktResiduals kkt_check(const ConicProblem& p, const VectorXd& y,
                       const VectorXd& cone_duals, const VectorXd& linear_duals);

}  // namespace smpc
