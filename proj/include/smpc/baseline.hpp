#pragma once

#include <optional>

#include "smpc/controller.hpp"

namespace smpc {

// Raised when the fixed-tightening controller has no feasible plan at the
// very first step, where no previous plan exists to fall back on.
class initial_infeasibility : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Carry-over between consecutive steps of one episode. last_solution's
// gamma/t/strategy fields are inert here; only the planned (z, v) matter.
struct DualModeState {
  std::optional<OcpSolution> last_solution;
  std::vector<char> mode_history;  // 'm' measured, 's' shifted
};

// Fixed-tightening OCP from nominal initial state z0, decision vector v:
// same tracking cost; v_0 constrained to the raw input polytope; stage
// constraints for l = 1..N-1 as the original polytopes shrunk by the tube's
// support function, H_x z_l <= h_x - rho(1-lambda^l) sqrt(H_x,i W_x H_x,i')
// and likewise for inputs; terminal cone ||W_x^{-1/2} z_N|| <= r_xu - rho
// (asymptotic tube radius).
ConicProblem build_is_ocp(const DesignArtifacts& d, const VectorXd& z0);

// Phase-one feasibility probe for the above.
bool is_ocp_feasible(const DesignArtifacts& d, const VectorXd& z0);

struct IsStep {
  VectorXd u;
  OcpSolution sol;
  VectorXd z0;
  bool shifted = false;
};

// One baseline controller step. Tries the measured state as nominal initial
// condition first; on infeasibility falls back to the previous plan's
// one-step-ahead state. Applied input is v*_0 + K (x - z0), plain v*_0 in
// measured mode.
IsStep is_smpc_step(const DesignArtifacts& d, const VectorXd& x, DualModeState& st);

}  // namespace smpc
