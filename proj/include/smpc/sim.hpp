#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smpc/baseline.hpp"
#include "smpc/chi2.hpp"
#include "smpc/controller.hpp"

namespace smpc {

// Counter-based splittable PRNG: every draw is a hash of (seed, stream,
// counter), so a stream's sequence never depends on other streams or on
// thread scheduling. Gaussians via Box-Muller with the usual cached spare.
class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t stream_id);

  uint64_t next_u64();
  double uniform();   // in (0, 1]
  double gaussian();  // standard normal

  // w = L g with g i.i.d. standard normal; L from noise_factor below.
  VectorXd noise(const MatrixXd& L);

 private:
  uint64_t base_;
  uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Factor L with L L' = Gamma_w within 1e-10: Cholesky when positive definite,
// eigenvalue square root for the semidefinite case, zero matrix for zero noise.
MatrixXd noise_factor(const MatrixXd& Gamma_w);

struct ControllerKind {
  enum Type { ms, is } type = ms;
  Strategy strategy = Strategy::A;  // used by ms only
};

struct EpisodeTrace {
  std::vector<VectorXd> x;  // horizon + 1 entries
  std::vector<VectorXd> u;  // horizon entries
  std::vector<double> gamma_x, gamma_u, stage_cost;  // horizon entries
  std::vector<char> mode;   // 'm' or 's' per step
  std::vector<SolveStatus> status;
  double J = 0.0;  // sum of realized stage costs
};

// Closed-loop rollout. Controller failures are rethrown with the step index
// prepended to the message (initial_infeasibility keeps its type).
EpisodeTrace run_episode(const DesignArtifacts& d, ControllerKind ck,
                         const VectorXd& x0, int horizon, RngStream rng);

struct BoundTableRow {
  int ell = 0;
  double p_x = 0.0, p_u = 0.0;      // predicted bounds (0 when undefined)
  double f_x = 0.0, f_u = 0.0;      // empirical ellipsoid membership rates
  double f_poly_x = 0.0, f_poly_u = 0.0;  // same against the raw polytopes
  // x_ell exists for ell <= horizon, u_ell for ell <= horizon - 1; rows past
  // the simulated data are marked unavailable instead of fabricated.
  bool f_x_available = true;
  bool f_u_available = true;
};

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<int> counts;
};

struct McSummary {
  double mean_J = 0.0;
  double std_J = 0.0;
  int episodes = 0;
  int failures = 0;
  std::vector<BoundTableRow> bounds;  // rows l = 1..N
  Histogram hist;
};

struct McResult {
  McSummary summary;
  std::vector<EpisodeTrace> traces;  // successful episodes, in episode order
};

// Monte-Carlo campaign with stream ids 0..episodes-1. Episodes run in
// parallel (threads = 0 picks the OpenMP default, 1 forces serial); all
// reductions happen afterwards in fixed episode order, so summaries and
// traces are identical for any worker count. Episode errors are counted and
// skipped; statistics cover the surviving episodes.
McResult monte_carlo(const DesignArtifacts& d, ControllerKind ck, const VectorXd& x0,
                     int horizon, int episodes, uint64_t seed, int threads = 0);

// Plain loop used as the reference in tests and the benchmark.
McResult monte_carlo_serial(const DesignArtifacts& d, ControllerKind ck,
                            const VectorXd& x0, int horizon, int episodes,
                            uint64_t seed);

// Table rows l = 1..N combining the chance bounds certified by the step-0
// solution with empirical membership frequencies of the realized closed loop:
// f_x at l counts x_l in E_{W_x}(r_x), f_u counts u_l in E_{W_u}(r_u) (the
// terminal row keeps the same membership sets). Components beyond the
// simulated horizon are marked unavailable.
std::vector<BoundTableRow> bound_table(const std::vector<EpisodeTrace>& traces,
                                       const OcpSolution& sol0,
                                       const DesignArtifacts& d);

}  // namespace smpc
