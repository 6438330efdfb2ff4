// Timing harness: the OpenMP Monte-Carlo driver against the serial reference,
// plus a microbenchmark of the conic solver itself. The parallel and serial
// campaigns must agree byte for byte; a mismatch makes the run fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "smpc/controller.hpp"
#include "smpc/offline.hpp"
#include "smpc/sim.hpp"

using namespace smpc;
using clock_type = std::chrono::steady_clock;

namespace {

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

DesignArtifacts bench_design() {
  MatrixXd A(2, 2), B(2, 1), Gw(2, 2), Q(2, 2), R(1, 1), Hx(4, 2), Hu(2, 1);
  A << 1, 1, 0, 1;
  B << 0.5, 1;
  Gw << 0.1, 0.05, 0.05, 0.1;
  Q.setIdentity();
  R << 10;
  Hx << 1, 0, -1, 0, 0, 1, 0, -1;
  Hu << 1, -1;
  VectorXd hx = VectorXd::Constant(4, 40.0);
  VectorXd hu = VectorXd::Constant(2, 10.0);
  DesignInputs in{LinearSystem(A, B, Gw), Polytope(Hx, hx), Polytope(Hu, hu),
                  Q, R};
  return design_pipeline(in).artifacts;
}

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

bool identical(const McResult& a, const McResult& b) {
  if (!same_bits(a.summary.mean_J, b.summary.mean_J)) return false;
  if (!same_bits(a.summary.std_J, b.summary.std_J)) return false;
  if (a.summary.failures != b.summary.failures) return false;
  if (a.traces.size() != b.traces.size()) return false;
  for (std::size_t e = 0; e < a.traces.size(); ++e) {
    if (!same_bits(a.traces[e].J, b.traces[e].J)) return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte-Carlo and solver benchmark"};
  int episodes = 200, horizon = 10, solves = 200, threads = 0;
  uint64_t seed = 1;
  app.add_option("--episodes", episodes, "campaign size (default 200)");
  app.add_option("--horizon", horizon, "steps per episode (default 10)");
  app.add_option("--solves", solves, "microbenchmark solve count (default 200)");
  app.add_option("--threads", threads, "parallel workers, 0 = all");
  app.add_option("--seed", seed, "campaign seed");
  CLI11_PARSE(app, argc, argv);

  const DesignArtifacts d = bench_design();
  std::printf("design: lambda=%.6f rho=%.6f r_x=%.6f r_xu=%.6f\n", d.lambda, d.rho,
              d.r_x, d.r_xu);

  VectorXd x0(2);
  x0 << -40, 40;

  // Solver microbenchmark from the hardest published start.
  {
    const auto t0 = clock_type::now();
    long total_newton = 0;
    for (int i = 0; i < solves; ++i) {
      const OcpSolution sol = solve_ocp(d, x0, Strategy::A);
      if (sol.status != SolveStatus::optimal) {
        std::fprintf(stderr, "microbenchmark solve %d not optimal\n", i);
        return 1;
      }
      total_newton += sol.newton_steps;
    }
    const double dt = seconds_since(t0);
    std::printf("solver: %d solves in %.3f s, %.3f ms/solve, %.1f newton steps avg\n",
                solves, dt, 1e3 * dt / solves,
                double(total_newton) / double(solves));
  }

  const ControllerKind ck{ControllerKind::ms, Strategy::A};

  const auto t_serial = clock_type::now();
  const McResult serial = monte_carlo_serial(d, ck, x0, horizon, episodes, seed);
  const double dt_serial = seconds_since(t_serial);

  const auto t_par = clock_type::now();
  const McResult parallel = monte_carlo(d, ck, x0, horizon, episodes, seed, threads);
  const double dt_par = seconds_since(t_par);

  int workers = 1;
#ifdef _OPENMP
  workers = threads > 0 ? threads : omp_get_max_threads();
#endif

  std::printf("serial:   %d episodes in %.3f s (mean_J=%.6f)\n", episodes, dt_serial,
              serial.summary.mean_J);
  std::printf("parallel: %d episodes in %.3f s (%d workers), speedup %.2fx\n",
              episodes, dt_par, workers, dt_serial / std::max(dt_par, 1e-9));

  if (!identical(serial, parallel)) {
    std::fprintf(stderr, "parallel campaign diverged from the serial reference\n");
    return 1;
  }
  std::printf("parallel output matches the serial reference bit for bit\n");
  return 0;
}
