#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>

#include "smpc/offline.hpp"
#include "smpc/sim.hpp"

using namespace smpc;

namespace {

DesignInputs benchmark_inputs(bool noiseless = false) {
  MatrixXd A(2, 2), B(2, 1), Gw(2, 2), Q(2, 2), R(1, 1), Hx(4, 2), Hu(2, 1);
  A << 1, 1, 0, 1;
  B << 0.5, 1;
  Gw << 0.1, 0.05, 0.05, 0.1;
  if (noiseless) Gw.setZero();
  Q.setIdentity();
  R << 10;
  Hx << 1, 0, -1, 0, 0, 1, 0, -1;
  Hu << 1, -1;
  DesignInputs in{LinearSystem(A, B, Gw), Polytope(Hx, VectorXd::Constant(4, 40.0)),
                  Polytope(Hu, VectorXd::Constant(2, 10.0)), Q, R};
  in.lambda = 0.7503;
  MatrixXd W(2, 2);
  W << 10.9264, -3.7386, -3.7386, 3.8143;
  in.W_x = W;
  return in;
}

const DesignArtifacts& benchmark_design() {
  static const DesignArtifacts d = design_pipeline(benchmark_inputs()).artifacts;
  return d;
}

const DesignArtifacts& noiseless_design() {
  static const DesignArtifacts d = design_pipeline(benchmark_inputs(true)).artifacts;
  return d;
}

VectorXd state(double a, double b) {
  VectorXd x(2);
  x << a, b;
  return x;
}

}  // namespace

TEST_CASE("random streams are deterministic and decoupled") {
  RngStream a(42, 0), b(42, 0), c(42, 1), e(43, 0);
  bool stream_differs = false, seed_differs = false;
  for (int i = 0; i < 10; ++i) {
    const uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
    stream_differs |= va != c.next_u64();
    seed_differs |= va != e.next_u64();
  }
  CHECK(stream_differs);
  CHECK(seed_differs);

  SUBCASE("uniform draws stay in the half-open unit interval") {
    RngStream r(7, 0);
    for (int i = 0; i < 10000; ++i) {
      const double u = r.uniform();
      CHECK(u > 0.0);
      CHECK(u <= 1.0);
    }
  }
}

TEST_CASE("gaussian sampler has the right moments") {
  RngStream r(123, 5);
  const int n = 1000000;
  double sum = 0.0, sumsq = 0.0, cross = 0.0, prev = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = r.gaussian();
    sum += g;
    sumsq += g * g;
    if (i > 0) cross += g * prev;
    prev = g;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) <= 5e-3);
  CHECK(std::abs(var - 1.0) <= 1e-2);
  CHECK(std::abs(cross / (n - 1)) <= 5e-3);
}

TEST_CASE("noise factor reproduces the covariance") {
  SUBCASE("positive definite uses the cholesky factor") {
    const MatrixXd& Gw = benchmark_design().sys.Gamma_w;
    const MatrixXd L = noise_factor(Gw);
    CHECK((L * L.transpose() - Gw).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("semidefinite falls back to the eigenvalue square root") {
    MatrixXd Gw(2, 2);
    Gw << 1, 1, 1, 1;
    const MatrixXd L = noise_factor(Gw);
    CHECK((L * L.transpose() - Gw).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("zero noise yields a zero factor") {
    CHECK(noise_factor(MatrixXd::Zero(2, 2)).isZero(0.0));
  }
  SUBCASE("asymmetric input is rejected") {
    MatrixXd bad(2, 2);
    bad << 1, 0.2, 0.1, 1;
    CHECK_THROWS_AS(noise_factor(bad), std::invalid_argument);
  }
  SUBCASE("sample covariance converges to the target") {
    const MatrixXd& Gw = benchmark_design().sys.Gamma_w;
    const MatrixXd L = noise_factor(Gw);
    RngStream r(9, 2);
    MatrixXd acc = MatrixXd::Zero(2, 2);
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const VectorXd w = r.noise(L);
      acc += w * w.transpose();
    }
    CHECK(((acc / n) - Gw).cwiseAbs().maxCoeff() <= 5e-3);
  }
}

TEST_CASE("noiseless rollout telescopes the lqr cost") {
  const DesignArtifacts& d = noiseless_design();
  const VectorXd x0 = state(-3, 0);
  const int H = 8;
  const EpisodeTrace tr =
      run_episode(d, ControllerKind{ControllerKind::ms, Strategy::A}, x0, H,
                  RngStream(1, 0));
  REQUIRE(tr.x.size() == static_cast<std::size_t>(H + 1));
  REQUIRE(tr.u.size() == static_cast<std::size_t>(H));

  const double expect = x0.dot(d.lqr.P * x0) - tr.x.back().dot(d.lqr.P * tr.x.back());
  CHECK(tr.J == doctest::Approx(expect).epsilon(1e-4));
  for (int k = 0; k < H; ++k) {
    CHECK(tr.gamma_x[k] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(tr.status[k] == SolveStatus::optimal);
    CHECK(tr.mode[k] == 'm');
  }
}

TEST_CASE("episode bookkeeping is internally consistent") {
  const DesignArtifacts& d = benchmark_design();
  const EpisodeTrace tr =
      run_episode(d, ControllerKind{ControllerKind::ms, Strategy::A},
                  state(-40, 40), 10, RngStream(1, 0));
  double sum = 0.0;
  for (int k = 0; k < 10; ++k) {
    CHECK(tr.gamma_x[k] >= 1.0 - 1e-9);
    CHECK(tr.gamma_u[k] >= 1.0 - 1e-9);
    CHECK(tr.stage_cost[k] >= 0.0);
    const VectorXd xk = tr.x[k];
    const VectorXd uk = tr.u[k];
    CHECK(tr.stage_cost[k] ==
          doctest::Approx(xk.dot(d.Q * xk) + uk.dot(d.R * uk)).epsilon(1e-12));
    sum += tr.stage_cost[k];
  }
  CHECK(tr.J == doctest::Approx(sum).epsilon(1e-12));
  // by the end of the horizon the loop has contracted into the easy region
  CHECK(tr.gamma_x.back() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("campaigns are reproducible and indexed by episode") {
  const DesignArtifacts& d = benchmark_design();
  const ControllerKind ck{ControllerKind::ms, Strategy::A};
  const VectorXd x0 = state(-30, 0);

  const McResult once = monte_carlo_serial(d, ck, x0, 5, 4, 7);
  const McResult again = monte_carlo_serial(d, ck, x0, 5, 4, 7);
  REQUIRE(once.traces.size() == 4);
  CHECK(once.summary.mean_J == again.summary.mean_J);
  CHECK(once.summary.std_J == again.summary.std_J);

  // episode ep draws from stream ep, independent of campaign size
  const EpisodeTrace solo = run_episode(d, ck, x0, 5, RngStream(7, 2));
  CHECK(once.traces[2].J == solo.J);
  for (int k = 0; k <= 5; ++k)
    CHECK((once.traces[2].x[k] - solo.x[k]).norm() == 0.0);
}

TEST_CASE("worker count never changes the numbers") {
  const DesignArtifacts& d = benchmark_design();
  const ControllerKind ck{ControllerKind::ms, Strategy::A};
  const VectorXd x0 = state(-30, 0);
  const int H = 5, eps = 64;

  const McResult serial = monte_carlo_serial(d, ck, x0, H, eps, 3);
  const McResult one = monte_carlo(d, ck, x0, H, eps, 3, 1);
  const McResult four = monte_carlo(d, ck, x0, H, eps, 3, 4);

  CHECK(serial.summary.mean_J == one.summary.mean_J);
  CHECK(serial.summary.mean_J == four.summary.mean_J);
  CHECK(serial.summary.std_J == four.summary.std_J);
  CHECK(serial.summary.failures == four.summary.failures);
  REQUIRE(serial.traces.size() == four.traces.size());
  for (std::size_t i = 0; i < serial.traces.size(); ++i)
    CHECK(serial.traces[i].J == four.traces[i].J);
}

TEST_CASE("infeasible start is counted, never fabricated") {
  const DesignArtifacts& d = benchmark_design();
  const ControllerKind ck{ControllerKind::is};
  const VectorXd x0 = state(-40, 40);

  SUBCASE("single episode rethrows with the step index") {
    try {
      run_episode(d, ck, x0, 5, RngStream(1, 0));
      FAIL("expected initial_infeasibility");
    } catch (const initial_infeasibility& e) {
      CHECK(std::string(e.what()).find("step 0") != std::string::npos);
    }
  }
  SUBCASE("campaign reports the failures") {
    const McResult mc = monte_carlo_serial(d, ck, x0, 5, 8, 1);
    CHECK(mc.summary.failures == 8);
    CHECK(mc.traces.empty());
    CHECK(mc.summary.mean_J == 0.0);
    CHECK(mc.summary.bounds.empty());
    CHECK(mc.summary.hist.counts.empty());
  }
}

TEST_CASE("bound table marks rows beyond the simulated horizon") {
  const DesignArtifacts& d = benchmark_design();
  const ControllerKind ck{ControllerKind::ms, Strategy::A};
  const VectorXd x0 = state(-30, 0);
  const int H = 3;  // shorter than the prediction horizon

  const McResult mc = monte_carlo_serial(d, ck, x0, H, 50, 11);
  REQUIRE(mc.summary.bounds.size() == static_cast<std::size_t>(d.N));

  const OcpSolution sol0 = solve_ocp(d, x0, Strategy::A);
  const auto pred = aposteriori_bounds(sol0, d);
  for (int i = 0; i < d.N; ++i) {
    const BoundTableRow& row = mc.summary.bounds[i];
    CHECK(row.ell == i + 1);
    CHECK(row.p_x == pred[i].p_x);
    CHECK(row.p_u == pred[i].p_u);
    CHECK(row.f_x_available == (row.ell <= H));
    CHECK(row.f_u_available == (row.ell <= H - 1));
    if (row.f_x_available) {
      CHECK(row.f_x >= 0.0);
      CHECK(row.f_x <= 1.0);
      CHECK(row.f_poly_x >= row.f_x);  // the ellipsoid sits inside the polytope
    }
  }
}

TEST_CASE("cost histogram covers every surviving episode") {
  const DesignArtifacts& d = benchmark_design();
  const ControllerKind ck{ControllerKind::ms, Strategy::A};
  const McResult mc = monte_carlo_serial(d, ck, state(-30, 0), 5, 100, 5);

  const Histogram& h = mc.summary.hist;
  REQUIRE(h.edges.size() == 31);
  REQUIRE(h.counts.size() == 30);
  int total = 0;
  for (int c : h.counts) total += c;
  CHECK(total == static_cast<int>(mc.traces.size()));
  for (std::size_t b = 1; b < h.edges.size(); ++b) CHECK(h.edges[b] > h.edges[b - 1]);

  double lo = mc.traces.front().J, hi = lo;
  for (const auto& tr : mc.traces) {
    lo = std::min(lo, tr.J);
    hi = std::max(hi, tr.J);
  }
  CHECK(h.edges.front() <= lo);
  CHECK(h.edges.back() >= hi - 1e-9 * (1.0 + std::abs(hi)));

  SUBCASE("identical costs collapse into one bin") {
    const McResult same =
        monte_carlo_serial(noiseless_design(), ck, state(-3, 0), 4, 3, 1);
    int sum = 0;
    for (int c : same.summary.hist.counts) sum += c;
    CHECK(sum == 3);
    CHECK(same.summary.hist.counts[0] == 3);
    CHECK(same.summary.std_J <= 1e-9);
  }
}
