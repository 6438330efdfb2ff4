#include "smpc/controller.hpp"

#include <cmath>
#include <sstream>

#include "smpc/chi2.hpp"

namespace smpc {

CondensedDynamics condense(const LinearSystem& sys, int N) {
  if (N < 1) throw std::invalid_argument("horizon must be >= 1");
  const int n = sys.n();
  const int m = sys.m();
  CondensedDynamics cd;
  cd.F.resize(N + 1);
  cd.G.resize(N + 1);
  cd.F[0] = MatrixXd::Identity(n, n);
  cd.G[0] = MatrixXd::Zero(n, N * m);
  for (int l = 0; l < N; ++l) {
    cd.F[l + 1] = sys.A * cd.F[l];
    cd.G[l + 1] = sys.A * cd.G[l];
    cd.G[l + 1].middleCols(l * m, m) += sys.B;
  }
  return cd;
}

SolverSettings ocp_solver_settings() {
  SolverSettings st;
  st.gap_tol = 1e-12;  // sharp enough for the LQR-equivalence tolerances
  return st;
}

namespace {

struct OcpLayout {
  int n, m, N, nv, nvar;  // nv = N m, nvar = nv + 3
  int ix_gx() const { return nv; }
  int ix_gu() const { return nv + 1; }
  int ix_t() const { return nv + 2; }
};

OcpLayout layout(const DesignArtifacts& d) {
  OcpLayout L;
  L.n = d.sys.n();
  L.m = d.sys.m();
  L.N = d.N;
  L.nv = L.N * L.m;
  L.nvar = L.nv + 3;
  return L;
}

}  // namespace

ConicProblem build_ocp(const DesignArtifacts& d, const VectorXd& x, Strategy s) {
  require_buildable(d);
  if (x.size() != d.sys.n()) throw std::invalid_argument("state dimension mismatch");
  const OcpLayout L = layout(d);
  const CondensedDynamics cd = condense(d.sys, L.N);
  const MatrixXd Wxs = inv_sqrt(d.W_x);
  const MatrixXd Wus = inv_sqrt(d.W_u);

  ConicProblem p;
  p.Qhat = MatrixXd::Zero(L.nvar, L.nvar);
  p.chat = VectorXd::Zero(L.nvar);
  for (int l = 0; l < L.N; ++l) {
    if (l > 0) {  // z_0 = x contributes only a constant
      p.Qhat.topLeftCorner(L.nv, L.nv) +=
          2.0 * cd.G[l].transpose() * d.Q * cd.G[l];
      p.chat.head(L.nv) += 2.0 * cd.G[l].transpose() * d.Q * (cd.F[l] * x);
    }
    p.Qhat.block(l * L.m, l * L.m, L.m, L.m) += 2.0 * d.R;
  }
  p.Qhat.topLeftCorner(L.nv, L.nv) +=
      2.0 * cd.G[L.N].transpose() * d.lqr.P * cd.G[L.N];
  p.chat.head(L.nv) += 2.0 * cd.G[L.N].transpose() * d.lqr.P * (cd.F[L.N] * x);
  p.chat(L.ix_t()) = d.eta;

  for (int l = 1; l <= L.N; ++l) {
    const double tight = prs_radius(d.rho, d.lambda, l);
    Cone cx;
    cx.A = MatrixXd::Zero(L.n, L.nvar);
    cx.A.leftCols(L.nv) = Wxs * cd.G[l];
    cx.b = Wxs * (cd.F[l] * x);
    cx.c = VectorXd::Zero(L.nvar);
    cx.c(L.ix_gx()) = d.r_x;
    cx.d = -tight;
    p.cones.push_back(cx);
    if (l < L.N) {
      Cone cu;
      cu.A = MatrixXd::Zero(L.m, L.nvar);
      cu.A.block(0, l * L.m, L.m, L.m) = Wus;
      cu.b = VectorXd::Zero(L.m);
      cu.c = VectorXd::Zero(L.nvar);
      cu.c(L.ix_gu()) = d.r_u;
      cu.d = -tight;
      p.cones.push_back(std::move(cu));
    } else {
      // Second terminal cone: same left-hand side, input radius.
      cx.c.setZero();
      cx.c(L.ix_gu()) = d.r_u;
      p.cones.push_back(std::move(cx));
    }
  }

  const int nu_rows = (s == Strategy::A) ? 0 : d.U.rows();
  MatrixXd G = MatrixXd::Zero(5 + nu_rows, L.nvar);
  VectorXd g = VectorXd::Zero(5 + nu_rows);
  G(0, L.ix_gx()) = -1.0;  g(0) = -1.0;  // gamma_x >= 1
  G(1, L.ix_gu()) = -1.0;  g(1) = -1.0;  // gamma_u >= 1
  G(2, L.ix_gx()) = 1.0;   G(2, L.ix_t()) = -1.0;  g(2) = 1.0;  // t >= gamma_x - 1
  G(3, L.ix_gu()) = 1.0;   G(3, L.ix_t()) = -1.0;  g(3) = 1.0;  // t >= gamma_u - 1
  G(4, L.ix_t()) = -1.0;   g(4) = 0.0;              // t >= 0
  if (s == Strategy::B) {
    G.block(5, 0, nu_rows, L.m) = d.U.H;
    g.tail(nu_rows) = d.U.h;
  } else if (s == Strategy::C) {
    G.block(5, 0, nu_rows, L.m) = d.U.H;
    G.block(5, L.ix_gu(), nu_rows, 1) = -d.U.h;
  }
  p.G = std::move(G);
  p.g = std::move(g);
  return p;
}

namespace {

// Strictly feasible start: zero first input, LQR tail, relaxations padded by
// one half beyond what the rollout needs.
VectorXd warm_start(const DesignArtifacts& d, const VectorXd& x,
                    const CondensedDynamics& cd, const OcpLayout& L) {
  VectorXd v = VectorXd::Zero(L.nv);
  VectorXd z = d.sys.A * x;
  for (int l = 1; l < L.N; ++l) {
    v.segment(l * L.m, L.m) = d.lqr.K * z;
    z = d.lqr.A_K * z;
  }
  double gx = 1.0, gu = 1.0;
  for (int l = 1; l <= L.N; ++l) {
    VectorXd zl = cd.F[l] * x + cd.G[l] * v;
    const double tight = prs_radius(d.rho, d.lambda, l);
    gx = std::max(gx, (shape_norm(d.W_x, zl) + tight) / d.r_x);
    if (l < L.N)
      gu = std::max(gu, (shape_norm(d.W_u, v.segment(l * L.m, L.m)) + tight) / d.r_u);
    else
      gu = std::max(gu, (shape_norm(d.W_x, zl) + tight) / d.r_u);
  }
  gx += 0.5;
  gu += 0.5;
  VectorXd y0(L.nvar);
  y0 << v, gx, gu, std::max(gx, gu) - 1.0 + 0.5;
  return y0;
}

}  // namespace

OcpSolution solve_ocp(const DesignArtifacts& d, const VectorXd& x, Strategy s,
                      const SolverSettings& st) {
  const OcpLayout L = layout(d);
  const CondensedDynamics cd = condense(d.sys, L.N);
  ConicProblem p = build_ocp(d, x, s);
  ConicSolution cs = solve_from(p, warm_start(d, x, cd, L), st);

  OcpSolution sol;
  sol.strategy = s;
  sol.status = cs.status;
  sol.kkt = cs.kkt;
  sol.newton_steps = cs.newton_steps;
  sol.v = MatrixXd::Zero(L.N, L.m);
  for (int l = 0; l < L.N; ++l)
    sol.v.row(l) = cs.y.segment(l * L.m, L.m).transpose();
  sol.gamma_x = cs.y(L.ix_gx());
  sol.gamma_u = cs.y(L.ix_gu());
  sol.t = cs.y(L.ix_t());
  sol.z = MatrixXd::Zero(L.N + 1, L.n);
  sol.z.row(0) = x.transpose();
  for (int l = 0; l < L.N; ++l)
    sol.z.row(l + 1) = (d.sys.A * sol.z.row(l).transpose() +
                        d.sys.B * sol.v.row(l).transpose())
                           .transpose();
  double J = 0.0;
  for (int l = 0; l < L.N; ++l) {
    VectorXd zl = sol.z.row(l).transpose();
    VectorXd vl = sol.v.row(l).transpose();
    J += zl.dot(d.Q * zl) + vl.dot(d.R * vl);
  }
  VectorXd zN = sol.z.row(L.N).transpose();
  J += zN.dot(d.lqr.P * zN);
  sol.J_p = J;
  sol.J_total = J + d.eta * sol.t;
  return sol;
}

std::pair<VectorXd, OcpSolution> control_step(const DesignArtifacts& d,
                                              const VectorXd& x, Strategy s) {
  OcpSolution sol = solve_ocp(d, x, s);
  if (sol.status != SolveStatus::optimal) {
    std::ostringstream os;
    os << "controller solve failed: status="
       << (sol.status == SolveStatus::infeasible ? "infeasible" : "iteration_limit")
       << " kkt=(" << sol.kkt.stationarity << ", " << sol.kkt.feasibility << ", "
       << sol.kkt.complementarity << ")";
    throw std::runtime_error(os.str());
  }
  return {sol.v.row(0).transpose(), sol};
}

bool lqr_shortcut_applicable(const DesignArtifacts& d, const VectorXd& x) {
  return ellipsoid_contains(Ellipsoid(d.W_x, d.r_xu), x);
}

std::pair<MatrixXd, MatrixXd> candidate_shift(const OcpSolution& sol,
                                              const VectorXd& w,
                                              const DesignArtifacts& d) {
  const int N = static_cast<int>(sol.v.rows());
  const int n = static_cast<int>(sol.z.cols());
  const int m = static_cast<int>(sol.v.cols());
  if (w.size() != n) throw std::invalid_argument("noise dimension mismatch");
  MatrixXd zp(N + 1, n), vp(N, m);
  MatrixXd AKl = MatrixXd::Identity(n, n);  // A_K^l, updated per step
  for (int l = 0; l < N; ++l) {
    zp.row(l) = sol.z.row(l + 1) + (AKl * w).transpose();
    if (l < N - 1)
      vp.row(l) = sol.v.row(l + 1) + (d.lqr.K * AKl * w).transpose();
    else
      vp.row(l) = (d.lqr.K * sol.z.row(N).transpose() +
                   d.lqr.K * AKl * w).transpose();
    AKl = d.lqr.A_K * AKl;
  }
  zp.row(N) = (d.lqr.A_K * sol.z.row(N).transpose() + AKl * w).transpose();
  return {zp, vp};
}

std::pair<double, double> candidate_gammas(const MatrixXd& z_plus,
                                           const MatrixXd& v_plus,
                                           const DesignArtifacts& d) {
  const int N = static_cast<int>(v_plus.rows());
  double gx = 1.0, gu = 1.0;
  for (int l = 1; l <= N; ++l) {
    const double tight = prs_radius(d.rho, d.lambda, l);
    double znorm = shape_norm(d.W_x, z_plus.row(l).transpose());
    gx = std::max(gx, (znorm + tight) / d.r_x);
    if (l < N)
      gu = std::max(gu, (shape_norm(d.W_u, v_plus.row(l).transpose()) + tight) / d.r_u);
    else
      gu = std::max(gu, (znorm + tight) / d.r_u);
  }
  return {gx, gu};
}

std::vector<BoundRow> aposteriori_bounds(const OcpSolution& sol,
                                         const DesignArtifacts& d) {
  const int N = static_cast<int>(sol.v.rows());
  const int n = d.sys.n();
  std::vector<BoundRow> rows;
  rows.reserve(N);
  for (int l = 1; l <= N; ++l) {
    BoundRow row;
    row.ell = l;
    const double denom = 1.0 - std::pow(d.lambda, l);
    if (l < N) {
      double zn = shape_norm(d.W_x, sol.z.row(l).transpose());
      if (zn < d.r_x) {
        row.x_defined = true;
        row.rho_x = (d.r_x - zn) / denom;
        row.p_x = chi2_cdf(row.rho_x * row.rho_x, n);
      }
      double vn = shape_norm(d.W_u, sol.v.row(l).transpose());
      if (vn < d.r_u) {
        row.u_defined = true;
        row.rho_u = (d.r_u - vn) / denom;
        row.p_u = chi2_cdf(row.rho_u * row.rho_u, n);
      }
    } else {
      double zn = shape_norm(d.W_x, sol.z.row(N).transpose());
      if (zn < d.r_xu) {
        row.x_defined = row.u_defined = true;
        row.rho_x = row.rho_u = (d.r_xu - zn) / denom;
        row.p_x = row.p_u = chi2_cdf(row.rho_x * row.rho_x, n);
      }
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace smpc
