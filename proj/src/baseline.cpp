#include "smpc/baseline.hpp"

#include <cmath>
#include <sstream>

namespace smpc {

namespace {

VectorXd ellipsoid_support(const Polytope& p, const MatrixXd& W) {
  VectorXd s(p.rows());
  for (int i = 0; i < p.rows(); ++i) {
    VectorXd hi = p.H.row(i).transpose();
    s(i) = std::sqrt(hi.dot(W * hi));
  }
  return s;
}

}  // namespace

ConicProblem build_is_ocp(const DesignArtifacts& d, const VectorXd& z0) {
  require_buildable(d);
  if (z0.size() != d.sys.n()) throw std::invalid_argument("state dimension mismatch");
  const int N = d.N;
  const int m = d.sys.m();
  const int nv = N * m;
  const CondensedDynamics cd = condense(d.sys, N);

  ConicProblem p;
  p.Qhat = MatrixXd::Zero(nv, nv);
  p.chat = VectorXd::Zero(nv);
  for (int l = 0; l < N; ++l) {
    if (l > 0) {
      p.Qhat += 2.0 * cd.G[l].transpose() * d.Q * cd.G[l];
      p.chat += 2.0 * cd.G[l].transpose() * d.Q * (cd.F[l] * z0);
    }
    p.Qhat.block(l * m, l * m, m, m) += 2.0 * d.R;
  }
  p.Qhat += 2.0 * cd.G[N].transpose() * d.lqr.P * cd.G[N];
  p.chat += 2.0 * cd.G[N].transpose() * d.lqr.P * (cd.F[N] * z0);

  const VectorXd sx = ellipsoid_support(d.X, d.W_x);
  const VectorXd su = ellipsoid_support(d.U, d.W_u);
  const int rx = d.X.rows();
  const int ru = d.U.rows();
  const int total = ru + (N - 1) * (rx + ru);
  p.G = MatrixXd::Zero(total, nv);
  p.g = VectorXd::Zero(total);
  int at = 0;
  p.G.block(at, 0, ru, m) = d.U.H;  // v_0 in the untightened input set
  p.g.segment(at, ru) = d.U.h;
  at += ru;
  for (int l = 1; l < N; ++l) {
    const double tight = prs_radius(d.rho, d.lambda, l);
    p.G.block(at, 0, rx, nv) = d.X.H * cd.G[l];
    p.g.segment(at, rx) = d.X.h - tight * sx - d.X.H * (cd.F[l] * z0);
    at += rx;
    p.G.block(at, l * m, ru, m) = d.U.H;
    p.g.segment(at, ru) = d.U.h - tight * su;
    at += ru;
  }

  Cone term;
  term.A = inv_sqrt(d.W_x) * cd.G[N];
  term.b = inv_sqrt(d.W_x) * (cd.F[N] * z0);
  term.c = VectorXd::Zero(nv);
  term.d = d.r_xu - d.rho;
  if (!(term.d > 0.0))
    throw std::invalid_argument("design invalid: asymptotic terminal set empty");
  p.cones.push_back(std::move(term));
  return p;
}

bool is_ocp_feasible(const DesignArtifacts& d, const VectorXd& z0) {
  return phase1(build_is_ocp(d, z0)).feasible;
}

IsStep is_smpc_step(const DesignArtifacts& d, const VectorXd& x, DualModeState& st) {
  auto finish = [&](const VectorXd& z0, ConicSolution&& cs, bool shifted) {
    const int N = d.N;
    const int m = d.sys.m();
    IsStep out;
    out.z0 = z0;
    out.shifted = shifted;
    OcpSolution sol;
    sol.status = cs.status;
    sol.kkt = cs.kkt;
    sol.newton_steps = cs.newton_steps;
    sol.gamma_x = 1.0;
    sol.gamma_u = 1.0;
    sol.t = 0.0;
    sol.v = MatrixXd::Zero(N, m);
    for (int l = 0; l < N; ++l)
      sol.v.row(l) = cs.y.segment(l * m, m).transpose();
    sol.z = MatrixXd::Zero(N + 1, d.sys.n());
    sol.z.row(0) = z0.transpose();
    for (int l = 0; l < N; ++l)
      sol.z.row(l + 1) = (d.sys.A * sol.z.row(l).transpose() +
                          d.sys.B * sol.v.row(l).transpose())
                             .transpose();
    double J = 0.0;
    for (int l = 0; l < N; ++l) {
      VectorXd zl = sol.z.row(l).transpose();
      VectorXd vl = sol.v.row(l).transpose();
      J += zl.dot(d.Q * zl) + vl.dot(d.R * vl);
    }
    VectorXd zN = sol.z.row(N).transpose();
    sol.J_p = J + zN.dot(d.lqr.P * zN);
    sol.J_total = sol.J_p;
    out.u = sol.v.row(0).transpose() + d.lqr.K * (x - z0);
    out.sol = std::move(sol);
    st.last_solution = out.sol;
    st.mode_history.push_back(shifted ? 's' : 'm');
    return out;
  };

  ConicSolution measured = solve(build_is_ocp(d, x));
  if (measured.status == SolveStatus::optimal)
    return finish(x, std::move(measured), false);
  if (measured.status == SolveStatus::iteration_limit)
    throw std::runtime_error("baseline solver hit its iteration limit in measured mode");

  if (!st.last_solution) {
    std::ostringstream os;
    os << "IS-SMPC initially infeasible at x0=(";
    for (int i = 0; i < x.size(); ++i) os << (i ? "," : "") << x(i);
    os << ")";
    throw initial_infeasibility(os.str());
  }

  VectorXd z0 = st.last_solution->z.row(1).transpose();
  ConicSolution shifted = solve(build_is_ocp(d, z0));
  if (shifted.status != SolveStatus::optimal)
    throw std::runtime_error(
        "IS-SMPC shifted plan unexpectedly infeasible (recursive feasibility breach)");
  return finish(z0, std::move(shifted), true);
}

}  // namespace smpc
