#include "smpc/socp.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace smpc {

double KktResiduals::worst() const {
  return std::max(stationarity, std::max(feasibility, complementarity));
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void validate(const ConicProblem& p) {
  const int nv = p.dim();
  if (p.Qhat.rows() != nv || p.Qhat.cols() != nv)
    throw std::invalid_argument("Qhat dimension mismatch");
  if (!is_symmetric(p.Qhat)) throw std::invalid_argument("Qhat must be symmetric");
  for (const auto& cn : p.cones) {
    if (cn.A.cols() != nv || cn.A.rows() < 1 || cn.b.size() != cn.A.rows() ||
        cn.c.size() != nv)
      throw std::invalid_argument("cone dimension mismatch");
  }
  if (p.G.rows() != p.g.size() || (p.G.rows() > 0 && p.G.cols() != nv))
    throw std::invalid_argument("linear block dimension mismatch");
}

double cost_scale(const ConicProblem& p) {
  double s = 1e-300;
  if (p.Qhat.size() > 0) s = std::max(s, p.Qhat.cwiseAbs().maxCoeff());
  if (p.chat.size() > 0) s = std::max(s, p.chat.cwiseAbs().maxCoeff());
  return s;
}

double raw_objective(const ConicProblem& p, const VectorXd& y) {
  return 0.5 * y.dot(p.Qhat * y) + p.chat.dot(y);
}

struct BarrierEval {
  double psi;
  VectorXd grad;
  MatrixXd hess;  // only filled when requested
};

// psi = f0/kap + Phi/t with Phi the log barrier of all constraints.
// Returns nothing when y is not strictly feasible.
std::optional<BarrierEval> barrier_eval(const ConicProblem& p, double t, double kap,
                                        const VectorXd& y, bool need_hess) {
  const int nv = p.dim();
  BarrierEval out;
  out.psi = raw_objective(p, y) / kap;
  out.grad = (p.Qhat * y + p.chat) / kap;
  if (need_hess) out.hess = p.Qhat / kap;

  for (const auto& cn : p.cones) {
    double u = cn.c.dot(y) + cn.d;
    VectorXd a = cn.A * y + cn.b;
    double ss = u * u - a.squaredNorm();
    if (u <= 0.0 || ss <= 0.0) return std::nullopt;
    out.psi += -std::log(ss) / t;
    VectorXd gs = 2.0 * u * cn.c - 2.0 * cn.A.transpose() * a;
    out.grad -= gs / (ss * t);
    if (need_hess) {
      out.hess += gs * gs.transpose() / (ss * ss * t);
      out.hess -= (2.0 * cn.c * cn.c.transpose() -
                   2.0 * cn.A.transpose() * cn.A) / (ss * t);
    }
  }
  if (p.G.rows() > 0) {
    VectorXd sl = p.g - p.G * y;
    if ((sl.array() <= 0.0).any()) return std::nullopt;
    out.psi += -sl.array().log().sum() / t;
    VectorXd inv = sl.cwiseInverse();
    out.grad += p.G.transpose() * inv / t;
    if (need_hess)
      out.hess += p.G.transpose() * inv.cwiseAbs2().asDiagonal() * p.G / t;
  }
  return out;
}

VectorXd newton_direction(const MatrixXd& H, const VectorXd& g, int nv) {
  VectorXd d = H.ldlt().solve(-g);
  if (d.allFinite()) return d;
  double ridge = 1e-12 * std::max(H.trace(), 1.0) / nv;
  MatrixXd Hr = H + ridge * MatrixXd::Identity(nv, nv);
  d = Hr.ldlt().solve(-g);
  if (d.allFinite()) return d;
  return Hr.fullPivLu().solve(-g);
}

// Damped Newton to the analytic center of psi(., t). Returns iterations used.
int center(const ConicProblem& p, double t, double kap, VectorXd& y,
           const SolverSettings& st) {
  for (int it = 0; it < st.max_newton; ++it) {
    auto ev = barrier_eval(p, t, kap, y, true);
    if (!ev) throw std::logic_error("centering started from an infeasible point");
    VectorXd d = newton_direction(ev->hess, ev->grad, p.dim());
    double slope = ev->grad.dot(d);
    double lam2 = -slope;
    if (lam2 / 2.0 <= st.newton_tol) return it;
    double al = 1.0;
    while (true) {
      auto trial = barrier_eval(p, t, kap, y + al * d, false);
      if (trial) {
        if (trial->psi <= ev->psi + 0.25 * al * slope) break;
        // Deep in the quadratic phase the predicted decrease drops below
        // what psi resolves in doubles, so sufficient decrease can never
        // be observed; any feasible non-increasing step is correct there.
        if (lam2 < 1e-8 && trial->psi <= ev->psi) break;
      }
      al *= 0.5;
      if (al < 1e-18) return it;
    }
    y += al * d;
  }
  return st.max_newton;
}

// Multipliers implied by the barrier at parameter t, in cost-scaled units,
// plus the KKT residuals of the scaled problem.
void scaled_duals_and_kkt(const ConicProblem& p, const VectorXd& y, double t,
                          double kap, VectorXd& cone_duals, VectorXd& lin_duals,
                          KktResiduals& kkt) {
  const int nc = static_cast<int>(p.cones.size());
  cone_duals.resize(nc);
  lin_duals.resize(p.G.rows());
  VectorXd r = (p.Qhat * y + p.chat) / kap;
  double feas = 0.0;
  double compl_ = 0.0;
  for (int i = 0; i < nc; ++i) {
    const auto& cn = p.cones[i];
    double u = cn.c.dot(y) + cn.d;
    VectorXd a = cn.A * y + cn.b;
    double an = a.norm();
    double ss = u * u - a.squaredNorm();
    double gi = an - u;  // norm-form constraint value
    feas = std::max(feas, gi);
    double lam = (ss > 0.0 && an > 0.0) ? 2.0 * an / (t * ss) : 0.0;
    cone_duals(i) = lam;
    if (lam > 0.0) r += lam * (cn.A.transpose() * a / an - cn.c);
    compl_ = std::max(compl_, std::abs(lam * gi));
  }
  for (int j = 0; j < p.G.rows(); ++j) {
    double slack = p.g(j) - p.G.row(j).dot(y);
    feas = std::max(feas, -slack);
    double mu = slack > 0.0 ? 1.0 / (t * slack) : 0.0;
    lin_duals(j) = mu;
    r += mu * p.G.row(j).transpose();
    compl_ = std::max(compl_, std::abs(mu * slack));
  }
  kkt.stationarity = r.size() > 0 ? r.cwiseAbs().maxCoeff() : 0.0;
  kkt.feasibility = feas;
  kkt.complementarity = compl_;
}

// The barrier formulas recover a multiplier as 1/(t slack), and the slack of
// a tight constraint is a difference of near-equal numbers, so its relative
// error, and the multiplier's, grows like eps/slack. Refit the near-active
// multipliers by nonnegative least squares on the stationarity equation
// instead; the constraint gradients carry no cancellation.
void refine_duals(const ConicProblem& p, const VectorXd& y, double kap,
                  VectorXd& cone_duals, VectorXd& lin_duals, KktResiduals& kkt) {
  const int nv = p.dim();
  const double act = 1e-8;  // scaled units; inactive duals sit at the gap level
  std::vector<int> ci, lj;
  for (int i = 0; i < cone_duals.size(); ++i) {
    const auto& cn = p.cones[i];
    if (cone_duals(i) > act && (cn.A * y + cn.b).norm() > 0.0) ci.push_back(i);
  }
  for (int j = 0; j < lin_duals.size(); ++j)
    if (lin_duals(j) > act) lj.push_back(j);
  const int cols = static_cast<int>(ci.size() + lj.size());
  if (cols == 0) return;

  MatrixXd M(nv, cols);
  for (size_t k = 0; k < ci.size(); ++k) {
    const auto& cn = p.cones[ci[k]];
    VectorXd a = cn.A * y + cn.b;
    M.col(k) = cn.A.transpose() * a / a.norm() - cn.c;
  }
  for (size_t k = 0; k < lj.size(); ++k)
    M.col(ci.size() + k) = p.G.row(lj[k]).transpose();
  const VectorXd r0 = (p.Qhat * y + p.chat) / kap;

  std::vector<char> keep(cols, 1);
  VectorXd w = VectorXd::Zero(cols);
  for (int pass = 0; pass <= cols; ++pass) {
    std::vector<int> idx;
    for (int k = 0; k < cols; ++k)
      if (keep[k]) idx.push_back(k);
    if (idx.empty()) return;
    MatrixXd Mk(nv, idx.size());
    for (size_t k = 0; k < idx.size(); ++k) Mk.col(k) = M.col(idx[k]);
    VectorXd wk = Mk.colPivHouseholderQr().solve(-r0);
    bool clean = true;
    w.setZero();
    for (size_t k = 0; k < idx.size(); ++k) {
      if (wk(k) < -1e-10) {
        keep[idx[k]] = 0;
        clean = false;
      } else {
        w(idx[k]) = std::max(wk(k), 0.0);
      }
    }
    if (clean) break;
  }

  VectorXd cd = cone_duals, ld = lin_duals;
  for (size_t k = 0; k < ci.size(); ++k) cd(ci[k]) = w(k);
  for (size_t k = 0; k < lj.size(); ++k) ld(lj[k]) = w(ci.size() + k);

  KktResiduals alt;
  VectorXd r = r0;
  for (int i = 0; i < cd.size(); ++i) {
    const auto& cn = p.cones[i];
    double u = cn.c.dot(y) + cn.d;
    VectorXd a = cn.A * y + cn.b;
    double an = a.norm();
    double gi = an - u;
    alt.feasibility = std::max(alt.feasibility, gi);
    if (an > 0.0) r += cd(i) * (cn.A.transpose() * a / an - cn.c);
    alt.complementarity = std::max(alt.complementarity, std::abs(cd(i) * gi));
  }
  for (int j = 0; j < ld.size(); ++j) {
    double slack = p.g(j) - p.G.row(j).dot(y);
    alt.feasibility = std::max(alt.feasibility, -slack);
    r += ld(j) * p.G.row(j).transpose();
    alt.complementarity = std::max(alt.complementarity, std::abs(ld(j) * slack));
  }
  alt.feasibility = std::max(alt.feasibility, 0.0);
  alt.stationarity = r.size() > 0 ? r.cwiseAbs().maxCoeff() : 0.0;
  if (alt.worst() < kkt.worst()) {
    kkt = alt;
    cone_duals = cd;
    lin_duals = ld;
  }
}

ConicSolution path_follow(const ConicProblem& p, const VectorXd& y0,
                          const SolverSettings& st) {
  ConicSolution sol;
  sol.y = y0;
  double kap = cost_scale(p);
  double nu = 2.0 * static_cast<double>(p.cones.size()) + p.G.rows();
  double t = 1.0;
  double best_worst = std::numeric_limits<double>::infinity();
  VectorXd best_y, best_cd, best_ld;
  KktResiduals best_kkt;
  for (int outer = 0; outer < st.max_outer; ++outer) {
    sol.newton_steps += center(p, t, kap, sol.y, st);
    ++sol.outer_steps;
    sol.outer_objectives.push_back(raw_objective(p, sol.y));
    if (nu / t <= st.gap_tol || nu == 0.0) {
      // The dual recovery below is exact only at the analytic center; an
      // off-center error of size eps shifts the multipliers by roughly
      // eps * sqrt(t). Polish the centering to its numerical floor first,
      // which quadratic convergence makes a couple of Newton steps.
      SolverSettings fine = st;
      fine.newton_tol = 1e-24;
      fine.max_newton = 12;
      sol.newton_steps += center(p, t, kap, sol.y, fine);
      KktResiduals kkt;
      VectorXd cd, ld;
      scaled_duals_and_kkt(p, sol.y, t, kap, cd, ld, kkt);
      if (kkt.worst() > 1e-6) refine_duals(p, sol.y, kap, cd, ld, kkt);
      if (kkt.worst() <= 1e-6) {
        sol.status = SolveStatus::optimal;
        sol.kkt = kkt;
        sol.cone_duals = kap * cd;
        sol.linear_duals = kap * ld;
        break;
      }
      // Residuals still loose: keep sharpening, but remember the best
      // certified iterate so a failed run still reports honest numbers.
      if (kkt.worst() < best_worst) {
        best_worst = kkt.worst();
        best_y = sol.y;
        best_kkt = kkt;
        best_cd = kap * cd;
        best_ld = kap * ld;
      }
    }
    t *= 10.0;
  }
  if (sol.status != SolveStatus::optimal && best_y.size() > 0) {
    sol.y = best_y;
    sol.kkt = best_kkt;
    sol.cone_duals = best_cd;
    sol.linear_duals = best_ld;
  }
  sol.objective = raw_objective(p, sol.y);
  return sol;
}

// Strict feasibility margin; positive when y is usable as a barrier start.
double strict_margin(const ConicProblem& p, const VectorXd& y) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& cn : p.cones) {
    double u = cn.c.dot(y) + cn.d;
    VectorXd a = cn.A * y + cn.b;
    m = std::min(m, u - a.norm());
    if (u <= 0.0) return -std::numeric_limits<double>::infinity();
  }
  for (int j = 0; j < p.G.rows(); ++j)
    m = std::min(m, p.g(j) - p.G.row(j).dot(y));
  return m;
}

}  // namespace

Phase1Result phase1(const ConicProblem& p, const SolverSettings& st) {
  validate(p);
  const int nv = p.dim();
  const int na = nv + 1;  // extra slack variable s, last position

  ConicProblem aug;
  aug.Qhat = MatrixXd::Zero(na, na);
  aug.chat = VectorXd::Zero(na);
  aug.chat(nv) = 1.0;
  for (const auto& cn : p.cones) {
    Cone c2;
    c2.A = MatrixXd::Zero(cn.A.rows(), na);
    c2.A.leftCols(nv) = cn.A;
    c2.b = cn.b;
    c2.c = VectorXd::Zero(na);
    c2.c.head(nv) = cn.c;
    c2.c(nv) = 1.0;
    c2.d = cn.d;
    aug.cones.push_back(std::move(c2));
  }
  const int nrows = static_cast<int>(p.G.rows());
  const int total = nrows + 1 + 2 * nv;  // relaxed rows, s floor, variable box
  aug.G = MatrixXd::Zero(total, na);
  aug.g = VectorXd::Zero(total);
  if (nrows > 0) {
    aug.G.topLeftCorner(nrows, nv) = p.G;
    aug.G.col(nv).head(nrows).setConstant(-1.0);
    aug.g.head(nrows) = p.g;
  }
  aug.G(nrows, nv) = -1.0;  // s >= -1
  aug.g(nrows) = 1.0;
  for (int j = 0; j < nv; ++j) {
    aug.G(nrows + 1 + 2 * j, j) = 1.0;
    aug.g(nrows + 1 + 2 * j) = st.phase1_box;
    aug.G(nrows + 2 + 2 * j, j) = -1.0;
    aug.g(nrows + 2 + 2 * j) = st.phase1_box;
  }

  // Start at y = 0 with s large enough to clear every constraint.
  double s0 = 0.0;
  for (const auto& cn : p.cones) s0 = std::max(s0, cn.b.norm() - cn.d);
  for (int j = 0; j < nrows; ++j) s0 = std::max(s0, -p.g(j));
  VectorXd ya = VectorXd::Zero(na);
  ya(nv) = s0 + 1.0;

  double kap = cost_scale(aug);
  double nu = 2.0 * static_cast<double>(aug.cones.size()) + aug.G.rows();
  double t = 1.0;
  SolverSettings st1 = st;
  Phase1Result out{VectorXd::Zero(nv), ya(nv), false};
  for (int outer = 0; outer < st.max_outer; ++outer) {
    center(aug, t, kap, ya, st1);
    out.y = ya.head(nv);
    out.s = ya(nv);
    if (out.s < -1e-6) break;  // already strictly feasible with real margin
    if (nu / t <= std::min(st.gap_tol, 1e-10)) break;
    t *= 10.0;
  }
  out.feasible = out.s <= st.phase1_tol && strict_margin(p, out.y) > 0.0;
  return out;
}

ConicSolution solve_from(const ConicProblem& p, const VectorXd& y0,
                         const SolverSettings& st) {
  validate(p);
  if (y0.size() != p.dim()) throw std::invalid_argument("start dimension mismatch");
  if (strict_margin(p, y0) > 0.0) return path_follow(p, y0, st);
  return solve(p, st);
}

ConicSolution solve(const ConicProblem& p, const SolverSettings& st) {
  validate(p);
  if (p.cones.empty() && p.G.rows() == 0)
    return path_follow(p, VectorXd::Zero(p.dim()), st);

  Phase1Result ph = phase1(p, st);
  if (!ph.feasible) {
    ConicSolution sol;
    sol.y = ph.y;
    sol.objective = kNaN;
    sol.status = SolveStatus::infeasible;
    sol.kkt.feasibility = std::max(ph.s, 0.0);
    return sol;
  }
  return path_follow(p, ph.y, st);
}

KktResiduals kkt_check(const ConicProblem& p, const VectorXd& y,
                       const VectorXd& cone_duals, const VectorXd& linear_duals) {
  validate(p);
  if (cone_duals.size() != static_cast<Eigen::Index>(p.cones.size()) ||
      linear_duals.size() != p.G.rows())
    throw std::invalid_argument("dual dimension mismatch");
  KktResiduals out;
  VectorXd r = p.Qhat * y + p.chat;
  for (size_t i = 0; i < p.cones.size(); ++i) {
    const auto& cn = p.cones[i];
    double u = cn.c.dot(y) + cn.d;
    VectorXd a = cn.A * y + cn.b;
    double an = a.norm();
    double gi = an - u;
    out.feasibility = std::max(out.feasibility, gi);
    VectorXd grad = -cn.c;
    if (an > 0.0) grad += cn.A.transpose() * a / an;
    r += cone_duals(i) * grad;
    out.complementarity = std::max(out.complementarity, std::abs(cone_duals(i) * gi));
  }
  for (int j = 0; j < p.G.rows(); ++j) {
    double viol = p.G.row(j).dot(y) - p.g(j);
    out.feasibility = std::max(out.feasibility, viol);
    r += linear_duals(j) * p.G.row(j).transpose();
    out.complementarity =
        std::max(out.complementarity, std::abs(linear_duals(j) * viol));
  }
  out.feasibility = std::max(out.feasibility, 0.0);
  out.stationarity = r.size() > 0 ? r.cwiseAbs().maxCoeff() : 0.0;
  return out;
}

}  // namespace smpc
