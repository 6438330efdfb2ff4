#include "smpc/offline.hpp"

#include <cmath>
#include <limits>

#include "smpc/chi2.hpp"

namespace smpc {

bool ValidationReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

const CheckResult* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

double rho_from_eps(double eps, int n, NoiseFamily family) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("eps must lie in (0,1)");
  if (n < 1) throw std::invalid_argument("dimension must be >= 1");
  if (family == NoiseFamily::generic) return std::sqrt(n / eps);
  // Gaussian: solve chi2_cdf(rho^2, n) = 1 - eps by bisection on rho.
  double target = 1.0 - eps;
  double lo = 0.0;
  double hi = 1.0;
  while (chi2_cdf(hi * hi, n) < target) {
    hi *= 2.0;
    if (hi > 1e8) throw std::runtime_error("radius bisection bracket failed");
  }
  while (hi - lo > 1e-10) {
    double mid = 0.5 * (lo + hi);
    (chi2_cdf(mid * mid, n) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

MatrixXd design_shape(const LinearSystem& sys, const MatrixXd& A_K, double lambda) {
  double sr = spectral_radius(A_K);
  if (!(lambda > sr && lambda < 1.0))
    throw std::invalid_argument("contraction infeasible: lambda must lie in (spectral radius, 1)");
  const double a = 1.0 / (lambda * lambda);
  const double b = 1.0 / ((1.0 - lambda) * (1.0 - lambda));
  MatrixXd W = b * sys.Gamma_w;
  for (int it = 0; it < 100000; ++it) {
    MatrixXd Wn = a * (A_K * W * A_K.transpose()) + b * sys.Gamma_w;
    Wn = 0.5 * (Wn + Wn.transpose());
    double rel = (Wn - W).norm() / std::max(Wn.norm(), 1e-300);
    W = Wn;
    if (rel <= 1e-12) return W;
  }
  throw std::runtime_error("shape fixed point did not converge (lambda too close to spectral radius)");
}

MatrixXd design_input_shape(const MatrixXd& K, const MatrixXd& W_x) {
  if (K.norm() == 0.0) throw std::invalid_argument("input shape undefined: K is zero");
  MatrixXd Wu = K * W_x * K.transpose();
  Wu = 0.5 * (Wu + Wu.transpose());
  if (Wu.rows() > 1) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Wu, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 1e-12 * std::max(es.eigenvalues().maxCoeff(), 1.0))
      Wu += 1e-12 * MatrixXd::Identity(Wu.rows(), Wu.cols());
  }
  return Wu;
}

double prs_radius(double rho, double lambda, int ell) {
  if (ell < 0) throw std::invalid_argument("step index must be nonnegative");
  return rho * (1.0 - std::pow(lambda, ell));
}

namespace {

double min_eig(const MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_abs_eig(const MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double eq37_bound(int n, double lambda) {
  return std::sqrt(n * (1.0 - lambda) / (1.0 + lambda));
}

}  // namespace

LambdaChoice select_lambda(const LinearSystem& sys, const LqrResult& lqr,
                           const Polytope& X, const Polytope& U, double eps,
                           NoiseFamily family, int N, int grid_size) {
  if (grid_size < 10) throw std::invalid_argument("grid_size must be >= 10");
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  const double lo = spectral_radius(lqr.A_K) + 1e-3;
  const double hi = 1.0 - 1e-3;
  if (!(lo < hi)) throw design_error("design infeasible: closed loop too close to marginal stability");
  const double rho = rho_from_eps(eps, sys.n(), family);

  bool found = false;
  LambdaChoice best{0.0, MatrixXd(), -std::numeric_limits<double>::infinity()};
  for (int i = 0; i < grid_size; ++i) {
    double lam = lo + (hi - lo) * i / (grid_size - 1);
    MatrixXd Wx = design_shape(sys, lqr.A_K, lam);
    MatrixXd Wu = design_input_shape(lqr.K, Wx);
    double r_x = inscribed_radius(Wx, X);
    double r_u = inscribed_radius(Wu, U);
    double r_xu = std::min(r_x, r_u);
    if (rho > r_xu) continue;
    if (rho < eq37_bound(sys.n(), lam)) continue;
    double margin = r_xu - prs_radius(rho, lam, N);
    if (margin > best.margin) {  // strict: earlier (smaller) lambda wins ties
      best = {lam, Wx, margin};
      found = true;
    }
  }
  if (!found) throw design_error("design infeasible: noise too large for constraints");
  return best;
}

ValidationReport verify_design(const DesignArtifacts& d) {
  ValidationReport rep;
  const MatrixXd& Wx = d.W_x;
  const double wx_scale = max_abs_eig(Wx);

  MatrixXd M19a = d.lambda * d.lambda * Wx - d.lqr.A_K * Wx * d.lqr.A_K.transpose();
  double m19a = min_eig(M19a);
  rep.checks.push_back({"contraction_19a", m19a >= -1e-9 * wx_scale, m19a});

  MatrixXd M19b = (1.0 - d.lambda) * (1.0 - d.lambda) * Wx - d.sys.Gamma_w;
  double m19b = min_eig(M19b);
  rep.checks.push_back({"noise_domination_19b", m19b >= -1e-9 * wx_scale, m19b});

  MatrixXd I = MatrixXd::Identity(d.sys.n(), d.sys.n());
  MatrixXd Wxi = Wx.ldlt().solve(I);
  MatrixXd Wui = d.W_u.ldlt().solve(MatrixXd::Identity(d.W_u.rows(), d.W_u.cols()));
  MatrixXd M26 = Wxi - d.lqr.K.transpose() * Wui * d.lqr.K;
  double m26 = min_eig(M26);
  rep.checks.push_back({"input_shape_26", m26 >= -1e-9 * max_abs_eig(Wxi), m26});

  double slack_rxu = d.r_xu - d.rho;
  rep.checks.push_back({"rho_le_rxu", slack_rxu >= -1e-12 * std::max(d.r_xu, 1.0), slack_rxu});

  double slack37 = d.rho - eq37_bound(d.sys.n(), d.lambda);
  rep.checks.push_back({"rho_lower_bound_37", slack37 >= 0.0, slack37});

  double worst_x = std::numeric_limits<double>::infinity();
  double worst_u = std::numeric_limits<double>::infinity();
  for (int l = 1; l <= d.N; ++l) {
    double tight = prs_radius(d.rho, d.lambda, l);
    worst_x = std::min(worst_x, d.r_x - tight);
    worst_u = std::min(worst_u, d.r_u - tight);
  }
  rep.checks.push_back({"stage_nonempty_x", worst_x > 0.0, worst_x});
  rep.checks.push_back({"stage_nonempty_u", worst_u > 0.0, worst_u});
  return rep;
}

std::pair<double, double> certificate_margins(const MatrixXd& W_x, double r_xu,
                                              const MatrixXd& P, const MatrixXd& Q,
                                              const MatrixXd& Gamma_w, double mu,
                                              double beta) {
  double tg = (P * Gamma_w).trace();
  if (!(tg > 0.0) || !(beta > 0.0) || !(r_xu > 0.0))
    return {-std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};
  MatrixXd I = MatrixXd::Identity(W_x.rows(), W_x.cols());
  MatrixXd Wxi = W_x.ldlt().solve(I);
  MatrixXd target = Wxi / (r_xu * r_xu);
  double m1 = min_eig((Q - mu * P) / tg - target);
  double m2 = min_eig(mu * P / beta - target);
  return {m1, m2};
}

std::optional<Certificate> certify_convergence(const DesignArtifacts& d,
                                               const MatrixXd& P, const MatrixXd& Q) {
  double tg = (P * d.sys.Gamma_w).trace();
  if (!(tg > 0.0) || !(d.r_xu > 0.0)) return std::nullopt;
  for (int i = 1; i <= 2000; ++i) {
    double mu = static_cast<double>(i) / 2001.0;
    MatrixXd QmP = Q - mu * P;
    if (min_eig(QmP) <= 0.0) continue;
    // beta = tr(P Gamma_w) * max generalized eigenvalue of P v = s (Q-mu P) v
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(
        0.5 * (P + P.transpose()), 0.5 * (QmP + QmP.transpose()));
    if (ges.info() != Eigen::Success) continue;
    double lmax = ges.eigenvalues().maxCoeff();
    if (!(lmax > 0.0)) continue;
    double beta = tg * lmax;
    auto [m1, m2] = certificate_margins(d.W_x, d.r_xu, P, Q, d.sys.Gamma_w, mu, beta);
    if (m1 >= -1e-6 && m2 > 0.0) return Certificate{mu, beta};
  }
  return std::nullopt;
}

void require_buildable(const DesignArtifacts& d) {
  if (!(d.r_x > 0.0 && d.r_u > 0.0 && d.r_xu > 0.0))
    throw std::invalid_argument("design invalid: nonpositive inscribed radius");
  if (!(d.rho > 0.0)) throw std::invalid_argument("design invalid: nonpositive rho");
  if (d.rho > d.r_xu)
    throw std::invalid_argument("design invalid: rho exceeds r_xu");
  if (!(d.lambda > 0.0 && d.lambda < 1.0))
    throw std::invalid_argument("design invalid: lambda outside (0,1)");
  if (d.N < 1) throw std::invalid_argument("design invalid: N < 1");
  if (!(d.eta > 0.0)) throw std::invalid_argument("design invalid: eta must be positive");
  for (int l = 1; l <= d.N - 1; ++l) {
    double tight = prs_radius(d.rho, d.lambda, l);
    if (!(d.r_x - tight > 0.0) || !(d.r_u - tight > 0.0))
      throw std::invalid_argument("design invalid: tightened stage set empty");
  }
  if (!(d.r_xu - prs_radius(d.rho, d.lambda, d.N) > 0.0))
    throw std::invalid_argument("design invalid: tightened terminal set empty");
}

DesignOutput design_pipeline(const DesignInputs& in) {
  const int n = in.sys.n();
  const int m = in.sys.m();
  if (in.X.dim() != n) throw std::invalid_argument("state polytope dimension mismatch");
  if (in.U.dim() != m) throw std::invalid_argument("input polytope dimension mismatch");
  if (in.N < 1) throw std::invalid_argument("N must be >= 1");
  if (!(in.eta > 0.0)) throw std::invalid_argument("eta must be positive");

  LqrResult lqr = solve_lqr(in.sys, in.Q, in.R);
  double rho = rho_from_eps(in.eps, n, in.family);

  // Singular or zero noise makes the shape fixed point degenerate; a hair of
  // isotropic regularization keeps W_x positive definite while leaving the
  // tightening at floating-point-noise scale.
  MatrixXd Gw_eff = in.sys.Gamma_w;
  {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Gw_eff, Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff();
    double hi = es.eigenvalues().maxCoeff();
    if (lo <= 1e-12 * std::max(hi, 1.0))
      Gw_eff += std::max(1e-12, 1e-12 * hi) * MatrixXd::Identity(n, n);
  }
  LinearSystem sys_eff(in.sys.A, in.sys.B, Gw_eff);

  double lambda;
  MatrixXd W_x;
  if (in.W_x) {
    if (!in.lambda)
      throw std::invalid_argument("W_x override requires an explicit lambda");
    if (in.W_x->rows() != n || in.W_x->cols() != n)
      throw std::invalid_argument("W_x override has wrong dimensions");
    Ellipsoid check(*in.W_x, 1.0);  // symmetry / definiteness validation
    W_x = *in.W_x;
    lambda = *in.lambda;
    if (!(lambda > 0.0 && lambda < 1.0))
      throw std::invalid_argument("lambda must lie in (0,1)");
  } else if (in.lambda) {
    lambda = *in.lambda;
    W_x = design_shape(sys_eff, lqr.A_K, lambda);
  } else {
    LambdaChoice pick = select_lambda(sys_eff, lqr, in.X, in.U, in.eps, in.family,
                                      in.N, in.grid_size);
    lambda = pick.lambda;
    W_x = pick.W_x;
  }

  MatrixXd W_u = design_input_shape(lqr.K, W_x);
  double r_x = inscribed_radius(W_x, in.X);
  double r_u = inscribed_radius(W_u, in.U);
  double r_xu = std::min(r_x, r_u);

  DesignArtifacts d{in.sys,  in.X, in.U, in.Q, in.R, lqr,     W_x,
                    W_u,     lambda, rho, r_x, r_u,  r_xu,    in.eps,
                    in.eta,  in.N,  in.family, std::nullopt};
  d.certificate = certify_convergence(d, lqr.P, in.Q);

  try {
    require_buildable(d);
  } catch (const std::invalid_argument& e) {
    throw design_error(std::string("design infeasible: ") + e.what());
  }
  ValidationReport rep = verify_design(d);
  return DesignOutput{std::move(d), std::move(rep)};
}

}  // namespace smpc
