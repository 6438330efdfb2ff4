#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "smpc/lqr.hpp"
#include "smpc/model.hpp"

namespace smpc {

enum class NoiseFamily { generic, gaussian };

// Convergence certificate pair: mean-square bound parameters with
// E{||x||^2} asymptotically limited by beta / mu (up to the usual constants).
struct Certificate {
  double mu;
  double beta;
};

// Everything the online controller needs, produced once offline.
struct DesignArtifacts {
  LinearSystem sys;
  Polytope X;  // state constraints
  Polytope U;  // input constraints
  MatrixXd Q;
  MatrixXd R;
  LqrResult lqr;
  MatrixXd W_x;  // PRS shape, n x n PD
  MatrixXd W_u;  // input shape K W_x K', m x m PD
  double lambda = 0.0;
  double rho = 0.0;  // probability radius
  double r_x = 0.0;
  double r_u = 0.0;
  double r_xu = 0.0;
  double eps = 0.0;
  double eta = 0.0;  // relaxation penalty weight
  int N = 0;         // prediction horizon
  NoiseFamily family = NoiseFamily::gaussian;
  std::optional<Certificate> certificate;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  double margin = 0.0;  // min eigenvalue for matrix checks, scalar slack otherwise
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  bool all_pass() const;
  const CheckResult* find(const std::string& name) const;
};

// Thrown when no usable design exists for the given data (as opposed to
// malformed inputs, which raise std::invalid_argument).
class design_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Probability radius for violation level eps: Chebyshev sqrt(n/eps) for the
// generic family, chi-squared inverse CDF (bisection to 1e-10) for gaussian.
double rho_from_eps(double eps, int n, NoiseFamily family);

// Fixed point of W = (1/lambda^2) A_K W A_K' + (1/(1-lambda)^2) Gamma_w,
// iterated from Gamma_w/(1-lambda)^2 to relative tolerance 1e-12. Requires
// lambda strictly between the closed-loop spectral radius and 1.
MatrixXd design_shape(const LinearSystem& sys, const MatrixXd& A_K, double lambda);

struct LambdaChoice {
  double lambda;
  MatrixXd W_x;
  double margin;  // terminal margin r_xu - rho (1 - lambda^N) at the winner
};

// Grid search over lambda in (spectral_radius(A_K)+1e-3, 1-1e-3) maximizing
// the terminal margin r_xu - rho (1 - lambda^N), subject to rho <= r_xu and
// the lower bound on rho; ties resolved toward the smallest lambda.
LambdaChoice select_lambda(const LinearSystem& sys, const LqrResult& lqr,
                           const Polytope& X, const Polytope& U, double eps,
                           NoiseFamily family, int N, int grid_size = 200);

// W_u = K W_x K' (regularized by 1e-12 I when multi-input and singular).
MatrixXd design_input_shape(const MatrixXd& K, const MatrixXd& W_x);

// Named checks with margins: contraction and noise-domination eigenvalue
// conditions on W_x, the input-shape condition, rho <= r_xu, the lower bound
// on rho, and per-step nonemptiness of the tightened sets for l in 1..N.
// Reports, never throws.
ValidationReport verify_design(const DesignArtifacts& d);

// Margins of the two certificate matrix inequalities at a given (mu, beta):
// first:  (Q - mu P)/tr(P Gamma_w) - W_x^{-1}/r_xu^2  (min eigenvalue)
// second: mu P / beta - W_x^{-1}/r_xu^2               (min eigenvalue)
std::pair<double, double> certificate_margins(const MatrixXd& W_x, double r_xu,
                                              const MatrixXd& P, const MatrixXd& Q,
                                              const MatrixXd& Gamma_w, double mu,
                                              double beta);

// Scans mu over i/2001, i = 1..2000; for each mu with Q - mu P positive
// definite computes beta = tr(P Gamma_w) * max eigenvalue of (Q-mu P)^{-1} P
// and returns the first pair passing both inequalities above (first margin
// >= -1e-6, second strictly positive). tr(P Gamma_w) <= 0 yields no
// certificate.
std::optional<Certificate> certify_convergence(const DesignArtifacts& d,
                                               const MatrixXd& P, const MatrixXd& Q);

// Tube radius at prediction step ell: rho (1 - lambda^ell).
double prs_radius(double rho, double lambda, int ell);

struct DesignInputs {
  LinearSystem sys;
  Polytope X;
  Polytope U;
  MatrixXd Q;
  MatrixXd R;
  double eps = 0.1;
  double eta = 1e5;
  int N = 10;
  NoiseFamily family = NoiseFamily::gaussian;
  std::optional<double> lambda;    // fixed contraction rate, else grid-searched
  std::optional<MatrixXd> W_x;     // externally supplied shape (requires lambda)
  int grid_size = 200;
};

struct DesignOutput {
  DesignArtifacts artifacts;
  ValidationReport report;
};

// Full offline pipeline: LQR, shape selection, radii, certificate, report.
// Throws design_error when the tightened problem would be structurally empty
// (rho > r_xu, or some stage set vanishes); soft check failures are only
// recorded in the report.
DesignOutput design_pipeline(const DesignInputs& in);

// The structural conditions build_ocp needs; throws std::invalid_argument
// naming the first violated one.
void require_buildable(const DesignArtifacts& d);

}  // namespace smpc
