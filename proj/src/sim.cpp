#include "smpc/sim.hpp"

#include <cmath>
#include <optional>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace smpc {

namespace {

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

uint64_t splitmix(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(uint64_t seed, uint64_t stream_id)
    : base_(splitmix(splitmix(seed + kGolden) ^ (kGolden * (stream_id + 1)))) {}

uint64_t RngStream::next_u64() { return splitmix(base_ + kGolden * (++counter_)); }

double RngStream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double RngStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double th = 2.0 * M_PI * u2;
  spare_ = r * std::sin(th);
  has_spare_ = true;
  return r * std::cos(th);
}

VectorXd RngStream::noise(const MatrixXd& L) {
  VectorXd g(L.cols());
  for (int i = 0; i < g.size(); ++i) g(i) = gaussian();
  return L * g;
}

MatrixXd noise_factor(const MatrixXd& Gamma_w) {
  if (!is_symmetric(Gamma_w)) throw std::invalid_argument("Gamma_w must be symmetric");
  const int n = static_cast<int>(Gamma_w.rows());
  if (Gamma_w.cwiseAbs().maxCoeff() == 0.0) return MatrixXd::Zero(n, n);
  Eigen::LLT<MatrixXd> llt(Gamma_w);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Gamma_w);
  if (es.info() != Eigen::Success) throw std::runtime_error("noise factorization failed");
  VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

EpisodeTrace run_episode(const DesignArtifacts& d, ControllerKind ck,
                         const VectorXd& x0, int horizon, RngStream rng) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (x0.size() != d.sys.n()) throw std::invalid_argument("x0 dimension mismatch");
  const MatrixXd L = noise_factor(d.sys.Gamma_w);

  EpisodeTrace tr;
  tr.x.reserve(horizon + 1);
  tr.x.push_back(x0);
  DualModeState dual;
  VectorXd x = x0;
  for (int k = 0; k < horizon; ++k) {
    VectorXd u;
    double gx = 1.0, gu = 1.0;
    char mode = 'm';
    SolveStatus status;
    try {
      if (ck.type == ControllerKind::ms) {
        auto [uk, sol] = control_step(d, x, ck.strategy);
        u = uk;
        gx = sol.gamma_x;
        gu = sol.gamma_u;
        status = sol.status;
      } else {
        IsStep step = is_smpc_step(d, x, dual);
        u = step.u;
        mode = step.shifted ? 's' : 'm';
        status = step.sol.status;
      }
    } catch (const initial_infeasibility& e) {
      throw initial_infeasibility("step " + std::to_string(k) + ": " + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error("step " + std::to_string(k) + ": " + e.what());
    }
    double stage = x.dot(d.Q * x) + u.dot(d.R * u);
    VectorXd w = rng.noise(L);
    x = simulate_step(d.sys, x, u, w);
    tr.x.push_back(x);
    tr.u.push_back(u);
    tr.gamma_x.push_back(gx);
    tr.gamma_u.push_back(gu);
    tr.stage_cost.push_back(stage);
    tr.mode.push_back(mode);
    tr.status.push_back(status);
    tr.J += stage;
  }
  return tr;
}

std::vector<BoundTableRow> bound_table(const std::vector<EpisodeTrace>& traces,
                                       const OcpSolution& sol0,
                                       const DesignArtifacts& d) {
  std::vector<BoundRow> pred = aposteriori_bounds(sol0, d);
  const Ellipsoid Ex(d.W_x, d.r_x);
  const Ellipsoid Eu(d.W_u, d.r_u);
  std::vector<BoundTableRow> rows;
  rows.reserve(pred.size());
  for (const auto& pr : pred) {
    BoundTableRow row;
    row.ell = pr.ell;
    row.p_x = pr.p_x;
    row.p_u = pr.p_u;
    const int l = pr.ell;
    int in_x = 0, in_u = 0, in_px = 0, in_pu = 0, nx = 0, nu = 0;
    for (const auto& tr : traces) {
      if (l < static_cast<int>(tr.x.size())) {
        ++nx;
        if (ellipsoid_contains(Ex, tr.x[l])) ++in_x;
        if (((d.X.H * tr.x[l]).array() <= d.X.h.array()).all()) ++in_px;
      }
      if (l < static_cast<int>(tr.u.size())) {
        ++nu;
        if (ellipsoid_contains(Eu, tr.u[l])) ++in_u;
        if (((d.U.H * tr.u[l]).array() <= d.U.h.array()).all()) ++in_pu;
      }
    }
    row.f_x_available = nx > 0;
    row.f_u_available = nu > 0;
    row.f_x = nx > 0 ? static_cast<double>(in_x) / nx : 0.0;
    row.f_u = nu > 0 ? static_cast<double>(in_u) / nu : 0.0;
    row.f_poly_x = nx > 0 ? static_cast<double>(in_px) / nx : 0.0;
    row.f_poly_u = nu > 0 ? static_cast<double>(in_pu) / nu : 0.0;
    rows.push_back(row);
  }
  return rows;
}

namespace {

McResult reduce_campaign(const DesignArtifacts& d, ControllerKind ck,
                         const VectorXd& x0,
                         std::vector<std::optional<EpisodeTrace>>& slots) {
  McResult out;
  out.summary.episodes = static_cast<int>(slots.size());
  for (auto& s : slots) {
    if (s)
      out.traces.push_back(std::move(*s));
    else
      ++out.summary.failures;
  }

  const int ok = static_cast<int>(out.traces.size());
  double mean = 0.0, sq = 0.0;
  for (const auto& tr : out.traces) mean += tr.J;
  if (ok > 0) mean /= ok;
  for (const auto& tr : out.traces) sq += (tr.J - mean) * (tr.J - mean);
  out.summary.mean_J = ok > 0 ? mean : 0.0;
  out.summary.std_J = ok > 1 ? std::sqrt(sq / (ok - 1)) : 0.0;

  // Step-0 plan for the predicted-bound columns; skipped when unavailable
  // (e.g. the baseline infeasible at x0).
  try {
    OcpSolution sol0;
    if (ck.type == ControllerKind::ms) {
      sol0 = solve_ocp(d, x0, ck.strategy);
    } else {
      DualModeState st;
      sol0 = is_smpc_step(d, x0, st).sol;
    }
    if (sol0.status == SolveStatus::optimal)
      out.summary.bounds = bound_table(out.traces, sol0, d);
  } catch (const std::exception&) {
    out.summary.bounds = {};
  }

  // Histogram of episode costs, 30 equal-width bins.
  const int nbins = 30;
  if (ok > 0) {
    double lo = out.traces.front().J, hi = lo;
    for (const auto& tr : out.traces) {
      lo = std::min(lo, tr.J);
      hi = std::max(hi, tr.J);
    }
    double width = (hi - lo) / nbins;
    if (width <= 0.0) width = std::max(1e-12, std::abs(hi) * 1e-12 + 1e-12);
    out.summary.hist.edges.resize(nbins + 1);
    for (int b = 0; b <= nbins; ++b) out.summary.hist.edges[b] = lo + b * width;
    out.summary.hist.counts.assign(nbins, 0);
    for (const auto& tr : out.traces) {
      int b = static_cast<int>((tr.J - lo) / width);
      b = std::min(std::max(b, 0), nbins - 1);
      ++out.summary.hist.counts[b];
    }
  }
  return out;
}

}  // namespace

McResult monte_carlo(const DesignArtifacts& d, ControllerKind ck, const VectorXd& x0,
                     int horizon, int episodes, uint64_t seed, int threads) {
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  std::vector<std::optional<EpisodeTrace>> slots(episodes);
#ifdef _OPENMP
  int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
  for (int ep = 0; ep < episodes; ++ep) {
    try {
      slots[ep] = run_episode(d, ck, x0, horizon, RngStream(seed, ep));
    } catch (const std::exception&) {
      slots[ep] = std::nullopt;
    }
  }
#else
  (void)threads;
  for (int ep = 0; ep < episodes; ++ep) {
    try {
      slots[ep] = run_episode(d, ck, x0, horizon, RngStream(seed, ep));
    } catch (const std::exception&) {
      slots[ep] = std::nullopt;
    }
  }
#endif
  return reduce_campaign(d, ck, x0, slots);
}

McResult monte_carlo_serial(const DesignArtifacts& d, ControllerKind ck,
                            const VectorXd& x0, int horizon, int episodes,
                            uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  std::vector<std::optional<EpisodeTrace>> slots(episodes);
  for (int ep = 0; ep < episodes; ++ep) {
    try {
      slots[ep] = run_episode(d, ck, x0, horizon, RngStream(seed, ep));
    } catch (const std::exception&) {
      slots[ep] = std::nullopt;
    }
  }
  return reduce_campaign(d, ck, x0, slots);
}

}  // namespace smpc
