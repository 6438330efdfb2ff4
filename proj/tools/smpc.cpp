// Command-line front end: offline design, single-step solves, Monte-Carlo
// campaigns, paired controller comparison, and bound tables.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "smpc/baseline.hpp"
#include "smpc/controller.hpp"
#include "smpc/io.hpp"
#include "smpc/offline.hpp"
#include "smpc/sim.hpp"

namespace fs = std::filesystem;
using namespace smpc;

namespace {

VectorXd parse_x0(const std::string& text) {
  std::vector<double> vals;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t next = text.find(',', pos);
    const std::string item =
        text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0') {
      throw config_error("cannot parse --x0 component \"" + item + "\"");
    }
    vals.push_back(v);
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (vals.empty()) throw config_error("--x0 must list at least one number");
  VectorXd x(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) x(static_cast<Eigen::Index>(i)) = vals[i];
  return x;
}

std::string vec_str(const VectorXd& v) {
  std::string s;
  char buf[40];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    std::snprintf(buf, sizeof(buf), "%.10g", v(i));
    s += buf;
  }
  return s;
}

void print_report(const ValidationReport& rep) {
  std::printf("report:\n");
  for (const CheckResult& c : rep.checks) {
    std::printf("  [%s] %-22s margin=% .6e\n", c.pass ? "ok  " : "FAIL",
                c.name.c_str(), c.margin);
  }
}

void require_state_dim(const VectorXd& x0, const DesignArtifacts& d) {
  if (x0.size() != d.sys.A.rows()) {
    throw config_error("--x0 has " + std::to_string(x0.size()) +
                       " components, the design expects " +
                       std::to_string(d.sys.A.rows()));
  }
}

int run_design(const std::string& config_path, const std::string& out_path) {
  const RunConfig cfg = load_config(config_path);
  const DesignOutput out = design_pipeline(cfg.design);
  save_design(out_path, out.artifacts, out.report);
  const DesignArtifacts& d = out.artifacts;
  std::printf("design written to %s\n", out_path.c_str());
  std::printf("lambda=%.10g rho=%.10g r_x=%.10g r_u=%.10g r_xu=%.10g N=%d\n",
              d.lambda, d.rho, d.r_x, d.r_u, d.r_xu, d.N);
  print_report(out.report);
  if (d.certificate) {
    std::printf("certificate: mu=%.10g beta=%.10g\n", d.certificate->mu,
                d.certificate->beta);
  } else {
    std::printf("certificate: none found on the search grid\n");
  }
  return 0;
}

int run_solve(const std::string& design_path, const std::string& x0_text,
              const std::string& controller, const std::string& strategy_text) {
  const LoadedDesign ld = load_design(design_path);
  const VectorXd x0 = parse_x0(x0_text);
  require_state_dim(x0, ld.artifacts);
  if (controller == "ms") {
    const Strategy s = parse_strategy(strategy_text);
    const auto [u, sol] = control_step(ld.artifacts, x0, s);
    std::printf("controller=ms strategy=%s status=optimal\n",
                strategy_name(s).c_str());
    std::printf("gamma_x=%.10g gamma_u=%.10g t=%.10g\n", sol.gamma_x, sol.gamma_u,
                sol.t);
    std::printf("J_pred=%.10g J_total=%.10g\n", sol.J_p, sol.J_total);
    std::printf("u0=(%s)\n", vec_str(u).c_str());
  } else if (controller == "is") {
    DualModeState st;
    const IsStep step = is_smpc_step(ld.artifacts, x0, st);
    std::printf("controller=is mode=%s status=optimal\n",
                step.shifted ? "shifted" : "measured");
    std::printf("J_pred=%.10g\n", step.sol.J_p);
    std::printf("u0=(%s)\n", vec_str(step.u).c_str());
  } else {
    throw config_error("--controller must be ms or is (got \"" + controller + "\")");
  }
  return 0;
}

struct CampaignArgs {
  VectorXd x0;
  Strategy strategy = Strategy::A;
  int horizon = 10;
  int episodes = 1000;
  uint64_t seed = 1;
};

// Flags win over the config block, which wins over the built-in defaults.
CampaignArgs resolve_campaign(const DesignArtifacts& d, const std::string& config_path,
                              const CLI::Option* o_x0, const std::string& x0_text,
                              const CLI::Option* o_strategy,
                              const std::string& strategy_text,
                              const CLI::Option* o_horizon, int horizon,
                              const CLI::Option* o_episodes, int episodes,
                              const CLI::Option* o_seed, uint64_t seed) {
  CampaignArgs a;
  SimSettings sim;
  if (!config_path.empty()) {
    const RunConfig cfg = load_config(config_path);
    sim = cfg.sim;
    a.strategy = cfg.strategy;
  }
  a.horizon = o_horizon->count() ? horizon : sim.horizon;
  a.episodes = o_episodes->count() ? episodes : sim.episodes;
  a.seed = o_seed->count() ? seed : sim.seed;
  if (o_strategy->count()) a.strategy = parse_strategy(strategy_text);
  if (a.horizon < 1) throw config_error("--horizon must be at least 1");
  if (a.episodes < 1) throw config_error("--episodes must be at least 1");
  if (o_x0->count()) {
    a.x0 = parse_x0(x0_text);
  } else if (!sim.x0s.empty()) {
    a.x0 = sim.x0s.front();
  } else {
    throw config_error("no initial state: pass --x0 or a config with sim.x0");
  }
  require_state_dim(a.x0, d);
  return a;
}

int run_simulate(const LoadedDesign& ld, const CampaignArgs& a,
                 const std::string& controller, int threads,
                 const std::string& out_dir) {
  const DesignArtifacts& d = ld.artifacts;
  ControllerKind ck;
  if (controller == "ms") {
    ck = {ControllerKind::ms, a.strategy};
  } else if (controller == "is") {
    ck = {ControllerKind::is, a.strategy};
    if (!is_ocp_feasible(d, a.x0)) {
      throw initial_infeasibility("the baseline problem is infeasible from x0 = (" +
                                  vec_str(a.x0) + ")");
    }
  } else {
    throw config_error("--controller must be ms or is (got \"" + controller + "\")");
  }

  const McResult res = monte_carlo(d, ck, a.x0, a.horizon, a.episodes, a.seed, threads);
  fs::create_directories(out_dir);
  const fs::path base(out_dir);
  const int n = static_cast<int>(d.sys.A.rows());
  const int m = static_cast<int>(d.sys.B.cols());
  write_trajectories_csv((base / "trajectories.csv").string(), res.traces, n, m);
  write_summary_csv((base / "summary.csv").string(), controller, a.horizon,
                    res.summary);
  write_bounds_csv((base / "bounds.csv").string(), res.summary.bounds);
  write_histogram_csv((base / "histogram.csv").string(), res.summary.hist);
  write_report_svg((base / "report.svg").string(), d, res.summary, res.traces);

  std::printf("controller=%s strategy=%s x0=(%s) horizon=%d episodes=%d seed=%llu\n",
              controller.c_str(), strategy_name(a.strategy).c_str(),
              vec_str(a.x0).c_str(), a.horizon, a.episodes,
              static_cast<unsigned long long>(a.seed));
  std::printf("mean_J=%.10g std_J=%.10g failures=%d\n", res.summary.mean_J,
              res.summary.std_J, res.summary.failures);
  std::printf(
      "wrote %s/trajectories.csv, summary.csv, bounds.csv, histogram.csv, "
      "report.svg\n",
      out_dir.c_str());
  return 0;
}

int run_compare(const LoadedDesign& ld, const CampaignArgs& a, int threads,
                const std::string& out_dir) {
  const DesignArtifacts& d = ld.artifacts;
  if (!is_ocp_feasible(d, a.x0)) {
    throw initial_infeasibility("the baseline problem is infeasible from x0 = (" +
                                vec_str(a.x0) + ")");
  }
  // Identical seeds give both controllers the same noise stream per episode.
  const McResult ms =
      monte_carlo(d, {ControllerKind::ms, a.strategy}, a.x0, a.horizon, a.episodes,
                  a.seed, threads);
  const McResult is_ =
      monte_carlo(d, {ControllerKind::is, a.strategy}, a.x0, a.horizon, a.episodes,
                  a.seed, threads);
  if (ms.summary.failures > 0 || is_.summary.failures > 0) {
    throw std::runtime_error("episodes failed mid-run; paired comparison undefined");
  }

  std::vector<ComparePair> rows;
  rows.reserve(ms.traces.size());
  double ratio_sum = 0.0;
  for (std::size_t e = 0; e < ms.traces.size(); ++e) {
    rows.push_back({static_cast<int>(e), ms.traces[e].J, is_.traces[e].J});
    ratio_sum += ms.traces[e].J / is_.traces[e].J;
  }
  fs::create_directories(out_dir);
  const std::string csv = (fs::path(out_dir) / "compare.csv").string();
  write_compare_csv(csv, rows);

  const double ratio_of_means = ms.summary.mean_J / is_.summary.mean_J;
  std::printf("episodes=%d horizon=%d x0=(%s)\n", a.episodes, a.horizon,
              vec_str(a.x0).c_str());
  std::printf(
      "mean_J_ms=%.10g mean_J_is=%.10g ratio_of_means=%.6f mean_episode_ratio=%.6f\n",
      ms.summary.mean_J, is_.summary.mean_J, ratio_of_means,
      ratio_sum / double(rows.size()));
  std::printf("wrote %s\n", csv.c_str());
  return 0;
}

int run_bounds(const LoadedDesign& ld, const CampaignArgs& a, int threads,
               const std::string& out_dir) {
  const DesignArtifacts& d = ld.artifacts;
  const McResult res = monte_carlo(d, {ControllerKind::ms, a.strategy}, a.x0,
                                   a.horizon, a.episodes, a.seed, threads);
  if (res.summary.bounds.empty()) {
    throw std::runtime_error("no bound table: the step-0 problem did not solve");
  }
  std::printf("  l      p_x      p_u      f_x      f_u\n");
  for (const BoundTableRow& r : res.summary.bounds) {
    char fx[16] = "     -", fu[16] = "     -";
    if (r.f_x_available) std::snprintf(fx, sizeof(fx), "%6.4f", r.f_x);
    if (r.f_u_available) std::snprintf(fu, sizeof(fu), "%6.4f", r.f_u);
    std::printf("%3d   %6.4f   %6.4f   %s   %s\n", r.ell, r.p_x, r.p_u, fx, fu);
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    const std::string csv = (fs::path(out_dir) / "bounds.csv").string();
    write_bounds_csv(csv, res.summary.bounds);
    std::printf("wrote %s\n", csv.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"measured-state tube MPC toolkit"};
  app.require_subcommand(1);

  std::string config_path, design_path, x0_text;
  std::string controller = "ms", strategy_text = "A";
  std::string out_design = "design.json", out_sim = "out", out_cmp = ".", out_bnd;
  int episodes = 1000, horizon = 10, threads = 0;
  uint64_t seed = 1;

  CLI::App* c_design = app.add_subcommand("design", "run the offline design pipeline");
  c_design->add_option("--config", config_path, "run configuration JSON")->required();
  c_design->add_option("--out", out_design, "design output path (default design.json)");

  CLI::App* c_solve = app.add_subcommand("solve", "solve one step from a given state");
  c_solve->add_option("--design", design_path, "design JSON from the design command")
      ->required();
  c_solve->add_option("--x0", x0_text, "initial state, comma separated")->required();
  c_solve->add_option("--controller", controller, "ms or is (default ms)");
  c_solve->add_option("--strategy", strategy_text, "A, B, or C (default A)");

  CLI::App* c_sim = app.add_subcommand("simulate", "closed-loop Monte-Carlo campaign");
  c_sim->add_option("--design", design_path, "design JSON")->required();
  c_sim->add_option("--config", config_path, "optional config for sim defaults");
  c_sim->add_option("--controller", controller, "ms or is (default ms)");
  CLI::Option* sim_strategy = c_sim->add_option("--strategy", strategy_text);
  CLI::Option* sim_x0 = c_sim->add_option("--x0", x0_text, "initial state");
  CLI::Option* sim_eps = c_sim->add_option("--episodes", episodes);
  CLI::Option* sim_hor = c_sim->add_option("--horizon", horizon);
  CLI::Option* sim_seed = c_sim->add_option("--seed", seed);
  c_sim->add_option("--threads", threads, "worker threads, 0 = all");
  c_sim->add_option("--out", out_sim, "output directory (default out)");

  CLI::App* c_cmp = app.add_subcommand("compare", "paired comparison of both controllers");
  c_cmp->add_option("--design", design_path, "design JSON")->required();
  c_cmp->add_option("--config", config_path, "optional config for sim defaults");
  CLI::Option* cmp_strategy = c_cmp->add_option("--strategy", strategy_text);
  CLI::Option* cmp_x0 = c_cmp->add_option("--x0", x0_text, "initial state");
  CLI::Option* cmp_eps = c_cmp->add_option("--episodes", episodes);
  CLI::Option* cmp_hor = c_cmp->add_option("--horizon", horizon);
  CLI::Option* cmp_seed = c_cmp->add_option("--seed", seed);
  c_cmp->add_option("--threads", threads, "worker threads, 0 = all");
  c_cmp->add_option("--out", out_cmp, "output directory (default .)");

  CLI::App* c_bnd = app.add_subcommand("bounds", "chance-constraint bound table");
  c_bnd->add_option("--design", design_path, "design JSON")->required();
  CLI::Option* bnd_x0 = c_bnd->add_option("--x0", x0_text, "initial state")->required();
  CLI::Option* bnd_strategy = c_bnd->add_option("--strategy", strategy_text);
  CLI::Option* bnd_eps = c_bnd->add_option("--episodes", episodes);
  CLI::Option* bnd_hor = c_bnd->add_option("--horizon", horizon);
  CLI::Option* bnd_seed = c_bnd->add_option("--seed", seed);
  c_bnd->add_option("--threads", threads, "worker threads, 0 = all");
  c_bnd->add_option("--out", out_bnd, "optional output directory for bounds.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_design->parsed()) return run_design(config_path, out_design);
    if (c_solve->parsed()) {
      return run_solve(design_path, x0_text, controller, strategy_text);
    }
    if (c_sim->parsed()) {
      const LoadedDesign ld = load_design(design_path);
      const CampaignArgs a = resolve_campaign(
          ld.artifacts, config_path, sim_x0, x0_text, sim_strategy, strategy_text,
          sim_hor, horizon, sim_eps, episodes, sim_seed, seed);
      return run_simulate(ld, a, controller, threads, out_sim);
    }
    if (c_cmp->parsed()) {
      const LoadedDesign ld = load_design(design_path);
      const CampaignArgs a = resolve_campaign(
          ld.artifacts, config_path, cmp_x0, x0_text, cmp_strategy, strategy_text,
          cmp_hor, horizon, cmp_eps, episodes, cmp_seed, seed);
      return run_compare(ld, a, threads, out_cmp);
    }
    if (c_bnd->parsed()) {
      const LoadedDesign ld = load_design(design_path);
      const CampaignArgs a = resolve_campaign(ld.artifacts, "", bnd_x0, x0_text,
                                              bnd_strategy, strategy_text, bnd_hor,
                                              horizon, bnd_eps, episodes, bnd_seed,
                                              seed);
      return run_bounds(ld, a, threads, out_bnd);
    }
  } catch (const config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const design_error& e) {
    std::fprintf(stderr, "design error: %s\n", e.what());
    return 2;
  } catch (const initial_infeasibility& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
