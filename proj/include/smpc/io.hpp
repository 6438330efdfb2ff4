#pragma once

#include <string>
#include <vector>

#include "smpc/offline.hpp"
#include "smpc/sim.hpp"

namespace smpc {

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimSettings {
  int horizon = 10;
  int episodes = 1000;
  uint64_t seed = 1;
  std::vector<VectorXd> x0s;
};

struct RunConfig {
  DesignInputs design;
  Strategy strategy = Strategy::A;
  SimSettings sim;
};

// JSON config with blocks system{A,B,Gamma_w}, constraints{Hx,hx,Hu,hu},
// weights{Q,R}, design{lambda?,eps,eta,N,family,W_x?,strategy?}, sim{horizon,
// episodes,seed,x0}. Schema violations raise config_error.
RunConfig load_config(const std::string& path);

// Design JSON: every artifact field plus the validation report, doubles at
// 17 significant digits so reloading is bit-exact.
void save_design(const std::string& path, const DesignArtifacts& d,
                 const ValidationReport& rep);

struct LoadedDesign {
  DesignArtifacts artifacts;
  ValidationReport report;
};

LoadedDesign load_design(const std::string& path);

std::string format_double(double v);  // %.17g

Strategy parse_strategy(const std::string& s);
std::string strategy_name(Strategy s);

// trajectories.csv: episode,k,x1..xn,u1..um,gamma_x,gamma_u,mode,stage_cost;
// one row per step plus a final-state row with the trailing columns empty.
void write_trajectories_csv(const std::string& path,
                            const std::vector<EpisodeTrace>& traces, int n, int m);

// summary.csv: controller,episodes,horizon,mean_J,std_J,failures.
void write_summary_csv(const std::string& path, const std::string& controller,
                       int horizon, const McSummary& s);

// bounds.csv: l,p_x,p_u,f_x,f_u (empty cell when a frequency has no data at
// that step).
void write_bounds_csv(const std::string& path,
                      const std::vector<BoundTableRow>& rows);

// histogram.csv: bin_left,bin_right,count.
void write_histogram_csv(const std::string& path, const Histogram& h);

// compare.csv: episode,J_ms,J_is,ratio.
struct ComparePair {
  int episode;
  double J_ms, J_is;
};
void write_compare_csv(const std::string& path, const std::vector<ComparePair>& rows);

// Static report: cost histogram plus, for two-dimensional states, a phase
// portrait of the first trajectories with the design ellipsoids outlined.
void write_report_svg(const std::string& path, const DesignArtifacts& d,
                      const McSummary& summary,
                      const std::vector<EpisodeTrace>& traces);

}  // namespace smpc
