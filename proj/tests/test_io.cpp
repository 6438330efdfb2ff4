#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "json.hpp"
#include "smpc/io.hpp"

using namespace smpc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& temp_dir() {
  static const fs::path p = [] {
    const auto tick = std::chrono::steady_clock::now().time_since_epoch().count();
    fs::path dir = fs::temp_directory_path() / ("smpc_io_" + std::to_string(tick));
    fs::create_directories(dir);
    return dir;
  }();
  return p;
}

std::string temp_file(const std::string& name) { return (temp_dir() / name).string(); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

json base_config() {
  return json{
      {"system",
       {{"A", {{1, 1}, {0, 1}}}, {"B", {{0.5}, {1}}},
        {"Gamma_w", {{0.1, 0.05}, {0.05, 0.1}}}}},
      {"constraints",
       {{"Hx", {{1, 0}, {-1, 0}, {0, 1}, {0, -1}}},
        {"hx", {40, 40, 40, 40}},
        {"Hu", {{1}, {-1}}},
        {"hu", {10, 10}}}},
      {"weights", {{"Q", {{1, 0}, {0, 1}}}, {"R", {{10}}}}},
      {"design",
       {{"lambda", 0.7503},
        {"eps", 0.1},
        {"eta", 100000.0},
        {"N", 10},
        {"family", "gaussian"},
        {"W_x", {{10.9264, -3.7386}, {-3.7386, 3.8143}}},
        {"strategy", "A"}}},
      {"sim",
       {{"horizon", 10}, {"episodes", 1000}, {"seed", 1},
        {"x0", {{-40, 40}, {-30, 0}}}}}};
}

std::string config_with(const json& j, const std::string& name) {
  const std::string path = temp_file(name);
  write_file(path, j.dump(2));
  return path;
}

const DesignOutput& benchmark_output() {
  static const DesignOutput out = [] {
    MatrixXd A(2, 2), B(2, 1), Gw(2, 2), Q(2, 2), R(1, 1), Hx(4, 2), Hu(2, 1);
    A << 1, 1, 0, 1;
    B << 0.5, 1;
    Gw << 0.1, 0.05, 0.05, 0.1;
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
    return design_pipeline(in);
  }();
  return out;
}

bool same(const MatrixXd& a, const MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a - b).cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace

TEST_CASE("doubles survive the trip through text") {
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5) == "-2.5");
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0 / 3.0) == "0.33333333333333331");
  CHECK(format_double(-0.0) == "-0");

  for (double v : {0.1, 1.0 / 3.0, 1e300, -7.25, 2.2250738585072014e-308}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK_THROWS_AS(format_double(std::numeric_limits<double>::quiet_NaN()),
                  std::runtime_error);
  CHECK_THROWS_AS(format_double(std::numeric_limits<double>::infinity()),
                  std::runtime_error);
}

TEST_CASE("strategy names parse both ways") {
  CHECK(parse_strategy("A") == Strategy::A);
  CHECK(parse_strategy("b") == Strategy::B);
  CHECK(parse_strategy("C") == Strategy::C);
  for (Strategy s : {Strategy::A, Strategy::B, Strategy::C}) {
    CHECK(parse_strategy(strategy_name(s)) == s);
  }
  CHECK_THROWS_AS(parse_strategy("D"), config_error);
}

TEST_CASE("config loader reads the full schema") {
  const RunConfig cfg = load_config(config_with(base_config(), "full.json"));

  CHECK(cfg.design.sys.n() == 2);
  CHECK(cfg.design.sys.m() == 1);
  CHECK(cfg.design.sys.A(0, 1) == 1.0);
  CHECK(cfg.design.X.rows() == 4);
  CHECK(cfg.design.U.h(0) == 10.0);
  CHECK(cfg.design.Q(1, 1) == 1.0);
  CHECK(cfg.design.R(0, 0) == 10.0);
  CHECK(cfg.design.eps == 0.1);
  CHECK(cfg.design.eta == 100000.0);
  CHECK(cfg.design.N == 10);
  CHECK(cfg.design.family == NoiseFamily::gaussian);
  REQUIRE(cfg.design.lambda.has_value());
  CHECK(*cfg.design.lambda == 0.7503);
  REQUIRE(cfg.design.W_x.has_value());
  CHECK((*cfg.design.W_x)(0, 0) == 10.9264);
  CHECK(cfg.strategy == Strategy::A);
  CHECK(cfg.sim.horizon == 10);
  CHECK(cfg.sim.episodes == 1000);
  CHECK(cfg.sim.seed == 1);
  REQUIRE(cfg.sim.x0s.size() == 2);
  CHECK(cfg.sim.x0s[0](0) == -40.0);
  CHECK(cfg.sim.x0s[1](1) == 0.0);

  SUBCASE("optional blocks fall back to defaults") {
    json j = base_config();
    j["design"].erase("lambda");
    j["design"].erase("W_x");
    j["design"].erase("strategy");
    j["design"].erase("eps");
    j["design"].erase("eta");
    j.erase("sim");
    const RunConfig c = load_config(config_with(j, "minimal.json"));
    CHECK_FALSE(c.design.lambda.has_value());
    CHECK_FALSE(c.design.W_x.has_value());
    CHECK(c.design.eps == 0.1);
    CHECK(c.design.eta == 1e5);
    CHECK(c.strategy == Strategy::A);
    CHECK(c.sim.horizon == 10);
    CHECK(c.sim.episodes == 1000);
    CHECK(c.sim.seed == 1);
    CHECK(c.sim.x0s.empty());
  }
}

TEST_CASE("schema violations raise the config error") {
  auto rejects = [](json j, const char* name) {
    CHECK_THROWS_AS(load_config(config_with(j, name)), config_error);
  };

  SUBCASE("broken json text") {
    const std::string path = temp_file("broken.json");
    write_file(path, "{nope");
    CHECK_THROWS_AS(load_config(path), config_error);
    CHECK_THROWS_AS(load_config(temp_file("missing_file.json")), config_error);
  }
  SUBCASE("wrong top level shape") {
    const std::string path = temp_file("toplevel.json");
    write_file(path, "[1,2,3]");
    CHECK_THROWS_AS(load_config(path), config_error);
  }
  SUBCASE("unknown keys anywhere") {
    json j = base_config();
    j["extra"] = 1;
    rejects(j, "extra_top.json");
    j = base_config();
    j["design"]["typo"] = 2;
    rejects(j, "extra_design.json");
  }
  SUBCASE("missing blocks") {
    json j = base_config();
    j.erase("system");
    rejects(j, "no_system.json");
    j = base_config();
    j["system"].erase("Gamma_w");
    rejects(j, "no_gw.json");
  }
  SUBCASE("scalar ranges") {
    json j = base_config();
    j["design"]["eps"] = 1.5;
    rejects(j, "eps.json");
    j = base_config();
    j["design"]["eta"] = 0.0;
    rejects(j, "eta.json");
    j = base_config();
    j["design"]["N"] = 0;
    rejects(j, "N.json");
    j = base_config();
    j["design"]["lambda"] = 1.2;
    rejects(j, "lambda.json");
    j = base_config();
    j["sim"]["horizon"] = 0;
    rejects(j, "horizon.json");
    j = base_config();
    j["sim"]["seed"] = -1;
    rejects(j, "seed.json");
  }
  SUBCASE("names and enums") {
    json j = base_config();
    j["design"]["family"] = "cauchy";
    rejects(j, "family.json");
    j = base_config();
    j["design"]["strategy"] = "D";
    rejects(j, "strategy.json");
  }
  SUBCASE("shape mismatches") {
    json j = base_config();
    j["design"].erase("lambda");  // W_x still present
    rejects(j, "wx_no_lambda.json");
    j = base_config();
    j["constraints"]["Hx"] = {{1, 0, 0}, {0, 1, 0}};
    rejects(j, "hx_cols.json");
    j = base_config();
    j["weights"]["Q"] = {{1}};
    rejects(j, "q_dims.json");
    j = base_config();
    j["sim"]["x0"] = {{1, 2, 3}};
    rejects(j, "x0_dims.json");
    j = base_config();
    j["system"]["A"] = {{1, 2}, {3}};
    rejects(j, "ragged.json");
  }
}

TEST_CASE("design files reload bit for bit") {
  const DesignOutput& out = benchmark_output();
  const std::string p1 = temp_file("design1.json");
  const std::string p2 = temp_file("design2.json");

  save_design(p1, out.artifacts, out.report);
  const LoadedDesign back = load_design(p1);

  CHECK(same(back.artifacts.sys.A, out.artifacts.sys.A));
  CHECK(same(back.artifacts.sys.B, out.artifacts.sys.B));
  CHECK(same(back.artifacts.sys.Gamma_w, out.artifacts.sys.Gamma_w));
  CHECK(same(back.artifacts.X.H, out.artifacts.X.H));
  CHECK(same(back.artifacts.U.H, out.artifacts.U.H));
  CHECK(same(back.artifacts.Q, out.artifacts.Q));
  CHECK(same(back.artifacts.R, out.artifacts.R));
  CHECK(same(back.artifacts.lqr.K, out.artifacts.lqr.K));
  CHECK(same(back.artifacts.lqr.P, out.artifacts.lqr.P));
  CHECK(same(back.artifacts.lqr.A_K, out.artifacts.lqr.A_K));
  CHECK(same(back.artifacts.W_x, out.artifacts.W_x));
  CHECK(same(back.artifacts.W_u, out.artifacts.W_u));
  CHECK(back.artifacts.lambda == out.artifacts.lambda);
  CHECK(back.artifacts.rho == out.artifacts.rho);
  CHECK(back.artifacts.r_x == out.artifacts.r_x);
  CHECK(back.artifacts.r_u == out.artifacts.r_u);
  CHECK(back.artifacts.r_xu == out.artifacts.r_xu);
  CHECK(back.artifacts.eps == out.artifacts.eps);
  CHECK(back.artifacts.eta == out.artifacts.eta);
  CHECK(back.artifacts.N == out.artifacts.N);
  CHECK(back.artifacts.family == out.artifacts.family);
  REQUIRE(back.artifacts.certificate.has_value() ==
          out.artifacts.certificate.has_value());
  if (out.artifacts.certificate) {
    CHECK(back.artifacts.certificate->mu == out.artifacts.certificate->mu);
    CHECK(back.artifacts.certificate->beta == out.artifacts.certificate->beta);
  }
  REQUIRE(back.report.checks.size() == out.report.checks.size());
  for (std::size_t i = 0; i < out.report.checks.size(); ++i) {
    CHECK(back.report.checks[i].name == out.report.checks[i].name);
    CHECK(back.report.checks[i].pass == out.report.checks[i].pass);
    CHECK(back.report.checks[i].margin == out.report.checks[i].margin);
  }

  save_design(p2, back.artifacts, back.report);
  CHECK(read_file(p1) == read_file(p2));

  SUBCASE("tampered design files are rejected") {
    json j = json::parse(read_file(p1));
    j.erase("artifacts");
    const std::string bad = temp_file("design_bad.json");
    write_file(bad, j.dump(2));
    CHECK_THROWS_AS(load_design(bad), config_error);

    json j2 = json::parse(read_file(p1));
    j2["artifacts"]["certificate"] = "yes";
    const std::string bad2 = temp_file("design_bad2.json");
    write_file(bad2, j2.dump(2));
    CHECK_THROWS_AS(load_design(bad2), config_error);
  }
}

TEST_CASE("trajectory csv layout is exact") {
  EpisodeTrace tr;
  VectorXd x0(2), x1(2), u0(1);
  x0 << 1, 2;
  x1 << 3, 4;
  u0 << 5;
  tr.x = {x0, x1};
  tr.u = {u0};
  tr.gamma_x = {1.0};
  tr.gamma_u = {1.5};
  tr.mode = {'m'};
  tr.status = {SolveStatus::optimal};
  tr.stage_cost = {7.0};
  tr.J = 7.0;

  const std::string path = temp_file("traj.csv");
  write_trajectories_csv(path, {tr}, 2, 1);
  CHECK(read_file(path) ==
        "episode,k,x1,x2,u1,gamma_x,gamma_u,mode,stage_cost\n"
        "0,0,1,2,5,1,1.5,measured,7\n"
        "0,1,3,4,,,,,\n");

  SUBCASE("shifted steps are labeled") {
    tr.mode = {'s'};
    write_trajectories_csv(path, {tr}, 2, 1);
    CHECK(read_file(path).find(",shifted,") != std::string::npos);
  }
}

TEST_CASE("summary csv layout is exact") {
  McSummary s;
  s.mean_J = 2.5;
  s.std_J = 0.25;
  s.episodes = 4;
  s.failures = 1;
  const std::string path = temp_file("summary.csv");
  write_summary_csv(path, "ms_A", 6, s);
  CHECK(read_file(path) ==
        "controller,episodes,horizon,mean_J,std_J,failures\n"
        "ms_A,4,6,2.5,0.25,1\n");
}

TEST_CASE("bounds csv blanks cells with no data") {
  BoundTableRow full;
  full.ell = 1;
  full.p_x = 0.5;
  full.p_u = 0.25;
  full.f_x = 1.0;
  full.f_u = 0.75;
  BoundTableRow no_u = full;
  no_u.ell = 2;
  no_u.f_u_available = false;
  BoundTableRow none = full;
  none.ell = 3;
  none.f_x_available = false;
  none.f_u_available = false;

  const std::string path = temp_file("bounds.csv");
  write_bounds_csv(path, {full, no_u, none});
  CHECK(read_file(path) ==
        "l,p_x,p_u,f_x,f_u\n"
        "1,0.5,0.25,1,0.75\n"
        "2,0.5,0.25,1,\n"
        "3,0.5,0.25,,\n");
}

TEST_CASE("histogram and comparison csv layouts are exact") {
  Histogram h;
  h.edges = {0.0, 1.0, 2.0};
  h.counts = {3, 4};
  const std::string hp = temp_file("hist.csv");
  write_histogram_csv(hp, h);
  CHECK(read_file(hp) == "bin_left,bin_right,count\n0,1,3\n1,2,4\n");

  const std::string cp = temp_file("compare.csv");
  write_compare_csv(cp, {{0, 10.0, 20.0}, {1, 0.0, 0.0}});
  CHECK(read_file(cp) ==
        "episode,J_ms,J_is,ratio\n"
        "0,10,20,0.5\n"
        "1,0,0,1\n");
}

TEST_CASE("campaign output is byte stable across runs") {
  const DesignArtifacts& d = benchmark_output().artifacts;
  const ControllerKind ck{ControllerKind::ms, Strategy::A};
  VectorXd x0(2);
  x0 << -30, 0;

  const McResult a = monte_carlo_serial(d, ck, x0, 4, 12, 9);
  const McResult b = monte_carlo_serial(d, ck, x0, 4, 12, 9);
  const std::string pa = temp_file("runA.csv");
  const std::string pb = temp_file("runB.csv");
  write_trajectories_csv(pa, a.traces, 2, 1);
  write_trajectories_csv(pb, b.traces, 2, 1);
  CHECK(read_file(pa) == read_file(pb));

  write_bounds_csv(pa, a.summary.bounds);
  write_bounds_csv(pb, b.summary.bounds);
  CHECK(read_file(pa) == read_file(pb));
}

TEST_CASE("report svg renders the campaign") {
  const DesignArtifacts& d = benchmark_output().artifacts;
  const ControllerKind ck{ControllerKind::ms, Strategy::A};
  VectorXd x0(2);
  x0 << -30, 0;
  const McResult mc = monte_carlo_serial(d, ck, x0, 3, 10, 2);

  const std::string path = temp_file("report.svg");
  write_report_svg(path, d, mc.summary, mc.traces);
  const std::string svg = read_file(path);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("<circle") != std::string::npos);

  SUBCASE("empty campaign still renders") {
    const std::string p2 = temp_file("report_empty.svg");
    write_report_svg(p2, d, McSummary{}, {});
    const std::string s2 = read_file(p2);
    CHECK(s2.find("no episodes") != std::string::npos);
    CHECK(s2.find("</svg>") != std::string::npos);
  }
}
