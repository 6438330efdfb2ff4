#include "smpc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace smpc {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw config_error(where + ": " + what);
}

const json& member(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) fail(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(where, std::string("missing key \"") + key + "\"");
  return *it;
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) fail(where, "unknown key \"" + it.key() + "\"");
  }
}

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  const long long v = j.get<long long>();
  if (v < -2147483648LL || v > 2147483647LL) fail(where, "integer out of range");
  return static_cast<int>(v);
}

uint64_t as_seed(const json& j, const std::string& where) {
  if (j.is_number_unsigned()) return j.get<uint64_t>();
  if (j.is_number_integer()) {
    const long long v = j.get<long long>();
    if (v >= 0) return static_cast<uint64_t>(v);
  }
  fail(where, "expected a non-negative integer");
}

VectorXd as_vector(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "expected a non-empty array of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = as_number(j[i], where);
  }
  return v;
}

MatrixXd as_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "expected a non-empty array of rows");
  if (!j[0].is_array() || j[0].empty()) fail(where, "rows must be non-empty arrays");
  const std::size_t cols = j[0].size();
  MatrixXd M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const json& row = j[r];
    if (!row.is_array() || row.size() != cols) fail(where, "rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) {
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          as_number(row[c], where);
    }
  }
  return M;
}

NoiseFamily parse_family(const std::string& s, const std::string& where) {
  if (s == "gaussian") return NoiseFamily::gaussian;
  if (s == "generic") return NoiseFamily::generic;
  fail(where, "family must be \"gaussian\" or \"generic\" (got \"" + s + "\")");
}

const char* family_name(NoiseFamily f) {
  return f == NoiseFamily::gaussian ? "gaussian" : "generic";
}

json parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw config_error("invalid JSON in " + path + ": " + e.what());
  }
}

void put_vector(std::string& out, const VectorXd& v) {
  out += '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v(i));
  }
  out += ']';
}

void put_matrix(std::string& out, const MatrixXd& M) {
  out += '[';
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    if (r) out += ", ";
    out += '[';
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      if (c) out += ", ";
      out += format_double(M(r, c));
    }
    out += ']';
  }
  out += ']';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (!std::isfinite(v)) {
    throw std::runtime_error("cannot serialize non-finite value");
  }
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

Strategy parse_strategy(const std::string& s) {
  if (s == "A" || s == "a") return Strategy::A;
  if (s == "B" || s == "b") return Strategy::B;
  if (s == "C" || s == "c") return Strategy::C;
  throw config_error("strategy must be A, B, or C (got \"" + s + "\")");
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::A: return "A";
    case Strategy::B: return "B";
    default: return "C";
  }
}

RunConfig load_config(const std::string& path) {
  const json root = parse_file(path);
  if (!root.is_object()) throw config_error(path + ": top level must be an object");
  check_keys(root, "config", {"system", "constraints", "weights", "design", "sim"});

  const json& jsys = member(root, "system", "config");
  check_keys(jsys, "system", {"A", "B", "Gamma_w"});
  MatrixXd A = as_matrix(member(jsys, "A", "system"), "system.A");
  MatrixXd B = as_matrix(member(jsys, "B", "system"), "system.B");
  MatrixXd Gw = as_matrix(member(jsys, "Gamma_w", "system"), "system.Gamma_w");
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();

  const json& jcon = member(root, "constraints", "config");
  check_keys(jcon, "constraints", {"Hx", "hx", "Hu", "hu"});
  MatrixXd Hx = as_matrix(member(jcon, "Hx", "constraints"), "constraints.Hx");
  VectorXd hx = as_vector(member(jcon, "hx", "constraints"), "constraints.hx");
  MatrixXd Hu = as_matrix(member(jcon, "Hu", "constraints"), "constraints.Hu");
  VectorXd hu = as_vector(member(jcon, "hu", "constraints"), "constraints.hu");
  if (Hx.cols() != n) fail("constraints.Hx", "column count must match the state dimension");
  if (Hu.cols() != m) fail("constraints.Hu", "column count must match the input dimension");

  const json& jw = member(root, "weights", "config");
  check_keys(jw, "weights", {"Q", "R"});
  MatrixXd Q = as_matrix(member(jw, "Q", "weights"), "weights.Q");
  MatrixXd R = as_matrix(member(jw, "R", "weights"), "weights.R");
  if (Q.rows() != n || Q.cols() != n) fail("weights.Q", "must be n x n");
  if (R.rows() != m || R.cols() != m) fail("weights.R", "must be m x m");

  const json& jd = member(root, "design", "config");
  check_keys(jd, "design", {"lambda", "eps", "eta", "N", "family", "W_x", "strategy"});
  double eps = 0.1;
  double eta = 1e5;
  int N = 10;
  NoiseFamily family = NoiseFamily::gaussian;
  std::optional<double> lambda;
  std::optional<MatrixXd> W_x;
  Strategy strategy = Strategy::A;
  if (jd.contains("eps")) eps = as_number(jd["eps"], "design.eps");
  if (eps <= 0.0 || eps >= 1.0) fail("design.eps", "must lie strictly between 0 and 1");
  if (jd.contains("eta")) eta = as_number(jd["eta"], "design.eta");
  if (eta <= 0.0) fail("design.eta", "must be positive");
  if (jd.contains("N")) N = as_int(jd["N"], "design.N");
  if (N < 1) fail("design.N", "must be at least 1");
  if (jd.contains("family")) {
    if (!jd["family"].is_string()) fail("design.family", "expected a string");
    family = parse_family(jd["family"].get<std::string>(), "design.family");
  }
  if (jd.contains("lambda")) {
    lambda = as_number(jd["lambda"], "design.lambda");
    if (*lambda <= 0.0 || *lambda >= 1.0) {
      fail("design.lambda", "must lie strictly between 0 and 1");
    }
  }
  if (jd.contains("W_x")) {
    W_x = as_matrix(jd["W_x"], "design.W_x");
    if (W_x->rows() != n || W_x->cols() != n) fail("design.W_x", "must be n x n");
    if (!lambda) fail("design.W_x", "an explicit shape requires design.lambda as well");
  }
  if (jd.contains("strategy")) {
    if (!jd["strategy"].is_string()) fail("design.strategy", "expected a string");
    strategy = parse_strategy(jd["strategy"].get<std::string>());
  }

  SimSettings sim;
  if (root.contains("sim")) {
    const json& js = root["sim"];
    check_keys(js, "sim", {"horizon", "episodes", "seed", "x0"});
    if (js.contains("horizon")) sim.horizon = as_int(js["horizon"], "sim.horizon");
    if (sim.horizon < 1) fail("sim.horizon", "must be at least 1");
    if (js.contains("episodes")) sim.episodes = as_int(js["episodes"], "sim.episodes");
    if (sim.episodes < 1) fail("sim.episodes", "must be at least 1");
    if (js.contains("seed")) sim.seed = as_seed(js["seed"], "sim.seed");
    if (js.contains("x0")) {
      const json& jx = js["x0"];
      if (!jx.is_array()) fail("sim.x0", "expected an array of state vectors");
      for (const json& entry : jx) {
        VectorXd x0 = as_vector(entry, "sim.x0");
        if (x0.size() != n) fail("sim.x0", "entries must match the state dimension");
        sim.x0s.push_back(std::move(x0));
      }
    }
  }

  try {
    return RunConfig{
        DesignInputs{LinearSystem(std::move(A), std::move(B), std::move(Gw)),
                     Polytope(std::move(Hx), std::move(hx)),
                     Polytope(std::move(Hu), std::move(hu)), std::move(Q),
                     std::move(R), eps, eta, N, family, lambda, std::move(W_x)},
        strategy, std::move(sim)};
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string(e.what()));
  }
}

void save_design(const std::string& path, const DesignArtifacts& d,
                 const ValidationReport& rep) {
  std::string s;
  s.reserve(8192);
  s += "{\n  \"system\": {\n    \"A\": ";
  put_matrix(s, d.sys.A);
  s += ",\n    \"B\": ";
  put_matrix(s, d.sys.B);
  s += ",\n    \"Gamma_w\": ";
  put_matrix(s, d.sys.Gamma_w);
  s += "\n  },\n  \"constraints\": {\n    \"Hx\": ";
  put_matrix(s, d.X.H);
  s += ",\n    \"hx\": ";
  put_vector(s, d.X.h);
  s += ",\n    \"Hu\": ";
  put_matrix(s, d.U.H);
  s += ",\n    \"hu\": ";
  put_vector(s, d.U.h);
  s += "\n  },\n  \"weights\": {\n    \"Q\": ";
  put_matrix(s, d.Q);
  s += ",\n    \"R\": ";
  put_matrix(s, d.R);
  s += "\n  },\n  \"design\": {\n    \"lambda\": ";
  s += format_double(d.lambda);
  s += ",\n    \"eps\": ";
  s += format_double(d.eps);
  s += ",\n    \"eta\": ";
  s += format_double(d.eta);
  s += ",\n    \"N\": ";
  s += std::to_string(d.N);
  s += ",\n    \"family\": \"";
  s += family_name(d.family);
  s += "\"\n  },\n  \"artifacts\": {\n    \"K\": ";
  put_matrix(s, d.lqr.K);
  s += ",\n    \"P\": ";
  put_matrix(s, d.lqr.P);
  s += ",\n    \"A_K\": ";
  put_matrix(s, d.lqr.A_K);
  s += ",\n    \"W_x\": ";
  put_matrix(s, d.W_x);
  s += ",\n    \"W_u\": ";
  put_matrix(s, d.W_u);
  s += ",\n    \"rho\": ";
  s += format_double(d.rho);
  s += ",\n    \"r_x\": ";
  s += format_double(d.r_x);
  s += ",\n    \"r_u\": ";
  s += format_double(d.r_u);
  s += ",\n    \"r_xu\": ";
  s += format_double(d.r_xu);
  s += ",\n    \"certificate\": ";
  if (d.certificate) {
    s += "{\"mu\": " + format_double(d.certificate->mu) +
         ", \"beta\": " + format_double(d.certificate->beta) + "}";
  } else {
    s += "null";
  }
  s += "\n  },\n  \"report\": [\n";
  for (std::size_t i = 0; i < rep.checks.size(); ++i) {
    const CheckResult& c = rep.checks[i];
    s += "    {\"name\": \"" + c.name + "\", \"pass\": " + (c.pass ? "true" : "false") +
         ", \"margin\": " + format_double(c.margin) + "}";
    if (i + 1 < rep.checks.size()) s += ',';
    s += '\n';
  }
  s += "  ]\n}\n";

  auto out = open_out(path);
  out << s;
  out.flush();
  if (!out) throw std::runtime_error("failed writing design file: " + path);
}

LoadedDesign load_design(const std::string& path) {
  const json root = parse_file(path);
  if (!root.is_object()) throw config_error(path + ": top level must be an object");
  check_keys(root, "design file",
             {"system", "constraints", "weights", "design", "artifacts", "report"});

  const json& jsys = member(root, "system", "design file");
  MatrixXd A = as_matrix(member(jsys, "A", "system"), "system.A");
  MatrixXd B = as_matrix(member(jsys, "B", "system"), "system.B");
  MatrixXd Gw = as_matrix(member(jsys, "Gamma_w", "system"), "system.Gamma_w");

  const json& jcon = member(root, "constraints", "design file");
  MatrixXd Hx = as_matrix(member(jcon, "Hx", "constraints"), "constraints.Hx");
  VectorXd hx = as_vector(member(jcon, "hx", "constraints"), "constraints.hx");
  MatrixXd Hu = as_matrix(member(jcon, "Hu", "constraints"), "constraints.Hu");
  VectorXd hu = as_vector(member(jcon, "hu", "constraints"), "constraints.hu");

  const json& jw = member(root, "weights", "design file");
  MatrixXd Q = as_matrix(member(jw, "Q", "weights"), "weights.Q");
  MatrixXd R = as_matrix(member(jw, "R", "weights"), "weights.R");

  const json& jd = member(root, "design", "design file");
  const double lambda = as_number(member(jd, "lambda", "design"), "design.lambda");
  const double eps = as_number(member(jd, "eps", "design"), "design.eps");
  const double eta = as_number(member(jd, "eta", "design"), "design.eta");
  const int N = as_int(member(jd, "N", "design"), "design.N");
  const json& jfam = member(jd, "family", "design");
  if (!jfam.is_string()) fail("design.family", "expected a string");
  const NoiseFamily family = parse_family(jfam.get<std::string>(), "design.family");

  const json& ja = member(root, "artifacts", "design file");
  MatrixXd K = as_matrix(member(ja, "K", "artifacts"), "artifacts.K");
  MatrixXd P = as_matrix(member(ja, "P", "artifacts"), "artifacts.P");
  MatrixXd AK = as_matrix(member(ja, "A_K", "artifacts"), "artifacts.A_K");
  MatrixXd Wx = as_matrix(member(ja, "W_x", "artifacts"), "artifacts.W_x");
  MatrixXd Wu = as_matrix(member(ja, "W_u", "artifacts"), "artifacts.W_u");
  const double rho = as_number(member(ja, "rho", "artifacts"), "artifacts.rho");
  const double r_x = as_number(member(ja, "r_x", "artifacts"), "artifacts.r_x");
  const double r_u = as_number(member(ja, "r_u", "artifacts"), "artifacts.r_u");
  const double r_xu = as_number(member(ja, "r_xu", "artifacts"), "artifacts.r_xu");
  std::optional<Certificate> cert;
  const json& jc = member(ja, "certificate", "artifacts");
  if (!jc.is_null()) {
    cert = Certificate{as_number(member(jc, "mu", "certificate"), "certificate.mu"),
                       as_number(member(jc, "beta", "certificate"), "certificate.beta")};
  }

  ValidationReport rep;
  const json& jr = member(root, "report", "design file");
  if (!jr.is_array()) fail("report", "expected an array");
  for (const json& entry : jr) {
    const json& jname = member(entry, "name", "report entry");
    if (!jname.is_string()) fail("report entry", "name must be a string");
    const json& jpass = member(entry, "pass", "report entry");
    if (!jpass.is_boolean()) fail("report entry", "pass must be a boolean");
    rep.checks.push_back({jname.get<std::string>(), jpass.get<bool>(),
                          as_number(member(entry, "margin", "report entry"),
                                    "report entry margin")});
  }

  try {
    return LoadedDesign{
        DesignArtifacts{LinearSystem(std::move(A), std::move(B), std::move(Gw)),
                        Polytope(std::move(Hx), std::move(hx)),
                        Polytope(std::move(Hu), std::move(hu)), std::move(Q),
                        std::move(R),
                        LqrResult{std::move(K), std::move(P), std::move(AK)},
                        std::move(Wx), std::move(Wu), lambda, rho, r_x, r_u, r_xu,
                        eps, eta, N, family, cert},
        std::move(rep)};
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string(e.what()));
  }
}

void write_trajectories_csv(const std::string& path,
                            const std::vector<EpisodeTrace>& traces, int n, int m) {
  auto out = open_out(path);
  out << "episode,k";
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  for (int i = 1; i <= m; ++i) out << ",u" << i;
  out << ",gamma_x,gamma_u,mode,stage_cost\n";
  for (std::size_t e = 0; e < traces.size(); ++e) {
    const EpisodeTrace& tr = traces[e];
    const int steps = static_cast<int>(tr.u.size());
    for (int k = 0; k <= steps; ++k) {
      out << e << ',' << k;
      for (int i = 0; i < n; ++i) out << ',' << format_double(tr.x[k](i));
      if (k < steps) {
        for (int i = 0; i < m; ++i) out << ',' << format_double(tr.u[k](i));
        out << ',' << format_double(tr.gamma_x[k]) << ','
            << format_double(tr.gamma_u[k]) << ','
            << (tr.mode[k] == 's' ? "shifted" : "measured") << ','
            << format_double(tr.stage_cost[k]);
      } else {
        // final-state row: input and per-step columns stay empty
        for (int i = 0; i < m + 4; ++i) out << ',';
      }
      out << '\n';
    }
  }
}

void write_summary_csv(const std::string& path, const std::string& controller,
                       int horizon, const McSummary& s) {
  auto out = open_out(path);
  out << "controller,episodes,horizon,mean_J,std_J,failures\n";
  out << controller << ',' << s.episodes << ',' << horizon << ','
      << format_double(s.mean_J) << ',' << format_double(s.std_J) << ','
      << s.failures << '\n';
}

void write_bounds_csv(const std::string& path,
                      const std::vector<BoundTableRow>& rows) {
  auto out = open_out(path);
  out << "l,p_x,p_u,f_x,f_u\n";
  for (const BoundTableRow& r : rows) {
    out << r.ell << ',' << format_double(r.p_x) << ',' << format_double(r.p_u) << ',';
    if (r.f_x_available) out << format_double(r.f_x);
    out << ',';
    if (r.f_u_available) out << format_double(r.f_u);
    out << '\n';
  }
}

void write_histogram_csv(const std::string& path, const Histogram& h) {
  auto out = open_out(path);
  out << "bin_left,bin_right,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out << format_double(h.edges[i]) << ',' << format_double(h.edges[i + 1]) << ','
        << h.counts[i] << '\n';
  }
}

void write_compare_csv(const std::string& path, const std::vector<ComparePair>& rows) {
  auto out = open_out(path);
  out << "episode,J_ms,J_is,ratio\n";
  for (const ComparePair& r : rows) {
    const double ratio = (r.J_is == 0.0 && r.J_ms == 0.0) ? 1.0 : r.J_ms / r.J_is;
    out << r.episode << ',' << format_double(r.J_ms) << ',' << format_double(r.J_is)
        << ',' << format_double(ratio) << '\n';
  }
}

namespace {

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// Axis-aligned viewport mapping with the usual flipped SVG y axis.
struct ViewMap {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  double left = 0, top = 0, w = 1, h = 1;
  double X(double x) const { return left + (x - xmin) / (xmax - xmin) * w; }
  double Y(double y) const { return top + (ymax - y) / (ymax - ymin) * h; }
};

// Boundary of {x : x' W^{-1} x <= r^2} restricted to the first two coordinates.
std::vector<std::pair<double, double>> ellipse_outline(const MatrixXd& W, double r,
                                                       int segments) {
  Eigen::Matrix2d W2 = W.topLeftCorner(2, 2);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(W2);
  Eigen::Matrix2d L = es.eigenvectors() *
                      es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                      es.eigenvectors().transpose();
  std::vector<std::pair<double, double>> pts;
  pts.reserve(segments + 1);
  for (int i = 0; i <= segments; ++i) {
    const double th = 2.0 * M_PI * i / segments;
    const Eigen::Vector2d p = r * (L * Eigen::Vector2d(std::cos(th), std::sin(th)));
    pts.emplace_back(p(0), p(1));
  }
  return pts;
}

void append_polyline(std::string& s, const std::vector<std::pair<double, double>>& pts,
                     const ViewMap& vm, const char* style) {
  s += "<polyline fill=\"none\" ";
  s += style;
  s += " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) s += ' ';
    s += px(vm.X(pts[i].first)) + "," + px(vm.Y(pts[i].second));
  }
  s += "\"/>\n";
}

}  // namespace

void write_report_svg(const std::string& path, const DesignArtifacts& d,
                      const McSummary& summary,
                      const std::vector<EpisodeTrace>& traces) {
  const int n = static_cast<int>(d.sys.A.rows());
  const double width = 980, height = 520;
  const std::size_t shown = std::min<std::size_t>(traces.size(), 20);

  std::string s;
  s.reserve(1 << 16);
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"980\" height=\"520\" "
       "viewBox=\"0 0 980 520\" font-family=\"sans-serif\">\n";
  s += "<rect width=\"" + px(width) + "\" height=\"" + px(height) +
       "\" fill=\"#ffffff\"/>\n";
  s += "<text x=\"20\" y=\"28\" font-size=\"16\" fill=\"#222\">Closed-loop report</text>\n";
  s += "<text x=\"20\" y=\"48\" font-size=\"12\" fill=\"#555\">mean J = " +
       label(summary.mean_J) + ", std = " + label(summary.std_J) + ", episodes = " +
       std::to_string(summary.episodes) + ", failures = " +
       std::to_string(summary.failures) + "</text>\n";

  // Left panel: state trajectories against the design ellipsoids. For state
  // dimension above two this is the projection onto the first two coordinates;
  // a scalar state is drawn against the step index instead.
  const ViewMap frame{0, 1, 0, 1, 30, 70, 440, 400};
  s += "<rect x=\"" + px(frame.left) + "\" y=\"" + px(frame.top) + "\" width=\"" +
       px(frame.w) + "\" height=\"" + px(frame.h) +
       "\" fill=\"#fafafa\" stroke=\"#999\"/>\n";

  if (n >= 2) {
    auto outer = ellipse_outline(d.W_x, d.r_x, 128);
    auto inner = ellipse_outline(d.W_x, d.r_xu, 128);
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    auto grow = [&](double x, double y) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    };
    for (const auto& p : outer) grow(p.first, p.second);
    for (std::size_t e = 0; e < shown; ++e) {
      for (const VectorXd& x : traces[e].x) grow(x(0), x(1));
    }
    const double padx = 0.08 * std::max(xmax - xmin, 1e-9);
    const double pady = 0.08 * std::max(ymax - ymin, 1e-9);
    ViewMap vm{xmin - padx, xmax + padx, ymin - pady, ymax + pady,
               frame.left + 8, frame.top + 8, frame.w - 16, frame.h - 16};

    append_polyline(s, outer, vm, "stroke=\"#444\" stroke-width=\"1.5\"");
    append_polyline(s, inner, vm,
                    "stroke=\"#444\" stroke-width=\"1\" stroke-dasharray=\"5,4\"");
    for (std::size_t e = 0; e < shown; ++e) {
      std::vector<std::pair<double, double>> pts;
      pts.reserve(traces[e].x.size());
      for (const VectorXd& x : traces[e].x) pts.emplace_back(x(0), x(1));
      append_polyline(s, pts, vm,
                      "stroke=\"#4682b4\" stroke-width=\"1\" stroke-opacity=\"0.55\"");
    }
    if (shown > 0 && !traces[0].x.empty()) {
      s += "<circle cx=\"" + px(vm.X(traces[0].x[0](0))) + "\" cy=\"" +
           px(vm.Y(traces[0].x[0](1))) + "\" r=\"3\" fill=\"#c0392b\"/>\n";
    }
    s += "<text x=\"" + px(frame.left + 4) + "\" y=\"" + px(frame.top + frame.h + 18) +
         "\" font-size=\"12\" fill=\"#555\">x1 vs x2, solid outline r_x, dashed "
         "r_xu</text>\n";
  } else {
    // Scalar state: time series with the +-r_x band of the shape.
    const double band = d.r_x * std::sqrt(std::max(d.W_x(0, 0), 0.0));
    double ymin = -band, ymax = band;
    int kmax = 1;
    for (std::size_t e = 0; e < shown; ++e) {
      kmax = std::max(kmax, static_cast<int>(traces[e].x.size()) - 1);
      for (const VectorXd& x : traces[e].x) {
        ymin = std::min(ymin, x(0));
        ymax = std::max(ymax, x(0));
      }
    }
    const double pady = 0.08 * std::max(ymax - ymin, 1e-9);
    ViewMap vm{0, double(kmax), ymin - pady, ymax + pady,
               frame.left + 8, frame.top + 8, frame.w - 16, frame.h - 16};
    for (double lev : {band, -band}) {
      s += "<line x1=\"" + px(vm.X(0)) + "\" y1=\"" + px(vm.Y(lev)) + "\" x2=\"" +
           px(vm.X(kmax)) + "\" y2=\"" + px(vm.Y(lev)) +
           "\" stroke=\"#444\" stroke-dasharray=\"5,4\"/>\n";
    }
    for (std::size_t e = 0; e < shown; ++e) {
      std::vector<std::pair<double, double>> pts;
      for (std::size_t k = 0; k < traces[e].x.size(); ++k) {
        pts.emplace_back(double(k), traces[e].x[k](0));
      }
      append_polyline(s, pts, vm,
                      "stroke=\"#4682b4\" stroke-width=\"1\" stroke-opacity=\"0.55\"");
    }
    s += "<text x=\"" + px(frame.left + 4) + "\" y=\"" + px(frame.top + frame.h + 18) +
         "\" font-size=\"12\" fill=\"#555\">x1 vs step, dashed band r_x</text>\n";
  }

  // Right panel: histogram of realized episode costs.
  const ViewMap hframe{0, 1, 0, 1, 520, 70, 430, 400};
  s += "<rect x=\"" + px(hframe.left) + "\" y=\"" + px(hframe.top) + "\" width=\"" +
       px(hframe.w) + "\" height=\"" + px(hframe.h) +
       "\" fill=\"#fafafa\" stroke=\"#999\"/>\n";
  const Histogram& hist = summary.hist;
  if (hist.counts.empty()) {
    s += "<text x=\"" + px(hframe.left + hframe.w / 2 - 40) + "\" y=\"" +
         px(hframe.top + hframe.h / 2) +
         "\" font-size=\"12\" fill=\"#555\">no episodes</text>\n";
  } else {
    int cmax = 1;
    for (int c : hist.counts) cmax = std::max(cmax, c);
    const double inset = 10;
    const double bw = (hframe.w - 2 * inset) / hist.counts.size();
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
      const double bh = (hframe.h - 2 * inset) * hist.counts[i] / double(cmax);
      if (bh <= 0) continue;
      s += "<rect x=\"" + px(hframe.left + inset + i * bw) + "\" y=\"" +
           px(hframe.top + hframe.h - inset - bh) + "\" width=\"" +
           px(std::max(bw - 1.0, 0.5)) + "\" height=\"" + px(bh) +
           "\" fill=\"#4682b4\"/>\n";
    }
    s += "<text x=\"" + px(hframe.left + 4) + "\" y=\"" +
         px(hframe.top + hframe.h + 18) + "\" font-size=\"12\" fill=\"#555\">J from " +
         label(hist.edges.front()) + " to " + label(hist.edges.back()) +
         ", peak count " + std::to_string(cmax) + "</text>\n";
  }

  s += "</svg>\n";

  auto out = open_out(path);
  out << s;
  out.flush();
  if (!out) throw std::runtime_error("failed writing report: " + path);
}

}  // namespace smpc
