#pragma once

// Configuration, orchestration and report output for the command line tool.
// Each command validates its whole configuration before computing, writes
// its payloads to the output directory and returns a process exit code:
// 0 for a completed run (verdicts are data), 1 for an internal
// inconsistency, 2 for a configuration error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "lingrow/barrier.hpp"
#include "lingrow/calculus.hpp"
#include "lingrow/error.hpp"
#include "lingrow/integrand.hpp"
#include "lingrow/mesh.hpp"
#include "lingrow/radial.hpp"
#include "lingrow/solver.hpp"

namespace lingrow::app {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------- output

/// Finite numbers as JSON numbers, infinities and NaN as null.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

class CsvWriter {
 public:
  explicit CsvWriter(const fs::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw Error(Errc::InvalidConfig, "cannot write " + path.string());
  }
  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_field(fields[i]);
    }
    out_ << "\r\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::InvalidConfig, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline json to_json(const DivergenceVerdict& v) {
  json j;
  j["verdict"] = std::string(to_string(v.verdict));
  j["tail_exponent_estimate"] = num(v.tail_exponent_estimate);
  json parts = json::array();
  for (const auto& [T, value] : v.partial_values) parts.push_back({num(T), num(value)});
  j["partial_values"] = parts;
  return j;
}

inline json to_json(const HypothesisReport& r) {
  json j;
  j["linear_growth"] = r.linear_growth;
  j["C1"] = num(r.C1);
  j["C2_growth"] = num(r.C2_growth);
  j["oscillation_bound"] = r.oscillation_bound;
  j["oscillation_bound_status"] = "verified on grid";
  j["C2_oscillation"] = num(r.C2_oscillation);
  j["criterion_A2"] = to_json(r.criterion_A2);
  j["normalization_A3"] = r.normalization_A3;
  j["R2_residual"] = num(r.R2_residual);
  j["R3_residual"] = num(r.R3_residual);
  j["bernstein_genre"] = num(r.bernstein_genre);
  j["regularly_elliptic"] = r.regularly_elliptic;
  return j;
}

inline json mesh_to_json(const Mesh& m) {
  json j;
  j["hash"] = m.hash();
  j["h"] = m.h;
  json v = json::array(), t = json::array(), b = json::array();
  for (const Point& p : m.vertices) v.push_back({p[0], p[1]});
  for (const auto& T : m.triangles) t.push_back({T[0], T[1], T[2]});
  for (char f : m.boundary) b.push_back(f ? 1 : 0);
  j["vertices"] = v;
  j["triangles"] = t;
  j["boundary"] = b;
  j["boundary_loops"] = m.boundary_loops;
  return j;
}

inline json field_to_json(const Mesh& m, const std::vector<double>& values, double eps) {
  json j;
  j["mesh_hash"] = m.hash();
  j["eps"] = eps;
  j["values"] = values;
  return j;
}

inline std::vector<std::string> sweep_header() {
  return {"eps", "energy", "sup_u", "sup_grad", "boundary_layer_ratio", "ae1", "newton_iters", "converged"};
}

inline std::vector<std::string> sweep_row(const SweepRecord& r) {
  return {csv_number(r.eps),          csv_number(r.energy),
          csv_number(r.sup_u),        csv_number(r.sup_grad),
          csv_number(r.boundary_layer_ratio), csv_number(r.ae1),
          std::to_string(r.newton_iters), r.converged ? "true" : "false"};
}

// ---------------------------------------------------------------- config

/// Reads values out of the config tree, naming the dotted key path in every
/// error so that the message identifies what is missing or malformed.
class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  Node at(const std::string& key) const {
    if (!has(key)) throw Error(Errc::InvalidConfig, "missing key '" + child(key) + "'");
    return Node((*j_)[key], child(key));
  }

  double number() const {
    if (!j_->is_number()) throw Error(Errc::InvalidConfig, "key '" + path_ + "' must be a number");
    return j_->get<double>();
  }
  double number(const std::string& key) const { return at(key).number(); }
  double number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::string str() const {
    if (!j_->is_string()) throw Error(Errc::InvalidConfig, "key '" + path_ + "' must be a string");
    return j_->get<std::string>();
  }
  std::string str(const std::string& key) const { return at(key).str(); }

  std::vector<double> numbers() const {
    if (!j_->is_array()) throw Error(Errc::InvalidConfig, "key '" + path_ + "' must be an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < j_->size(); ++i) out.push_back(Node((*j_)[i], path_ + "[" + std::to_string(i) + "]").number());
    return out;
  }

  const json& raw() const { return *j_; }
  const std::string& path() const { return path_; }

 private:
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json* j_;
  std::string path_;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::InvalidConfig, what);
}

struct IntegrandSpec {
  std::string family;
  double p = 0.0;
  fs::path csv;
  double far_grid_max = 1e8;
};

struct DomainSpec {
  Domain2D domain;
};

struct BoundarySpec {
  std::string kind;
  double value = 0.0;             // constant
  std::vector<double> k{0.0, 0.0};  // linear
  double c = 0.0;                 // linear
  double M = 0.0;                 // radial_gap
  fs::path table;                 // vertex_table
};

struct RunConfig {
  json echo;
  fs::path base_dir;
  std::optional<IntegrandSpec> integrand;
  std::optional<DomainSpec> domain;
  std::optional<BoundarySpec> boundary;
  std::vector<double> eps_list;
  double h_target = 0.0;
  double newton_tol = 1e-9;
  double radial_tol = 1e-10;
  std::uint64_t seed = 1;
  double barrier_K = -1.0;  // negative: use the gradient bound of u0
  int barrier_samples = 10000;
  int dimension = 2;
};

inline IntegrandSpec parse_integrand(const Node& n, const fs::path& base) {
  IntegrandSpec s;
  s.family = n.str("family");
  s.far_grid_max = n.number_or("far_grid_max", 1e8);
  require(s.far_grid_max > 1.0, "key 'integrand.far_grid_max' must exceed 1");
  if (s.family == "prototype") {
    s.p = n.number("p");
    require(s.p > 0.0, "key 'integrand.p' must be positive");
  } else if (s.family == "custom") {
    s.csv = base / n.str("csv");
    require(fs::exists(s.csv), "file for 'integrand.csv' not found: " + s.csv.string());
  } else {
    throw Error(Errc::InvalidConfig, "key 'integrand.family' must be 'prototype' or 'custom'");
  }
  return s;
}

inline DomainSpec parse_domain(const Node& n) {
  const std::string kind = n.str("kind");
  const Node params = n.at("params");
  try {
    if (kind == "disk") return {Domain2D::disk(params.number("radius"))};
    if (kind == "annulus") return {Domain2D::annulus(params.number("r_in"), params.number("r_out"))};
    if (kind == "convex_polygon") {
      const Node verts = params.at("vertices");
      require(verts.raw().is_array(), "key 'domain.params.vertices' must be an array");
      std::vector<Point> pts;
      for (std::size_t i = 0; i < verts.raw().size(); ++i) {
        const auto xy = Node(verts.raw()[i], verts.path() + "[" + std::to_string(i) + "]").numbers();
        require(xy.size() == 2, "polygon vertices need two coordinates");
        pts.push_back({xy[0], xy[1]});
      }
      return {Domain2D::polygon(pts, params.number_or("ball_radius", 1.0))};
    }
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidConfig) throw;
    throw Error(Errc::InvalidConfig, std::string("domain: ") + e.what());
  }
  throw Error(Errc::InvalidConfig, "key 'domain.kind' must be disk, annulus or convex_polygon");
}

inline BoundarySpec parse_boundary(const Node& n, const fs::path& base) {
  BoundarySpec b;
  b.kind = n.str("kind");
  if (b.kind == "constant") {
    b.value = n.number("value");
  } else if (b.kind == "linear") {
    b.k = n.at("k").numbers();
    require(b.k.size() == 2, "key 'boundary.k' needs two components");
    b.c = n.number_or("c", 0.0);
  } else if (b.kind == "radial_gap") {
    b.M = n.number("M");
  } else if (b.kind == "vertex_table") {
    b.table = base / n.str("path");
    require(fs::exists(b.table), "file for 'boundary.path' not found: " + b.table.string());
  } else {
    throw Error(Errc::InvalidConfig, "key 'boundary.kind' must be constant, linear, radial_gap or vertex_table");
  }
  return b;
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidConfig, "cannot read config " + path.string());
  RunConfig cfg;
  try {
    cfg.echo = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("malformed config: ") + e.what());
  }
  require(cfg.echo.is_object(), "config must be an object");
  cfg.base_dir = path.parent_path();
  const Node root(cfg.echo, "");
  if (root.has("integrand")) cfg.integrand = parse_integrand(root.at("integrand"), cfg.base_dir);
  if (root.has("domain")) cfg.domain = parse_domain(root.at("domain"));
  if (root.has("boundary")) cfg.boundary = parse_boundary(root.at("boundary"), cfg.base_dir);
  if (root.has("eps_list")) {
    cfg.eps_list = root.at("eps_list").numbers();
    require(!cfg.eps_list.empty(), "key 'eps_list' must not be empty");
    for (std::size_t i = 0; i < cfg.eps_list.size(); ++i) {
      require(cfg.eps_list[i] > 0.0, "key 'eps_list' entries must be positive");
      require(i == 0 || cfg.eps_list[i] < cfg.eps_list[i - 1], "key 'eps_list' must be strictly decreasing");
    }
  }
  if (root.has("h_target")) {
    cfg.h_target = root.number("h_target");
    require(cfg.h_target > 0.0, "key 'h_target' must be positive");
  }
  if (root.has("tol")) {
    const Node tol = root.at("tol");
    cfg.newton_tol = tol.number_or("newton", cfg.newton_tol);
    cfg.radial_tol = tol.number_or("radial", cfg.radial_tol);
    require(cfg.newton_tol > 0.0, "key 'tol.newton' must be positive");
    require(cfg.radial_tol > 0.0, "key 'tol.radial' must be positive");
  }
  if (root.has("seed")) {
    const double s = root.number("seed");
    require(s >= 0.0 && s == std::floor(s), "key 'seed' must be a nonnegative integer");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  if (root.has("dimension")) {
    const double d = root.number("dimension");
    require(d >= 2.0 && d == std::floor(d), "key 'dimension' must be an integer >= 2");
    cfg.dimension = static_cast<int>(d);
  }
  if (root.has("barrier")) {
    const Node b = root.at("barrier");
    cfg.barrier_K = b.number_or("K", cfg.barrier_K);
    cfg.barrier_samples = static_cast<int>(b.number_or("samples", cfg.barrier_samples));
    require(cfg.barrier_samples > 0, "key 'barrier.samples' must be positive");
    if (b.has("d")) {
      const double d = b.number("d");
      require(d >= 2.0 && d == std::floor(d), "key 'barrier.d' must be an integer >= 2");
      cfg.dimension = static_cast<int>(d);
    }
  }
  return cfg;
}

template <class T>
const T& need(const std::optional<T>& v, const char* key) {
  if (!v) throw Error(Errc::InvalidConfig, std::string("missing key '") + key + "'");
  return *v;
}

inline Integrand build_integrand(const IntegrandSpec& s) {
  if (s.family == "prototype") {
    Integrand I = make_prototype(s.p);
    return Integrand(I.model(), I.label(), true, s.far_grid_max);
  }
  std::ifstream in(s.csv);
  std::vector<double> t, y;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double a, b;
    if (!(row >> a >> b)) continue;  // header
    t.push_back(a);
    y.push_back(b);
  }
  require(t.size() >= 2, "custom integrand table needs at least two rows");
  auto interp = std::make_shared<MonotoneCubic>(std::move(t), std::move(y));
  return make_custom([interp](double x) { return (*interp)(x); }, s.far_grid_max,
                     "custom{" + s.csv.filename().string() + "}");
}

/// Boundary data as a function of the point, for the analytic kinds.
inline std::function<double(const Point&)> boundary_function(const BoundarySpec& b, const Domain2D& D) {
  if (b.kind == "constant") return [v = b.value](const Point&) { return v; };
  if (b.kind == "linear") return [k = b.k, c = b.c](const Point& x) { return k[0] * x[0] + k[1] * x[1] + c; };
  if (b.kind == "radial_gap") {
    require(D.kind == DomainKind::Annulus, "boundary kind 'radial_gap' needs an annulus domain");
    const double mid = 0.5 * (D.r_in + D.r_out);
    return [M = b.M, mid](const Point& x) { return std::hypot(x[0], x[1]) > mid ? M : 0.0; };
  }
  throw Error(Errc::InvalidConfig, "boundary kind '" + b.kind + "' has no closed form");
}

inline std::vector<double> boundary_values(const BoundarySpec& b, const Domain2D& D, const Mesh& m) {
  if (b.kind != "vertex_table") return sample_boundary(m, boundary_function(b, D));
  // Rows "x,y,value"; each boundary vertex takes the value of the nearest row.
  std::ifstream in(b.table);
  std::vector<std::array<double, 3>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double x, y, v;
    if (row >> x >> y >> v) rows.push_back({x, y, v});
  }
  require(!rows.empty(), "vertex table has no rows");
  std::vector<double> vals(m.vertices.size(), 0.0);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (!m.boundary[i]) continue;
    double best = INFINITY;
    for (const auto& r : rows) {
      const double d = std::hypot(r[0] - m.vertices[i][0], r[1] - m.vertices[i][1]);
      if (d < best) {
        best = d;
        vals[i] = r[2];
      }
    }
    require(best <= 1.5 * m.h, "vertex table has no row near boundary vertex " + std::to_string(i));
  }
  return vals;
}

/// sup |u0| over the closed domain and the norm max(sup|u0|, sup|grad u0|, Lip grad u0).
struct BoundaryNorms {
  double sup = 0.0;
  double grad = 0.0;
  double norm_1inf = 0.0;
};

inline BoundaryNorms boundary_norms(const BoundarySpec& b, const Domain2D& D) {
  BoundaryNorms n;
  if (b.kind == "constant") {
    n.sup = std::abs(b.value);
  } else if (b.kind == "linear") {
    n.grad = std::hypot(b.k[0], b.k[1]);
    double reach = 0.0;
    switch (D.kind) {
      case DomainKind::Disk: reach = D.radius; break;
      case DomainKind::Annulus: reach = D.r_out; break;
      case DomainKind::ConvexPolygon:
        for (const Point& p : D.vertices) reach = std::max(reach, std::hypot(p[0], p[1]));
        break;
    }
    n.sup = std::abs(b.c) + n.grad * reach;
  } else if (b.kind == "radial_gap") {
    // Extension M (|x| - r_in)/(r_out - r_in); its Hessian is bounded by
    // the slope over r_in.
    const double slope = std::abs(b.M) / (D.r_out - D.r_in);
    n.sup = std::abs(b.M);
    n.grad = std::max(slope, slope / D.r_in);
  } else {
    throw Error(Errc::InvalidConfig, "boundary kind '" + b.kind + "' has no closed-form norms");
  }
  n.norm_1inf = std::max(n.sup, n.grad);
  return n;
}

inline ExteriorBallGeometry geometry_of(const Domain2D& D) {
  switch (D.kind) {
    case DomainKind::Disk: return disk_geometry(D.radius);
    case DomainKind::Annulus: return annulus_geometry(D.r_in, D.r_out);
    case DomainKind::ConvexPolygon: return polygon_geometry(D.diameter(), D.exterior_ball_radius);
  }
  throw Error(Errc::InvalidConfig, "unknown domain");
}

// ---------------------------------------------------------------- manifest

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  Manifest(std::string command, const RunConfig& cfg, fs::path out) : out_(std::move(out)) {
    j_["artifact_version"] = kVersion;
    j_["command"] = std::move(command);
    j_["config"] = cfg.echo;
    j_["started_at"] = utc_now();
    j_["outputs"] = json::array();
    j_["verdicts"] = json::object();
  }

  fs::path add(const std::string& name) {
    j_["outputs"].push_back(name);
    return out_ / name;
  }
  void verdict(const std::string& key, json value) { j_["verdicts"][key] = std::move(value); }

  void finish() {
    j_["finished_at"] = utc_now();
    write_json(out_ / "manifest.json", j_);
  }

 private:
  fs::path out_;
  json j_;
};

// ---------------------------------------------------------------- commands

struct CommandResult {
  int exit_code = 0;
  json payload;
};

inline json check_integrand_payload(const Integrand& I, int d) {
  HypothesisOptions opt;
  opt.dimension = d;
  const HypothesisReport rep = check_hypotheses(I, opt);
  json j;
  j["integrand"] = I.label();
  j["report"] = to_json(rep);
  const ConjugateReport conj = conjugate_blowup_test(I, default_conjugate_grid());
  json pts = json::array();
  for (const auto& p : conj.points) pts.push_back({p.y, num(p.value)});
  j["conjugate"] = {{"points", pts}, {"threshold", conj.threshold}, {"blows_up", conj.blows_up}};
  return j;
}

inline CommandResult cmd_check_integrand(const RunConfig& cfg, const fs::path& out) {
  const Integrand I = build_integrand(need(cfg.integrand, "integrand"));
  fs::create_directories(out);
  Manifest man("check-integrand", cfg, out);
  CommandResult res;
  res.payload = check_integrand_payload(I, cfg.dimension);
  write_json(man.add("check_integrand.json"), res.payload);
  man.verdict("criterion_A2", res.payload["report"]["criterion_A2"]["verdict"]);
  man.finish();
  return res;
}

struct RadialOutcome {
  GapReport gap;
  RadialSolution solution;
  json summary;
};

inline RadialOutcome run_radial(const Integrand& I, const RunConfig& cfg) {
  const Domain2D& D = need(cfg.domain, "domain").domain;
  const BoundarySpec& B = need(cfg.boundary, "boundary");
  require(D.kind == DomainKind::Annulus, "radial needs domain.kind = annulus");
  require(B.kind == "radial_gap", "radial needs boundary.kind = radial_gap");
  RadialProblem P{I, cfg.dimension, D.r_in, D.r_out, B.M};
  RadialOutcome o;
  o.gap = max_gap_report(P);
  o.solution = solve_radial(P, cfg.radial_tol);
  json s;
  s["M"] = B.M;
  s["M_max"] = num(o.gap.M_max);
  s["M_max_finite"] = o.gap.finite();
  if (o.gap.criterion == Verdict::Converges) {
    const PaperBound b = paper_bound(P);
    s["paper_bound"] = b.value;
    s["paper_bound_exact_geometry"] = b.exact_geometry;
  } else {
    s["paper_bound"] = nullptr;
  }
  s["criterion_verdict"] = std::string(to_string(o.gap.criterion));
  s["attainable"] = o.solution.attainable;
  s["c"] = o.solution.attainable ? json(o.solution.c) : json(nullptr);
  s["M_attained"] = num(o.solution.M_attained);
  s["C0"] = num(o.solution.C0);
  o.summary = s;
  return o;
}

inline CommandResult cmd_radial(const RunConfig& cfg, const fs::path& out) {
  const Integrand I = build_integrand(need(cfg.integrand, "integrand"));
  need(cfg.domain, "domain");
  need(cfg.boundary, "boundary");
  fs::create_directories(out);
  Manifest man("radial", cfg, out);
  const RadialOutcome o = run_radial(I, cfg);
  CsvWriter csv(man.add("radial_sweep.csv"));
  csv.row({"c", "U_at_r_out"});
  for (const auto& [c, U] : o.gap.sweep) csv.row({csv_number(c), csv_number(U)});
  write_json(man.add("radial_summary.json"), o.summary);
  man.verdict("attainable", o.summary["attainable"]);
  man.verdict("criterion_verdict", o.summary["criterion_verdict"]);
  man.finish();
  return {0, o.summary};
}

inline CommandResult cmd_barrier_verify(const RunConfig& cfg, const fs::path& out) {
  const Integrand I = build_integrand(need(cfg.integrand, "integrand"));
  const Domain2D& D = need(cfg.domain, "domain").domain;
  const BoundarySpec& B = need(cfg.boundary, "boundary");
  const BoundaryNorms norms = boundary_norms(B, D);
  const ExteriorBallGeometry geo = geometry_of(D);
  const double K = cfg.barrier_K >= 0.0 ? cfg.barrier_K : norms.grad;

  const HypothesisReport hyp = check_hypotheses(I);
  if (hyp.criterion_A2.verdict != Verdict::Diverges) {
    throw Error(Errc::CriterionConverges, "the barrier construction needs the solvability criterion; it is " +
                                              std::string(to_string(hyp.criterion_A2.verdict)) + " for " + I.label());
  }
  fs::create_directories(out);
  Manifest man("barrier-verify", cfg, out);

  std::string step = "build_weight";
  json j;
  try {
    const WeightedIntegrand W = build_weight(I);
    step = "select_M";
    MSearchOptions mopt;
    mopt.C2 = hyp.C2_oscillation;
    const MSelection ms = select_M(W, K, mopt);
    step = "select_delta_max";
    BarrierParams P;
    P.d = cfg.dimension;
    P.r0 = geo.r0;
    P.K = K;
    P.M = ms.M;
    const DeltaMax dm = select_delta_max(W, P, ms.M, geo.Mstar * norms.norm_1inf);
    P.delta_max = dm.delta_max;
    P.r_max = dm.r_max;
    step = "select_delta_for_height";
    const double target = geo.height_target(norms.norm_1inf, norms.sup);
    const DeltaSelection ds = select_delta_for_height(W, P, geo.eta, target);
    P.delta = ds.delta;
    step = "certify";
    CertificationOptions copt;
    copt.samples = cfg.barrier_samples;
    copt.seed = cfg.seed;
    const CertificationReport cert = certify_barrier(W, P, ds.delta, copt);
    const double flux = flux_deviation(W, P, 10.0 * P.r0);
    step = "normal_derivative_bound";
    const double bound = normal_derivative_bound(W, P, norms.norm_1inf);

    j["M"] = ms.M;
    j["delta_max"] = dm.delta_max;
    j["delta"] = ds.delta;
    j["r_max"] = dm.r_max;
    j["min_L_residual"] = num(cert.min_L_residual);
    j["min_region_sample_count"] = cert.in_region;
    j["bound"] = num(bound);
    j["min_Ltilde1"] = num(cert.min_Ltilde1);
    j["max_laplacian_omega"] = num(cert.max_laplacian_omega);
    j["max_flux_deviation"] = num(std::max(flux, cert.max_flux_deviation));
    j["samples"] = cert.samples;
    j["M_selection"] = {{"M1", ms.M1}, {"M2", ms.M2}, {"M3", ms.M3}, {"s_a", ms.s_a}, {"s_g", ms.s_g},
                        {"C2", ms.C2}, {"binding", std::string(to_string(ms.binding))}};
    j["A"] = W.A;
    j["K"] = K;
    j["geometry"] = {{"kind", geo.kind}, {"r0", geo.r0}, {"Mstar", geo.Mstar}, {"eta", geo.eta},
                     {"diameter", geo.diameter}};
    j["height"] = {{"target", target}, {"achieved", ds.achieved}, {"halvings", ds.halvings}, {"alpha", ds.alpha}};
  } catch (const Error& e) {
    json fail = {{"failed_step", step}, {"error", e.what()}};
    write_json(man.add("barrier.json"), fail);
    man.verdict("barrier", "failed at " + step);
    man.finish();
    std::cerr << "barrier-verify: step " << step << " failed: " << e.what() << '\n';
    return {1, fail};
  }
  write_json(man.add("barrier.json"), j);
  man.verdict("certified", j["min_L_residual"].is_number() && j["min_L_residual"].get<double>() >= -1e-8);
  man.finish();
  return {0, j};
}

struct SweepOutcome {
  EpsSweepReport report;
  std::vector<double> u0;
};

/// Runs the sweep and streams every record and field to disk as it finishes.
inline SweepOutcome run_sweep(const Integrand& I, const RunConfig& cfg, Manifest& man, const std::string& prefix) {
  const Domain2D& D = need(cfg.domain, "domain").domain;
  const BoundarySpec& B = need(cfg.boundary, "boundary");
  require(!cfg.eps_list.empty(), "missing key 'eps_list'");
  require(cfg.h_target > 0.0, "missing key 'h_target'");
  auto mesh = std::make_shared<const Mesh>(generate_mesh(D, cfg.h_target));
  SweepOutcome o;
  o.u0 = boundary_values(B, D, *mesh);
  write_json(man.add(prefix + "mesh.json"), mesh_to_json(*mesh));
  CsvWriter csv(man.add(prefix + "sweep.csv"));
  csv.row(sweep_header());
  SweepOptions opt;
  opt.solve.newton_tol = cfg.newton_tol;
  EpsSweepReport& rep = o.report;
  rep.mesh = mesh;
  std::vector<double> warm;
  for (std::size_t i = 0; i < cfg.eps_list.size(); ++i) {
    const double eps = cfg.eps_list[i];
    const SolveResult s = solve_eps(I, mesh, o.u0, eps, opt.solve, warm.empty() ? nullptr : &warm);
    SweepRecord rec = diagnostics(s.field, I, eps);
    rec.newton_iters = s.newton_iters;
    rec.converged = s.converged;
    rec.residual_norm = s.residual_norm;
    rep.records.push_back(rec);
    csv.row(sweep_row(rec));
    warm = s.field.values;
    rep.fields.push_back(warm);
    write_json(man.add(prefix + "field_" + std::to_string(i) + ".json"), field_to_json(*mesh, warm, eps));
  }
  rep.classification = classify_sweep(rep.records, opt);
  return o;
}

inline CommandResult cmd_sweep(const RunConfig& cfg, const fs::path& out) {
  const Integrand I = build_integrand(need(cfg.integrand, "integrand"));
  need(cfg.domain, "domain");
  const BoundarySpec& B = need(cfg.boundary, "boundary");
  require(!cfg.eps_list.empty(), "missing key 'eps_list'");
  require(cfg.h_target > 0.0, "missing key 'h_target'");
  if (B.kind != "vertex_table") boundary_function(B, cfg.domain->domain);
  fs::create_directories(out);
  Manifest man("sweep", cfg, out);
  const SweepOutcome o = run_sweep(I, cfg, man, "");
  json j;
  j["classification"] = o.report.classification;
  j["records"] = json::array();
  for (const auto& r : o.report.records) {
    j["records"].push_back({{"eps", r.eps}, {"sup_grad", r.sup_grad}, {"boundary_layer_ratio", num(r.boundary_layer_ratio)},
                            {"converged", r.converged}});
  }
  man.verdict("classification", o.report.classification);
  man.finish();
  return {0, j};
}

/// Runs the three components on one annulus configuration and checks that
/// they describe the same regime:
///   criterion Diverges, gap attainable, sweep uniform      -> solvable regime
///   criterion Converges, gap attainable, sweep uniform     -> conditionally solvable
///   criterion Converges, gap unattainable, sweep blow-up   -> obstructed regime
inline CommandResult cmd_dichotomy(const RunConfig& cfg, const fs::path& out) {
  const Integrand I = build_integrand(need(cfg.integrand, "integrand"));
  const Domain2D& D = need(cfg.domain, "domain").domain;
  const BoundarySpec& B = need(cfg.boundary, "boundary");
  require(D.kind == DomainKind::Annulus, "dichotomy needs domain.kind = annulus");
  require(B.kind == "radial_gap", "dichotomy needs boundary.kind = radial_gap");
  require(!cfg.eps_list.empty(), "missing key 'eps_list'");
  require(cfg.h_target > 0.0, "missing key 'h_target'");
  fs::create_directories(out);
  Manifest man("dichotomy", cfg, out);

  const json check = check_integrand_payload(I, cfg.dimension);
  write_json(man.add("check_integrand.json"), check);
  const std::string criterion = check["report"]["criterion_A2"]["verdict"].get<std::string>();
  const RadialOutcome radial = run_radial(I, cfg);
  write_json(man.add("radial_summary.json"), radial.summary);
  const bool attainable = radial.solution.attainable;
  const SweepOutcome sweep = run_sweep(I, cfg, man, "sweep_");
  const std::string cls = sweep.report.classification;

  std::string regime;
  std::vector<std::string> dissent;
  if (criterion == "Diverges") {
    regime = "solvable regime";
    if (!attainable) dissent.push_back("radial");
    if (cls != "uniform") dissent.push_back("sweep");
  } else if (criterion == "Converges") {
    regime = attainable ? "conditionally solvable" : "obstructed regime";
    if (cls != (attainable ? "uniform" : "blow-up")) dissent.push_back("sweep");
  } else {
    regime = "undetermined";
    dissent.push_back("criterion");
  }
  const bool agree = dissent.empty();
  json table = json::array();
  table.push_back({{"component", "criterion"}, {"verdict", criterion},
                   {"reading", criterion == "Diverges" ? "solvable for all data" : "not solvable for all data"}});
  table.push_back({{"component", "radial"}, {"verdict", attainable ? "attainable" : "unattainable"},
                   {"M", B.M}, {"M_max", num(radial.gap.M_max)}});
  table.push_back({{"component", "sweep"}, {"verdict", cls},
                   {"sup_grad_first", sweep.report.records.front().sup_grad},
                   {"sup_grad_last", sweep.report.records.back().sup_grad}});
  json j;
  j["integrand"] = I.label();
  j["regime"] = regime;
  j["agree"] = agree;
  j["dissenting"] = dissent;
  j["table"] = table;
  write_json(man.add("dichotomy.json"), j);
  man.verdict("regime", regime);
  man.verdict("agree", agree);
  man.finish();
  if (!agree) {
    std::cerr << "dichotomy: components disagree:";
    for (const auto& d : dissent) std::cerr << ' ' << d;
    std::cerr << '\n';
  }
  return {agree ? 0 : 1, j};
}

/// Loads the config, runs the named command and maps failures to exit codes.
inline int run(const std::string& command, const fs::path& config, const fs::path& out, std::ostream& log = std::cout) {
  try {
    const RunConfig cfg = load_config(config);
    CommandResult r;
    if (command == "check-integrand") r = cmd_check_integrand(cfg, out);
    else if (command == "radial") r = cmd_radial(cfg, out);
    else if (command == "barrier-verify") r = cmd_barrier_verify(cfg, out);
    else if (command == "sweep") r = cmd_sweep(cfg, out);
    else if (command == "dichotomy") r = cmd_dichotomy(cfg, out);
    else throw Error(Errc::InvalidConfig, "unknown command '" + command + "'");
    log << r.payload.dump(2) << '\n';
    return r.exit_code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case Errc::InvalidConfig:
      case Errc::InvalidParameter:
      case Errc::CriterionConverges:
      case Errc::CriterionDiverges: return 2;
      default: return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace lingrow::app
