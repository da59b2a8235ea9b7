#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "polyadapt/mesh.hpp"
#include "polyadapt/metric.hpp"
#include "polyadapt/mmpde.hpp"
#include "polyadapt/parallel.hpp"
#include "polyadapt/problems.hpp"
#include "polyadapt/quality.hpp"
#include "polyadapt/study.hpp"
#include "polyadapt/svg.hpp"
#include "polyadapt/version.hpp"
#include "polyadapt/voronoi.hpp"

namespace {

// Exit codes: 0 success, 2 invalid input, 3 invalid/degenerate mesh,
// 4 solver or adaptation failure.
constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitBadMesh = 3;
constexpr int kExitSolverFailure = 4;

using Clock = std::chrono::steady_clock;

void ensure_parent(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << text;
}

struct RunContext {
  std::vector<std::string> argv;
  Clock::time_point start = Clock::now();
};

void write_manifest(const std::string& path, const std::string& command, std::uint64_t seed,
                    const std::vector<std::string>& outputs, const RunContext& ctx) {
  nlohmann::json j;
  j["command"] = command;
  j["argv"] = ctx.argv;
  j["seed"] = seed;
  j["version"] = polyadapt::kVersion;
  j["outputs"] = outputs;
  j["threads"] = polyadapt::max_threads();
  j["wall_time_s"] =
      std::chrono::duration_cast<std::chrono::duration<double>>(Clock::now() - ctx.start).count();
  write_text(path, j.dump(2) + "\n");
}

std::string cvt_history_csv(const std::vector<polyadapt::CvtSnapshot>& history) {
  std::ostringstream os;
  os << "iter,Q_ali_1,Q_eq_1\n";
  char buf[96];
  for (const auto& s : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g\n", s.iter, s.q_ali, s.q_eq);
    os << buf;
  }
  return os.str();
}

int run_cvt(int n, int iters, std::uint64_t seed, const std::string& out,
            const std::string& history, const RunContext& ctx) {
  if (n < 2) {
    std::cerr << "cvt: --n must be at least 2\n";
    return kExitBadInput;
  }
  if (iters < 0) {
    std::cerr << "cvt: --iters must be non-negative\n";
    return kExitBadInput;
  }
  const polyadapt::CvtResult result = polyadapt::generate_cvt(n, iters, seed, true);
  write_text(out, polyadapt::mesh_to_json(result.mesh));
  const std::string history_path = history.empty() ? out + ".history.csv" : history;
  write_text(history_path, cvt_history_csv(result.history));
  std::vector<std::string> outputs{out, history_path};
  write_manifest(out + ".manifest.json", "cvt", seed, outputs, ctx);
  std::cout << "cvt: " << result.mesh.n_cells() << " cells, " << result.mesh.n_vertices()
            << " vertices -> " << out << "\n";
  return kExitOk;
}

int run_quality(const std::string& mesh_path, const std::string& metric_path, bool identity,
                int approx, const std::string& subdivision, const std::string& rotation,
                const std::string& csv_path, const std::string& json_path,
                const RunContext& ctx) {
  if (identity == !metric_path.empty()) {
    std::cerr << "quality: pass exactly one of --metric FILE or --identity\n";
    return kExitBadInput;
  }
  polyadapt::PolygonMesh mesh;
  try {
    mesh = polyadapt::load_mesh(mesh_path);
  } catch (const std::exception& e) {
    std::cerr << "quality: invalid mesh: " << e.what() << "\n";
    return kExitBadMesh;
  }
  polyadapt::MetricField metric;
  if (identity) {
    metric = polyadapt::identity_metric(mesh.n_vertices());
  } else {
    try {
      metric = polyadapt::load_metric(metric_path);
    } catch (const std::exception& e) {
      std::cerr << "quality: invalid metric: " << e.what() << "\n";
      return kExitBadMesh;
    }
    if (metric.tensors.size() != mesh.n_vertices()) {
      std::cerr << "quality: metric has " << metric.tensors.size() << " tensors for "
                << mesh.n_vertices() << " vertices\n";
      return kExitBadMesh;
    }
  }
  const polyadapt::RefRotation rot =
      rotation == "best" ? polyadapt::RefRotation::Best : polyadapt::RefRotation::None;
  const polyadapt::SubdivisionScheme scheme = subdivision == "a"
                                                  ? polyadapt::SubdivisionScheme::A
                                                  : polyadapt::SubdivisionScheme::B;
  polyadapt::QualityReport report;
  const std::vector<polyadapt::Polygon> refs = polyadapt::regular_references(mesh);
  if (approx == 1) {
    report = polyadapt::quality_approx1(mesh, refs, metric, rot);
  } else if (approx == 2) {
    report = polyadapt::quality_approx2(mesh, refs, metric, scheme, rot);
  } else {
    report = polyadapt::quality_approx3(mesh, metric);
  }
  write_text(csv_path, polyadapt::quality_csv(report, mesh));
  write_text(json_path, polyadapt::quality_summary_json(report));
  write_manifest(csv_path + ".manifest.json", "quality", 0, {csv_path, json_path}, ctx);
  std::cout << "quality: approx " << approx << " Q_ali " << report.Q_ali << " Q_eq "
            << report.Q_eq << "\n";
  return kExitOk;
}

int run_adapt(int example, int n, int outer, double tau, double t_end,
              const std::string& metric_norm, const std::string& out_dir, std::uint64_t seed,
              int cvt_iters, const RunContext& ctx) {
  if (n < 2 || outer < 0 || cvt_iters < 0 || !(tau > 0.0) || !(t_end > 0.0)) {
    std::cerr << "adapt: invalid flag values\n";
    return kExitBadInput;
  }
  const polyadapt::ProblemSpec problem =
      polyadapt::problem_by_name("example" + std::to_string(example));
  const polyadapt::CvtResult cvt = polyadapt::generate_cvt(n, cvt_iters, seed, false);

  polyadapt::AdaptConfig config;
  config.outer_iters = outer;
  config.tau = tau;
  config.t_end = t_end;
  config.norm =
      metric_norm == "h1" ? polyadapt::MetricNorm::H1 : polyadapt::MetricNorm::L2;
  const polyadapt::AdaptResult result = polyadapt::adapt_outer(problem, cvt.mesh, config);

  std::filesystem::create_directories(out_dir);
  std::vector<std::string> outputs;
  for (std::size_t k = 0; k < result.meshes.size(); ++k) {
    const std::string path = out_dir + "/mesh_" + std::to_string(k) + ".json";
    write_text(path, polyadapt::mesh_to_json(result.meshes[k]));
    outputs.push_back(path);
  }
  const std::string history_path = out_dir + "/history.csv";
  write_text(history_path, polyadapt::adapt_history_csv(result.history));
  outputs.push_back(history_path);
  write_manifest(out_dir + "/manifest.json", "adapt", seed, outputs, ctx);
  if (!result.completed) {
    std::cerr << "adapt: " << result.failure << "\n";
    return kExitSolverFailure;
  }
  const auto& last = result.history.back();
  std::cout << "adapt: " << result.meshes.size() - 1 << " iterations, final err_L2 "
            << last.err_l2 << " err_H1 " << last.err_h1 << "\n";
  return kExitOk;
}

int run_study(int example, const std::string& ns_text, int outer, const std::string& metric_norm,
              const std::string& csv_path, std::uint64_t seed, int cvt_iters,
              const RunContext& ctx) {
  std::vector<int> ns;
  {
    std::stringstream ss(ns_text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        const int v = std::stoi(item, &used);
        if (used != item.size() || v < 2) throw std::invalid_argument(item);
        ns.push_back(v);
      } catch (const std::exception&) {
        std::cerr << "study: malformed --ns entry '" << item << "'\n";
        return kExitBadInput;
      }
    }
  }
  if (ns.empty()) {
    std::cerr << "study: --ns is empty\n";
    return kExitBadInput;
  }
  for (std::size_t i = 1; i < ns.size(); ++i) {
    if (ns[i] <= ns[i - 1]) {
      std::cerr << "study: --ns must be strictly increasing\n";
      return kExitBadInput;
    }
  }
  polyadapt::StudyConfig config;
  config.outer = outer;
  config.norm = metric_norm == "h1" ? polyadapt::MetricNorm::H1 : polyadapt::MetricNorm::L2;
  config.cvt_iters = cvt_iters;
  config.seed = seed;
  const polyadapt::ProblemSpec problem =
      polyadapt::problem_by_name("example" + std::to_string(example));
  const std::vector<polyadapt::StudyRow> rows =
      polyadapt::convergence_study(problem, ns, config);
  write_text(csv_path, polyadapt::study_csv(rows));
  write_manifest(csv_path + ".manifest.json", "study", seed, {csv_path}, ctx);
  std::cout << "study: " << rows.size() << " rows -> " << csv_path << "\n";
  return kExitOk;
}

int run_render(const std::string& mesh_path, const std::string& out, const std::string& zoom,
               const std::string& color_by, const std::string& quality_path,
               const RunContext& ctx) {
  polyadapt::RenderOptions options;
  if (!zoom.empty()) {
    double v[4];
    std::stringstream ss(zoom);
    std::string item;
    int count = 0;
    while (std::getline(ss, item, ',') && count < 4) {
      try {
        std::size_t used = 0;
        v[count] = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        std::cerr << "render: malformed --zoom\n";
        return kExitBadInput;
      }
      ++count;
    }
    if (count != 4 || std::getline(ss, item, ',') || !(v[2] > v[0]) || !(v[3] > v[1])) {
      std::cerr << "render: --zoom needs x0,y0,x1,y1 with x1>x0 and y1>y0\n";
      return kExitBadInput;
    }
    options.x0 = v[0];
    options.y0 = v[1];
    options.x1 = v[2];
    options.y1 = v[3];
  }
  if (color_by != "none" && quality_path.empty()) {
    std::cerr << "render: --color-by " << color_by << " needs --quality CSV\n";
    return kExitBadInput;
  }
  polyadapt::PolygonMesh mesh;
  try {
    mesh = polyadapt::load_mesh(mesh_path);
  } catch (const std::exception& e) {
    std::cerr << "render: invalid mesh: " << e.what() << "\n";
    return kExitBadMesh;
  }
  if (color_by != "none") {
    std::ifstream is(quality_path);
    if (!is) {
      std::cerr << "render: cannot read " << quality_path << "\n";
      return kExitBadInput;
    }
    const int column = color_by == "q_ali" ? 2 : 3;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::stringstream row(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(row, field, ',')) fields.push_back(field);
      if (fields.empty() || fields[0].empty() ||
          fields[0].find_first_not_of("0123456789") != std::string::npos) {
        continue;  // summary row
      }
      if (fields.size() <= static_cast<std::size_t>(column)) {
        std::cerr << "render: malformed quality CSV row: " << line << "\n";
        return kExitBadInput;
      }
      options.cell_values.push_back(std::stod(fields[column]));
    }
    if (options.cell_values.size() != mesh.n_cells()) {
      std::cerr << "render: quality CSV has " << options.cell_values.size()
                << " per-element rows but the mesh has " << mesh.n_cells()
                << " cells (per-cell measures required; approximation 2 reports sub-triangles)\n";
      return kExitBadInput;
    }
  }
  write_text(out, polyadapt::render_svg(mesh, options));
  write_manifest(out + ".manifest.json", "render", 0, {out}, ctx);
  std::cout << "render: " << mesh.n_cells() << " cells -> " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  RunContext ctx;
  for (int i = 0; i < argc; ++i) ctx.argv.emplace_back(argv[i]);

  CLI::App app{"anisotropic quality measurement, CVT generation, and moving-mesh adaptation "
               "for convex polygonal meshes of the unit square"};
  app.require_subcommand(1);
  app.fallthrough();

  int threads = 0;
  if (const char* env = std::getenv("POLYADAPT_THREADS")) {
    threads = std::atoi(env);
  }
  app.add_option("--threads", threads,
                 "cap worker threads (overrides POLYADAPT_THREADS; 0 = default)");

  auto* cvt = app.add_subcommand("cvt", "generate an n x n centroidal Voronoi mesh");
  int cvt_n = 0, cvt_iters = 50;
  std::uint64_t cvt_seed = 1;
  std::string cvt_out = "cvt_mesh.json", cvt_history;
  cvt->add_option("--n", cvt_n, "cells per side (n^2 generators)")->required();
  cvt->add_option("--iters", cvt_iters, "Lloyd iterations (default 50)");
  cvt->add_option("--seed", cvt_seed, "RNG seed (default 1)");
  cvt->add_option("--out", cvt_out, "output mesh JSON (default cvt_mesh.json)");
  cvt->add_option("--history", cvt_history,
                  "per-iteration quality CSV (default <out>.history.csv)");

  auto* quality = app.add_subcommand("quality", "score a mesh under a metric tensor field");
  std::string q_mesh, q_metric, q_sub = "b", q_rot = "none", q_csv = "quality.csv",
              q_json = "quality.json";
  bool q_identity = false;
  int q_approx = 1;
  quality->add_option("--mesh", q_mesh, "mesh JSON")->required();
  quality->add_option("--metric", q_metric, "metric JSON ({\"tensors\": [[m11,m12,m22],...]})");
  quality->add_flag("--identity", q_identity, "use the identity metric");
  quality->add_option("--approx", q_approx, "measure family 1, 2, or 3 (default 1)")
      ->check(CLI::Range(1, 3));
  quality->add_option("--subdivision", q_sub, "triangulation for family 2 (default b)")
      ->check(CLI::IsMember({"a", "b"}));
  quality->add_option("--ref-rotation", q_rot, "reference vertex rotation (default none)")
      ->check(CLI::IsMember({"none", "best"}));
  quality->add_option("--csv", q_csv, "per-element CSV output (default quality.csv)");
  quality->add_option("--json", q_json, "summary JSON output (default quality.json)");

  auto* adapt = app.add_subcommand("adapt", "run the moving-mesh adaptation loop");
  int a_example = 1, a_n = 32, a_outer = 10, a_cvt_iters = 50;
  double a_tau = 1.0 / 300.0, a_t_end = 1.0;
  std::string a_metric = "l2", a_out_dir = "adapt_run";
  std::uint64_t a_seed = 1;
  adapt->add_option("--example", a_example, "test problem 1 or 2")
      ->required()
      ->check(CLI::Range(1, 2));
  adapt->add_option("--n", a_n, "cells per side of the initial CVT mesh (default 32)");
  adapt->add_option("--outer", a_outer, "outer iterations (default 10)");
  adapt->add_option("--tau", a_tau, "mesh-movement time scale (default 1/300)");
  adapt->add_option("--t-end", a_t_end, "integration horizon per outer step (default 1)");
  adapt->add_option("--metric", a_metric, "metric norm: l2 or h1 (default l2)")
      ->check(CLI::IsMember({"l2", "h1"}));
  adapt->add_option("--out-dir", a_out_dir, "run directory (default adapt_run)");
  adapt->add_option("--seed", a_seed, "RNG seed for the initial mesh (default 1)");
  adapt->add_option("--cvt-iters", a_cvt_iters, "Lloyd iterations for the initial mesh");

  auto* study = app.add_subcommand("study", "convergence study over a resolution sweep");
  int s_example = 1, s_outer = 5, s_cvt_iters = 50;
  std::string s_ns, s_metric = "l2", s_csv = "study.csv";
  std::uint64_t s_seed = 1;
  study->add_option("--example", s_example, "test problem 1 or 2")
      ->required()
      ->check(CLI::Range(1, 2));
  study->add_option("--ns", s_ns, "comma-separated resolutions, e.g. 8,16,32")->required();
  study->add_option("--outer", s_outer, "outer iterations per resolution (default 5)");
  study->add_option("--metric", s_metric, "metric norm: l2 or h1 (default l2)")
      ->check(CLI::IsMember({"l2", "h1"}));
  study->add_option("--csv", s_csv, "output CSV (default study.csv)");
  study->add_option("--seed", s_seed, "RNG seed (default 1)");
  study->add_option("--cvt-iters", s_cvt_iters, "Lloyd iterations per initial mesh");

  auto* render = app.add_subcommand("render", "render a mesh to SVG");
  std::string r_mesh, r_out = "render.svg", r_zoom, r_color = "none", r_quality;
  render->add_option("--mesh", r_mesh, "mesh JSON")->required();
  render->add_option("--out", r_out, "output SVG (default render.svg)");
  render->add_option("--zoom", r_zoom, "window x0,y0,x1,y1 (default full square)");
  render->add_option("--color-by", r_color, "cell fill: none, q_ali, or q_eq")
      ->check(CLI::IsMember({"none", "q_ali", "q_eq"}));
  render->add_option("--quality", r_quality, "per-cell quality CSV for --color-by");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitBadInput;
  }

  polyadapt::set_max_threads(threads);

  try {
    if (cvt->parsed()) return run_cvt(cvt_n, cvt_iters, cvt_seed, cvt_out, cvt_history, ctx);
    if (quality->parsed()) {
      return run_quality(q_mesh, q_metric, q_identity, q_approx, q_sub, q_rot, q_csv, q_json,
                         ctx);
    }
    if (adapt->parsed()) {
      return run_adapt(a_example, a_n, a_outer, a_tau, a_t_end, a_metric, a_out_dir, a_seed,
                       a_cvt_iters, ctx);
    }
    if (study->parsed()) {
      return run_study(s_example, s_ns, s_outer, s_metric, s_csv, s_seed, s_cvt_iters, ctx);
    }
    if (render->parsed()) return run_render(r_mesh, r_out, r_zoom, r_color, r_quality, ctx);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolverFailure;
  }
  return kExitBadInput;
}
