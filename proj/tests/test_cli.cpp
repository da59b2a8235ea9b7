#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include <nlohmann/json.hpp>

#include "polyadapt/mesh.hpp"
#include "polyadapt/metric.hpp"
#include "support.hpp"

using namespace polyadapt;
using testsupport::make_temp_dir;
using testsupport::read_file;
using testsupport::run_cli;
using testsupport::write_file;
namespace fs = std::filesystem;

namespace {

std::size_t count_substr(const std::string& text, const std::string& needle) {
  std::size_t count = 0, pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("cvt writes mesh, history, and manifest deterministically") {
  const std::string d1 = make_temp_dir("cvt1");
  const std::string d2 = make_temp_dir("cvt2");
  const std::string args = "cvt --n 4 --iters 6 --seed 9 --out mesh.json";
  const auto r1 = run_cli(args, d1);
  const auto r2 = run_cli(args, d2);
  REQUIRE_MESSAGE(r1.exit_code == 0, r1.output);
  REQUIRE_MESSAGE(r2.exit_code == 0, r2.output);

  const std::string mesh_json = read_file(d1 + "/mesh.json");
  CHECK(mesh_json == read_file(d2 + "/mesh.json"));
  const PolygonMesh mesh = mesh_from_json(mesh_json);
  CHECK(mesh.n_cells() == 16);
  CHECK(validate_mesh(mesh, 1.0).ok());

  const std::string history = read_file(d1 + "/mesh.json.history.csv");
  CHECK(history == read_file(d2 + "/mesh.json.history.csv"));
  CHECK(history.rfind("iter,Q_ali_1,Q_eq_1\n", 0) == 0);
  CHECK(count_lines(history) == 8);  // header + iterations 0..6

  const nlohmann::json manifest =
      nlohmann::json::parse(read_file(d1 + "/mesh.json.manifest.json"));
  CHECK(manifest["command"] == "cvt");
  CHECK(manifest["seed"] == 9);
  CHECK(manifest["argv"].is_array());
  CHECK(manifest["argv"].size() >= 2);
  CHECK(manifest["version"].is_string());
  CHECK(manifest["outputs"].size() == 2);
  CHECK(manifest["threads"].get<int>() >= 1);
  CHECK(manifest["wall_time_s"].get<double>() >= 0.0);
}

TEST_CASE("cvt rejects out-of-range resolutions") {
  const std::string dir = make_temp_dir("cvtbad");
  CHECK(run_cli("cvt --n 1", dir).exit_code == 2);
  CHECK(run_cli("cvt --n 4 --iters -1", dir).exit_code == 2);
}

TEST_CASE("quality scores the uniform grid as perfect") {
  const std::string dir = make_temp_dir("qual");
  save_mesh(testsupport::grid_mesh(3), dir + "/grid.json");
  const auto r = run_cli(
      "quality --mesh grid.json --identity --approx 1 --csv q.csv --json q.json", dir);
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);

  const nlohmann::json summary = nlohmann::json::parse(read_file(dir + "/q.json"));
  CHECK(summary["approx"] == 1);
  CHECK(summary["Q_ali"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(summary["Q_eq"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(summary["elements"] == 9);
  CHECK(summary["flagged"] == 0);

  const std::string csv = read_file(dir + "/q.csv");
  CHECK(csv.rfind("element,n,q_ali,q_eq\n", 0) == 0);
  CHECK(count_lines(csv) == 11);  // header + 9 elements + summary
  CHECK(csv.find("\nsummary,,") != std::string::npos);
  CHECK(fs::exists(dir + "/q.csv.manifest.json"));
}

TEST_CASE("quality approximations 2 and 3 run from the CLI") {
  const std::string dir = make_temp_dir("qual23");
  save_mesh(testsupport::grid_mesh(3), dir + "/grid.json");

  const auto r2 = run_cli(
      "quality --mesh grid.json --identity --approx 2 --csv q2.csv --json q2.json", dir);
  REQUIRE_MESSAGE(r2.exit_code == 0, r2.output);
  const nlohmann::json s2 = nlohmann::json::parse(read_file(dir + "/q2.json"));
  CHECK(s2["approx"] == 2);
  CHECK(s2["Q_ali"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s2["elements"] == 36);  // default subdivision splits each square in four

  const auto r3 = run_cli(
      "quality --mesh grid.json --identity --approx 3 --csv q3.csv --json q3.json", dir);
  REQUIRE_MESSAGE(r3.exit_code == 0, r3.output);
  const nlohmann::json s3 = nlohmann::json::parse(read_file(dir + "/q3.json"));
  CHECK(s3["approx"] == 3);
  CHECK(s3["Q_ali"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s3["Q_eq"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("quality requires exactly one metric source") {
  const std::string dir = make_temp_dir("qualsrc");
  save_mesh(testsupport::grid_mesh(2), dir + "/grid.json");
  save_metric(identity_metric(9), dir + "/metric.json");
  CHECK(run_cli("quality --mesh grid.json", dir).exit_code == 2);
  CHECK(run_cli("quality --mesh grid.json --identity --metric metric.json", dir).exit_code == 2);
  CHECK(run_cli("quality --mesh grid.json --metric metric.json", dir).exit_code == 0);
}

TEST_CASE("quality rejects mismatched or malformed inputs with the mesh error code") {
  const std::string dir = make_temp_dir("qualbad");
  save_mesh(testsupport::grid_mesh(3), dir + "/grid.json");
  save_metric(identity_metric(3), dir + "/short.json");  // grid has 16 vertices
  CHECK(run_cli("quality --mesh grid.json --metric short.json", dir).exit_code == 3);
  write_file(dir + "/broken.json", "{not json");
  CHECK(run_cli("quality --mesh broken.json --identity", dir).exit_code == 3);
  CHECK(run_cli("quality --mesh missing.json --identity", dir).exit_code == 3);
}

TEST_CASE("adapt with zero outer iterations emits only the initial mesh") {
  const std::string dir = make_temp_dir("adapt0");
  const auto r = run_cli(
      "adapt --example 1 --n 4 --outer 0 --cvt-iters 5 --out-dir run0", dir);
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(fs::exists(dir + "/run0/mesh_0.json"));
  CHECK_FALSE(fs::exists(dir + "/run0/mesh_1.json"));
  const std::string history = read_file(dir + "/run0/history.csv");
  CHECK(count_lines(history) == 2);  // header + initial mesh row
  CHECK(fs::exists(dir + "/run0/manifest.json"));
}

TEST_CASE("adapt writes one mesh per outer iteration") {
  const std::string dir = make_temp_dir("adapt1");
  const auto r = run_cli(
      "adapt --example 1 --n 6 --outer 1 --cvt-iters 10 --out-dir run1", dir);
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(fs::exists(dir + "/run1/mesh_0.json"));
  CHECK(fs::exists(dir + "/run1/mesh_1.json"));
  CHECK(count_lines(read_file(dir + "/run1/history.csv")) == 3);
  const PolygonMesh m0 = load_mesh(dir + "/run1/mesh_0.json");
  const PolygonMesh m1 = load_mesh(dir + "/run1/mesh_1.json");
  CHECK(m0.n_cells() == 36);
  CHECK(m1.n_cells() == 36);
  CHECK(validate_mesh(m1, 1.0).ok());
  CHECK(m0.vertices != m1.vertices);  // the mesh actually moved
}

TEST_CASE("adapt validates its flags") {
  const std::string dir = make_temp_dir("adaptbad");
  CHECK(run_cli("adapt --example 3 --n 4", dir).exit_code == 2);
  CHECK(run_cli("adapt --example 1 --n 1", dir).exit_code == 2);
  CHECK(run_cli("adapt --example 1 --n 4 --tau 0", dir).exit_code == 2);
  CHECK(run_cli("adapt --example 1 --n 4 --metric h2", dir).exit_code == 2);
}

TEST_CASE("study reports errors without orders for a single resolution") {
  const std::string dir = make_temp_dir("study1");
  const auto r = run_cli(
      "study --example 1 --ns 4 --outer 1 --cvt-iters 5 --csv st.csv", dir);
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const std::string csv = read_file(dir + "/st.csv");
  CHECK(csv.rfind("N,err_L2_T0,ord_L2_T0,err_H1_T0,ord_H1_T0,"
                  "err_L2_Tk,ord_L2_Tk,err_H1_Tk,ord_H1_Tk\n", 0) == 0);
  REQUIRE(count_lines(csv) == 2);
  const std::string row = csv.substr(csv.find('\n') + 1);
  CHECK(row.rfind("4,", 0) == 0);
  CHECK(row.find(",,") != std::string::npos);  // order cells are empty
  CHECK(row.back() == '\n');
  CHECK(row[row.size() - 2] == ',');  // trailing order cell empty too
  CHECK(fs::exists(dir + "/st.csv.manifest.json"));
}

TEST_CASE("study fills order columns once two resolutions are present") {
  const std::string dir = make_temp_dir("study2");
  const auto r = run_cli(
      "study --example 1 --ns 3,6 --outer 0 --cvt-iters 5 --csv st.csv", dir);
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const std::string csv = read_file(dir + "/st.csv");
  REQUIRE(count_lines(csv) == 3);
  const std::size_t second = csv.find('\n', csv.find('\n') + 1) + 1;
  const std::string row = csv.substr(second);
  CHECK(row.rfind("6,", 0) == 0);
  // All eight data cells populated on the second row.
  CHECK(row.find(",,") == std::string::npos);
  CHECK(row[row.size() - 2] != ',');
}

TEST_CASE("study rejects malformed resolution sweeps") {
  const std::string dir = make_temp_dir("studybad");
  CHECK(run_cli("study --example 1 --ns 8,foo --csv st.csv", dir).exit_code == 2);
  CHECK(run_cli("study --example 1 --ns 16,8 --csv st.csv", dir).exit_code == 2);
  CHECK(run_cli("study --example 1 --ns 1 --csv st.csv", dir).exit_code == 2);
  CHECK(run_cli("study --example 1 --ns 8.5,16 --csv st.csv", dir).exit_code == 2);
}

TEST_CASE("render draws one path per cell and honors the zoom window") {
  const std::string dir = make_temp_dir("render");
  REQUIRE(run_cli("cvt --n 2 --iters 4 --seed 3 --out mesh.json", dir).exit_code == 0);

  const auto r = run_cli("render --mesh mesh.json --out full.svg", dir);
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const std::string svg = read_file(dir + "/full.svg");
  CHECK(count_substr(svg, "<path ") == 4);
  CHECK(svg.find("viewBox=\"0 0 1000 1000\"") != std::string::npos);
  CHECK(svg.find("fill=\"none\"") != std::string::npos);
  CHECK(fs::exists(dir + "/full.svg.manifest.json"));

  const auto rz = run_cli("render --mesh mesh.json --out zoom.svg --zoom 0,0,1,0.5", dir);
  REQUIRE_MESSAGE(rz.exit_code == 0, rz.output);
  const std::string zoomed = read_file(dir + "/zoom.svg");
  CHECK(zoomed.find("width=\"1000\"") != std::string::npos);
  CHECK(zoomed.find("height=\"500\"") != std::string::npos);
  CHECK(zoomed.find("viewBox=\"0 0 1000 500\"") != std::string::npos);

  CHECK(run_cli("render --mesh mesh.json --zoom 1,0,0,1", dir).exit_code == 2);
  CHECK(run_cli("render --mesh mesh.json --zoom 0,0,1", dir).exit_code == 2);
  CHECK(run_cli("render --mesh missing.json", dir).exit_code == 3);
}

TEST_CASE("render coloring needs a matching quality table") {
  const std::string dir = make_temp_dir("rendercolor");
  REQUIRE(run_cli("cvt --n 2 --iters 4 --seed 3 --out mesh.json", dir).exit_code == 0);
  CHECK(run_cli("render --mesh mesh.json --color-by q_ali", dir).exit_code == 2);

  // Table with the wrong number of per-element rows is rejected.
  write_file(dir + "/short.csv",
             "element,n,q_ali,q_eq\n0,4,1.5,1.2\n1,4,1.1,1.0\nsummary,,1.5,1.2\n");
  CHECK(run_cli("render --mesh mesh.json --color-by q_ali --quality short.csv", dir)
            .exit_code == 2);

  REQUIRE(run_cli("quality --mesh mesh.json --identity --approx 1 --csv q.csv --json q.json",
                  dir).exit_code == 0);
  const auto r = run_cli(
      "render --mesh mesh.json --out color.svg --color-by q_ali --quality q.csv", dir);
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const std::string svg = read_file(dir + "/color.svg");
  CHECK(count_substr(svg, "<path ") == 4);
  CHECK(count_substr(svg, "fill=\"#") == 4);
}

TEST_CASE("help and argument errors use the expected exit codes") {
  const std::string dir = make_temp_dir("clihelp");
  CHECK(run_cli("--help", dir).exit_code == 0);
  CHECK(run_cli("frobnicate", dir).exit_code == 2);
  CHECK(run_cli("cvt --n 4 --bogus 1", dir).exit_code == 2);
  CHECK(run_cli("quality --mesh a.json --identity --approx 5", dir).exit_code == 2);
  const auto help = run_cli("cvt --help", dir);
  CHECK(help.exit_code == 0);
  CHECK(help.output.find("--seed") != std::string::npos);
}

}  // TEST_SUITE
