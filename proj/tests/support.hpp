#pragma once

// Shared helpers for the test suites: random convex polygons, random SPD
// tensors, finite-difference stencils, reference meshes, and a subprocess
// runner for CLI tests.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "polyadapt/fem.hpp"
#include "polyadapt/geometry.hpp"
#include "polyadapt/mesh.hpp"
#include "polyadapt/metric.hpp"
#include "polyadapt/rng.hpp"
#include "polyadapt/voronoi.hpp"

namespace testsupport {

/// Random convex n-gon (Valtr's algorithm), CCW, vertex mean at the origin,
/// rescaled so the farthest vertex sits at distance 1. Retries until the
/// polygon is strictly convex with no near-degenerate edges.
inline polyadapt::Polygon random_convex_polygon(polyadapt::UniformRng& rng, int n) {
  using polyadapt::Vec2;
  if (n < 3) throw std::invalid_argument("polygon needs at least 3 vertices");
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<double> xs(n), ys(n);
    for (double& v : xs) v = rng.next();
    for (double& v : ys) v = rng.next();
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());

    auto chain_deltas = [&rng](const std::vector<double>& c) {
      const int m = static_cast<int>(c.size());
      std::vector<double> d;
      d.reserve(m);
      double top = c[0], bottom = c[0];
      for (int i = 1; i + 1 < m; ++i) {
        if (rng.next_u64() & 1u) {
          d.push_back(c[i] - top);
          top = c[i];
        } else {
          d.push_back(bottom - c[i]);
          bottom = c[i];
        }
      }
      d.push_back(c[m - 1] - top);
      d.push_back(bottom - c[m - 1]);
      return d;
    };

    std::vector<double> dx = chain_deltas(xs);
    std::vector<double> dy = chain_deltas(ys);
    for (std::size_t i = dy.size(); i > 1; --i) {
      std::swap(dy[i - 1], dy[rng.below(i)]);
    }

    std::vector<Vec2> edges(n);
    for (int i = 0; i < n; ++i) edges[i] = {dx[i], dy[i]};
    std::sort(edges.begin(), edges.end(), [](const Vec2& a, const Vec2& b) {
      return std::atan2(a.y, a.x) < std::atan2(b.y, b.x);
    });

    polyadapt::Polygon poly(n);
    Vec2 p{0.0, 0.0};
    for (int i = 0; i < n; ++i) {
      poly[i] = p;
      p += edges[i];
    }

    const Vec2 mean = polyadapt::vertex_mean(poly);
    double radius = 0.0;
    for (Vec2& v : poly) {
      v -= mean;
      radius = std::max(radius, polyadapt::norm(v));
    }
    if (!(radius > 0.0)) continue;
    for (Vec2& v : poly) v = v / radius;

    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      const Vec2& a = poly[i];
      const Vec2& b = poly[(i + 1) % n];
      const Vec2& c = poly[(i + 2) % n];
      if (polyadapt::orient2d(a, b, c) < 1e-6) ok = false;
      if (polyadapt::dist(a, b) < 1e-4) ok = false;
    }
    if (ok) return poly;
  }
  throw std::runtime_error("random_convex_polygon: no valid polygon found");
}

/// Random SPD tensor with eigenvalues log-uniform in [lambda_min, lambda_max]
/// and a uniformly random eigenframe.
inline polyadapt::SpdTensor2 random_spd(polyadapt::UniformRng& rng, double lambda_min,
                                        double lambda_max) {
  const double theta = rng.in_range(0.0, 2.0 * 3.14159265358979323846);
  auto eig = [&rng, lambda_min, lambda_max]() {
    return std::exp(rng.in_range(std::log(lambda_min), std::log(lambda_max)));
  };
  const double l1 = eig(), l2 = eig();
  const double c = std::cos(theta), s = std::sin(theta);
  return {l1 * c * c + l2 * s * s, (l1 - l2) * c * s, l1 * s * s + l2 * c * c};
}

/// Fourth-order central finite-difference Laplacian.
inline double fd_laplacian4(const polyadapt::ScalarField& u, const polyadapt::Vec2& p,
                            double h) {
  auto f = [&](double dx, double dy) {
    return u({p.x + dx, p.y + dy});
  };
  const double fx = -f(2 * h, 0) + 16 * f(h, 0) - 30 * f(0, 0) + 16 * f(-h, 0) - f(-2 * h, 0);
  const double fy = -f(0, 2 * h) + 16 * f(0, h) - 30 * f(0, 0) + 16 * f(0, -h) - f(0, -2 * h);
  return (fx + fy) / (12.0 * h * h);
}

/// Fourth-order central finite-difference gradient.
inline polyadapt::Vec2 fd_gradient4(const polyadapt::ScalarField& u, const polyadapt::Vec2& p,
                                    double h) {
  auto f = [&](double dx, double dy) {
    return u({p.x + dx, p.y + dy});
  };
  return {(-f(2 * h, 0) + 8 * f(h, 0) - 8 * f(-h, 0) + f(-2 * h, 0)) / (12.0 * h),
          (-f(0, 2 * h) + 8 * f(0, h) - 8 * f(0, -h) + f(0, -2 * h)) / (12.0 * h)};
}

/// Uniform n x n mesh of axis-aligned squares on the unit square.
inline polyadapt::PolygonMesh grid_mesh(int n) {
  polyadapt::PolygonMesh mesh;
  const int stride = n + 1;
  mesh.vertices.reserve(static_cast<std::size_t>(stride) * stride);
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      mesh.vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    }
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v = j * stride + i;
      mesh.cells.push_back({v, v + 1, v + stride + 1, v + stride});
    }
  }
  mesh.boundary = polyadapt::classify_boundary(mesh.vertices);
  return mesh;
}

/// Same connectivity with every vertex mapped through an affine shear, so the
/// cells are congruent parallelograms covering a sheared unit square.
inline polyadapt::PolygonMesh sheared_grid_mesh(int n, double shear) {
  polyadapt::PolygonMesh mesh = grid_mesh(n);
  for (polyadapt::Vec2& v : mesh.vertices) v.x += shear * v.y;
  mesh.boundary = polyadapt::classify_boundary(mesh.vertices);
  return mesh;
}

/// Exact Lloyd energy sum_i integral over V_i of |x - z_i|^2 dx, using the
/// edge-midpoint rule (exact for quadratics) on a fan triangulation.
inline double cvt_energy(const polyadapt::GeneratorSet& gen) {
  const polyadapt::PolygonMesh mesh = polyadapt::voronoi(gen);
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.n_cells(); ++i) {
    const polyadapt::Polygon poly = mesh.cell_polygon(static_cast<int>(i));
    const polyadapt::Vec2 z = gen.points[i];
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      const polyadapt::Vec2& a = poly[0];
      const polyadapt::Vec2& b = poly[k];
      const polyadapt::Vec2& c = poly[k + 1];
      const double area = polyadapt::tri_area(a, b, c);
      const double s = polyadapt::dist2((a + b) * 0.5, z) + polyadapt::dist2((b + c) * 0.5, z) +
                       polyadapt::dist2((c + a) * 0.5, z);
      total += area * s / 3.0;
    }
  }
  return total;
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
}

/// Fresh scratch directory under the system temp root.
inline std::string make_temp_dir(const std::string& tag) {
  static int counter = 0;
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() /
      ("polyadapt_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir.string();
}

/// Path of the CLI binary under test (exported by CTest), or empty.
inline std::string cli_binary() {
  const char* env = std::getenv("POLYADAPT_BIN");
  return env ? std::string(env) : std::string();
}

struct CliResult {
  int exit_code = -1;
  std::string output;  // combined stdout + stderr
};

/// Runs the CLI with the given argument string; captures output and exit code.
inline CliResult run_cli(const std::string& args, const std::string& workdir = "") {
  const std::string bin = cli_binary();
  if (bin.empty()) throw std::runtime_error("POLYADAPT_BIN is not set");
  static int counter = 0;
  const std::string capture =
      (std::filesystem::temp_directory_path() /
       ("polyadapt_out_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".txt"))
          .string();
  std::string cmd = "\"" + bin + "\" " + args + " > \"" + capture + "\" 2>&1";
  if (!workdir.empty()) cmd = "cd \"" + workdir + "\" && " + cmd;
  const int rc = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  result.output = read_file(capture);
  std::filesystem::remove(capture);
  return result;
}

}  // namespace testsupport
