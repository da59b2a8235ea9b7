#pragma once

#include <string>
#include <vector>

#include "polyadapt/mesh.hpp"

namespace polyadapt {

struct RenderOptions {
  // Zoom window in mesh coordinates.
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
  // Per-cell scalars mapped through the color scale; empty means no fill.
  std::vector<double> cell_values;
};

/// Deterministic SVG: one path per cell (y axis flipped so the mesh appears
/// upright), thin stroke, optional per-cell fill from a 5-stop perceptual
/// color ramp scaled to the value range.
std::string render_svg(const PolygonMesh& mesh, const RenderOptions& options);

}  // namespace polyadapt
