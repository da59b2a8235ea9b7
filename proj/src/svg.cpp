#include "polyadapt/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace polyadapt {

namespace {

struct Rgb {
  double r, g, b;
};

// Five anchors of the viridis ramp, linearly interpolated.
constexpr Rgb kRamp[5] = {
    {0.267004, 0.004874, 0.329415}, {0.229739, 0.322361, 0.545706},
    {0.127568, 0.566949, 0.550556}, {0.369214, 0.788888, 0.382914},
    {0.993248, 0.906157, 0.143936},
};

std::string ramp_color(double t) {
  t = std::min(std::max(t, 0.0), 1.0);
  const double pos = t * 4.0;
  const int lo = std::min(static_cast<int>(pos), 3);
  const double f = pos - lo;
  const Rgb c{kRamp[lo].r + f * (kRamp[lo + 1].r - kRamp[lo].r),
              kRamp[lo].g + f * (kRamp[lo + 1].g - kRamp[lo].g),
              kRamp[lo].b + f * (kRamp[lo + 1].b - kRamp[lo].b)};
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<int>(std::lround(c.r * 255.0)),
                static_cast<int>(std::lround(c.g * 255.0)),
                static_cast<int>(std::lround(c.b * 255.0)));
  return buf;
}

}  // namespace

std::string render_svg(const PolygonMesh& mesh, const RenderOptions& options) {
  if (!(options.x1 > options.x0) || !(options.y1 > options.y0)) {
    throw std::runtime_error("render_svg: empty zoom window");
  }
  const bool fill = !options.cell_values.empty();
  if (fill && options.cell_values.size() != mesh.n_cells()) {
    throw std::runtime_error("render_svg: need one value per cell");
  }
  double vmin = 0.0, vmax = 1.0;
  if (fill) {
    vmin = *std::min_element(options.cell_values.begin(), options.cell_values.end());
    vmax = *std::max_element(options.cell_values.begin(), options.cell_values.end());
  }
  const double span = std::max(options.x1 - options.x0, options.y1 - options.y0);
  const double k = 1000.0 / span;
  const double w = k * (options.x1 - options.x0);
  const double h = k * (options.y1 - options.y0);

  std::ostringstream os;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.8g", v);
    return std::string(buf);
  };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
     << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\">\n";
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    os << "<path d=\"";
    const auto& loop = mesh.cells[c];
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const Vec2& p = mesh.vertices[loop[i]];
      os << (i == 0 ? 'M' : 'L') << num((p.x - options.x0) * k) << ' '
         << num((options.y1 - p.y) * k);
    }
    os << "Z\" fill=\"";
    if (fill) {
      const double t =
          vmax > vmin ? (options.cell_values[c] - vmin) / (vmax - vmin) : 0.5;
      os << ramp_color(t);
    } else {
      os << "none";
    }
    os << "\" stroke=\"black\" stroke-width=\"" << num(span * k / 1000.0) << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace polyadapt
