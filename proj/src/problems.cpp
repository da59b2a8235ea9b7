#include "polyadapt/problems.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace polyadapt {

ProblemSpec problem_example1() {
  ProblemSpec p;
  p.name = "example1";
  auto u = [](Vec2 x) {
    return std::tanh(40.0 * x.y - 80.0 * x.x * x.x) - std::tanh(40.0 * x.x - 80.0 * x.y * x.y);
  };
  p.u_exact = u;
  p.g = u;
  p.f = [](Vec2 x) {
    const double ts = std::tanh(40.0 * x.y - 80.0 * x.x * x.x);
    const double tw = std::tanh(40.0 * x.x - 80.0 * x.y * x.y);
    const double ds = 1.0 - ts * ts;
    const double dw = 1.0 - tw * tw;
    return ds * (2.0 * ts * (25600.0 * x.x * x.x + 1600.0) + 160.0) -
           dw * (2.0 * tw * (1600.0 + 25600.0 * x.y * x.y) + 160.0);
  };
  p.grad_exact = [](Vec2 x) {
    const double ts = std::tanh(40.0 * x.y - 80.0 * x.x * x.x);
    const double tw = std::tanh(40.0 * x.x - 80.0 * x.y * x.y);
    const double ds = 1.0 - ts * ts;
    const double dw = 1.0 - tw * tw;
    return Vec2{ds * (-160.0 * x.x) - dw * 40.0, ds * 40.0 + dw * 160.0 * x.y};
  };
  return p;
}

ProblemSpec problem_example2() {
  ProblemSpec p;
  p.name = "example2";
  // u = sqrt(rho) - r^2/4 with rho = (r - x)/2; the square root is the
  // harmonic corner mode sqrt(r) sin(theta/2), so f = -Delta(-r^2/4) = 1.
  // rho is evaluated as y^2 / (2 (r + x)), which is exact where y is small
  // and r - x would cancel.
  auto stable_parts = [](Vec2 x, double* r, double* sqrt_rho) {
    *r = std::hypot(x.x, x.y);
    const double denom = *r + x.x;
    *sqrt_rho = denom > 0.0 ? x.y / std::sqrt(2.0 * denom) : std::sqrt(*r);
  };
  p.u_exact = [stable_parts](Vec2 x) {
    double r, sq;
    stable_parts(x, &r, &sq);
    return sq - 0.25 * r * r;
  };
  p.g = p.u_exact;
  p.f = [](Vec2) { return 1.0; };
  p.grad_exact = [stable_parts](Vec2 x) {
    double r, sq;
    stable_parts(x, &r, &sq);
    if (r == 0.0) return Vec2{0.0, 0.0};
    // d(sqrt rho)/dy = y / (4 r sqrt(rho)) = sqrt(2 (r + x)) / (4 r) for y >= 0,
    // which stays finite on the edge y = 0 (x > 0).
    const double gy = std::sqrt(2.0 * (r + x.x)) / (4.0 * r);
    return Vec2{-sq / (2.0 * r) - 0.5 * x.x, gy - 0.5 * x.y};
  };
  return p;
}

ProblemSpec problem_sine() {
  ProblemSpec p;
  p.name = "sine";
  using std::numbers::pi;
  auto u = [](Vec2 x) { return std::sin(pi * x.x) * std::sin(pi * x.y); };
  p.u_exact = u;
  p.g = u;
  p.f = [u](Vec2 x) { return 2.0 * pi * pi * u(x); };
  p.grad_exact = [](Vec2 x) {
    return Vec2{pi * std::cos(pi * x.x) * std::sin(pi * x.y),
                pi * std::sin(pi * x.x) * std::cos(pi * x.y)};
  };
  return p;
}

ProblemSpec problem_by_name(const std::string& name) {
  if (name == "example1") return problem_example1();
  if (name == "example2") return problem_example2();
  if (name == "sine") return problem_sine();
  throw std::runtime_error("unknown problem: " + name);
}

}  // namespace polyadapt
