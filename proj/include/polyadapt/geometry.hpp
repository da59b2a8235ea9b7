#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace polyadapt {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  Vec2 operator-() const { return {-x, -y}; }
  bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm2(const Vec2& v) { return dot(v, v); }
inline double norm(const Vec2& v) { return std::sqrt(norm2(v)); }
inline double dist(const Vec2& a, const Vec2& b) { return norm(a - b); }
inline double dist2(const Vec2& a, const Vec2& b) { return norm2(a - b); }
// 90-degree counter-clockwise rotation.
inline Vec2 perp(const Vec2& v) { return {-v.y, v.x}; }

/// Row-major 2x2 matrix.
struct Mat2 {
  double a00 = 0.0, a01 = 0.0;
  double a10 = 0.0, a11 = 0.0;

  Mat2() = default;
  Mat2(double m00, double m01, double m10, double m11)
      : a00(m00), a01(m01), a10(m10), a11(m11) {}

  static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  /// Matrix with the given columns.
  static Mat2 from_columns(const Vec2& c0, const Vec2& c1) {
    return {c0.x, c1.x, c0.y, c1.y};
  }

  double det() const { return a00 * a11 - a01 * a10; }
  double trace() const { return a00 + a11; }
  Mat2 transpose() const { return {a00, a10, a01, a11}; }
  Mat2 inverse() const {
    const double d = det();
    return {a11 / d, -a01 / d, -a10 / d, a00 / d};
  }

  Vec2 operator*(const Vec2& v) const {
    return {a00 * v.x + a01 * v.y, a10 * v.x + a11 * v.y};
  }
  Mat2 operator*(const Mat2& o) const {
    return {a00 * o.a00 + a01 * o.a10, a00 * o.a01 + a01 * o.a11,
            a10 * o.a00 + a11 * o.a10, a10 * o.a01 + a11 * o.a11};
  }
  Mat2 operator*(double s) const { return {a00 * s, a01 * s, a10 * s, a11 * s}; }
  Mat2 operator+(const Mat2& o) const {
    return {a00 + o.a00, a01 + o.a01, a10 + o.a10, a11 + o.a11};
  }
  Mat2 operator-(const Mat2& o) const {
    return {a00 - o.a00, a01 - o.a01, a10 - o.a10, a11 - o.a11};
  }
  double frobenius() const {
    return std::sqrt(a00 * a00 + a01 * a01 + a10 * a10 + a11 * a11);
  }
};

inline Mat2 operator*(double s, const Mat2& m) { return m * s; }

using Polygon = std::vector<Vec2>;

/// Signed shoelace area; positive for counter-clockwise loops.
inline double signed_area(std::span<const Vec2> poly) {
  double s = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    s += cross(a, b);
  }
  return 0.5 * s;
}

/// Twice the signed area of triangle (a, b, c).
inline double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
  return cross(b - a, c - a);
}

/// Signed area of triangle (a, b, c).
inline double tri_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * orient2d(a, b, c);
}

/// Area centroid of a simple polygon (area-weighted, not the vertex mean).
inline Vec2 polygon_centroid(std::span<const Vec2> poly) {
  double a = 0.0;
  Vec2 c{0.0, 0.0};
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    const double w = cross(p, q);
    a += w;
    c += (p + q) * w;
  }
  return c / (3.0 * a);
}

/// Arithmetic mean of the vertices.
inline Vec2 vertex_mean(std::span<const Vec2> poly) {
  Vec2 m{0.0, 0.0};
  for (const Vec2& p : poly) m += p;
  return m / static_cast<double>(poly.size());
}

inline double polygon_diameter(std::span<const Vec2> poly) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i)
    for (std::size_t j = i + 1; j < poly.size(); ++j)
      d2 = std::max(d2, dist2(poly[i], poly[j]));
  return std::sqrt(d2);
}

/// Strict containment test for convex CCW polygons (tol in absolute cross units).
inline bool point_in_convex(std::span<const Vec2> poly, const Vec2& p,
                            double tol = 0.0) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (orient2d(poly[i], poly[(i + 1) % n], p) <= tol) return false;
  }
  return true;
}

}  // namespace polyadapt
