// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>

namespace styledraw {

// Coordinate conventions used throughout:
//  - normalized point (nx, ny) in [0,1]^2 maps to continuous pixel coords
//    (nx * W, ny * H); 0 is the left/top edge, 1 the right/bottom edge.
//  - pixel (ix, iy) has its center at continuous (ix + 0.5, iy + 0.5).
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
};

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& a) { return std::sqrt(dot(a, a)); }

constexpr double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// Row-major 3x3 matrix, used for projective maps between normalized spaces.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return Mat3{}; }

  // Applies the projective map to a normalized point.
  Vec2 apply(const Vec2& p) const {
    const double X = m[0] * p.x + m[1] * p.y + m[2];
    const double Y = m[3] * p.x + m[4] * p.y + m[5];
    const double W = m[6] * p.x + m[7] * p.y + m[8];
    return {X / W, Y / W};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += m[i * 3 + k] * o.m[k * 3 + j];
        r.m[i * 3 + j] = s;
      }
    return r;
  }
};

// Cubic Bernstein basis at parameter t.
inline std::array<double, 4> bernstein3(double t) {
  const double u = 1.0 - t;
  return {u * u * u, 3.0 * t * u * u, 3.0 * t * t * u, t * t * t};
}

}  // namespace styledraw
