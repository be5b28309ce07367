#pragma once

#include <array>
#include <cmath>

namespace emshape {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    Vec2 operator-() const { return {-x, -y}; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm2() const { return x * x + y * y; }
    double norm() const { return std::sqrt(norm2()); }
    double angle() const { return std::atan2(y, x); }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

/// Counterclockwise quarter turn; also the M -> M-perp convention.
inline Vec2 perp(const Vec2& v) { return {-v.y, v.x}; }

inline Vec2 rotate(const Vec2& v, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Signed area of the triangle (a, b, c); positive when counterclockwise.
inline double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    return 0.5 * (b - a).cross(c - a);
}

/// Per-element P1 geometry: opposite-edge vectors, signed area, basis gradients.
/// grad phi_a = perp(edge_a) / (2 A) with edge_0 = p2-p1, edge_1 = p0-p2, edge_2 = p1-p0.
struct TriGeometry {
    std::array<Vec2, 3> edge;
    double area = 0.0;

    TriGeometry(const Vec2& p0, const Vec2& p1, const Vec2& p2) {
        edge[0] = p2 - p1;
        edge[1] = p0 - p2;
        edge[2] = p1 - p0;
        area = 0.5 * edge[2].cross(p2 - p0);
    }

    Vec2 grad_basis(int a) const { return perp(edge[a]) / (2.0 * area); }

    /// Gradient of a P1 field with local nodal values w.
    Vec2 gradient(const std::array<double, 3>& w) const {
        Vec2 c{0, 0};
        for (int a = 0; a < 3; ++a) c += w[a] * edge[a];
        return perp(c) / (2.0 * area);
    }
};

/// Sign-aware, scale-invariant triangle quality: 4*sqrt(3)*area / sum(edge^2).
/// Equals 1 for an equilateral triangle, <= 0 for degenerate or inverted ones.
inline double triangle_quality(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double area = signed_area(a, b, c);
    const double l2 = (b - a).norm2() + (c - b).norm2() + (a - c).norm2();
    if (l2 == 0.0) return 0.0;
    return 4.0 * std::sqrt(3.0) * area / l2;
}

}  // namespace emshape
