#pragma once

#include <array>
#include <cmath>
#include <vector>
#include <iosfwd>
#include <string>

#include "hvc/error.hpp"

namespace hvc {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double norm() const { return std::hypot(x, y); }
};

// 3x3 projective transform, row-major. Kept in canonical form: scaled so
// h33 == 1 when |h33| is large enough, otherwise unit Frobenius norm with
// nonnegative trace.
class Homography {
public:
    Homography() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}
    explicit Homography(const std::array<double, 9>& m, bool canonicalize_now = true) : m_(m) {
        if (canonicalize_now) canonicalize();
    }

    static Homography identity() { return Homography(); }
    static Homography translation(double tx, double ty) {
        return Homography({1, 0, tx, 0, 1, ty, 0, 0, 1});
    }
    static Homography scaling(double sx, double sy) {
        return Homography({sx, 0, 0, 0, sy, 0, 0, 0, 1});
    }

    double operator()(int r, int c) const { return m_[r * 3 + c]; }
    double& at(int r, int c) { return m_[r * 3 + c]; }
    const std::array<double, 9>& data() const { return m_; }

    // Applies the transform with perspective division.
    Vec2 apply(const Vec2& p) const {
        const double w = m_[6] * p.x + m_[7] * p.y + m_[8];
        if (std::abs(w) < 1e-12)
            throw PointAtInfinity("homography maps point to infinity");
        return {(m_[0] * p.x + m_[1] * p.y + m_[2]) / w,
                (m_[3] * p.x + m_[4] * p.y + m_[5]) / w};
    }

    // Same as apply() but returns false instead of throwing; used in pixel loops.
    bool try_apply(double x, double y, double& ox, double& oy) const {
        const double w = m_[6] * x + m_[7] * y + m_[8];
        if (std::abs(w) < 1e-12) return false;
        ox = (m_[0] * x + m_[1] * y + m_[2]) / w;
        oy = (m_[3] * x + m_[4] * y + m_[5]) / w;
        return true;
    }

    double det() const;
    void canonicalize();

    // Single line, 9 ASCII floats, row-major, space-separated.
    std::string to_text() const;
    static Homography from_text(const std::string& line);

private:
    std::array<double, 9> m_;
};

// Four ordered corners in pixels, clockwise from top-left.
struct Quad {
    std::array<Vec2, 4> corners;

    Quad() = default;
    explicit Quad(const std::array<Vec2, 4>& c) : corners(c) {}

    // Axis-aligned rectangle spanning [x0,x1]x[y0,y1].
    static Quad rect(double x0, double y0, double x1, double y1) {
        return Quad({Vec2{x0, y0}, Vec2{x1, y0}, Vec2{x1, y1}, Vec2{x0, y1}});
    }

    // Template rectangle with the pixel-center convention: max corner (W-1, H-1).
    static Quad template_rect(int width, int height) {
        return rect(0, 0, width - 1, height - 1);
    }

    double area() const;
    // Strictly convex, consistently oriented, area >= 16 px^2.
    bool valid() const;
    // Point-in-quad test (boundary counts as inside). Requires a valid quad.
    bool contains(const Vec2& p) const;
};

// Convex polygon in pixels, consistently oriented. Used for occluders.
struct Polygon {
    std::vector<Vec2> pts;

    Polygon() = default;
    explicit Polygon(std::vector<Vec2> p) : pts(std::move(p)) {}

    double area() const;
    // Boundary counts as inside.
    bool contains(const Vec2& p) const;
};

// Four ordered displacement vectors of the template corners, in template pixels.
struct FourPointDisplacement {
    std::array<Vec2, 4> d;

    FourPointDisplacement() = default;
    explicit FourPointDisplacement(const std::array<Vec2, 4>& disp) : d(disp) {}

    static FourPointDisplacement zero() { return FourPointDisplacement(); }
    static FourPointDisplacement uniform(double tx, double ty) {
        return FourPointDisplacement({Vec2{tx, ty}, Vec2{tx, ty}, Vec2{tx, ty}, Vec2{tx, ty}});
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& v : d) m = std::max({m, std::abs(v.x), std::abs(v.y)});
        return m;
    }
};

// Solves an n x n dense linear system in place by Gaussian elimination with
// partial pivoting. Returns false if a pivot falls below tol.
bool solve_linear_system(double* a, double* b, int n, double tol = 1e-12);

// Exact homography from 4 point correspondences via the direct 8x8 system.
// Throws DegenerateQuad when the system is rank-deficient.
Homography solve_homography(const std::array<Vec2, 4>& src, const std::array<Vec2, 4>& dst);

// The homography moving template corners by disp; template corners use the
// pixel-center convention (max corner (W-1, H-1)).
Homography four_point_to_homography(const FourPointDisplacement& disp, int width, int height);

// Inverse of the parameterization: d_k = h(corner_k) - corner_k.
FourPointDisplacement homography_to_four_point(const Homography& h, int width, int height);

Homography compose(const Homography& a, const Homography& b);
Homography invert(const Homography& h);

// H_i^n: maps the quad corners onto the template rectangle corners.
Homography normalization_homography(const Quad& quad, int width, int height);

// One LK update of the current-frame sampling homography:
// H_j^n <- H_ij^s * H_j^n.
Homography surrogate_update(const Homography& h_jn, const Homography& h_ij_s);

// H_ij = (H_i^n)^{-1} H_j^n; maps current-frame pixels to reference pixels.
Homography recover_full_homography(const Homography& h_in, const Homography& h_jn);

// Maps the quad through h corner by corner.
Quad map_quad(const Homography& h, const Quad& q);

} // namespace hvc
