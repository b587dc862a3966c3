#include "hvc/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace hvc {

double Homography::det() const {
    const auto& m = m_;
    return m[0] * (m[4] * m[8] - m[5] * m[7]) -
           m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

void Homography::canonicalize() {
    if (std::abs(m_[8]) > 1e-9) {
        const double s = 1.0 / m_[8];
        for (double& v : m_) v *= s;
    } else {
        double fro = 0.0;
        for (double v : m_) fro += v * v;
        fro = std::sqrt(fro);
        if (fro < 1e-300)
            throw Singular("zero homography matrix");
        double s = 1.0 / fro;
        if ((m_[0] + m_[4] + m_[8]) * s < 0.0) s = -s;
        for (double& v : m_) v *= s;
    }
    if (std::abs(det()) < 1e-12)
        throw Singular("homography is not invertible");
}

std::string Homography::to_text() const {
    char buf[320];
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g",
                  m_[0], m_[1], m_[2], m_[3], m_[4], m_[5], m_[6], m_[7], m_[8]);
    return buf;
}

Homography Homography::from_text(const std::string& line) {
    std::istringstream is(line);
    std::array<double, 9> m;
    for (double& v : m) {
        if (!(is >> v))
            throw ParseError("expected 9 floats for a homography");
    }
    return Homography(m);
}

double Quad::area() const {
    double s = 0.0;
    for (int k = 0; k < 4; ++k) {
        const Vec2& a = corners[k];
        const Vec2& b = corners[(k + 1) % 4];
        s += a.x * b.y - b.x * a.y;
    }
    return 0.5 * std::abs(s);
}

bool Quad::valid() const {
    // All consecutive edge cross products must share a sign (strict convexity).
    double sign = 0.0;
    for (int k = 0; k < 4; ++k) {
        const Vec2 e1 = corners[(k + 1) % 4] - corners[k];
        const Vec2 e2 = corners[(k + 2) % 4] - corners[(k + 1) % 4];
        const double cz = e1.x * e2.y - e1.y * e2.x;
        if (cz == 0.0) return false;
        if (sign == 0.0)
            sign = cz;
        else if (sign * cz < 0.0)
            return false;
    }
    return area() >= 16.0;
}

bool Quad::contains(const Vec2& p) const {
    double sign = 0.0;
    for (int k = 0; k < 4; ++k) {
        const Vec2 e = corners[(k + 1) % 4] - corners[k];
        const Vec2 v = p - corners[k];
        const double cz = e.x * v.y - e.y * v.x;
        if (cz == 0.0) continue; // on the edge line
        if (sign == 0.0)
            sign = cz;
        else if (sign * cz < 0.0)
            return false;
    }
    return true;
}

double Polygon::area() const {
    double s = 0.0;
    const size_t n = pts.size();
    for (size_t k = 0; k < n; ++k) {
        const Vec2& a = pts[k];
        const Vec2& b = pts[(k + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    return 0.5 * std::abs(s);
}

bool Polygon::contains(const Vec2& p) const {
    const size_t n = pts.size();
    if (n < 3) return false;
    double sign = 0.0;
    for (size_t k = 0; k < n; ++k) {
        const Vec2 e = pts[(k + 1) % n] - pts[k];
        const Vec2 v = p - pts[k];
        const double cz = e.x * v.y - e.y * v.x;
        if (cz == 0.0) continue;
        if (sign == 0.0)
            sign = cz;
        else if (sign * cz < 0.0)
            return false;
    }
    return true;
}

bool solve_linear_system(double* a, double* b, int n, double tol) {
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::abs(a[col * n + col]);
        for (int r = col + 1; r < n; ++r) {
            const double v = std::abs(a[r * n + col]);
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (best < tol) return false;
        if (pivot != col) {
            for (int c = col; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
            std::swap(b[col], b[pivot]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] * inv;
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < n; ++c) s -= a[r * n + c] * b[c];
        b[r] = s / a[r * n + r];
    }
    return true;
}

Homography solve_homography(const std::array<Vec2, 4>& src, const std::array<Vec2, 4>& dst) {
    // Two rows per correspondence, unknowns h11..h32 with h33 fixed to 1:
    //   [x y 1 0 0 0 -ux -uy] h = u
    //   [0 0 0 x y 1 -vx -vy] h = v
    double a[64] = {0};
    double b[8] = {0};
    for (int k = 0; k < 4; ++k) {
        const double x = src[k].x, y = src[k].y;
        const double u = dst[k].x, v = dst[k].y;
        double* r0 = a + (2 * k) * 8;
        double* r1 = a + (2 * k + 1) * 8;
        r0[0] = x; r0[1] = y; r0[2] = 1; r0[6] = -u * x; r0[7] = -u * y;
        r1[3] = x; r1[4] = y; r1[5] = 1; r1[6] = -v * x; r1[7] = -v * y;
        b[2 * k] = u;
        b[2 * k + 1] = v;
    }
    if (!solve_linear_system(a, b, 8))
        throw DegenerateQuad("4-point homography system is rank-deficient");
    return Homography({b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7], 1.0});
}

Homography four_point_to_homography(const FourPointDisplacement& disp, int width, int height) {
    if (width < 2 || height < 2)
        throw DegenerateQuad("template must be at least 2x2");
    const Quad tmpl = Quad::template_rect(width, height);
    std::array<Vec2, 4> dst;
    for (int k = 0; k < 4; ++k) dst[k] = tmpl.corners[k] + disp.d[k];
    return solve_homography(tmpl.corners, dst);
}

FourPointDisplacement homography_to_four_point(const Homography& h, int width, int height) {
    const Quad tmpl = Quad::template_rect(width, height);
    FourPointDisplacement out;
    for (int k = 0; k < 4; ++k) out.d[k] = h.apply(tmpl.corners[k]) - tmpl.corners[k];
    return out;
}

Homography compose(const Homography& a, const Homography& b) {
    std::array<double, 9> m{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += a(r, k) * b(k, c);
            m[r * 3 + c] = s;
        }
    return Homography(m);
}

Homography invert(const Homography& h) {
    const double d = h.det();
    if (std::abs(d) < 1e-12)
        throw Singular("homography determinant below 1e-12");
    const auto& m = h.data();
    std::array<double, 9> inv = {
        m[4] * m[8] - m[5] * m[7], m[2] * m[7] - m[1] * m[8], m[1] * m[5] - m[2] * m[4],
        m[5] * m[6] - m[3] * m[8], m[0] * m[8] - m[2] * m[6], m[2] * m[3] - m[0] * m[5],
        m[3] * m[7] - m[4] * m[6], m[1] * m[6] - m[0] * m[7], m[0] * m[4] - m[1] * m[3]};
    const double s = 1.0 / d;
    for (double& v : inv) v *= s;
    return Homography(inv);
}

Homography normalization_homography(const Quad& quad, int width, int height) {
    if (!quad.valid())
        throw DegenerateQuad("normalization_homography: invalid quad");
    return solve_homography(quad.corners, Quad::template_rect(width, height).corners);
}

Homography surrogate_update(const Homography& h_jn, const Homography& h_ij_s) {
    return compose(h_ij_s, h_jn);
}

Homography recover_full_homography(const Homography& h_in, const Homography& h_jn) {
    return compose(invert(h_in), h_jn);
}

Quad map_quad(const Homography& h, const Quad& q) {
    Quad out;
    for (int k = 0; k < 4; ++k) out.corners[k] = h.apply(q.corners[k]);
    return out;
}

} // namespace hvc
