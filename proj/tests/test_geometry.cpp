#include <doctest.h>

#include <cmath>

#include "hvc/geometry.hpp"
#include "hvc/rng.hpp"

using namespace hvc;

namespace {

// Independent oracle: the same 8x8 system assembled column-major and solved
// by naive Gauss-Jordan elimination without pivoting tricks shared with the
// implementation.
bool oracle_solve_h(const std::array<Vec2, 4>& src, const std::array<Vec2, 4>& dst,
                    std::array<double, 9>& h_out) {
    double m[8][9];
    for (int k = 0; k < 4; ++k) {
        const double x = src[k].x, y = src[k].y, u = dst[k].x, v = dst[k].y;
        double r0[9] = {x, y, 1, 0, 0, 0, -u * x, -u * y, u};
        double r1[9] = {0, 0, 0, x, y, 1, -v * x, -v * y, v};
        for (int c = 0; c < 9; ++c) {
            m[2 * k][c] = r0[c];
            m[2 * k + 1][c] = r1[c];
        }
    }
    for (int col = 0; col < 8; ++col) {
        int piv = -1;
        for (int r = col; r < 8; ++r)
            if (std::abs(m[r][col]) > 1e-12) {
                piv = r;
                break;
            }
        if (piv < 0) return false;
        if (piv != col)
            for (int c = 0; c < 9; ++c) std::swap(m[piv][c], m[col][c]);
        const double inv = 1.0 / m[col][col];
        for (int c = 0; c < 9; ++c) m[col][c] *= inv;
        for (int r = 0; r < 8; ++r) {
            if (r == col) continue;
            const double f = m[r][col];
            for (int c = 0; c < 9; ++c) m[r][c] -= f * m[col][c];
        }
    }
    for (int i = 0; i < 8; ++i) h_out[i] = m[i][8];
    h_out[8] = 1.0;
    return true;
}

Quad random_perturbed_quad(Rng& rng, double range, FourPointDisplacement* disp_out = nullptr) {
    const Quad base = Quad::template_rect(120, 120);
    for (;;) {
        Quad q = base;
        FourPointDisplacement d;
        for (int k = 0; k < 4; ++k) {
            d.d[k] = Vec2(rng.uniform(-range, range), rng.uniform(-range, range));
            q.corners[k] = base.corners[k] + d.d[k];
        }
        if (q.valid()) {
            if (disp_out) *disp_out = d;
            return q;
        }
    }
}

double quad_distance(const Quad& a, const Quad& b) {
    double m = 0.0;
    for (int k = 0; k < 4; ++k) m = std::max(m, (a.corners[k] - b.corners[k]).norm());
    return m;
}

} // namespace

TEST_CASE("solve_homography identity and translation") {
    const Quad t = Quad::template_rect(120, 120);
    const Homography id = solve_homography(t.corners, t.corners);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(id(r, c) == doctest::Approx(r == c ? 1.0 : 0.0).epsilon(1e-12));

    std::array<Vec2, 4> dst;
    for (int k = 0; k < 4; ++k) dst[k] = t.corners[k] + Vec2(5, 0);
    const Homography tr = solve_homography(t.corners, dst);
    CHECK(tr(0, 2) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(tr(1, 2) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("solve_homography matches the independent elimination oracle") {
    Rng rng(7);
    const Quad base = Quad::template_rect(120, 120);
    for (int trial = 0; trial < 200; ++trial) {
        const Quad dst = random_perturbed_quad(rng, 32.0);
        const Homography h = solve_homography(base.corners, dst.corners);
        std::array<double, 9> oracle;
        REQUIRE(oracle_solve_h(base.corners, dst.corners, oracle));
        for (int i = 0; i < 9; ++i) CHECK(h.data()[i] == doctest::Approx(oracle[i]).epsilon(1e-8));
        // reprojection
        for (int k = 0; k < 4; ++k)
            CHECK((h.apply(base.corners[k]) - dst.corners[k]).norm() < 1e-9);
    }
}

TEST_CASE("solve_homography rejects degenerate correspondences") {
    const Quad t = Quad::template_rect(120, 120);
    std::array<Vec2, 4> collapsed;
    for (int k = 0; k < 4; ++k) collapsed[k] = Vec2(10, 10);
    CHECK_THROWS_AS(solve_homography(collapsed, t.corners), DegenerateQuad);
}

TEST_CASE("four-point parameterization round trips") {
    SUBCASE("zero displacement is identity") {
        const Homography h = four_point_to_homography(FourPointDisplacement::zero(), 120, 120);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                CHECK(h(r, c) == doctest::Approx(r == c ? 1.0 : 0.0).epsilon(1e-12));
    }
    SUBCASE("uniform displacement is translation") {
        const Homography h =
            four_point_to_homography(FourPointDisplacement::uniform(3, -2), 64, 64);
        CHECK(h(0, 2) == doctest::Approx(3.0).epsilon(1e-9));
        CHECK(h(1, 2) == doctest::Approx(-2.0).epsilon(1e-9));
        const FourPointDisplacement d = homography_to_four_point(h, 64, 64);
        for (int k = 0; k < 4; ++k) {
            CHECK(d.d[k].x == doctest::Approx(3.0).epsilon(1e-9));
            CHECK(d.d[k].y == doctest::Approx(-2.0).epsilon(1e-9));
        }
    }
    SUBCASE("random displacements in [-32,32] round trip below 1e-9") {
        Rng rng(11);
        for (int trial = 0; trial < 500; ++trial) {
            FourPointDisplacement d;
            random_perturbed_quad(rng, 32.0, &d);
            const Homography h = four_point_to_homography(d, 120, 120);
            const FourPointDisplacement back = homography_to_four_point(h, 120, 120);
            for (int k = 0; k < 4; ++k) CHECK((back.d[k] - d.d[k]).norm() < 1e-9);
        }
    }
}

TEST_CASE("homography_to_four_point rejects corners at infinity") {
    // corner (119, 0) sits exactly on the line h31*x + h32*y + h33 = 0
    const Homography h({1, 0, 0, 0, 1, 0, -1.0 / 119.0, 0, 1}, false);
    CHECK_THROWS_AS(homography_to_four_point(h, 120, 120), PointAtInfinity);
}

TEST_CASE("compose and invert") {
    Rng rng(3);
    SUBCASE("identity neutral element") {
        const Quad dst = random_perturbed_quad(rng, 20.0);
        const Homography h = solve_homography(Quad::template_rect(120, 120).corners, dst.corners);
        const Homography c = compose(Homography::identity(), h);
        for (int i = 0; i < 9; ++i) CHECK(c.data()[i] == doctest::Approx(h.data()[i]).epsilon(1e-12));
    }
    SUBCASE("invert of translation") {
        const Homography inv = invert(Homography::translation(5, 0));
        CHECK(inv(0, 2) == doctest::Approx(-5.0).epsilon(1e-12));
    }
    SUBCASE("compose agrees with sequential application") {
        for (int trial = 0; trial < 100; ++trial) {
            const Quad qa = random_perturbed_quad(rng, 25.0);
            const Quad qb = random_perturbed_quad(rng, 25.0);
            const Quad base = Quad::template_rect(120, 120);
            const Homography a = solve_homography(base.corners, qa.corners);
            const Homography b = solve_homography(base.corners, qb.corners);
            const Homography ab = compose(a, b);
            for (int k = 0; k < 4; ++k) {
                const Vec2 p = base.corners[k];
                CHECK((ab.apply(p) - a.apply(b.apply(p))).norm() < 1e-10);
            }
        }
    }
    SUBCASE("compose(h, invert(h)) is the identity in canonical form") {
        for (int trial = 0; trial < 50; ++trial) {
            const Quad q = random_perturbed_quad(rng, 30.0);
            const Homography h = solve_homography(Quad::template_rect(120, 120).corners, q.corners);
            const Homography e = compose(h, invert(h));
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    CHECK(e(r, c) == doctest::Approx(r == c ? 1.0 : 0.0).epsilon(1e-9));
        }
    }
    SUBCASE("invert throws on a singular matrix") {
        CHECK_THROWS_AS(invert(Homography({1, 0, 0, 2, 0, 0, 0, 0, 1}, false)), Singular);
    }
}

TEST_CASE("normalization homography maps the quad onto template corners") {
    SUBCASE("template rectangle maps to identity") {
        const Homography h = normalization_homography(Quad::template_rect(120, 120), 120, 120);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                CHECK(h(r, c) == doctest::Approx(r == c ? 1.0 : 0.0).epsilon(1e-12));
    }
    SUBCASE("doubled rectangle maps with scale 0.5") {
        const Quad q = Quad::rect(0, 0, 238, 238);
        const Homography h = normalization_homography(q, 120, 120);
        CHECK(h(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(h(1, 1) == doctest::Approx(0.5).epsilon(1e-9));
    }
    SUBCASE("arbitrary convex quad verified by the solve oracle") {
        Rng rng(19);
        for (int trial = 0; trial < 50; ++trial) {
            Quad q = random_perturbed_quad(rng, 28.0);
            for (auto& c : q.corners) c = c + Vec2(60, 60);
            const Homography h = normalization_homography(q, 120, 120);
            const Quad t = Quad::template_rect(120, 120);
            for (int k = 0; k < 4; ++k) CHECK((h.apply(q.corners[k]) - t.corners[k]).norm() < 1e-8);
        }
    }
}

TEST_CASE("surrogate update reproduces the inter-template identity") {
    Rng rng(23);
    SUBCASE("identity increment keeps H_j^n") {
        const Quad q = random_perturbed_quad(rng, 20.0);
        const Homography h_jn = solve_homography(Quad::template_rect(120, 120).corners, q.corners);
        const Homography u = surrogate_update(h_jn, Homography::identity());
        for (int i = 0; i < 9; ++i)
            CHECK(u.data()[i] == doctest::Approx(h_jn.data()[i]).epsilon(1e-12));
    }
    SUBCASE("exact setup recovers H_ij^*") {
        const Quad base = Quad::template_rect(120, 120);
        for (int trial = 0; trial < 200; ++trial) {
            const Homography h_star =
                solve_homography(base.corners, random_perturbed_quad(rng, 25.0).corners);
            const Homography h_s =
                solve_homography(base.corners, random_perturbed_quad(rng, 10.0).corners);
            const Homography h_jn = compose(invert(h_s), h_star);
            const Homography updated = surrogate_update(h_jn, h_s);
            const Quad got = map_quad(updated, base);
            const Quad want = map_quad(h_star, base);
            CHECK(quad_distance(got, want) < 1e-8);
        }
    }
}

TEST_CASE("recover_full_homography") {
    Rng rng(29);
    const Quad base = Quad::template_rect(120, 120);
    SUBCASE("equal inputs give identity") {
        const Homography h = solve_homography(base.corners, random_perturbed_quad(rng, 15.0).corners);
        const Homography r = recover_full_homography(h, h);
        for (int i = 0; i < 3; ++i) CHECK(r(i, i) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("forward construction recovers H_ij") {
        for (int trial = 0; trial < 100; ++trial) {
            const Homography h_in =
                solve_homography(random_perturbed_quad(rng, 20.0).corners, base.corners);
            const Homography h_ij =
                solve_homography(base.corners, random_perturbed_quad(rng, 20.0).corners);
            const Homography h_jn = compose(h_in, h_ij);
            const Homography rec = recover_full_homography(h_in, h_jn);
            const Quad got = map_quad(rec, base);
            const Quad want = map_quad(h_ij, base);
            CHECK(quad_distance(got, want) < 1e-8);
        }
    }
}

TEST_CASE("Eq.1 consistency chain") {
    Rng rng(31);
    const Quad base = Quad::template_rect(120, 120);
    for (int trial = 0; trial < 100; ++trial) {
        const Homography h_in =
            solve_homography(random_perturbed_quad(rng, 12.0).corners, base.corners);
        const Homography h_ij =
            solve_homography(base.corners, random_perturbed_quad(rng, 12.0).corners);
        const Homography h_s =
            solve_homography(base.corners, random_perturbed_quad(rng, 8.0).corners);
        const Homography h_star = compose(h_in, h_ij);
        const Homography h_jn = compose(invert(h_s), h_star);
        const Homography recovered = recover_full_homography(h_in, surrogate_update(h_jn, h_s));
        CHECK(quad_distance(map_quad(recovered, base), map_quad(h_ij, base)) < 1e-8);
    }
}

TEST_CASE("canonical form uses unit Frobenius norm when h33 vanishes") {
    // invertible projective map with h33 == 0
    const Homography h({0, 0, 1, 0, 1, 0, 1, 0, 0}, true);
    double fro = 0.0;
    for (double v : h.data()) fro += v * v;
    CHECK(std::sqrt(fro) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(h(0, 0) + h(1, 1) + h(2, 2) >= 0.0);
}

TEST_CASE("quad validity") {
    CHECK(Quad::template_rect(120, 120).valid());
    CHECK(Quad::rect(0, 0, 3, 3).valid() == false); // area 9 < 16
    Quad self_intersecting({Vec2{0, 0}, Vec2{100, 100}, Vec2{100, 0}, Vec2{0, 100}});
    CHECK(self_intersecting.valid() == false);
    CHECK(Quad::template_rect(120, 120).contains(Vec2(60, 60)));
    CHECK(Quad::template_rect(120, 120).contains(Vec2(0, 0)));
    CHECK(!Quad::template_rect(120, 120).contains(Vec2(-1, 0)));
}

TEST_CASE("homography text round trip") {
    Rng rng(37);
    const Quad q = random_perturbed_quad(rng, 25.0);
    const Homography h = solve_homography(Quad::template_rect(120, 120).corners, q.corners);
    const Homography back = Homography::from_text(h.to_text());
    for (int i = 0; i < 9; ++i) CHECK(back.data()[i] == doctest::Approx(h.data()[i]).epsilon(1e-15));
    CHECK_THROWS_AS(Homography::from_text("1 2 3"), ParseError);
}
