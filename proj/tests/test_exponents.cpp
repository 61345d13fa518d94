#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>

#include "hsl/exponents.hpp"
#include "hsl/grid.hpp"

using namespace hsl;

TEST_CASE("finite and infinite exponent views") {
    const auto p = Exponent::finite(2.0, -0.5);
    CHECK(p.is_finite());
    CHECK(p.j() == Catch::Approx(0.5));
    CHECK(p.theta() == Catch::Approx(-0.5));
    CHECK(p.i() == Catch::Approx(2.0));
    CHECK(p.p() == Catch::Approx(2.0));
    CHECK(p.s() == Catch::Approx(-0.5));
    CHECK(p.r(1) == Catch::Approx(-0.5));

    const auto q = Exponent::infinite(0.25, 0.5, 2);  // s, alpha, n
    CHECK_FALSE(q.is_finite());
    CHECK(q.j() == Catch::Approx(-0.25));
    CHECK(q.theta() == Catch::Approx(0.25));
    CHECK(std::isinf(q.i()));
    CHECK(q.alpha(2) == Catch::Approx(0.5));
    CHECK(q.r(2) == Catch::Approx(0.75));  // theta - n * min(j, 0)
}

TEST_CASE("delta and shift") {
    CHECK(delta(2.0, 2.0) == Catch::Approx(0.0));
    CHECK(delta(1.0, 2.0) == Catch::Approx(-0.5));
    const auto p = Exponent::finite(3.0, 0.25);
    const auto ps = shift(p, 0.5);
    CHECK(ps.j() == Catch::Approx(p.j()));
    CHECK(ps.theta() == Catch::Approx(0.75));
}

TEST_CASE("involutions on random exponents") {
    GaussianSource src(20240817u);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 10000; ++i) {
        const double j = 4.0 * src.normal();
        const double th = 4.0 * src.normal();
        const auto e = Exponent::from_views(j, th);
        const auto dd = dual(dual(e));
        const auto hh = heart(heart(e));
        REQUIRE(std::abs(dd.j() - j) <= 1e-12);
        REQUIRE(std::abs(dd.theta() - th) <= 1e-12);
        REQUIRE(std::abs(hh.j() - j) <= 1e-12);
        REQUIRE(std::abs(hh.theta() - th) <= 1e-12);
    }
    const auto e = energy_exponent();
    const auto he = heart(e);
    CHECK(he.j() == e.j());        // exact: 1 - 1/2 == 1/2
    CHECK(he.theta() == e.theta());  // exact: -1 - (-1/2) == -1/2
    const auto t1 = std::chrono::steady_clock::now();
    CHECK(std::chrono::duration<double>(t1 - t0).count() < 1.0);
}

TEST_CASE("embeddings and interpolation") {
    // Sobolev-type line: theta(q) - theta(p) = n (j(q) - j(p)), theta decreasing.
    const auto p = Exponent::from_views(0.5, 0.0);
    const auto q = Exponent::from_views(0.25, -0.5);
    CHECK(embeds(p, q, 2));
    CHECK_FALSE(embeds(q, p, 2));
    CHECK_FALSE(embeds(p, Exponent::from_views(0.25, -0.4), 2));

    const auto mid = interp(p, q, 0.5);
    CHECK(mid.j() == Catch::Approx(0.375));
    CHECK(mid.theta() == Catch::Approx(-0.25));
}

TEST_CASE("I_max region for n = 1") {
    const Region r = region_imax(1);
    REQUIRE(r.polygons.size() == 1);
    const auto& poly = r.polygons[0];
    REQUIRE(poly.vertices.size() == 4);
    // Vertex set in (j, theta), i.e. p-representative corners
    // (0,0),(2,0),(1,-1),(-1,-1) as 1/p values.
    auto has_vertex = [&](double j, double th) {
        for (const auto& v : poly.vertices) {
            if (std::abs(v.j - j) < 1e-14 && std::abs(v.theta - th) < 1e-14) {
                return true;
            }
        }
        return false;
    };
    CHECK(has_vertex(0.0, 0.0));
    CHECK(has_vertex(2.0, 0.0));
    CHECK(has_vertex(1.0, -1.0));
    CHECK(has_vertex(-1.0, -1.0));

    // Interior, closed horizontal edges, open slanted edges.
    CHECK(r.contains(0.5, -0.5));
    CHECK(r.contains(1.0, 0.0));          // theta = 0 edge closed
    CHECK(r.contains(0.0, -1.0));         // theta = -1 edge closed
    CHECK_FALSE(r.contains(-0.5, -0.5));  // on the open slanted edge j = theta
    CHECK_FALSE(r.contains(1.5, -0.5));   // on the open edge j = theta + 2
    CHECK_FALSE(r.contains(0.5, 0.1));
    CHECK_FALSE(r.contains(3.0, -0.5));
}

TEST_CASE("heart image of the theta = 0 segment, n = 3") {
    // Segment {theta = 0, j in (1/2, 5/6)} maps to {theta = -1, j in (1/6, 1/2)},
    // whose p-endpoints are 6 and 2.
    const auto a = heart(Exponent::from_views(5.0 / 6.0, 0.0));
    const auto b = heart(Exponent::from_views(0.5, 0.0));
    CHECK(a.theta() == -1.0);
    CHECK(b.theta() == -1.0);
    CHECK(a.p() == Catch::Approx(6.0));
    CHECK(b.p() == Catch::Approx(2.0));
}

TEST_CASE("heart image of a region and hulls") {
    const Region r = region_imax(2);
    const Region h = region_heart(r);
    const Region hh = region_heart(h);
    // Round trip restores the membership function.
    for (double j = -1.5; j <= 2.5; j += 0.17) {
        for (double th = -1.5; th <= 0.5; th += 0.13) {
            CHECK(r.contains(j, th) == hh.contains(j, th));
        }
    }
    // Heart swaps membership.
    CHECK(h.contains(1.0 - 0.6, -1.0 - (-0.4)) == r.contains(0.6, -0.4));
}

TEST_CASE("decay and I_min regions") {
    const Region d = region_decay(1, 1.0);
    // Half-plane j > theta/1 - (1 + 1 - 1)/2 = theta - 1/2 clipped to a box.
    CHECK(d.contains(0.5, 0.0));
    CHECK_FALSE(d.contains(-1.0, 0.0));

    const Region imin = region_imin(1, 0.0, 0.0);
    CHECK(imin.contains(0.5, -0.5));  // energy exponent inside the closure
    CHECK_FALSE(imin.contains(2.5, 0.0));
}

TEST_CASE("region export emits vertices") {
    const Region r = region_imax(1);
    const std::string path = "/tmp/hsl_region_test.csv";
    region_export(r, path);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows >= 5);  // header + 4 vertices
}
