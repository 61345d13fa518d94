#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <numbers>

#include "hsl/grid.hpp"

using namespace hsl;

namespace {

GridSpec small_spec(int n) {
    GridSpec s;
    s.n = n;
    s.m = 1;
    s.L = 8.0;
    s.Nx = 32;
    s.t_min = 1.0 / 16.0;
    s.t_max = 1.0;
    s.K = 16;
    return s;
}

}  // namespace

TEST_CASE("grid spec validation") {
    GridSpec s = small_spec(1);
    CHECK_NOTHROW(s.validate());
    s.Nx = 33;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = small_spec(1);
    s.t_min = 2.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("spatial index round trip") {
    GridSpec s = small_spec(2);
    for (std::size_t i = 0; i < s.spatial_size(); i += 7) {
        auto c = spatial_coords(s, i);
        CHECK(spatial_index(s, c) == i);
    }
    // Wrapping.
    CHECK(spatial_index(s, {-1, 0, 0}) == spatial_index(s, {s.Nx - 1, 0, 0}));
}

TEST_CASE("cell-ball overlap partitions the ball exactly") {
    for (int n : {1, 2}) {
        GridSpec s = small_spec(n);
        BallKernelCache cache(s);
        for (double r : {0.3, 1.0, 2.7}) {
            const auto& g = cache.kernel(r);
            double total = 0.0;
            for (double w : g) total += w;
            const double vol = unit_ball_volume(n) * std::pow(r, n);
            CHECK(total == Catch::Approx(vol).epsilon(1e-12));
        }
    }
}

TEST_CASE("disk-box overlap agrees with fine midpoint quadrature") {
    const double r = 1.3;
    const double x0 = 0.4, x1 = 1.1, y0 = -0.9, y1 = 0.2;
    const double exact = hsl::detail::disk_box_area(x0, x1, y0, y1, r);
    const int q = 4000;
    double approx = 0.0;
    const double hx = (x1 - x0) / q, hy = (y1 - y0) / q;
    for (int a = 0; a < q; ++a) {
        const double x = x0 + (a + 0.5) * hx;
        for (int b = 0; b < q; ++b) {
            const double y = y0 + (b + 0.5) * hy;
            if (x * x + y * y <= r * r) approx += hx * hy;
        }
    }
    CHECK(exact == Catch::Approx(approx).margin(1e-3));
}

TEST_CASE("injectivity radius guard") {
    GridSpec s = small_spec(1);
    BallKernelCache cache(s);
    CHECK_THROWS_WITH(cache.kernel(4.5),
                      Catch::Matchers::ContainsSubstring("injectivity"));
    CHECK_THROWS_AS(cone_weights(s, cache, 0, 8.0), std::invalid_argument);
}

TEST_CASE("tent cells stay below the ball radius") {
    GridSpec s = small_spec(1);
    BallKernelCache cache(s);
    const double r = 0.5;
    const auto cells = tent_cells(s, cache, 3, r);
    REQUIRE_FALSE(cells.empty());
    for (const auto& cw : cells) {
        CHECK(s.t_level(cw.level) <= r);
        CHECK(cw.w > 0.0);
    }
}

TEST_CASE("whitney cell weights reproduce the region volume") {
    for (int n : {1, 2}) {
        GridSpec s = small_spec(n);
        BallKernelCache cache(s);
        WhitneyParameter c{1.0, 2.0};
        const double t = 0.25;  // interior: (t/2, 2t) well inside [t_min, t_max]
        const auto cells = whitney_cells(s, cache, t, 1, c);
        double total = 0.0;
        for (const auto& cw : cells) total += cw.w;
        const double vol = (c.c1 - 1.0 / c.c1) * t * unit_ball_volume(n) *
                           std::pow(c.c0 * t, n);
        CHECK(total == Catch::Approx(vol).epsilon(1e-10));
    }
}

TEST_CASE("whitney grid partitions the half-space grid") {
    GridSpec s = small_spec(1);  // h = log(2)/... K=16 levels over 4 octaves
    // t_max/t_min = 16 => log spacing log(16)/15, not an integer octave split.
    CHECK_THROWS_WITH(whitney_grid(s, 0),
                      Catch::Matchers::ContainsSubstring("levels per octave"));

    // h = log2/4, 4 octave bands, band floors at dx * 2^b.
    s.K = 16;
    s.t_min = 0.25 * std::pow(2.0, 1.0 / 8.0);
    s.t_max = s.t_min * std::pow(2.0, 15.0 / 4.0);
    const WhitneyGrid grid = whitney_grid(s, 0);
    CHECK(grid.levels_per_octave == 4);
    std::vector<int> covered(s.K * s.spatial_size(), 0);
    for (const auto& box : grid.boxes) {
        for_each_box_cell(s, box, [&](int k, std::size_t sp) {
            covered[k * s.spatial_size() + sp] += 1;
        });
    }
    for (int c : covered) CHECK(c == 1);
}

TEST_CASE("whitney neighbor count is constant on interior bands") {
    GridSpec s = small_spec(1);
    s.K = 16;
    s.t_min = 0.25 * std::pow(2.0, 1.0 / 8.0);
    s.t_max = s.t_min * std::pow(2.0, 15.0 / 4.0);
    const WhitneyGrid grid = whitney_grid(s, 0);
    WhitneyParameter c{1.0, 2.0};
    // Boxes of the middle band: counts must agree (translation symmetry).
    std::vector<std::size_t> counts;
    for (std::size_t i = 0; i < grid.boxes.size(); ++i) {
        if (grid.boxes[i].band == 1) {
            counts.push_back(whitney_neighbors(s, grid, i, c).size());
        }
    }
    REQUIRE_FALSE(counts.empty());
    for (std::size_t c2 : counts) CHECK(c2 == counts.front());
}

TEST_CASE("whitney grid rejects unresolvable cube sides") {
    GridSpec s = small_spec(1);
    s.K = 16;
    s.t_min = 0.25 * std::pow(2.0, 1.0 / 8.0);
    s.t_max = s.t_min * std::pow(2.0, 15.0 / 4.0);
    CHECK_THROWS_WITH(whitney_grid(s, 10),
                      Catch::Matchers::ContainsSubstring("dyadic"));
}

TEST_CASE("random fields are deterministic per seed") {
    GridSpec s = small_spec(2);
    const Field a = random_field(s, 42u, -0.5);
    const Field b = random_field(s, 42u, -0.5);
    const Field c = random_field(s, 43u, -0.5);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
}

TEST_CASE("field rejects non-finite samples") {
    GridSpec s = small_spec(1);
    std::vector<cplx> vals(s.field_size(), cplx(0.0, 0.0));
    vals[3] = cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
    CHECK_THROWS_AS(Field(s, std::move(vals)), std::invalid_argument);
}

TEST_CASE("hsf round trip is bit exact") {
    GridSpec s = small_spec(2);
    const Field f = random_field(s, 7u, 0.25);
    const std::string path = "/tmp/hsl_test_field.hsf";
    hsf_write(f, path);
    const Field g = hsf_read(path);
    REQUIRE(g.values.size() == f.values.size());
    CHECK(std::memcmp(g.values.data(), f.values.data(),
                      f.values.size() * sizeof(cplx)) == 0);

    // Second write of the reread field is byte-identical.
    const std::string path2 = "/tmp/hsl_test_field2.hsf";
    hsf_write(g, path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
}

TEST_CASE("hsf rejects corrupted files") {
    GridSpec s = small_spec(1);
    const Field f = random_field(s, 1u);
    const std::string path = "/tmp/hsl_test_trunc.hsf";
    hsf_write(f, path);
    // Truncate the payload.
    {
        std::ifstream in(path, std::ios::binary);
        std::string all((std::istreambuf_iterator<char>(in)), {});
        std::ofstream out(path, std::ios::binary);
        out.write(all.data(), static_cast<std::streamsize>(all.size() - 16));
    }
    CHECK_THROWS_WITH(hsf_read(path), Catch::Matchers::ContainsSubstring("truncated"));

    // Header/payload mismatch: claim a different channel count.
    const std::string path3 = "/tmp/hsl_test_badheader.hsf";
    {
        std::ofstream out(path3, std::ios::binary);
        out << "{\"n\":1,\"m\":2,\"L\":8.0,\"Nx\":32,\"t_min\":0.0625,"
               "\"t_max\":1.0,\"K\":16,\"channels\":2,\"dtype\":\"c128\","
               "\"byte_order\":\"LE\"}\n";
    }
    CHECK_THROWS(hsf_read(path3));
}
