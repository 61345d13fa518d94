#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "hsl/quasinorms.hpp"

using namespace hsl;

namespace {

GridSpec base_spec(int n, int Nx, int K, double t_min, double t_max,
                   double L = 8.0) {
    GridSpec s;
    s.n = n;
    s.m = 1;
    s.L = L;
    s.Nx = Nx;
    s.t_min = t_min;
    s.t_max = t_max;
    s.K = K;
    return s;
}

// Whitney-aligned grid: h = log2/4, band floors at dx * 2^b (n = 1).
GridSpec aligned_spec() {
    GridSpec s = base_spec(1, 32, 16, 0.25 * std::pow(2.0, 1.0 / 8.0), 1.0);
    s.t_max = s.t_min * std::pow(2.0, 15.0 / 4.0);
    return s;
}

}  // namespace

TEST_CASE("norms vanish on the zero field") {
    GridSpec s = base_spec(1, 32, 8, 0.05, 0.8);
    BallKernelCache cache(s);
    const Field z = Field::zeros(s);
    CHECK(l2s_norm(z, 0.3).value == 0.0);
    CHECK(tent_norm(z, Exponent::finite(2.0, 0.0), cache).value == 0.0);
    CHECK(z_norm(z, Exponent::finite(2.0, 0.0), WhitneyParameter{0.5, 2.0},
                 cache).value == 0.0);
}

TEST_CASE("tent norm collapses to the weighted L2 norm at p = 2") {
    struct Case { int n; int Nx; };
    for (auto [n, Nx] : {Case{1, 64}, Case{2, 16}}) {
        GridSpec s = base_spec(n, Nx, 8, 0.05, 1.0);
        BallKernelCache cache(s);
        const Field f = random_field(s, 11u, -0.25);
        for (double sv : {0.0, -0.5}) {
            const double tv = tent_norm(f, Exponent::finite(2.0, sv), cache).value;
            const double lv = l2s_norm(f, sv).value;
            CHECK(tv == Catch::Approx(std::sqrt(unit_ball_volume(n)) * lv)
                            .epsilon(1e-12));
        }
    }
}

TEST_CASE("tent norm hand value on an indicator block") {
    // h = log2/4 and t_min = 2^{1/8}: level-cell boundaries sit at 2^{k/4},
    // so levels 4..7 tile t in [1, 2] exactly.  f = 1 on those levels over
    // 8 cells of total measure 1 gives ||t^{-0} f||^2_{L^2(dx dt/t)} = log 2
    // and hence a tent (2,0)-norm of sqrt(2 log 2) in n = 1.
    GridSpec s = base_spec(1, 128, 12, std::pow(2.0, 1.0 / 8.0), 1.0, 16.0);
    s.t_max = s.t_min * std::pow(2.0, 11.0 / 4.0);
    BallKernelCache cache(s);
    Field f = Field::zeros(s);
    for (int k = 4; k <= 7; ++k) {
        for (std::size_t sp = 0; sp < 8; ++sp) {
            f.values[f.index(k, sp, 0)] = 1.0;
        }
    }
    REQUIRE(s.dx() == Catch::Approx(0.125));
    CHECK(l2s_norm(f, 0.0).value ==
          Catch::Approx(std::sqrt(std::numbers::ln2)).epsilon(1e-12));
    CHECK(tent_norm(f, Exponent::finite(2.0, 0.0), cache).value ==
          Catch::Approx(std::sqrt(2.0 * std::numbers::ln2)).epsilon(1e-12));
}

TEST_CASE("z norm collapses to the weighted L2 norm at p = 2") {
    GridSpec s = base_spec(1, 64, 8, std::pow(2.0, 1.0 / 8.0), 1.0, 16.0);
    s.t_max = s.t_min * std::pow(2.0, 7.0 / 4.0);
    BallKernelCache cache(s);
    const Field f = random_field(s, 5u, 0.25);
    for (double sv : {0.0, 0.4}) {
        const double lv = l2s_norm(f, sv).value;
        for (WhitneyParameter c : {WhitneyParameter{0.5, 2.0},
                                   WhitneyParameter{0.8, 1.7}}) {
            const double zv = z_norm(f, Exponent::finite(2.0, sv), c, cache).value;
            CHECK(zv == Catch::Approx(lv).epsilon(1e-11));
        }
    }
}

TEST_CASE("z norm with different whitney parameters stays comparable") {
    GridSpec s = base_spec(1, 64, 8, std::pow(2.0, 1.0 / 8.0), 1.0, 16.0);
    s.t_max = s.t_min * std::pow(2.0, 7.0 / 4.0);
    BallKernelCache cache(s);
    const Field f = random_field(s, 6u, 0.0);
    const Exponent p = Exponent::finite(4.0, -0.2);
    const double a = z_norm(f, p, WhitneyParameter{0.5, 2.0}, cache).value;
    const double b = z_norm(f, p, WhitneyParameter{0.8, 1.7}, cache).value;
    CHECK(a > 0.0);
    CHECK(b > 0.0);
    CHECK(a / b > 0.2);
    CHECK(a / b < 5.0);
}

TEST_CASE("dyadic z norm of a single-box indicator") {
    GridSpec s = aligned_spec();
    const WhitneyGrid grid = whitney_grid(s, 0);
    // Constant v on one box; with q = inf the box bracket is exactly v.
    const WhitneyBox& box = grid.boxes[5];
    Field f = Field::zeros(s);
    const double v = 3.0;
    for_each_box_cell(s, box, [&](int k, std::size_t sp) {
        f.values[f.index(k, sp, 0)] = v;
    });
    const double p = 2.0, r = 0.5;
    const double got = z_norm_dyadic_pq(
        f, p, std::numeric_limits<double>::infinity(), r, grid);
    const double want = std::pow(box.ell, s.n / p - r) * v;
    CHECK(got == Catch::Approx(want).epsilon(1e-12));
}

TEST_CASE("dyadic and continuous z norms are comparable") {
    GridSpec s = aligned_spec();
    s.L = 16.0;
    s.Nx = 64;  // same dx, larger torus so the padded windows fit
    BallKernelCache cache(s);
    const Field f = random_field(s, 9u, -0.3);
    const Exponent p = Exponent::finite(2.0, -0.5);
    const double zc = z_norm(f, p, WhitneyParameter{0.5, 2.0}, cache).value;
    const double zd = z_norm_dyadic(f, p, 0).value;
    CHECK(zc > 0.0);
    CHECK(zd > 0.0);
    CHECK(zc / zd > 0.05);
    CHECK(zc / zd < 20.0);
}

TEST_CASE("slice norm at i = 2 and the embed/project retraction") {
    GridSpec s = base_spec(1, 64, 8, 0.1, 1.5);
    BallKernelCache cache(s);
    s.m = 1;
    BoundaryField g = random_boundary_field(s, s.channels(), 3u);

    // E^2(t) with r = 0 equals sqrt(omega_n) ||g||_2 for every t.
    double g2 = 0.0;
    for (const cplx& z : g.values) g2 += std::norm(z);
    g2 = std::sqrt(g2 * s.cell_volume());
    for (double t : {0.2, 1.0}) {
        const double ev = slice_norm(g, Exponent::finite(2.0, 0.0), t, s, cache).value;
        CHECK(ev == Catch::Approx(std::sqrt(2.0) * g2).epsilon(1e-12));
    }

    // pi o iota = id.
    const double t = 0.3, hfac = 2.0;
    const Field F = slice_embed(g, t, hfac, s);
    const BoundaryField gp = slice_project(F, t, hfac);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        CHECK(std::abs(gp.values[i] - g.values[i]) < 1e-14);
    }
}

TEST_CASE("pairing: Cauchy-Schwarz against weighted L2 norms") {
    GridSpec s = base_spec(1, 32, 8, 0.05, 0.8);
    const Field f = random_field(s, 21u, 0.0);
    const Field g = random_field(s, 22u, 0.0);
    // |<f, g>| <= ||t^{-sigma} f|| ||t^{sigma} g|| for every shift sigma.
    for (double sv : {0.0, 0.5}) {
        const double lhs = std::abs(pairing(f, g));
        const double rhs = l2s_norm(f, sv).value * l2s_norm(g, -sv).value;
        CHECK(lhs <= rhs * (1.0 + 1e-12));
    }
    // Equality at g = f for sigma = 0.
    const double self = std::abs(pairing(f, f));
    const double n0 = l2s_norm(f, 0.0).value;
    CHECK(self == Catch::Approx(n0 * n0).epsilon(1e-12));
    // Equality at g = t^{-2 sigma} f in the shifted pairing.
    const double sv = 0.4;
    const Field gk = kappa_mult(f, -2.0 * sv);
    CHECK(std::abs(pairing(f, gk)) ==
          Catch::Approx(l2s_norm(f, sv).value * l2s_norm(gk, -sv).value)
              .epsilon(1e-12));
}

TEST_CASE("kappa multiplication shifts the weight index") {
    GridSpec s = base_spec(2, 8, 8, 0.05, 0.8);
    const Field f = random_field(s, 31u, 0.0);
    for (double r : {0.5, -1.0}) {
        CHECK(l2s_norm(kappa_mult(f, r), 0.3 + r).value ==
              Catch::Approx(l2s_norm(f, 0.3).value).epsilon(1e-12));
    }
}

TEST_CASE("downward shift acts as expected on constants") {
    GridSpec s = base_spec(1, 16, 8, 0.1, 1.0);
    Field f = Field::zeros(s);
    for (auto& v : f.values) v = 1.0;
    const double r = 0.35;
    const Field g = downward_shift(f, r);
    for (int k = 0; k < s.K; ++k) {
        const double expect = (s.t_level(k) + r <= s.t_max) ? 1.0 : 0.0;
        CHECK(std::abs(g.at(k, 3, 0) - cplx(expect)) < 1e-12);
    }
    // r = 0 is the identity.
    const Field h = downward_shift(f, 0.0);
    CHECK(h.values == f.values);
    CHECK_THROWS_AS(downward_shift(f, -0.1), std::invalid_argument);
}

TEST_CASE("nontangential maximal functions reproduce constants") {
    GridSpec s = base_spec(1, 16, 8, 0.1, 0.8);
    s.m = 1;
    BallKernelCache cache(s);
    Field f = Field::zeros(s);
    const double cval = 1.7;
    for (auto& v : f.values) v = cval;
    const double want = cval * std::sqrt(static_cast<double>(s.channels()));
    const BoundaryField u = nt_max(f, false, cache);
    const BoundaryField w = nt_max(f, true, cache);
    for (std::size_t x = 0; x < u.spatial_size(); ++x) {
        CHECK(u.at(x, 0).real() == Catch::Approx(want).epsilon(1e-12));
        CHECK(w.at(x, 0).real() == Catch::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("homogeneity and triangle inequality") {
    GridSpec s = base_spec(1, 32, 8, 0.05, 0.8);
    BallKernelCache cache(s);
    const Field f = random_field(s, 41u, 0.0);
    const Field g = random_field(s, 42u, 0.0);
    Field f2 = f;
    for (auto& v : f2.values) v *= 2.0;
    Field fg = f;
    for (std::size_t i = 0; i < fg.values.size(); ++i) fg.values[i] += g.values[i];

    const Exponent p = Exponent::finite(2.0, -0.3);
    CHECK(tent_norm(f2, p, cache).value ==
          Catch::Approx(2.0 * tent_norm(f, p, cache).value).epsilon(1e-12));
    CHECK(tent_norm(fg, p, cache).value <=
          tent_norm(f, p, cache).value + tent_norm(g, p, cache).value + 1e-12);

    // Infinite exponent: homogeneity of the Carleson functional.
    const Exponent q = Exponent::infinite(0.0, 0.25, s.n);
    const double c1 = tent_norm(f, q, cache).value;
    const double c2 = tent_norm(f2, q, cache).value;
    CHECK(c1 > 0.0);
    CHECK(c2 == Catch::Approx(2.0 * c1).epsilon(1e-12));
}

TEST_CASE("change of aperture is monotone and bounded") {
    GridSpec s = base_spec(1, 32, 8, 0.05, 0.8);
    BallKernelCache cache(s);
    const Field f = random_field(s, 51u, 0.0);
    const Exponent p = Exponent::finite(2.0, 0.0);
    const double a1 = tent_norm(f, p, cache, 1.0).value;
    const double a2 = tent_norm(f, p, cache, 2.0).value;
    CHECK(a2 >= a1 * (1.0 - 1e-12));
    CHECK(a2 <= 8.0 * a1);  // dimensional bound (beta^{n/2} growth, n = 1)
}

TEST_CASE("z factorization identities") {
    GridSpec s = aligned_spec();
    const Field h = random_field(s, 61u, -0.4);
    ZSplit split;
    split.p = 2.0; split.q = 2.0; split.s = 0.3;
    split.p0 = std::numeric_limits<double>::infinity(); split.q0 = 2.0; split.s0 = 0.7;
    split.p1 = 2.0; split.q1 = std::numeric_limits<double>::infinity();
    split.s1 = split.s - split.s0;
    const ZFactorization fac = z_factorize(h, split, 0);

    CHECK(fac.norm_F == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(fac.norm_G == Catch::Approx(fac.norm_h).epsilon(1e-12));

    const Field recon = scalar_multiply(fac.F, fac.G);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < h.values.size(); ++i) {
        num += std::norm(recon.values[i] - h.values[i]);
        den += std::norm(h.values[i]);
    }
    CHECK(std::sqrt(num / den) < 1e-13);

    ZSplit bad = split;
    bad.s1 = 0.0;
    CHECK_THROWS_AS(z_factorize(h, bad, 0), std::invalid_argument);
}

TEST_CASE("truncation estimates flag edge-supported mass") {
    GridSpec s = base_spec(1, 32, 8, 0.05, 0.8);
    Field inner = Field::zeros(s);
    inner.values[inner.index(4, 3, 0)] = 1.0;
    CHECK(l2s_norm(inner, 0.0).truncation_estimate == 0.0);
    Field edge = Field::zeros(s);
    edge.values[edge.index(0, 3, 0)] = 1.0;
    CHECK(l2s_norm(edge, 0.0).truncation_estimate > 0.0);
}
