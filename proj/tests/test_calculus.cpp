#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "hsl/calculus.hpp"
#include "support.hpp"

using namespace hsl;
using hsl::testing::identity_coefficients;
using hsl::testing::random_accretive;

namespace {

GridSpec calc_spec(int n, int m, int Nx, int K = 16, double t_min = 0.1,
                   double t_max = 10.0) {
    GridSpec s;
    s.n = n;
    s.m = m;
    s.L = 2.0 * std::numbers::pi;
    s.Nx = Nx;
    s.t_min = t_min;
    s.t_max = t_max;
    s.K = K;
    return s;
}

double sym_err(const Mat& a, const Mat& b) {
    return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST_CASE("dirac symbol: hermitian, eigenvalues, D^2 = |xi|^2 P") {
    const int n = 2, m = 2;
    const std::array<double, 3> xi{3.0, 4.0, 0.0};
    const Mat D = dirac_symbol(xi, n, m);
    CHECK((D - D.adjoint()).norm() < 1e-14);

    Eigen::SelfAdjointEigenSolver<Mat> es(D);
    const auto& ev = es.eigenvalues();
    // m copies of -5, m(n-1) zeros, m copies of +5.
    int neg = 0, zero = 0, pos = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < -1e-12) { ++neg; CHECK(ev(i) == Catch::Approx(-5.0)); }
        else if (ev(i) > 1e-12) { ++pos; CHECK(ev(i) == Catch::Approx(5.0)); }
        else ++zero;
    }
    CHECK(neg == m);
    CHECK(pos == m);
    CHECK(zero == m * (n - 1));

    const Mat P = dirac_range_projector(xi, n, m);
    CHECK(sym_err(D * D, 25.0 * P) < 1e-13);
    CHECK(sym_err(P * P, P) < 1e-13);
    CHECK(sym_err(D * P, D) < 1e-13);
}

TEST_CASE("accretivity minimum") {
    CHECK(accretivity_check(identity_coefficients(1, 1)) == Catch::Approx(1.0));
    CHECK(accretivity_check(identity_coefficients(2, 2)) == Catch::Approx(1.0));
    CoefficientMatrix bad{1, 1, Mat::Zero(2, 2)};
    bad.A(0, 0) = 1.0;
    bad.A(1, 1) = -1.0;
    CHECK(accretivity_check(bad) == Catch::Approx(-1.0));
    CHECK(accretivity_check(random_accretive(2, 1, 7u)) > 0.0);
}

TEST_CASE("hat transform: involution, identity, duality") {
    for (auto [n, m] : {std::pair{1, 1}, std::pair{2, 2}}) {
        const CoefficientMatrix A = random_accretive(n, m, 101u + n);
        const CoefficientMatrix H = hat_transform(A);
        const CoefficientMatrix HH = hat_transform(H);
        CHECK(sym_err(HH.A, A.A) < 1e-12);

        const CoefficientMatrix I = identity_coefficients(n, m);
        CHECK(sym_err(hat_transform(I).A, I.A) < 1e-14);

        // hat(A^*) = N hat(A)^* N.
        CoefficientMatrix Astar{n, m, A.A.adjoint()};
        const Mat Nm = reflection_matrix(n, m);
        CHECK(sym_err(hat_transform(Astar).A, Nm * H.A.adjoint() * Nm) < 1e-12);
    }
    CoefficientMatrix sing{1, 1, Mat::Zero(2, 2)};
    sing.A(1, 1) = 1.0;
    CHECK_THROWS_WITH(hat_transform(sing),
                      Catch::Matchers::ContainsSubstring("singular"));
}

TEST_CASE("unperturbed operator: sign is D/|xi| and the angle vanishes") {
    GridSpec s = calc_spec(1, 1, 8);
    const MultiplierOp op = build_op(s, Mat::Identity(2, 2));
    CHECK(op.omega < 1e-12);
    CHECK(op.defective_count == 0);
    for (std::size_t sp = 1; sp < s.spatial_size(); ++sp) {
        const auto xi = frequency(s, sp);
        const double xin = frequency_norm(xi, s.n);
        const Mat want = dirac_symbol(xi, 1, 1) / xin;
        CHECK(sym_err(op.data[sp].S, want) < 1e-10);
        // Semigroup is e^{-t|xi|} P.
        const Mat sg = semigroup_symbol(op.data[sp], 0.5);
        const Mat Pw = dirac_range_projector(xi, 1, 1);
        CHECK(sym_err(sg, std::exp(-0.5 * xin) * Pw) < 1e-10);
    }
    // Zero frequency is wholly nullspace.
    CHECK(op.data[0].P.norm() == 0.0);
    CHECK(op.data[0].chi_p.norm() == 0.0);
}

TEST_CASE("spectral projections satisfy the algebra") {
    GridSpec s = calc_spec(2, 1, 4);
    const CoefficientMatrix B = random_accretive(2, 1, 11u);
    const MultiplierOp op = build_op(s, hat_transform(B).A);
    REQUIRE(op.defective_count == 0);
    for (std::size_t sp = 1; sp < s.spatial_size(); ++sp) {
        const SpectralData& sd = op.data[sp];
        CHECK(sym_err(sd.chi_p * sd.chi_p, sd.chi_p) < 1e-8);
        CHECK(sym_err(sd.chi_m * sd.chi_m, sd.chi_m) < 1e-8);
        CHECK((sd.chi_p * sd.chi_m).norm() < 1e-8);
        CHECK(sym_err(sd.chi_p + sd.chi_m, sd.P) < 1e-8);
        CHECK(sym_err(sd.S * sd.S, sd.P) < 1e-8);
        CHECK(sym_err(sd.P * sd.M, sd.M) < 1e-8);
        CHECK(sym_err(sd.M * sd.P, sd.M) < 1e-8);
        // Newton sign agrees with the spectral sign.
        CHECK(sym_err(newton_sign_on_range(sd.M), sd.S) < 1e-8);
    }
}

TEST_CASE("functional calculus is a homomorphism per frequency") {
    GridSpec s = calc_spec(1, 2, 8);
    const CoefficientMatrix B = random_accretive(1, 2, 13u);
    const MultiplierOp op = build_op(s, B.A);
    REQUIRE(op.defective_count == 0);
    const HoloFn f = HoloFn::resolvent(1);
    const HoloFn g = HoloFn::sgp().dilated(0.7);
    for (std::size_t sp = 1; sp < s.spatial_size(); sp += 3) {
        const SpectralData& sd = op.data[sp];
        const Mat lhs = sd.apply(f) * sd.apply(g);
        const Mat rhs = sd.apply(f.times(g));
        CHECK(sym_err(lhs, rhs) < 1e-10);
    }
}

TEST_CASE("dunford contour integral matches the spectral calculus") {
    GridSpec s = calc_spec(1, 1, 8);
    const CoefficientMatrix B = random_accretive(1, 1, 17u);
    const MultiplierOp op = build_op(s, B.A);
    const HoloFn f = HoloFn::bump(2, 0);
    const double nu1 = std::max(op.omega + 0.15, 0.4);
    const double err1 = dunford_check(f, op, nu1);
    CHECK(err1 < 1e-8);
    // Contour-angle independence.
    const double nu2 = std::min(nu1 + 0.4, 1.5);
    const double err2 = dunford_check(f, op, nu2);
    CHECK(err2 < 1e-8);
    CHECK_THROWS_AS(dunford_check(HoloFn::sgp(), op, nu1), std::invalid_argument);
}

TEST_CASE("boundary fft round trip") {
    GridSpec s = calc_spec(2, 1, 8);
    const BoundaryField f = random_boundary_field(s, s.channels(), 23u);
    const BoundaryField g = boundary_ifft(boundary_fft(f, s), s);
    CHECK(hsl::testing::boundary_rel_err(g, f) < 1e-13);
}

TEST_CASE("calderon reproducing formula on the range") {
    GridSpec s = calc_spec(1, 1, 8, 96, 1e-3, 1e3);
    const HoloFn psi = HoloFn::bump(1, 0);
    const HoloFn phi = psi.scaled(cplx(4.0, 0.0));  // sibling: 4 [z] e^{-[z]}
    for (std::uint64_t seed : {0u, 29u}) {
        const Mat B = (seed == 0) ? Mat(Mat::Identity(2, 2))
                                  : random_accretive(1, 1, seed).A;
        const MultiplierOp op = build_op(s, B);
        REQUIRE(op.defective_count == 0);
        const BoundaryField f = random_boundary_field(s, s.channels(), 31u);
        const ContractResult res = s_contract(phi, op, q_extend(psi, op, f));
        // Reference: the range projection of f, frequency by frequency.
        std::vector<Mat> proj(op.data.size());
        for (std::size_t sp = 0; sp < proj.size(); ++sp) proj[sp] = op.data[sp].P;
        const BoundaryField ref = apply_symbol(proj, f, s);
        // The t_min = 1e-3 head of the pairing integral dominates the error.
        CHECK(hsl::testing::boundary_rel_err(res.g, ref) < 5e-5);
        CHECK(res.truncation_estimate < 1e-2);
    }
}

TEST_CASE("quadratic estimate constant 1/4 for the unperturbed operator") {
    GridSpec s = calc_spec(1, 1, 8, 96, 1e-3, 1e3);
    const MultiplierOp op = build_op(s, Mat::Identity(2, 2));
    const BoundaryField f = random_boundary_field(s, s.channels(), 37u);
    const Field F = q_extend(HoloFn::bump(1, 0), op, f);
    const double lhs = std::pow(l2s_norm(F, 0.0).value, 2.0);
    std::vector<Mat> proj(op.data.size());
    for (std::size_t sp = 0; sp < proj.size(); ++sp) proj[sp] = op.data[sp].P;
    const BoundaryField Pf = apply_symbol(proj, f, s);
    double p2 = 0.0;
    for (const cplx& v : Pf.values) p2 += std::norm(v);
    p2 *= s.cell_volume();
    CHECK(lhs == Catch::Approx(0.25 * p2).epsilon(1e-4));
}

TEST_CASE("adjoint duality between DB and B* D calculus") {
    GridSpec s = calc_spec(1, 1, 8);
    const CoefficientMatrix B = random_accretive(1, 1, 41u);
    const MultiplierOp op_db = build_op(s, B.A);
    const MultiplierOp op_bd = build_op_bd(s, Mat(B.A.adjoint()));
    REQUIRE(op_db.defective_count == 0);
    REQUIRE(op_bd.defective_count == 0);
    const HoloFn f = HoloFn::bump(2, 0);
    for (std::size_t sp = 1; sp < s.spatial_size(); ++sp) {
        const Mat lhs = op_db.data[sp].apply(f).adjoint();
        const Mat rhs = op_bd.data[sp].apply(f.involuted());
        CHECK(sym_err(lhs, rhs) < 1e-8);
    }
}

TEST_CASE("littlewood-paley extension and smoothness norm") {
    GridSpec s = calc_spec(1, 1, 16, 64, 1e-2, 2.0);  // t_max below L/2
    BallKernelCache cache(s);
    // Odd multipliers are rejected.
    BoundaryField f = BoundaryField::zeros(s, s.channels());
    CHECK_THROWS_WITH(lp_extend(f, HoloFn::power(1.0), s),
                      Catch::Matchers::ContainsSubstring("even"));

    // Single Fourier modes: +q and -q have equal smoothness norms, and the
    // q-dependence matches the direct multiplier sum kappa(|xi|).
    const HoloFn phi = HoloFn::bump(1, 0);
    auto mode = [&](int q) {
        BoundaryField g = BoundaryField::zeros(s, s.channels());
        for (std::size_t sp = 0; sp < g.spatial_size(); ++sp) {
            const double x = sp * s.dx();
            g.values[g.index(sp, 0)] = std::exp(cplx(0.0, q * x));
        }
        return g;
    };
    auto kappa = [&](double lam) {
        double acc = 0.0;
        for (int k = 0; k < s.K; ++k) {
            acc += s.log_step() * std::norm(phi.eval(cplx(s.t_level(k) * lam, 0.0)));
        }
        return acc;
    };
    const Exponent p2 = Exponent::finite(2.0, 0.0);
    const double n1 = smoothness_norm(mode(1), p2, phi, s, cache).value;
    const double n1m = smoothness_norm(mode(-1), p2, phi, s, cache).value;
    const double n2 = smoothness_norm(mode(2), p2, phi, s, cache).value;
    CHECK(n1 == Catch::Approx(n1m).epsilon(1e-10));
    CHECK(n2 / n1 == Catch::Approx(std::sqrt(kappa(2.0) / kappa(1.0))).epsilon(1e-9));
}

TEST_CASE("riesz potential composes to the mean-free identity") {
    GridSpec s = calc_spec(1, 1, 16);
    const BoundaryField f = random_boundary_field(s, s.channels(), 47u);
    const BoundaryField g = riesz(riesz(f, 0.4, s), -0.4, s);
    // Reference: f minus its mean per channel.
    BoundaryField ref = f;
    for (int ch = 0; ch < f.channels; ++ch) {
        cplx mean(0.0, 0.0);
        for (std::size_t sp = 0; sp < f.spatial_size(); ++sp) mean += f.at(sp, ch);
        mean /= static_cast<double>(f.spatial_size());
        for (std::size_t sp = 0; sp < f.spatial_size(); ++sp) {
            ref.values[ref.index(sp, ch)] -= mean;
        }
    }
    CHECK(hsl::testing::boundary_rel_err(g, ref) < 1e-10);

    BoundaryField cst = BoundaryField::zeros(s, s.channels());
    for (auto& v : cst.values) v = 1.0;
    CHECK_THROWS_WITH(riesz(cst, 0.4, s),
                      Catch::Matchers::ContainsSubstring("modulo polynomials"));
}

TEST_CASE("difference functional of a plane wave is constant") {
    GridSpec s = calc_spec(1, 1, 16);
    BoundaryField g = BoundaryField::zeros(s, s.channels());
    for (std::size_t sp = 0; sp < g.spatial_size(); ++sp) {
        g.values[g.index(sp, 0)] = std::exp(cplx(0.0, 2.0 * sp * s.dx()));
    }
    const BoundaryField D = difference_functional(g, 0.5, s);
    const double v0 = D.at(0, 0).real();
    CHECK(v0 > 0.0);
    for (std::size_t sp = 1; sp < D.spatial_size(); ++sp) {
        CHECK(D.at(sp, 0).real() == Catch::Approx(v0).epsilon(1e-10));
    }
    CHECK_THROWS_AS(difference_functional(g, 1.5, s), std::invalid_argument);
}

TEST_CASE("off-diagonal decay probe") {
    GridSpec s = calc_spec(1, 1, 32);
    const MultiplierOp op = build_op(s, Mat::Identity(2, 2));
    const BoundaryField g = random_boundary_field(s, s.channels(), 53u);
    const std::vector<std::size_t> E{0, 1}, F{15, 16, 17};
    const auto res = offdiag_probe(HoloFn::resolvent(2), op, 0.3, E, F, g, 2.0);
    CHECK(res.distance == Catch::Approx(14.0 * s.dx()));
    CHECK(res.reference ==
          Catch::Approx(std::pow(1.0 + res.distance / 0.3, -2.0)));
    CHECK(res.ratio >= 0.0);
    CHECK(res.ratio < 1.0);
    const auto res2 = offdiag_probe(HoloFn::resolvent(2), op, 0.05, E, F, g, 2.0);
    CHECK(res2.ratio < 0.5);
}

TEST_CASE("perturbation probe is continuous in the coefficients") {
    GridSpec s = calc_spec(1, 1, 8);
    const CoefficientMatrix B0 = random_accretive(1, 1, 59u);
    Mat B1 = B0.A;
    B1(0, 1) += cplx(0.02, -0.01);
    const MultiplierOp op0 = build_op(s, B0.A);
    const MultiplierOp op1 = build_op(s, B1);
    const auto same = perturb_probe(op0, op0);
    CHECK(same.projection_gap == 0.0);
    CHECK(same.coefficient_gap == 0.0);
    const auto res = perturb_probe(op0, op1);
    CHECK(res.coefficient_gap > 0.0);
    CHECK(res.projection_gap > 0.0);
    CHECK(res.projection_gap <= 50.0 * res.coefficient_gap);
}
