#pragma once

// Constant-coefficient boundary value problem laboratory.  Everything is
// per-frequency linear algebra: Cauchy-operator solutions of the first-order
// system dF/dt + DB F = 0, trace recovery through the Calderon reproducing
// formula, reconstruction of the potential u from its conormal gradient,
// single/double layer potentials realized through Cauchy operators, jump
// relations, decay probes, and the symbol-level well-posedness probe.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hsl/calculus.hpp"
#include "hsl/exponents.hpp"
#include "hsl/grid.hpp"
#include "hsl/holo.hpp"
#include "hsl/quasinorms.hpp"

namespace hsl {

enum class Problem { regularity, neumann };

struct BVPSetup {
    CoefficientMatrix A;
    CoefficientMatrix B;      // hat_transform(A)
    MultiplierOp op_db;       // symbol D(xi) B
    MultiplierOp op_bd;       // symbol B D(xi)
    GridSpec grid;
    Problem problem = Problem::regularity;
    Exponent p = Exponent::finite(2.0, 0.0);
    double kappa = 0.0;

    static BVPSetup make(const CoefficientMatrix& A, const GridSpec& grid,
                         Problem problem = Problem::regularity,
                         const Exponent& p = Exponent::finite(2.0, 0.0)) {
        BVPSetup s;
        s.A = A;
        s.kappa = accretivity_check(A);
        if (!(s.kappa > 0.0)) {
            throw std::invalid_argument("BVPSetup: coefficients not accretive");
        }
        s.B = hat_transform(A);
        s.op_db = build_op(grid, s.B.A);
        s.op_bd = build_op_bd(grid, s.B.A);
        s.grid = grid;
        s.problem = problem;
        s.p = p;
        return s;
    }
};

// ---------------------------------------------------------------------------
// Cauchy-operator solutions
// ---------------------------------------------------------------------------

struct CauchySolution {
    Field F;
    double nullspace_mass = 0.0;  // L^2 share of the datum projected away
};

// F(t) = e^{-t DB} chi+(DB) f0 per frequency.  A nullspace component of f0
// is projected away and its mass reported.
inline CauchySolution cauchy_solve(const MultiplierOp& op, const BoundaryField& f0) {
    const GridSpec& spec = op.spec;
    auto hat = boundary_fft(f0, spec);
    double total = 0.0, removed = 0.0;
    for (std::size_t sp = 0; sp < hat.size(); ++sp) {
        const Vec proj = op.data[sp].P * hat[sp];
        total += hat[sp].squaredNorm();
        removed += (hat[sp] - proj).squaredNorm();
        hat[sp] = proj;
    }
    CauchySolution out{Field::zeros(spec), 0.0};
    out.nullspace_mass = (total > 0.0) ? std::sqrt(removed / total) : 0.0;
    const std::size_t Ns = spec.spatial_size();
    const int N = spec.channels();
    for (int k = 0; k < spec.K; ++k) {
        const double t = spec.t_level(k);
        std::vector<std::vector<cplx>> bufs(N, std::vector<cplx>(Ns));
        for (std::size_t sp = 0; sp < Ns; ++sp) {
            const Vec v = cauchy_symbol(op.data[sp], t) * hat[sp];
            for (int ch = 0; ch < N; ++ch) bufs[ch][sp] = v(ch) / spec.cell_volume();
        }
        for (int ch = 0; ch < N; ++ch) {
            Fft::inverse(spec.n, spec.Nx, bufs[ch].data());
            for (std::size_t sp = 0; sp < Ns; ++sp) {
                out.F.values[out.F.index(k, sp, ch)] = bufs[ch][sp];
            }
        }
    }
    return out;
}

// Max per-frequency relative residual of dF/dt + DB F = 0, with the time
// derivative evaluated through an independent spectral symbol
// (-z e^{-t z} chi+(z)) rather than by differencing.
inline double cauchy_residual(const MultiplierOp& op, const BoundaryField& f0) {
    const GridSpec& spec = op.spec;
    auto hat = boundary_fft(f0, spec);
    double worst = 0.0;
    for (std::size_t sp = 1; sp < hat.size(); ++sp) {
        const SpectralData& sd = op.data[sp];
        const Vec f = sd.P * hat[sp];
        const double fn = f.norm();
        if (fn == 0.0) continue;
        for (int k = 0; k < spec.K; ++k) {
            const double t = spec.t_level(k);
            const HoloFn sg = HoloFn::sgp().dilated(t);
            const HoloFn deriv =
                HoloFn::chi_plus().times(sg).times(HoloFn::power(1.0)).scaled(-1.0);
            const Vec dF = sd.apply(deriv) * f;
            const Vec F = cauchy_symbol(sd, t) * f;
            worst = std::max(worst, (dF + sd.M * F).norm() / fn);
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Trace recovery and potential reconstruction
// ---------------------------------------------------------------------------

// Default trace functional: S_{psi,DB} with psi = 4 [z]^2 e^{-[z]}, the
// Calderon sibling of the semigroup with N = 2.
inline HoloFn trace_sibling(int N = 2) {
    double c = std::pow(2.0, N) / std::tgamma(static_cast<double>(N));
    return HoloFn::bump(N, 0).scaled(c);
}

inline BoundaryField trace_recover(const MultiplierOp& op, const Field& F,
                                   int sibling_order = 2) {
    return s_contract(trace_sibling(sibling_order), op, F).g;
}

// Moore-Penrose inverse of the Dirac symbol: D(xi)^+ = D(xi)/|xi|^2.
inline Mat dirac_pinv(const std::array<double, 3>& xi, int n, int m) {
    const double nrm = frequency_norm(xi, n);
    if (nrm == 0.0) return Mat::Zero(m * (1 + n), m * (1 + n));
    return dirac_symbol(xi, n, m) / (nrm * nrm);
}

// u = -(P_D C+_{BD} P_{BD} F~_0)_perp with D F~_0 = f0 (F~_0 = D^+ f0).
// The result is stored in the perp block of a full field (tangential
// channels zero); the zero frequency is pinned to 0 (u modulo constants).
inline Field recover_u(const BVPSetup& setup, const BoundaryField& f0) {
    const GridSpec& spec = setup.grid;
    auto hat = boundary_fft(f0, spec);
    Field u = Field::zeros(spec);
    const std::size_t Ns = spec.spatial_size();
    const int N = spec.channels();
    const int m = spec.m;
    for (int k = 0; k < spec.K; ++k) {
        const double t = spec.t_level(k);
        std::vector<std::vector<cplx>> bufs(m, std::vector<cplx>(Ns, cplx(0, 0)));
        for (std::size_t sp = 1; sp < Ns; ++sp) {
            const auto xi = frequency(spec, sp);
            const Mat Pd = dirac_range_projector(xi, spec.n, m);
            const SpectralData& bd = setup.op_bd.data[sp];
            const Vec Ft0 = dirac_pinv(xi, spec.n, m) * hat[sp];
            const Vec v = -(Pd * (cauchy_symbol(bd, t) * (bd.P * Ft0)));
            for (int a = 0; a < m; ++a) bufs[a][sp] = v(a) / spec.cell_volume();
        }
        for (int a = 0; a < m; ++a) {
            Fft::inverse(spec.n, spec.Nx, bufs[a].data());
            for (std::size_t sp = 0; sp < Ns; ++sp) {
                u.values[u.index(k, sp, a)] = bufs[a][sp];
            }
        }
    }
    (void)N;
    return u;
}

// Conormal gradient of the recovered potential, assembled per frequency from
// the analytic t-derivative of the reconstruction symbol:
//   grad_A u = [ A_pp d_t u + A_pt (i xi (x) u) ; i xi (x) u ].
inline Field conormal_gradient_of_recovered(const BVPSetup& setup,
                                            const BoundaryField& f0) {
    const GridSpec& spec = setup.grid;
    auto hat = boundary_fft(f0, spec);
    Field G = Field::zeros(spec);
    const std::size_t Ns = spec.spatial_size();
    const int N = spec.channels();
    const int m = spec.m, n = spec.n;
    const Mat App = setup.A.pp();
    const Mat Apt = setup.A.pt();
    for (int k = 0; k < spec.K; ++k) {
        const double t = spec.t_level(k);
        std::vector<std::vector<cplx>> bufs(N, std::vector<cplx>(Ns, cplx(0, 0)));
        const HoloFn sg = HoloFn::sgp().dilated(t);
        const HoloFn dsym =
            HoloFn::chi_plus().times(sg).times(HoloFn::power(1.0)).scaled(-1.0);
        for (std::size_t sp = 1; sp < Ns; ++sp) {
            const auto xi = frequency(spec, sp);
            const Mat Pd = dirac_range_projector(xi, spec.n, m);
            const SpectralData& bd = setup.op_bd.data[sp];
            const Vec Ft0 = bd.P * (dirac_pinv(xi, spec.n, m) * hat[sp]);
            const Vec u_hat_full = -(Pd * (cauchy_symbol(bd, t) * Ft0));
            const Vec dtu_full = -(Pd * (bd.apply(dsym) * Ft0));
            const Vec u_hat = u_hat_full.head(m);
            const Vec dtu = dtu_full.head(m);
            // Tangential gradient i xi (x) u.
            Vec grad_tan(m * n);
            for (int d = 0; d < n; ++d) {
                for (int a = 0; a < m; ++a) {
                    grad_tan(d * m + a) = cplx(0.0, 1.0) * xi[d] * u_hat(a);
                }
            }
            Vec out(N);
            out.head(m) = App * dtu + Apt * grad_tan;
            out.tail(m * n) = grad_tan;
            for (int ch = 0; ch < N; ++ch) bufs[ch][sp] = out(ch) / spec.cell_volume();
        }
        for (int ch = 0; ch < N; ++ch) {
            Fft::inverse(spec.n, spec.Nx, bufs[ch].data());
            for (std::size_t sp = 0; sp < Ns; ++sp) {
                G.values[G.index(k, sp, ch)] = bufs[ch][sp];
            }
        }
    }
    return G;
}

// ---------------------------------------------------------------------------
// Layer potentials (through Cauchy operators) and jump relations
// ---------------------------------------------------------------------------

namespace detail {

// Embeds an m-channel boundary field as [f; 0] with N = m(1+n) channels.
inline BoundaryField embed_perp(const BoundaryField& f, const GridSpec& spec) {
    if (f.channels != spec.m) {
        throw std::invalid_argument("layer potential: datum must have m channels");
    }
    BoundaryField out = BoundaryField::zeros(spec, spec.channels());
    for (std::size_t sp = 0; sp < out.spatial_size(); ++sp) {
        for (int a = 0; a < spec.m; ++a) {
            out.values[out.index(sp, a)] = f.at(sp, a);
        }
    }
    return out;
}

inline BoundaryField take_perp(const BoundaryField& F, const GridSpec& spec) {
    BoundaryField out = BoundaryField::zeros(spec, spec.m);
    for (std::size_t sp = 0; sp < out.spatial_size(); ++sp) {
        for (int a = 0; a < spec.m; ++a) {
            out.values[out.index(sp, a)] = F.at(sp, a);
        }
    }
    return out;
}

}  // namespace detail

// Conormal gradient of the single layer potential at signed height t:
// grad_A S_t f = + C+_{DB}(t) [f;0]   (t > 0),
//              = - C-_{DB}(t) [f;0]   (t < 0).
inline BoundaryField single_layer_grad(const BVPSetup& setup,
                                       const BoundaryField& f, double t) {
    if (t == 0.0) throw std::invalid_argument("single_layer_grad: t != 0; use jumps");
    const GridSpec& spec = setup.grid;
    const BoundaryField fe = detail::embed_perp(f, spec);
    auto hat = boundary_fft(fe, spec);
    const double sign = (t > 0.0) ? 1.0 : -1.0;
    for (std::size_t sp = 0; sp < hat.size(); ++sp) {
        hat[sp] = sign * (cauchy_symbol(setup.op_db.data[sp], t) * hat[sp]);
    }
    return boundary_ifft(hat, spec);
}

// Single layer potential itself: S_t f = -+ ( D^{-1} C^{+-}_{DB}(t) [f;0] )_perp.
inline BoundaryField single_layer(const BVPSetup& setup, const BoundaryField& f,
                                  double t) {
    if (t == 0.0) throw std::invalid_argument("single_layer: t != 0; use jumps");
    const GridSpec& spec = setup.grid;
    const BoundaryField fe = detail::embed_perp(f, spec);
    auto hat = boundary_fft(fe, spec);
    const double sign = (t > 0.0) ? -1.0 : 1.0;
    for (std::size_t sp = 0; sp < hat.size(); ++sp) {
        const auto xi = frequency(spec, sp);
        hat[sp] = sign * (dirac_pinv(xi, spec.n, spec.m) *
                          (cauchy_symbol(setup.op_db.data[sp], t) * hat[sp]));
    }
    return detail::take_perp(boundary_ifft(hat, spec), spec);
}

// Double layer potential: D_t f = -+ ( P_D C^{+-}_{BD}(t) P_{BD} [f;0] )_perp.
inline BoundaryField double_layer(const BVPSetup& setup, const BoundaryField& f,
                                  double t) {
    if (t == 0.0) throw std::invalid_argument("double_layer: t != 0; use jumps");
    const GridSpec& spec = setup.grid;
    const BoundaryField fe = detail::embed_perp(f, spec);
    auto hat = boundary_fft(fe, spec);
    const double sign = (t > 0.0) ? -1.0 : 1.0;
    for (std::size_t sp = 0; sp < hat.size(); ++sp) {
        const auto xi = frequency(spec, sp);
        const Mat Pd = dirac_range_projector(xi, spec.n, spec.m);
        const SpectralData& bd = setup.op_bd.data[sp];
        hat[sp] = sign * (Pd * (cauchy_symbol(bd, t) * (bd.P * hat[sp])));
    }
    return detail::take_perp(boundary_ifft(hat, spec), spec);
}

// Analytic t -> 0 jumps.
// grad_A S_{0+} f - grad_A S_{0-} f = (chi+ + chi-)(DB) [f;0]  (= [f;0]).
inline BoundaryField single_layer_grad_jump(const BVPSetup& setup,
                                            const BoundaryField& f) {
    const GridSpec& spec = setup.grid;
    const BoundaryField fe = detail::embed_perp(f, spec);
    auto hat = boundary_fft(fe, spec);
    for (std::size_t sp = 0; sp < hat.size(); ++sp) {
        const SpectralData& sd = setup.op_db.data[sp];
        hat[sp] = (sd.chi_p + sd.chi_m) * hat[sp];
    }
    return boundary_ifft(hat, spec);
}

// D_{0+} f - D_{0-} f = -( P_D P_{BD} [f;0] )_perp  (= -f).
inline BoundaryField double_layer_jump(const BVPSetup& setup,
                                       const BoundaryField& f) {
    const GridSpec& spec = setup.grid;
    const BoundaryField fe = detail::embed_perp(f, spec);
    auto hat = boundary_fft(fe, spec);
    for (std::size_t sp = 0; sp < hat.size(); ++sp) {
        const auto xi = frequency(spec, sp);
        const Mat Pd = dirac_range_projector(xi, spec.n, spec.m);
        const SpectralData& bd = setup.op_bd.data[sp];
        hat[sp] = -(Pd * (bd.P * hat[sp]));
    }
    return detail::take_perp(boundary_ifft(hat, spec), spec);
}

// ---------------------------------------------------------------------------
// Well-posedness probe
// ---------------------------------------------------------------------------

enum class WpComponent { perp, tangential };

struct WpProbe {
    std::vector<double> smin;        // per probed frequency
    std::vector<double> cond;
    double global_min = std::numeric_limits<double>::infinity();
    bool structural_obstruction = false;
    std::string note;
};

// For each nonzero frequency: orthonormalize the positive spectral subspace
// V+(xi) = range chi+(DB) (expected dimension m), then take singular values
// of its projection onto the target component subspace: C^m (perp block) or
// span{ xi (x) e_a / |xi| } (tangential block).  A uniform lower bound on
// the smallest singular value is the symbol-level expression of L^2
// invertibility of the boundary map.
inline WpProbe wp_probe(const MultiplierOp& op, WpComponent comp) {
    const GridSpec& spec = op.spec;
    const int m = spec.m, n = spec.n, N = spec.channels();
    WpProbe out;
    for (std::size_t sp = 1; sp < op.data.size(); ++sp) {
        const SpectralData& sd = op.data[sp];
        // Orthonormal basis of range chi+.
        Eigen::JacobiSVD<Mat> svd(sd.chi_p, Eigen::ComputeThinU);
        const auto& sv = svd.singularValues();
        int dim = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i) {
            if (sv(i) > 0.5) ++dim;  // projector-like: singular values near 1 or 0
        }
        if (dim != m) {
            out.structural_obstruction = true;
            out.note = "dim V+(xi) = " + std::to_string(dim) +
                       " != m at frequency index " + std::to_string(sp);
            continue;
        }
        const Mat Uplus = svd.matrixU().leftCols(dim);
        Mat T;  // orthonormal target basis, N x m
        if (comp == WpComponent::perp) {
            T = Mat::Zero(N, m);
            for (int a = 0; a < m; ++a) T(a, a) = 1.0;
        } else {
            const auto xi = frequency(spec, sp);
            const double nrm = frequency_norm(xi, n);
            T = Mat::Zero(N, m);
            for (int a = 0; a < m; ++a) {
                for (int d = 0; d < n; ++d) T(m + d * m + a, a) = xi[d] / nrm;
            }
        }
        const Mat map = T.adjoint() * Uplus;  // m x m
        Eigen::JacobiSVD<Mat> msvd(map);
        const double lo = msvd.singularValues().minCoeff();
        const double hi = msvd.singularValues().maxCoeff();
        out.smin.push_back(lo);
        out.cond.push_back((lo > 0.0) ? hi / lo
                                      : std::numeric_limits<double>::infinity());
        out.global_min = std::min(out.global_min, lo);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Decay probe and Whitney trace
// ---------------------------------------------------------------------------

struct DecayProbe {
    std::vector<double> t;
    std::vector<double> einf_norm;  // || F(t) ||_{E^inf(t)}
    double fitted_rate = 0.0;       // c in e^{-c t} least-squares fit
};

inline DecayProbe decay_probe(const Field& F, const BallKernelCache& cache) {
    const GridSpec& spec = F.spec;
    DecayProbe out;
    const Exponent einf = Exponent::infinite(0.0, 0.0, spec.n);
    for (int k = 0; k < spec.K; ++k) {
        const double t = spec.t_level(k);
        if (!(t < 0.5 * spec.L)) break;
        BoundaryField slice = BoundaryField::zeros(spec, spec.channels());
        for (std::size_t sp = 0; sp < spec.spatial_size(); ++sp) {
            for (int ch = 0; ch < spec.channels(); ++ch) {
                slice.values[slice.index(sp, ch)] = F.at(k, sp, ch);
            }
        }
        out.t.push_back(t);
        // t_level(K-1) can exceed t_max by a rounding ulp; clamp for slice_norm.
        const double tc = std::min(std::max(t, spec.t_min), spec.t_max);
        out.einf_norm.push_back(slice_norm(slice, einf, tc, spec, cache).value);
    }
    // Least-squares fit of log ||F(t)|| = a - c t over positive samples.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (std::size_t i = 0; i < out.t.size(); ++i) {
        if (out.einf_norm[i] <= 0.0) continue;
        const double x = out.t[i], y = std::log(out.einf_norm[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++cnt;
    }
    if (cnt >= 2) {
        const double denom = cnt * sxx - sx * sx;
        if (std::abs(denom) > 1e-14) out.fitted_rate = -(cnt * sxy - sx * sy) / denom;
    }
    return out;
}

struct WhitneyTrace {
    BoundaryField v;
    std::vector<double> rates;  // sup change between successive level averages
};

// Whitney averages of u over Omega_c(t_k, x) at the smallest levels; the
// limit candidate is the average at the smallest admissible level, and the
// rates record sup-norm gaps between successive levels.
inline WhitneyTrace whitney_trace(const Field& u, const WhitneyParameter& c,
                                  const BallKernelCache& cache, int levels = 4) {
    c.validate();
    const GridSpec& spec = u.spec;
    const std::size_t Ns = spec.spatial_size();
    const int N = spec.channels();
    std::vector<BoundaryField> avgs;
    for (int k = 0; k < std::min(levels, spec.K); ++k) {
        const double t = spec.t_level(k);
        cache.check_radius(c.c0 * t);
        const auto cells = whitney_cells(spec, cache, t, 0, c);
        // The weight pattern is translation invariant; accumulate per x via
        // FFT convolution channelwise.
        BoundaryField avg = BoundaryField::zeros(spec, N);
        // Realized mass (same for every x).
        double mass = 0.0;
        for (const CellWeight& cw : cells) mass += cw.w;
        for (int ch = 0; ch < N; ++ch) {
            // The cell weights are relative to x at spatial index 0 and the
            // pattern is translation invariant, so the average at every x is
            // a circular correlation, done per contributing level via FFT.
            std::vector<cplx> result(Ns, cplx(0, 0));
            // Group cells by level for the field side.
            for (int k2 = 0; k2 < spec.K; ++k2) {
                bool any = false;
                std::vector<cplx> wslice(Ns, cplx(0, 0));
                for (const CellWeight& cw : cells) {
                    if (cw.level == k2) {
                        wslice[cw.spatial] = cw.w;
                        any = true;
                    }
                }
                if (!any) continue;
                std::vector<cplx> fslice(Ns);
                for (std::size_t sp = 0; sp < Ns; ++sp) fslice[sp] = u.at(k2, sp, ch);
                Fft::forward(spec.n, spec.Nx, fslice.data());
                Fft::forward(spec.n, spec.Nx, wslice.data());
                for (std::size_t sp = 0; sp < Ns; ++sp) {
                    // Correlation: conj the weight spectrum.
                    fslice[sp] *= std::conj(wslice[sp]);
                }
                Fft::inverse(spec.n, spec.Nx, fslice.data());
                for (std::size_t sp = 0; sp < Ns; ++sp) result[sp] += fslice[sp];
            }
            for (std::size_t sp = 0; sp < Ns; ++sp) {
                avg.values[avg.index(sp, ch)] = result[sp] / mass;
            }
        }
        avgs.push_back(std::move(avg));
    }
    WhitneyTrace out{avgs.front(), {}};
    for (std::size_t i = 0; i + 1 < avgs.size(); ++i) {
        double gap = 0.0;
        for (std::size_t j = 0; j < avgs[i].values.size(); ++j) {
            gap = std::max(gap, std::abs(avgs[i + 1].values[j] - avgs[i].values[j]));
        }
        out.rates.push_back(gap);
    }
    return out;
}

}  // namespace hsl
