#pragma once

// Fourier-symbol functional calculus on the periodic torus: the Dirac symbol
// D(xi), accretive coefficient matrices and the hat transform, per-frequency
// spectral data for DB (range projector, spectral projections chi+-, matrix
// sign), holomorphic functions of the symbol, semigroups and Cauchy
// operators, extension/contraction operators, smoothness norms, and
// off-diagonal/perturbation probes.
//
// Conventions (declared once, used everywhere):
//  - Fourier transform f_hat(xi) = sum_x f(x) e^{-i xi.x} dx^n, so d_j maps
//    to multiplication by i xi_j;
//  - channel layout: ch in [0, m) is the transversal block (perp), channel
//    m + d*m + a is tangential direction d, component a;
//  - the zero frequency belongs wholly to the nullspace: all range calculus
//    skips it and recovered functions are normalized modulo constants.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "hsl/exponents.hpp"
#include "hsl/fft.hpp"
#include "hsl/grid.hpp"
#include "hsl/holo.hpp"
#include "hsl/quasinorms.hpp"

namespace hsl {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

// ---------------------------------------------------------------------------
// Frequency lattice
// ---------------------------------------------------------------------------

// Frequency vector of spatial index sp: xi_d = (2 pi / L) * q_d with q_d the
// signed representative in (-Nx/2, Nx/2].
inline std::array<double, 3> frequency(const GridSpec& spec, std::size_t sp) {
    auto c = spatial_coords(spec, sp);
    std::array<double, 3> xi{0.0, 0.0, 0.0};
    for (int d = 0; d < spec.n; ++d) {
        int q = c[d];
        if (q > spec.Nx / 2) q -= spec.Nx;
        xi[d] = 2.0 * std::numbers::pi * q / spec.L;
    }
    return xi;
}

inline double frequency_norm(const std::array<double, 3>& xi, int n) {
    double s = 0.0;
    for (int d = 0; d < n; ++d) s += xi[d] * xi[d];
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Dirac symbol and coefficient matrices
// ---------------------------------------------------------------------------

// D(xi) = [[0, i xi . ], [-i xi (x) , 0]] per m-component; Hermitian, with
// eigenvalues +-|xi| (multiplicity m each) and 0 (multiplicity m(n-1)).
inline Mat dirac_symbol(const std::array<double, 3>& xi, int n, int m) {
    const int N = m * (1 + n);
    Mat D = Mat::Zero(N, N);
    const cplx I(0.0, 1.0);
    for (int d = 0; d < n; ++d) {
        for (int a = 0; a < m; ++a) {
            D(a, m + d * m + a) = I * xi[d];
            D(m + d * m + a, a) = -I * xi[d];
        }
    }
    return D;
}

// Range projector of D(xi): identity on the perp block, (xi xi^T/|xi|^2) per
// m-component on the tangential block.
inline Mat dirac_range_projector(const std::array<double, 3>& xi, int n, int m) {
    const int N = m * (1 + n);
    Mat P = Mat::Zero(N, N);
    const double nrm2 = frequency_norm(xi, n) * frequency_norm(xi, n);
    if (nrm2 == 0.0) return P;
    for (int a = 0; a < m; ++a) P(a, a) = 1.0;
    for (int d = 0; d < n; ++d) {
        for (int e = 0; e < n; ++e) {
            for (int a = 0; a < m; ++a) {
                P(m + d * m + a, m + e * m + a) = xi[d] * xi[e] / nrm2;
            }
        }
    }
    return P;
}

struct CoefficientMatrix {
    int n = 1;
    int m = 1;
    Mat A;  // size m(1+n), block-addressed via the perp/tangential split

    int N() const { return m * (1 + n); }
    Mat pp() const { return A.topLeftCorner(m, m); }            // perp-perp
    Mat pt() const { return A.topRightCorner(m, m * n); }       // perp-tang
    Mat tp() const { return A.bottomLeftCorner(m * n, m); }     // tang-perp
    Mat tt() const { return A.bottomRightCorner(m * n, m * n); }

    void validate() const {
        if (A.rows() != N() || A.cols() != N()) {
            throw std::invalid_argument("CoefficientMatrix: size mismatch");
        }
        if (!A.allFinite()) {
            throw std::invalid_argument("CoefficientMatrix: non-finite entries");
        }
    }
};

// Deterministic unit sphere sample set for the accretivity minimum.
inline std::vector<std::array<double, 3>> sphere_samples(int n, int count) {
    std::vector<std::array<double, 3>> out;
    if (n == 1) {
        out.push_back({1.0, 0.0, 0.0});
        out.push_back({-1.0, 0.0, 0.0});
        return out;
    }
    GaussianSource src(0x5fe1u);  // fixed seed: deterministic probe directions
    for (int i = 0; i < count; ++i) {
        std::array<double, 3> v{0.0, 0.0, 0.0};
        double nrm = 0.0;
        for (int d = 0; d < n; ++d) {
            v[d] = src.normal();
            nrm += v[d] * v[d];
        }
        nrm = std::sqrt(nrm);
        if (nrm < 1e-8) continue;
        for (int d = 0; d < n; ++d) v[d] /= nrm;
        out.push_back(v);
    }
    // Axis directions always included.
    for (int d = 0; d < n; ++d) {
        std::array<double, 3> v{0.0, 0.0, 0.0};
        v[d] = 1.0;
        out.push_back(v);
        v[d] = -1.0;
        out.push_back(v);
    }
    return out;
}

// kappa = min over sampled unit xi of the smallest eigenvalue of the
// Hermitian part of A restricted to the curl-free subspace
// { (v_perp, xi (x) w) : v in C^m, w in C^m }.
inline double accretivity_check(const CoefficientMatrix& A, int sphere_count = 64) {
    A.validate();
    const int m = A.m, n = A.n, N = A.N();
    double kappa = std::numeric_limits<double>::infinity();
    for (const auto& xi : sphere_samples(n, sphere_count)) {
        Mat U = Mat::Zero(N, 2 * m);
        for (int a = 0; a < m; ++a) {
            U(a, a) = 1.0;
            for (int d = 0; d < n; ++d) U(m + d * m + a, m + a) = xi[d];
        }
        // Columns are orthonormal (|xi| = 1 and the blocks are disjoint).
        Mat H = U.adjoint() * A.A * U;
        Mat Herm = 0.5 * (H + H.adjoint());
        Eigen::SelfAdjointEigenSolver<Mat> es(Herm);
        kappa = std::min(kappa, es.eigenvalues().minCoeff());
    }
    return kappa;
}

// hat(A) = underline(A) * overline(A)^{-1} with
// overline(A) = [[A_pp, A_pt],[0, I]], underline(A) = [[I, 0],[A_tp, A_tt]].
inline CoefficientMatrix hat_transform(const CoefficientMatrix& A) {
    A.validate();
    const int m = A.m, n = A.n, N = A.N();
    Mat over = Mat::Identity(N, N);
    over.topLeftCorner(m, m) = A.pp();
    over.topRightCorner(m, m * n) = A.pt();
    Mat under = Mat::Identity(N, N);
    under.bottomLeftCorner(m * n, m) = A.tp();
    under.bottomRightCorner(m * n, m * n) = A.tt();
    Eigen::FullPivLU<Mat> lu(over);
    if (!lu.isInvertible()) {
        throw std::invalid_argument("hat_transform: A_perp-perp block singular");
    }
    CoefficientMatrix B{n, m, under * lu.inverse()};
    return B;
}

// N = diag(I_m, -I_{mn}): the duality reflection for hat(A^*) = N hat(A)^* N.
inline Mat reflection_matrix(int n, int m) {
    Mat Nm = Mat::Identity(m * (1 + n), m * (1 + n));
    Nm.bottomRightCorner(m * n, m * n) *= -1.0;
    return Nm;
}

// ---------------------------------------------------------------------------
// Per-frequency spectral data and the multiplier operator
// ---------------------------------------------------------------------------

struct SpectralData {
    Mat M;       // the symbol D(xi) B
    Mat V;       // eigenvectors
    Vec lambda;  // eigenvalues, with in_range flags below
    Mat Vinv;
    std::vector<char> in_range;  // per eigenvalue: nonzero (range) or zero
    Mat P;       // range projector (along the nullspace)
    Mat chi_p;   // positive spectral projection
    Mat chi_m;   // negative spectral projection
    Mat S;       // chi+ - chi-
    bool defective = false;

    // f applied spectrally: f(lambda) on range eigenvalues, 0 on the
    // nullspace.
    Mat apply(const HoloFn& f) const {
        if (defective) {
            throw std::runtime_error(
                "SpectralData: defective symbol; only sign-type data available");
        }
        Vec d(lambda.size());
        for (Eigen::Index i = 0; i < lambda.size(); ++i) {
            d(i) = in_range[i] ? f.eval(lambda(i)) : cplx(0.0, 0.0);
        }
        return V * d.asDiagonal() * Vinv;
    }
};

namespace detail {

inline Mat projector_from_flags(const Mat& V, const Mat& Vinv,
                                const std::vector<char>& keep) {
    Vec d(V.cols());
    for (Eigen::Index i = 0; i < V.cols(); ++i) {
        d(i) = keep[i] ? cplx(1.0, 0.0) : cplx(0.0, 0.0);
    }
    return V * d.asDiagonal() * Vinv;
}

}  // namespace detail

// Scaled Newton iteration for the matrix sign of an invertible matrix:
// S <- (c S + (c S)^{-1})/2 with determinant scaling.
inline Mat newton_sign(const Mat& M, int max_iter = 50, double tol = 1e-12) {
    Mat S = M;
    const Eigen::Index k = M.rows();
    for (int it = 0; it < max_iter; ++it) {
        const double c =
            std::pow(std::abs(S.determinant()), -1.0 / static_cast<double>(k));
        Mat Sc = c * S;
        Mat next = 0.5 * (Sc + Sc.inverse());
        const double delta = (next - S).norm() / std::max(1.0, S.norm());
        S = next;
        if (delta < tol) break;
    }
    return S;
}

// Sign of a (possibly defective) symbol via the range/null splitting from an
// SVD basis: C^N = range(M) + null(M), both M-invariant, with a Newton
// iteration on the invertible range block.
inline Mat newton_sign_on_range(const Mat& M, double rank_tol = 1e-10) {
    Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double scale = (sv.size() > 0) ? sv(0) : 0.0;
    if (scale <= 0.0) return Mat::Zero(M.rows(), M.cols());
    Eigen::Index r = 0;
    while (r < sv.size() && sv(r) > rank_tol * scale) ++r;
    Mat T(M.rows(), M.cols());
    T.leftCols(r) = svd.matrixU().leftCols(r);          // range basis
    T.rightCols(M.cols() - r) = svd.matrixV().rightCols(M.cols() - r);  // null
    Mat Tinv = T.inverse();
    Mat Mt = Tinv * M * T;
    Mat Sfull = Mat::Zero(M.rows(), M.cols());
    if (r > 0) {
        Sfull.topLeftCorner(r, r) = newton_sign(Mt.topLeftCorner(r, r));
    }
    return T * Sfull * Tinv;
}

struct MultiplierOp {
    GridSpec spec;          // n, m, L, Nx used; t-grid carried for extensions
    Mat B;                  // the multiplier; D B is the symbol
    std::vector<SpectralData> data;  // per spatial frequency index
    double omega = 0.0;     // measured max spectral angle over the lattice
    int defective_count = 0;

    int N() const { return spec.channels(); }
};

// Per-frequency eigendecomposition of a symbol restricted to its range.  The
// zero frequency is wholly nullspace.  Defective symbols (ill-conditioned
// eigenbasis) keep Newton/SVD sign data but reject general f.
template <typename SymbolFn>
inline MultiplierOp build_op_symbol(const GridSpec& spec, const Mat& B,
                                    SymbolFn&& symbol) {
    spec.validate();
    const int N = spec.channels();
    if (B.rows() != N || B.cols() != N) {
        throw std::invalid_argument("build_op: B size mismatch");
    }
    MultiplierOp op;
    op.spec = spec;
    op.B = B;
    op.data.resize(spec.spatial_size());
    for (std::size_t sp = 0; sp < spec.spatial_size(); ++sp) {
        const auto xi = frequency(spec, sp);
        SpectralData& sd = op.data[sp];
        sd.M = symbol(xi);
        const double xin = frequency_norm(xi, spec.n);
        if (xin == 0.0) {
            sd.V = Mat::Identity(N, N);
            sd.Vinv = sd.V;
            sd.lambda = Vec::Zero(N);
            sd.in_range.assign(N, 0);
            sd.P = Mat::Zero(N, N);
            sd.chi_p = sd.P;
            sd.chi_m = sd.P;
            sd.S = sd.P;
            continue;
        }
        Eigen::ComplexEigenSolver<Mat> es(sd.M);
        if (es.info() != Eigen::Success) {
            throw std::runtime_error("build_op: eigensolver failed");
        }
        sd.V = es.eigenvectors();
        sd.lambda = es.eigenvalues();
        const double lmax = sd.lambda.cwiseAbs().maxCoeff();
        Eigen::FullPivLU<Mat> lu(sd.V);
        const double cond_proxy =
            sd.V.norm() * (lu.isInvertible() ? lu.inverse().norm()
                                             : std::numeric_limits<double>::infinity());
        sd.defective = !(cond_proxy < 1e8);
        sd.in_range.assign(N, 0);
        for (Eigen::Index i = 0; i < N; ++i) {
            sd.in_range[i] = (std::abs(sd.lambda(i)) > 1e-10 * std::max(lmax, 1.0));
        }
        if (!sd.defective) {
            sd.Vinv = lu.inverse();
            sd.P = detail::projector_from_flags(sd.V, sd.Vinv, sd.in_range);
            std::vector<char> pos(N, 0), neg(N, 0);
            for (Eigen::Index i = 0; i < N; ++i) {
                if (!sd.in_range[i]) continue;
                if (sd.lambda(i).real() > 0.0) {
                    pos[i] = 1;
                } else {
                    neg[i] = 1;
                }
            }
            sd.chi_p = detail::projector_from_flags(sd.V, sd.Vinv, pos);
            sd.chi_m = detail::projector_from_flags(sd.V, sd.Vinv, neg);
            sd.S = sd.chi_p - sd.chi_m;
            for (Eigen::Index i = 0; i < N; ++i) {
                if (!sd.in_range[i]) continue;
                const cplx l = sd.lambda(i);
                const double ang = std::min(std::abs(std::arg(l)),
                                            std::numbers::pi - std::abs(std::arg(l)));
                op.omega = std::max(op.omega, ang);
            }
        } else {
            ++op.defective_count;
            sd.Vinv = Mat();
            sd.S = newton_sign_on_range(sd.M);
            // P = S^2, chi+- = (P +- S)/2 from the Newton sign.
            sd.P = sd.S * sd.S;
            sd.chi_p = 0.5 * (sd.P + sd.S);
            sd.chi_m = 0.5 * (sd.P - sd.S);
        }
    }
    return op;
}

// The perturbed Dirac symbol D(xi) B.
inline MultiplierOp build_op(const GridSpec& spec, const Mat& B) {
    return build_op_symbol(spec, B, [&](const std::array<double, 3>& xi) {
        return Mat(dirac_symbol(xi, spec.n, spec.m) * B);
    });
}

// The companion symbol B D(xi) (similar to D B via D itself).
inline MultiplierOp build_op_bd(const GridSpec& spec, const Mat& B) {
    return build_op_symbol(spec, B, [&](const std::array<double, 3>& xi) {
        return Mat(B * dirac_symbol(xi, spec.n, spec.m));
    });
}

// f applied per frequency; results as raw symbol matrices.
inline std::vector<Mat> fn_of_op(const HoloFn& f, const MultiplierOp& op) {
    std::vector<Mat> out(op.data.size());
    for (std::size_t sp = 0; sp < op.data.size(); ++sp) out[sp] = op.data[sp].apply(f);
    return out;
}

// Semigroup e^{-t [M]} = (sgp dilated by t) of the symbol, on the range.
inline Mat semigroup_symbol(const SpectralData& sd, double t) {
    return sd.apply(HoloFn::sgp().dilated(t));
}

// Cauchy operator symbol: e^{-|t| [M]} chi^{sgn t}(M).
inline Mat cauchy_symbol(const SpectralData& sd, double t) {
    if (t == 0.0) throw std::invalid_argument("cauchy_symbol: t must be nonzero");
    const Mat sg = semigroup_symbol(sd, std::abs(t));
    return (t > 0.0) ? Mat(sg * sd.chi_p) : Mat(sg * sd.chi_m);
}

// ---------------------------------------------------------------------------
// Applying symbols to boundary fields / building extensions
// ---------------------------------------------------------------------------

// Forward FFT of every channel of a boundary field: values indexed like the
// input, holding f_hat(xi) (convention includes the dx^n factor).
inline std::vector<Vec> boundary_fft(const BoundaryField& f, const GridSpec& spec) {
    if (f.channels != spec.channels() || f.Nx != spec.Nx || f.n != spec.n) {
        throw std::invalid_argument("boundary_fft: field/spec mismatch");
    }
    const std::size_t Ns = spec.spatial_size();
    const int N = f.channels;
    std::vector<std::vector<cplx>> bufs(N, std::vector<cplx>(Ns));
    for (int ch = 0; ch < N; ++ch) {
        for (std::size_t sp = 0; sp < Ns; ++sp) bufs[ch][sp] = f.at(sp, ch);
        Fft::forward(spec.n, spec.Nx, bufs[ch].data());
    }
    std::vector<Vec> out(Ns, Vec(N));
    const double scale = spec.cell_volume();
    for (std::size_t sp = 0; sp < Ns; ++sp) {
        for (int ch = 0; ch < N; ++ch) out[sp](ch) = scale * bufs[ch][sp];
    }
    return out;
}

inline BoundaryField boundary_ifft(const std::vector<Vec>& hat, const GridSpec& spec) {
    const std::size_t Ns = spec.spatial_size();
    const int N = spec.channels();
    BoundaryField out = BoundaryField::zeros(spec, N);
    std::vector<std::vector<cplx>> bufs(N, std::vector<cplx>(Ns));
    const double scale = 1.0 / spec.cell_volume();
    for (std::size_t sp = 0; sp < Ns; ++sp) {
        for (int ch = 0; ch < N; ++ch) bufs[ch][sp] = scale * hat[sp](ch);
    }
    for (int ch = 0; ch < N; ++ch) {
        Fft::inverse(spec.n, spec.Nx, bufs[ch].data());
        for (std::size_t sp = 0; sp < Ns; ++sp) out.values[out.index(sp, ch)] = bufs[ch][sp];
    }
    return out;
}

// Applies per-frequency matrices to a boundary field.
inline BoundaryField apply_symbol(const std::vector<Mat>& sym,
                                  const BoundaryField& f, const GridSpec& spec) {
    auto hat = boundary_fft(f, spec);
    for (std::size_t sp = 0; sp < hat.size(); ++sp) hat[sp] = sym[sp] * hat[sp];
    return boundary_ifft(hat, spec);
}

// Extension operator (Q_{psi,op} f)(t) = psi_t(op) f per frequency.
inline Field q_extend(const HoloFn& psi, const MultiplierOp& op,
                      const BoundaryField& f) {
    const GridSpec& spec = op.spec;
    auto hat = boundary_fft(f, spec);
    Field F = Field::zeros(spec);
    const std::size_t Ns = spec.spatial_size();
    const int N = spec.channels();
    for (int k = 0; k < spec.K; ++k) {
        const HoloFn psi_t = psi.dilated(spec.t_level(k));
        std::vector<std::vector<cplx>> bufs(N, std::vector<cplx>(Ns));
        for (std::size_t sp = 0; sp < Ns; ++sp) {
            const Vec v = op.data[sp].apply(psi_t) * hat[sp];
            for (int ch = 0; ch < N; ++ch) bufs[ch][sp] = v(ch) / spec.cell_volume();
        }
        for (int ch = 0; ch < N; ++ch) {
            Fft::inverse(spec.n, spec.Nx, bufs[ch].data());
            for (std::size_t sp = 0; sp < Ns; ++sp) {
                F.values[F.index(k, sp, ch)] = bufs[ch][sp];
            }
        }
    }
    return F;
}

// Contraction operator S_{phi,op} F = sum_k h phi_{t_k}(op) F(t_k); the
// report's truncation estimate comes from the declared Psi decay of phi.
struct ContractResult {
    BoundaryField g;
    double truncation_estimate = 0.0;
};

inline ContractResult s_contract(const HoloFn& phi, const MultiplierOp& op,
                                 const Field& F) {
    if (!(phi.sigma() > 0.0) || !(phi.tau() > 0.0)) {
        throw std::invalid_argument("s_contract: phi must be in Psi_+^+");
    }
    const GridSpec& spec = op.spec;
    if (!(F.spec == spec)) throw std::invalid_argument("s_contract: spec mismatch");
    const std::size_t Ns = spec.spatial_size();
    const int N = spec.channels();
    const double h = spec.log_step();
    std::vector<Vec> acc(Ns, Vec::Zero(N));
    for (int k = 0; k < spec.K; ++k) {
        // FFT of the level slice.
        std::vector<std::vector<cplx>> bufs(N, std::vector<cplx>(Ns));
        for (int ch = 0; ch < N; ++ch) {
            for (std::size_t sp = 0; sp < Ns; ++sp) bufs[ch][sp] = F.at(k, sp, ch);
            Fft::forward(spec.n, spec.Nx, bufs[ch].data());
        }
        const HoloFn phi_t = phi.dilated(spec.t_level(k));
        for (std::size_t sp = 0; sp < Ns; ++sp) {
            Vec v(N);
            for (int ch = 0; ch < N; ++ch) v(ch) = spec.cell_volume() * bufs[ch][sp];
            acc[sp] += h * (op.data[sp].apply(phi_t) * v);
        }
    }
    ContractResult out{boundary_ifft(acc, spec), 0.0};
    // Tail estimate: the neglected dt/t mass of m_sigma^tau outside the grid
    // window, relative to its total, at the largest lattice frequency scale.
    const double sigma = phi.sigma();
    const double tau = std::isinf(phi.tau()) ? 10.0 : phi.tau();
    const double xi_max = std::numbers::pi * spec.Nx / spec.L;
    const double a0 = spec.t_min * xi_max, a1 = spec.t_max * xi_max;
    const double head = (a0 < 1.0) ? std::pow(a0, sigma) / sigma : 0.0;
    const double tail = (a1 > 1.0) ? std::pow(a1, -tau) / tau : 0.0;
    out.truncation_estimate = head + tail;
    return out;
}

// ---------------------------------------------------------------------------
// Dunford contour cross-check
// ---------------------------------------------------------------------------

// (1/2 pi i) contour integral of f(z)(z - M)^{-1} dz over the boundary of
// the bisector S_nu, counterclockwise around both sectors, compared against
// the spectral evaluation.  f must have strictly positive decay at 0 and
// infinity.
inline double dunford_check(const HoloFn& f, const MultiplierOp& op, double nu,
                            int quad_points = 4096,
                            int sample_stride = 0) {
    if (!(f.sigma() > 0.0) || !(f.tau() > 0.0)) {
        throw std::invalid_argument("dunford_check: f must be in Psi_+^+");
    }
    if (!(nu > op.omega) || !(nu < 0.5 * std::numbers::pi)) {
        throw std::invalid_argument("dunford_check: need omega < nu < pi/2");
    }
    const GridSpec& spec = op.spec;
    if (sample_stride <= 0) {
        sample_stride = std::max<int>(1, static_cast<int>(spec.spatial_size() / 16));
    }
    const double lo = std::log(1e-8), hi = std::log(1e8);
    const double h = (hi - lo) / quad_points;
    double worst = 0.0;
    for (std::size_t sp = 1; sp < spec.spatial_size(); sp += sample_stride) {
        const SpectralData& sd = op.data[sp];
        if (sd.defective) continue;
        const int N = op.N();
        Mat acc = Mat::Zero(N, N);
        // Four rays of the bisector boundary, each sector enclosed
        // counterclockwise: outward along its lower edge, inward along its
        // upper edge (think of the bottom/top of a circle around the
        // spectrum).
        struct Ray {
            double ang;
            double orient;  // +1 integrates r: 0 -> inf, -1 reverses
        };
        const Ray rays[4] = {{-nu, +1.0}, {nu, -1.0},
                             {std::numbers::pi - nu, +1.0},
                             {std::numbers::pi + nu, -1.0}};
        for (const Ray& ray : rays) {
            const cplx dir = std::exp(cplx(0.0, ray.ang));
            Mat part = Mat::Zero(N, N);
            for (int i = 0; i < quad_points; ++i) {
                const double r = std::exp(lo + (i + 0.5) * h);
                const cplx z = r * dir;
                // dz = dir * r du along the ray (u = log r).
                Mat res = (z * Mat::Identity(N, N) - sd.M)
                              .fullPivLu()
                              .solve(Mat::Identity(N, N));
                part += f.eval(z) * res * (dir * r * h);
            }
            acc += ray.orient * part;
        }
        acc /= cplx(0.0, 2.0 * std::numbers::pi);
        const Mat ref = sd.apply(f);
        worst = std::max(worst, (acc - ref).norm() / std::max(1.0, ref.norm()));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Smoothness norms, Riesz potential, differences
// ---------------------------------------------------------------------------

// Littlewood-Paley extension u(t) = phi(t |xi|) f_hat(xi), channelwise.  phi
// must be even on the bisector (true of every [z]-based catalogue entry);
// checked on samples.
inline Field lp_extend(const BoundaryField& f, const HoloFn& phi,
                       const GridSpec& spec) {
    for (double r : {0.3, 1.0, 3.7}) {
        if (std::abs(phi.eval(cplx(r, 0.1)) - phi.eval(cplx(-r, -0.1))) > 1e-12) {
            throw std::invalid_argument("lp_extend: phi must be even");
        }
    }
    if (f.channels != spec.channels()) {
        throw std::invalid_argument("lp_extend: channel mismatch");
    }
    auto hat = boundary_fft(f, spec);
    Field F = Field::zeros(spec);
    const std::size_t Ns = spec.spatial_size();
    const int N = spec.channels();
    for (int k = 0; k < spec.K; ++k) {
        const double t = spec.t_level(k);
        std::vector<std::vector<cplx>> bufs(N, std::vector<cplx>(Ns));
        for (std::size_t sp = 0; sp < Ns; ++sp) {
            const double xin = frequency_norm(frequency(spec, sp), spec.n);
            const cplx mult = (xin > 0.0) ? phi.eval(cplx(t * xin, 0.0))
                                          : phi.eval(cplx(0.0, 0.0));
            for (int ch = 0; ch < N; ++ch) {
                bufs[ch][sp] = mult * hat[sp](ch) / spec.cell_volume();
            }
        }
        for (int ch = 0; ch < N; ++ch) {
            Fft::inverse(spec.n, spec.Nx, bufs[ch].data());
            for (std::size_t sp = 0; sp < Ns; ++sp) {
                F.values[F.index(k, sp, ch)] = bufs[ch][sp];
            }
        }
    }
    return F;
}

inline NormReport smoothness_norm(const BoundaryField& f, const Exponent& p,
                                  const HoloFn& phi, const GridSpec& spec,
                                  const BallKernelCache& cache) {
    const Field F = lp_extend(f, phi, spec);
    return tent_norm(F, p, cache);
}

// Riesz potential: multiplies f_hat by |xi|^{-alpha}; the zero mode is
// zeroed (functions modulo polynomials).
inline BoundaryField riesz(const BoundaryField& f, double alpha,
                           const GridSpec& spec) {
    auto hat = boundary_fft(f, spec);
    double nonzero_mass = 0.0;
    for (std::size_t sp = 1; sp < hat.size(); ++sp) nonzero_mass += hat[sp].norm();
    if (alpha > 0.0 && nonzero_mass == 0.0 && hat[0].norm() > 0.0) {
        throw std::invalid_argument("riesz: undefined modulo polynomials "
                                    "(zero-mode-only input)");
    }
    for (std::size_t sp = 0; sp < hat.size(); ++sp) {
        const double xin = frequency_norm(frequency(spec, sp), spec.n);
        hat[sp] *= (xin > 0.0) ? std::pow(xin, -alpha) : 0.0;
    }
    return boundary_ifft(hat, spec);
}

// Difference functional D_alpha f(x) = ( sum_u |f(x+u) - f(x)|^2
// |u|^{-n-2 alpha} dx^n )^{1/2} over nonzero lattice offsets (torus metric),
// followed by an L^{i(p)} envelope.
inline BoundaryField difference_functional(const BoundaryField& f, double alpha,
                                           const GridSpec& spec) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("difference_functional: alpha in (0,1)");
    }
    const std::size_t Ns = spec.spatial_size();
    BoundaryField out = BoundaryField::zeros(spec, 1);
    std::vector<double> wu(Ns, 0.0);
    for (std::size_t u = 1; u < Ns; ++u) {
        auto uc = spatial_coords(spec, u);
        double d2 = 0.0;
        for (int d = 0; d < spec.n; ++d) {
            const double dd = wrap_delta(uc[d] * spec.dx(), spec.L);
            d2 += dd * dd;
        }
        wu[u] = std::pow(d2, -0.5 * (spec.n + 2.0 * alpha)) * spec.cell_volume();
    }
    for (std::size_t x = 0; x < Ns; ++x) {
        auto xc = spatial_coords(spec, x);
        double acc = 0.0;
        for (std::size_t u = 1; u < Ns; ++u) {
            auto uc = spatial_coords(spec, u);
            std::array<int, 3> yc{0, 0, 0};
            for (int d = 0; d < spec.n; ++d) yc[d] = xc[d] + uc[d];
            const std::size_t y = spatial_index(spec, yc);
            double diff2 = 0.0;
            for (int ch = 0; ch < f.channels; ++ch) {
                diff2 += std::norm(f.at(y, ch) - f.at(x, ch));
            }
            acc += wu[u] * diff2;
        }
        out.values[out.index(x, 0)] = std::sqrt(acc);
    }
    return out;
}

inline NormReport difference_norm(const BoundaryField& f, double alpha,
                                  const Exponent& p, const GridSpec& spec) {
    const BoundaryField D = difference_functional(f, alpha, spec);
    std::vector<double> v(D.spatial_size());
    for (std::size_t sp = 0; sp < v.size(); ++sp) v[sp] = std::abs(D.at(sp, 0));
    NormReport rep;
    double acc = 0.0;
    for (double x : v) acc += std::pow(x, p.i());
    rep.value = std::pow(acc * spec.cell_volume(), 1.0 / p.i());
    return rep;
}

// ---------------------------------------------------------------------------
// Off-diagonal and perturbation probes
// ---------------------------------------------------------------------------

struct OffDiagResult {
    double ratio = 0.0;     // ||1_F f_t(op) 1_E g||_2 / ||1_E g||_2
    double distance = 0.0;  // d(E, F) in the torus metric
    double reference = 0.0; // <d/t>^{-M} for the probed order
};

inline OffDiagResult offdiag_probe(const HoloFn& f, const MultiplierOp& op,
                                   double t, const std::vector<std::size_t>& E,
                                   const std::vector<std::size_t>& F,
                                   const BoundaryField& g, double order_M) {
    const GridSpec& spec = op.spec;
    BoundaryField gE = BoundaryField::zeros(spec, spec.channels());
    for (std::size_t sp : E) {
        for (int ch = 0; ch < spec.channels(); ++ch) {
            gE.values[gE.index(sp, ch)] = g.at(sp, ch);
        }
    }
    std::vector<Mat> sym(op.data.size());
    const HoloFn ft = f.dilated(t);
    for (std::size_t sp = 0; sp < op.data.size(); ++sp) {
        sym[sp] = op.data[sp].apply(ft);
    }
    const BoundaryField out = apply_symbol(sym, gE, spec);
    double num = 0.0, den = 0.0;
    for (std::size_t sp : F) {
        for (int ch = 0; ch < spec.channels(); ++ch) num += std::norm(out.at(sp, ch));
    }
    for (std::size_t sp : E) {
        for (int ch = 0; ch < spec.channels(); ++ch) den += std::norm(gE.at(sp, ch));
    }
    OffDiagResult res;
    res.ratio = (den > 0.0) ? std::sqrt(num / den) : 0.0;
    // Torus distance between the index sets.
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t a : E) {
        auto ac = spatial_coords(spec, a);
        for (std::size_t b : F) {
            auto bc = spatial_coords(spec, b);
            double d2 = 0.0;
            for (int d = 0; d < spec.n; ++d) {
                const double dd = wrap_delta((bc[d] - ac[d]) * spec.dx(), spec.L);
                d2 += dd * dd;
            }
            dmin = std::min(dmin, std::sqrt(d2));
        }
    }
    res.distance = dmin;
    res.reference = std::pow(1.0 + dmin / t, -order_M);
    return res;
}

struct PerturbResult {
    double projection_gap = 0.0;  // sup_xi || chi+(D B1) - chi+(D B0) ||
    double coefficient_gap = 0.0; // || B1 - B0 ||
};

inline PerturbResult perturb_probe(const MultiplierOp& op0, const MultiplierOp& op1) {
    if (!(op0.spec == op1.spec)) {
        throw std::invalid_argument("perturb_probe: spec mismatch");
    }
    PerturbResult res;
    for (std::size_t sp = 0; sp < op0.data.size(); ++sp) {
        res.projection_gap =
            std::max(res.projection_gap,
                     (op1.data[sp].chi_p - op0.data[sp].chi_p).operatorNorm());
    }
    res.coefficient_gap = (op1.B - op0.B).operatorNorm();
    return res;
}

}  // namespace hsl
