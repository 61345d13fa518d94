#pragma once

// Discretization of the upper half-space R^{1+n}_+ as geometric t-levels over
// a periodic spatial torus, plus the geometric overlap machinery (cones,
// tents, Whitney regions, Whitney grids) that the quasinorm and atom modules
// consume, and the HSF field file format.
//
// Conventions:
//  - spatial cells are the axis-aligned boxes of side dx = L/Nx centered at
//    the grid points x_i = i * dx;
//  - t-levels t_k = t_min * rho^k, rho = (t_max/t_min)^{1/(K-1)}; each level
//    is the log-width-h cell [u_k - h/2, u_k + h/2] in u = log t, h = log rho,
//    with uniform dt/t quadrature weight h (midpoint rule);
//  - all metric queries use the torus metric; radii must stay below L/2.
//
// Cell-ball overlap volumes are exact for n = 1 (interval-interval) and n = 2
// (disk-rectangle, closed form); n = 3 falls back to midpoint subdivision
// with a fixed deterministic pattern.  Exactness in n <= 2 is what makes the
// discrete Fubini identities of the quasinorm module machine-precision facts:
// the lattice sum of (cell indicator * ball indicator) equals the continuum
// integral because the cell indicator's Fourier transform vanishes on the
// nonzero reciprocal lattice of the sampling grid.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsl/fft.hpp"

namespace hsl {

using cplx = std::complex<double>;

// Volume of the unit ball in R^n.
inline double unit_ball_volume(int n) {
    switch (n) {
        case 1: return 2.0;
        case 2: return std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi / 3.0;
        default: {
            double v = std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0 + 1.0);
            return v;
        }
    }
}

// ---------------------------------------------------------------------------
// GridSpec
// ---------------------------------------------------------------------------

struct GridSpec {
    int n = 1;          // spatial dimension
    int m = 1;          // system size (elliptic system block count)
    double L = 1.0;     // spatial period
    int Nx = 64;        // grid points per axis (power of two)
    double t_min = 1e-2;
    double t_max = 1.0;
    int K = 32;         // number of geometric t-levels

    int channels() const { return m * (1 + n); }
    double dx() const { return L / Nx; }
    double cell_volume() const { return std::pow(dx(), n); }
    std::size_t spatial_size() const { return Fft::size(n, Nx); }
    std::size_t field_size() const {
        return static_cast<std::size_t>(K) * spatial_size() * channels();
    }

    // Log-spacing h = log rho.
    double log_step() const {
        if (K < 2) return 1.0;
        return std::log(t_max / t_min) / (K - 1);
    }
    double t_level(int k) const { return t_min * std::exp(k * log_step()); }
    // dt/t quadrature weight of a level (uniform midpoint cells).
    double level_weight(int) const { return log_step(); }
    // Log-cell boundaries of level k: [u_k - h/2, u_k + h/2].
    double log_lo(int k) const { return std::log(t_min) + (k - 0.5) * log_step(); }
    double log_hi(int k) const { return std::log(t_min) + (k + 0.5) * log_step(); }

    void validate() const {
        if (n < 1 || n > 3) throw std::invalid_argument("GridSpec: n in {1,2,3}");
        if (m < 1) throw std::invalid_argument("GridSpec: m >= 1");
        if (!(L > 0.0)) throw std::invalid_argument("GridSpec: L > 0");
        if (Nx < 2 || (Nx & (Nx - 1)) != 0) {
            throw std::invalid_argument("GridSpec: Nx must be a power of two >= 2");
        }
        if (!(t_min > 0.0) || !(t_max > t_min)) {
            throw std::invalid_argument("GridSpec: 0 < t_min < t_max");
        }
        if (K < 2) throw std::invalid_argument("GridSpec: K >= 2");
    }

    bool operator==(const GridSpec& o) const {
        return n == o.n && m == o.m && L == o.L && Nx == o.Nx &&
               t_min == o.t_min && t_max == o.t_max && K == o.K;
    }
};

// Spatial multi-index helpers (row-major, axis 0 slowest).
inline std::size_t spatial_index(const GridSpec& s, const std::array<int, 3>& c) {
    std::size_t idx = 0;
    for (int d = 0; d < s.n; ++d) {
        int w = ((c[d] % s.Nx) + s.Nx) % s.Nx;
        idx = idx * s.Nx + static_cast<std::size_t>(w);
    }
    return idx;
}

inline std::array<int, 3> spatial_coords(const GridSpec& s, std::size_t idx) {
    std::array<int, 3> c{0, 0, 0};
    for (int d = s.n - 1; d >= 0; --d) {
        c[d] = static_cast<int>(idx % s.Nx);
        idx /= s.Nx;
    }
    return c;
}

// Wrap a coordinate difference to [-L/2, L/2).
inline double wrap_delta(double d, double L) {
    d = std::remainder(d, L);
    return d;
}

// ---------------------------------------------------------------------------
// Field
// ---------------------------------------------------------------------------

// Complex field sampled on the half-space grid, indexed
// (level-major, spatial row-major, channel-minor).  Treated as immutable
// after construction by all norm/operator code.
struct Field {
    GridSpec spec;
    std::vector<cplx> values;

    Field() = default;
    Field(const GridSpec& s, std::vector<cplx> v) : spec(s), values(std::move(v)) {
        spec.validate();
        if (values.size() != spec.field_size()) {
            throw std::invalid_argument("Field: value count does not match spec");
        }
        for (const cplx& z : values) {
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
                throw std::invalid_argument("Field: non-finite sample rejected");
            }
        }
    }
    static Field zeros(const GridSpec& s) {
        return Field(s, std::vector<cplx>(s.field_size(), cplx(0.0, 0.0)));
    }

    std::size_t index(int k, std::size_t sp, int ch) const {
        return (static_cast<std::size_t>(k) * spec.spatial_size() + sp) *
                   spec.channels() + ch;
    }
    cplx at(int k, std::size_t sp, int ch) const { return values[index(k, sp, ch)]; }
};

// Boundary (t = 0) field on the torus: same spatial layout, chosen channel
// count (m(1+n) for conormal-gradient data, m for scalar data).
struct BoundaryField {
    int n = 1;
    int Nx = 2;
    double L = 1.0;
    int channels = 1;
    std::vector<cplx> values;

    std::size_t spatial_size() const { return Fft::size(n, Nx); }
    std::size_t index(std::size_t sp, int ch) const {
        return sp * static_cast<std::size_t>(channels) + ch;
    }
    cplx at(std::size_t sp, int ch) const { return values[index(sp, ch)]; }

    static BoundaryField zeros(const GridSpec& s, int channels) {
        BoundaryField f;
        f.n = s.n;
        f.Nx = s.Nx;
        f.L = s.L;
        f.channels = channels;
        f.values.assign(f.spatial_size() * channels, cplx(0.0, 0.0));
        return f;
    }
};

// Deterministic sampling at cell centers (x_i, t_k).
inline Field sample(const GridSpec& spec,
                    const std::function<cplx(double t, const std::array<double, 3>& x,
                                             int ch)>& fn) {
    spec.validate();
    std::vector<cplx> vals(spec.field_size());
    const std::size_t Ns = spec.spatial_size();
    const int N = spec.channels();
    std::size_t pos = 0;
    for (int k = 0; k < spec.K; ++k) {
        const double t = spec.t_level(k);
        for (std::size_t s = 0; s < Ns; ++s) {
            auto ci = spatial_coords(spec, s);
            std::array<double, 3> x{0.0, 0.0, 0.0};
            for (int d = 0; d < spec.n; ++d) x[d] = ci[d] * spec.dx();
            for (int ch = 0; ch < N; ++ch) {
                cplx v = fn(t, x, ch);
                if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
                    throw std::invalid_argument("sample: non-finite value rejected");
                }
                vals[pos++] = v;
            }
        }
    }
    return Field(spec, std::move(vals));
}

// ---------------------------------------------------------------------------
// Deterministic random fields
// ---------------------------------------------------------------------------

// Portable Box-Muller on top of mt19937_64 (std::normal_distribution is
// implementation-defined, which would break byte-identical reports).
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : rng_(seed) {}

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        // Guard against log(0).
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    cplx normal_complex() { return cplx(normal(), normal()) / std::sqrt(2.0); }

    double uniform01() {
        // 53-bit mantissa uniform in [0, 1).
        return (rng_() >> 11) * 0x1.0p-53;
    }

    std::uint64_t raw() { return rng_(); }

private:
    std::mt19937_64 rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Seeded complex Gaussian field, scaled by t^gamma per level.
inline Field random_field(const GridSpec& spec, std::uint64_t seed, double gamma = 0.0) {
    GaussianSource src(seed);
    std::vector<cplx> vals(spec.field_size());
    const std::size_t Ns = spec.spatial_size();
    const int N = spec.channels();
    std::size_t pos = 0;
    for (int k = 0; k < spec.K; ++k) {
        const double scale = std::pow(spec.t_level(k), gamma);
        for (std::size_t s = 0; s < Ns; ++s) {
            for (int ch = 0; ch < N; ++ch) {
                vals[pos++] = scale * src.normal_complex();
            }
        }
    }
    return Field(spec, std::move(vals));
}

inline BoundaryField random_boundary_field(const GridSpec& spec, int channels,
                                           std::uint64_t seed) {
    BoundaryField f = BoundaryField::zeros(spec, channels);
    GaussianSource src(seed);
    for (auto& v : f.values) v = src.normal_complex();
    return f;
}

// ---------------------------------------------------------------------------
// Exact cell/ball overlap volumes
// ---------------------------------------------------------------------------

inline double interval_overlap(double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

namespace detail {

// Area of {(u,v): 0 <= u <= x, 0 <= v <= y, u^2 + v^2 <= r^2} for x, y >= 0.
inline double quadrant_disk_box(double x, double y, double r) {
    if (x <= 0.0 || y <= 0.0 || r <= 0.0) return 0.0;
    x = std::min(x, r);
    y = std::min(y, r);
    if (x * x + y * y <= r * r) return x * y;
    // Antiderivative of sqrt(r^2 - u^2).
    auto H = [r](double u) {
        u = std::clamp(u, -r, r);
        return 0.5 * (u * std::sqrt(std::max(0.0, r * r - u * u)) +
                      r * r * std::asin(u / r));
    };
    const double u0 = std::sqrt(std::max(0.0, r * r - y * y));  // circle meets v = y
    return y * u0 + (H(x) - H(u0));
}

// Signed quadrant function: additive extension to all sign combinations.
inline double signed_quadrant(double x, double y, double r) {
    const double sx = (x >= 0.0) ? 1.0 : -1.0;
    const double sy = (y >= 0.0) ? 1.0 : -1.0;
    return sx * sy * quadrant_disk_box(std::abs(x), std::abs(y), r);
}

// Area of disk(center 0, radius r) intersect [x0,x1] x [y0,y1].
inline double disk_box_area(double x0, double x1, double y0, double y1, double r) {
    return signed_quadrant(x1, y1, r) - signed_quadrant(x0, y1, r) -
           signed_quadrant(x1, y0, r) + signed_quadrant(x0, y0, r);
}

}  // namespace detail

// Volume of (axis-aligned cell of side dx centered at c) intersect B(0, r),
// in the non-periodic metric.
inline double cell_ball_overlap(int n, const std::array<double, 3>& c, double dx,
                                double r) {
    const double hw = 0.5 * dx;
    switch (n) {
        case 1:
            return interval_overlap(c[0] - hw, c[0] + hw, -r, r);
        case 2:
            return detail::disk_box_area(c[0] - hw, c[0] + hw, c[1] - hw, c[1] + hw, r);
        case 3: {
            // Deterministic midpoint subdivision (no randomness): subdivide the
            // cell into q^3 subcells and count centers inside the ball, with a
            // short-circuit for cells fully inside/outside.
            const double d2max = 3.0 * hw * hw;
            const double cen2 = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
            const double cen = std::sqrt(cen2);
            const double diag = std::sqrt(d2max);
            if (cen + diag <= r) return dx * dx * dx;
            if (cen - diag >= r) return 0.0;
            const int q = 24;
            const double sub = dx / q;
            std::int64_t inside = 0;
            for (int a = 0; a < q; ++a) {
                const double xa = c[0] - hw + (a + 0.5) * sub;
                for (int b = 0; b < q; ++b) {
                    const double xb = c[1] - hw + (b + 0.5) * sub;
                    const double rem = r * r - xa * xa - xb * xb;
                    if (rem < 0.0) continue;
                    const double zmax = std::sqrt(rem);
                    // Count centers with |z| <= zmax.
                    for (int cc = 0; cc < q; ++cc) {
                        const double xc = c[2] - hw + (cc + 0.5) * sub;
                        if (xc * xc <= rem) ++inside;
                    }
                    (void)zmax;
                }
            }
            return static_cast<double>(inside) * sub * sub * sub;
        }
        default:
            throw std::invalid_argument("cell_ball_overlap: n in {1,2,3}");
    }
}

// Periodic overlap: sum the non-periodic overlap over torus images of the
// cell center.  Radii must satisfy r < L/2 (injectivity guard enforced by
// callers); the image sum keeps boundary cells exact.
inline double cell_ball_overlap_periodic(int n, std::array<double, 3> c, double L,
                                         double dx, double r) {
    for (int d = 0; d < n; ++d) c[d] = wrap_delta(c[d], L);
    double total = 0.0;
    const int imgs = 1;  // with r < L/2 and wrapped centers, +/- one image suffices
    std::array<int, 3> im{0, 0, 0};
    std::function<void(int)> rec = [&](int d) {
        if (d == n) {
            std::array<double, 3> cc = c;
            for (int e = 0; e < n; ++e) cc[e] += im[e] * L;
            // Quick reject: cell too far from the ball.
            double dist2 = 0.0;
            for (int e = 0; e < n; ++e) {
                const double g = std::max(0.0, std::abs(cc[e]) - 0.5 * dx);
                dist2 += g * g;
            }
            if (dist2 >= r * r) return;
            total += cell_ball_overlap(n, cc, dx, r);
            return;
        }
        for (im[d] = -imgs; im[d] <= imgs; ++im[d]) rec(d + 1);
    };
    rec(0);
    return total;
}

// ---------------------------------------------------------------------------
// Cell weight lists and kernel tables
// ---------------------------------------------------------------------------

// Sparse weight list over half-space cells.
struct CellWeight {
    int level;
    std::size_t spatial;
    double w;
};
using CellWeights = std::vector<CellWeight>;

// Per-grid cache of spatial ball-overlap kernel tables and their DFTs.
// kernel(r)[d] = |cell at offset d*dx  intersect  B(0, r)| (periodic).
class BallKernelCache {
public:
    explicit BallKernelCache(const GridSpec& spec) : spec_(spec) {}

    const std::vector<double>& kernel(double r) const {
        auto key = quantize(r);
        auto it = kernels_.find(key);
        if (it != kernels_.end()) return it->second;
        check_radius(r);
        std::vector<double> g(spec_.spatial_size());
        const double dx = spec_.dx();
        for (std::size_t s = 0; s < g.size(); ++s) {
            auto ci = spatial_coords(spec_, s);
            std::array<double, 3> c{0.0, 0.0, 0.0};
            for (int d = 0; d < spec_.n; ++d) c[d] = ci[d] * dx;
            g[s] = cell_ball_overlap_periodic(spec_.n, c, spec_.L, dx, r);
        }
        return kernels_.emplace(key, std::move(g)).first->second;
    }

    // DFT of the kernel table (for convolution evaluation of vertex sums).
    const std::vector<cplx>& kernel_dft(double r) const {
        auto key = quantize(r);
        auto it = dfts_.find(key);
        if (it != dfts_.end()) return it->second;
        const auto& g = kernel(r);
        std::vector<cplx> gh(g.begin(), g.end());
        Fft::forward(spec_.n, spec_.Nx, gh.data());
        return dfts_.emplace(key, std::move(gh)).first->second;
    }

    void check_radius(double r) const {
        if (!(r < 0.5 * spec_.L)) {
            throw std::invalid_argument(
                "aperture exceeds torus injectivity radius (radius >= L/2)");
        }
    }

private:
    static std::int64_t quantize(double r) {
        return static_cast<std::int64_t>(std::llround(r * 1e12));
    }
    GridSpec spec_;
    mutable std::map<std::int64_t, std::vector<double>> kernels_;
    mutable std::map<std::int64_t, std::vector<cplx>> dfts_;
};

// Cone weights: w(cell at (t_k, y)) = |cell_y intersect B(x, beta t_k)|.
// The t-direction is handled by the level quadrature weight downstream.
inline CellWeights cone_weights(const GridSpec& spec, const BallKernelCache& cache,
                                std::size_t x_index, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("cone_weights: beta > 0");
    cache.check_radius(beta * spec.t_max * std::exp(0.5 * spec.log_step()));
    CellWeights out;
    auto xc = spatial_coords(spec, x_index);
    for (int k = 0; k < spec.K; ++k) {
        const auto& g = cache.kernel(beta * spec.t_level(k));
        for (std::size_t s = 0; s < spec.spatial_size(); ++s) {
            auto yc = spatial_coords(spec, s);
            std::array<int, 3> dcoord{0, 0, 0};
            for (int d = 0; d < spec.n; ++d) dcoord[d] = yc[d] - xc[d];
            const double w = g[spatial_index(spec, dcoord)];
            if (w > 0.0) out.push_back({k, s, w});
        }
    }
    return out;
}

// Tent weights for T(B(x0, r)) = {(t, y) : B(y, t) subset B(x0, r)}
// = {(t, y) : |y - x0| <= r - t}.  Discretized per level at the level's
// center t_k: spatial weight |cell_y intersect B(x0, r - t_k)| times the
// Lebesgue t-extent of the level cell clipped to t <= r.
inline CellWeights tent_cells(const GridSpec& spec, const BallKernelCache& cache,
                              std::size_t x0_index, double r) {
    cache.check_radius(r);
    CellWeights out;
    auto xc = spatial_coords(spec, x0_index);
    for (int k = 0; k < spec.K; ++k) {
        const double t = spec.t_level(k);
        if (t > r) continue;
        const double rr = r - t;
        if (rr <= 0.0) continue;
        const double t_lo = std::exp(spec.log_lo(k));
        const double t_hi = std::min(std::exp(spec.log_hi(k)), r);
        const double text = std::max(0.0, t_hi - t_lo);
        if (text <= 0.0) continue;
        const auto& g = cache.kernel(rr);
        for (std::size_t s = 0; s < spec.spatial_size(); ++s) {
            auto yc = spatial_coords(spec, s);
            std::array<int, 3> dcoord{0, 0, 0};
            for (int d = 0; d < spec.n; ++d) dcoord[d] = yc[d] - xc[d];
            const double w = g[spatial_index(spec, dcoord)] * text;
            if (w > 0.0) out.push_back({k, s, w});
        }
    }
    return out;
}

// Whitney parameter c = (c0, c1) with c0 > 0, c1 > 3/2.
struct WhitneyParameter {
    double c0 = 1.0;
    double c1 = 2.0;
    void validate() const {
        if (!(c0 > 0.0)) throw std::invalid_argument("Whitney parameter: c0 > 0");
        if (!(c1 > 1.5)) throw std::invalid_argument("Whitney parameter: c1 > 3/2");
    }
};

// Whitney region weights for Omega_c(t, x) = (t/c1, c1 t) x B(x, c0 t),
// in Lebesgue measure dy dt (product of exact 1D overlaps).
inline CellWeights whitney_cells(const GridSpec& spec, const BallKernelCache& cache,
                                 double t, std::size_t x_index,
                                 const WhitneyParameter& c) {
    c.validate();
    cache.check_radius(c.c0 * t);
    CellWeights out;
    auto xc = spatial_coords(spec, x_index);
    const auto& g = cache.kernel(c.c0 * t);
    for (int k = 0; k < spec.K; ++k) {
        const double t_lo = std::exp(spec.log_lo(k));
        const double t_hi = std::exp(spec.log_hi(k));
        const double text = interval_overlap(t_lo, t_hi, t / c.c1, c.c1 * t);
        if (text <= 0.0) continue;
        for (std::size_t s = 0; s < spec.spatial_size(); ++s) {
            auto yc = spatial_coords(spec, s);
            std::array<int, 3> dcoord{0, 0, 0};
            for (int d = 0; d < spec.n; ++d) dcoord[d] = yc[d] - xc[d];
            const double w = g[spatial_index(spec, dcoord)] * text;
            if (w > 0.0) out.push_back({k, s, w});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Whitney grids (dyadic cubes x octave bands)
// ---------------------------------------------------------------------------

// One Whitney box Q^k = (2^k l(Q), 2^{k+1} l(Q)) x Q: an octave band of
// t-levels over a dyadic spatial cube.
struct WhitneyBox {
    int band = 0;             // octave index
    int level_lo = 0;         // first t-level in the band (inclusive)
    int level_hi = 0;         // last t-level + 1 (exclusive)
    double t_lo = 0.0;        // 2^k l(Q)
    double t_hi = 0.0;        // 2^{k+1} l(Q)
    int side_cells = 1;       // cube side in grid cells
    std::array<int, 3> origin{0, 0, 0};  // cube corner in grid coordinates
    double ell = 0.0;         // l(Q), physical cube side

    double t_mid() const { return 0.5 * (t_lo + t_hi); }  // anchor point t_Q
    std::array<double, 3> center(const GridSpec& spec) const {
        std::array<double, 3> c{0.0, 0.0, 0.0};
        for (int d = 0; d < spec.n; ++d) {
            c[d] = (origin[d] + 0.5 * side_cells) * spec.dx() - 0.5 * spec.dx();
        }
        // Cells are centered at grid points, so the cube covering cells
        // [origin, origin+side) spans [origin*dx - dx/2, ...); its center is
        // origin*dx + (side-1)*dx/2.
        for (int d = 0; d < spec.n; ++d) {
            c[d] = origin[d] * spec.dx() + 0.5 * (side_cells - 1) * spec.dx();
        }
        return c;
    }
};

struct WhitneyGrid {
    int k_offset = 0;             // scale offset k
    int levels_per_octave = 1;    // P: t-levels per octave band
    std::vector<WhitneyBox> boxes;
};

// Builds the Whitney grid of scale offset k.  Requires the t-grid to resolve
// octaves exactly (h = log(2)/P for integer P) and every band's cube side
// 2^{-k} * (band floor) to be a power-of-two multiple of dx dividing L.
inline WhitneyGrid whitney_grid(const GridSpec& spec, int k) {
    spec.validate();
    const double h = spec.log_step();
    const double ratio = std::numbers::ln2 / h;
    const int P = static_cast<int>(std::llround(ratio));
    if (P < 1 || std::abs(ratio - P) > 1e-9) {
        throw std::invalid_argument(
            "whitney_grid: t-grid must have an integer number of levels per octave");
    }
    if (spec.K % P != 0) {
        throw std::invalid_argument("whitney_grid: K must be a multiple of P");
    }
    const int bands = spec.K / P;
    // Bottom boundary of level 0's cell.
    const double T0 = std::exp(spec.log_lo(0));

    WhitneyGrid grid;
    grid.k_offset = k;
    grid.levels_per_octave = P;
    for (int b = 0; b < bands; ++b) {
        const double t_lo = T0 * std::pow(2.0, b);
        const double ell = t_lo / std::pow(2.0, k);
        const double cells_d = ell / spec.dx();
        const int side = static_cast<int>(std::llround(cells_d));
        if (side < 1 || std::abs(cells_d - side) > 1e-9 * std::max(1.0, cells_d) ||
            (side & (side - 1)) != 0 || spec.Nx % side != 0) {
            throw std::invalid_argument(
                "whitney_grid: cube side 2^{-k} t is not a dyadic multiple of dx "
                "(adjust t_min, Nx, or k)");
        }
        const int per_axis = spec.Nx / side;
        std::array<int, 3> q{0, 0, 0};
        std::function<void(int)> rec = [&](int d) {
            if (d == spec.n) {
                WhitneyBox box;
                box.band = b;
                box.level_lo = b * P;
                box.level_hi = (b + 1) * P;
                box.t_lo = t_lo;
                box.t_hi = 2.0 * t_lo;
                box.side_cells = side;
                box.ell = ell;
                for (int e = 0; e < spec.n; ++e) box.origin[e] = q[e] * side;
                grid.boxes.push_back(box);
                return;
            }
            for (q[d] = 0; q[d] < per_axis; ++q[d]) rec(d + 1);
        };
        rec(0);
    }
    return grid;
}

// Cells (level, spatial) covered by a Whitney box.
inline void for_each_box_cell(const GridSpec& spec, const WhitneyBox& box,
                              const std::function<void(int, std::size_t)>& fn) {
    std::array<int, 3> c{0, 0, 0};
    std::function<void(int)> rec = [&](int d) {
        if (d == spec.n) {
            std::size_t sp = spatial_index(spec, c);
            for (int k = box.level_lo; k < box.level_hi; ++k) fn(k, sp);
            return;
        }
        for (int o = 0; o < box.side_cells; ++o) {
            c[d] = box.origin[d] + o;
            rec(d + 1);
        }
    };
    rec(0);
}

// Boxes of the same grid whose box intersects the union of Whitney regions
// Omega_c(t, x) over (t, x) in the given box.
inline std::vector<std::size_t> whitney_neighbors(const GridSpec& spec,
                                                  const WhitneyGrid& grid,
                                                  std::size_t box_index,
                                                  const WhitneyParameter& c) {
    c.validate();
    const WhitneyBox& q = grid.boxes.at(box_index);
    // Union over the box of Omega_c: t in (t_lo/c1, c1*t_hi), spatial
    // dilation of the cube by c0*t_hi in sup metric bound.
    const double t_lo = q.t_lo / c.c1;
    const double t_hi = q.t_hi * c.c1;
    const double pad = c.c0 * q.t_hi;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < grid.boxes.size(); ++i) {
        const WhitneyBox& w = grid.boxes[i];
        if (w.t_hi <= t_lo || w.t_lo >= t_hi) continue;
        bool near = true;
        for (int d = 0; d < spec.n && near; ++d) {
            const double a0 = q.origin[d] * spec.dx() - 0.5 * spec.dx();
            const double a1 = a0 + q.side_cells * spec.dx();
            const double b0 = w.origin[d] * spec.dx() - 0.5 * spec.dx();
            const double b1 = b0 + w.side_cells * spec.dx();
            // Periodic interval distance.
            const double ca = 0.5 * (a0 + a1), cb = 0.5 * (b0 + b1);
            const double gap = std::abs(wrap_delta(cb - ca, spec.L)) -
                               0.5 * (a1 - a0) - 0.5 * (b1 - b0);
            if (gap >= pad) near = false;
        }
        if (near) out.push_back(i);
    }
    return out;
}

// ---------------------------------------------------------------------------
// HSF field file format
// ---------------------------------------------------------------------------
//
// Line 1: UTF-8 JSON header {n, m, L, Nx, t_min, t_max, K, channels,
// dtype:"c128", byte_order:"LE"}; then raw little-endian IEEE-754 double
// pairs (re, im) in (level-major, spatial row-major, channel-minor) order.

inline void hsf_write(const Field& f, const std::string& path) {
    nlohmann::json header = {
        {"n", f.spec.n},        {"m", f.spec.m},         {"L", f.spec.L},
        {"Nx", f.spec.Nx},      {"t_min", f.spec.t_min}, {"t_max", f.spec.t_max},
        {"K", f.spec.K},        {"channels", f.spec.channels()},
        {"dtype", "c128"},      {"byte_order", "LE"}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("hsf_write: cannot open " + path);
    const std::string head = header.dump();
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.put('\n');
    static_assert(sizeof(cplx) == 16);
    if constexpr (std::endian::native != std::endian::little) {
        throw std::runtime_error("hsf_write: big-endian hosts unsupported");
    }
    out.write(reinterpret_cast<const char*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(cplx)));
    if (!out) throw std::runtime_error("hsf_write: short write to " + path);
}

inline Field hsf_read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("hsf_read: cannot open " + path);
    std::string head;
    if (!std::getline(in, head)) throw std::runtime_error("hsf_read: missing header");
    nlohmann::json header = nlohmann::json::parse(head);
    if (header.value("dtype", "") != "c128") {
        throw std::runtime_error("hsf_read: unsupported dtype");
    }
    if (header.value("byte_order", "") != "LE") {
        throw std::runtime_error("hsf_read: byte order other than LE rejected");
    }
    GridSpec spec;
    spec.n = header.at("n").get<int>();
    spec.m = header.at("m").get<int>();
    spec.L = header.at("L").get<double>();
    spec.Nx = header.at("Nx").get<int>();
    spec.t_min = header.at("t_min").get<double>();
    spec.t_max = header.at("t_max").get<double>();
    spec.K = header.at("K").get<int>();
    spec.validate();
    if (header.at("channels").get<int>() != spec.channels()) {
        throw std::runtime_error("hsf_read: header n/m mismatch vs channels");
    }
    std::vector<cplx> vals(spec.field_size());
    in.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(cplx)));
    if (static_cast<std::size_t>(in.gcount()) != vals.size() * sizeof(cplx)) {
        throw std::runtime_error("hsf_read: truncated payload at offset " +
                                 std::to_string(in.gcount()));
    }
    char extra;
    if (in.read(&extra, 1)) {
        throw std::runtime_error("hsf_read: trailing bytes after payload");
    }
    return Field(spec, std::move(vals));
}

}  // namespace hsl
