#pragma once

// Catalogue of holomorphic functions on bisectors S_mu around the real axis,
// with decay metadata (sigma, tau) for the Psi_sigma^tau classes, dilation
// and involution closures, a numeric Psi-norm probe on sampled rays, the
// scale-invariant pairing integral, and Calderon sibling computation.
//
// Notation: [z] = z sgn(Re z) (so Re [z] > 0 off the imaginary axis), and
// m_a^b(t) = t^a for t <= 1, t^{-b} for t >= 1.  A function is in Psi_a^b
// when |f(z)| <= C m_a^b(|z|) on the bisector; the catalogue tracks (a, b)
// through products, sums, dilations, and involutions so quadrature
// preconditions can be checked before integrating.

#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace hsl {

using cplx = std::complex<double>;

namespace holo_detail {

// Branch z^lambda cut along i(-infinity, 0]: argument taken in (-pi/2, 3pi/2).
inline cplx power_branch(cplx z, double lambda) {
    if (z == cplx(0.0, 0.0)) {
        if (lambda > 0.0) return {0.0, 0.0};
        throw std::domain_error("power: z = 0 with nonpositive exponent");
    }
    double th = std::arg(z);
    if (th <= -0.5 * std::numbers::pi) th += 2.0 * std::numbers::pi;
    const double lr = std::log(std::abs(z));
    return std::exp(cplx(lambda * lr, lambda * th));
}

inline cplx bracket(cplx z) {
    if (z.real() == 0.0) {
        if (z.imag() == 0.0) return {0.0, 0.0};
        throw std::domain_error("[z]: z on the imaginary axis");
    }
    return (z.real() > 0.0) ? z : -z;
}

}  // namespace holo_detail

// ---------------------------------------------------------------------------
// HoloFn
// ---------------------------------------------------------------------------

class HoloFn {
public:
    enum class Kind {
        sgp,        // e^{-[z]}
        chi_plus,   // indicator of Re z > 0
        chi_minus,  // indicator of Re z < 0
        power,      // z^lambda, branch cut i(-inf, 0]
        bump,       // [z]^N e^{-[z]} (1 + [z])^{-M}
        resolvent,  // (1 + i z)^{-k}
        eta,        // (z / (1+z)^2)^delta
        one,        // constant 1
        scale,      // c * child
        dilate,     // child(t z)
        involute,   // conj(child(conj z))
        product,    // child0 * child1
        sum         // child0 + child1
    };

    // --- catalogue constructors -------------------------------------------
    static HoloFn sgp() { return HoloFn(Kind::sgp, 0.0, inf()); }
    static HoloFn chi_plus() { return HoloFn(Kind::chi_plus, 0.0, 0.0); }
    static HoloFn chi_minus() { return HoloFn(Kind::chi_minus, 0.0, 0.0); }
    static HoloFn power(double lambda) {
        HoloFn f(Kind::power, lambda, -lambda);
        f.a_ = lambda;
        return f;
    }
    static HoloFn bump(int N, int M) {
        if (N < 0 || M < 0) throw std::invalid_argument("bump: N, M >= 0");
        HoloFn f(Kind::bump, static_cast<double>(N), inf());
        f.a_ = N;
        f.b_ = M;
        return f;
    }
    static HoloFn resolvent(int k) {
        if (k < 1) throw std::invalid_argument("resolvent: k >= 1");
        HoloFn f(Kind::resolvent, 0.0, static_cast<double>(k));
        f.a_ = k;
        return f;
    }
    static HoloFn eta(double delta) {
        if (!(delta > 0.0)) throw std::invalid_argument("eta: delta > 0");
        HoloFn f(Kind::eta, delta, delta);
        f.a_ = delta;
        return f;
    }
    static HoloFn one() { return HoloFn(Kind::one, 0.0, 0.0); }

    // --- closures ---------------------------------------------------------
    HoloFn scaled(cplx c) const {
        HoloFn f(Kind::scale, sigma_, tau_);
        f.coeff_ = c;
        f.child0_ = clone();
        return f;
    }
    HoloFn dilated(double t) const {
        if (!(t > 0.0)) throw std::invalid_argument("dilate: t > 0");
        HoloFn f(Kind::dilate, sigma_, tau_);
        f.a_ = t;
        f.child0_ = clone();
        return f;
    }
    HoloFn involuted() const {
        HoloFn f(Kind::involute, sigma_, tau_);
        f.child0_ = clone();
        return f;
    }
    HoloFn times(const HoloFn& g) const {
        HoloFn f(Kind::product, sigma_ + g.sigma_, add(tau_, g.tau_));
        f.child0_ = clone();
        f.child1_ = g.clone();
        return f;
    }
    HoloFn plus(const HoloFn& g) const {
        HoloFn f(Kind::sum, std::min(sigma_, g.sigma_), std::min(tau_, g.tau_));
        f.child0_ = clone();
        f.child1_ = g.clone();
        return f;
    }

    // Declared decay (sigma at 0, tau at infinity).
    double sigma() const { return sigma_; }
    double tau() const { return tau_; }

    cplx operator()(cplx z) const { return eval(z); }

    cplx eval(cplx z) const {
        using holo_detail::bracket;
        using holo_detail::power_branch;
        switch (kind_) {
            case Kind::sgp:
                return std::exp(-bracket(z));
            case Kind::chi_plus:
                if (z.real() == 0.0) {
                    throw std::domain_error("chi+: z on the imaginary axis");
                }
                return (z.real() > 0.0) ? cplx(1.0, 0.0) : cplx(0.0, 0.0);
            case Kind::chi_minus:
                if (z.real() == 0.0) {
                    throw std::domain_error("chi-: z on the imaginary axis");
                }
                return (z.real() < 0.0) ? cplx(1.0, 0.0) : cplx(0.0, 0.0);
            case Kind::power:
                return power_branch(z, a_);
            case Kind::bump: {
                const cplx w = bracket(z);
                cplx v = std::exp(-w);
                for (int i = 0; i < static_cast<int>(a_); ++i) v *= w;
                for (int i = 0; i < static_cast<int>(b_); ++i) v /= (1.0 + w);
                return v;
            }
            case Kind::resolvent: {
                cplx v(1.0, 0.0);
                const cplx d = 1.0 + cplx(0.0, 1.0) * z;
                for (int i = 0; i < static_cast<int>(a_); ++i) v /= d;
                return v;
            }
            case Kind::eta:
                return power_branch(z / ((1.0 + z) * (1.0 + z)), a_);
            case Kind::one:
                return {1.0, 0.0};
            case Kind::scale:
                return coeff_ * child0_->eval(z);
            case Kind::dilate:
                return child0_->eval(a_ * z);
            case Kind::involute:
                return std::conj(child0_->eval(std::conj(z)));
            case Kind::product:
                return child0_->eval(z) * child1_->eval(z);
            case Kind::sum:
                return child0_->eval(z) + child1_->eval(z);
        }
        throw std::logic_error("HoloFn: unreachable");
    }

    Kind kind() const { return kind_; }
    bool is_degenerate() const {
        // chi+- vanish on open half-planes: no Calderon sibling exists.
        return kind_ == Kind::chi_plus || kind_ == Kind::chi_minus;
    }

    static double inf() { return std::numeric_limits<double>::infinity(); }

private:
    HoloFn(Kind k, double sigma, double tau) : kind_(k), sigma_(sigma), tau_(tau) {}
    std::shared_ptr<const HoloFn> clone() const {
        return std::make_shared<HoloFn>(*this);
    }
    static double add(double a, double b) {
        if (std::isinf(a) || std::isinf(b)) return inf();
        return a + b;
    }

    Kind kind_;
    double sigma_;
    double tau_;
    double a_ = 0.0;  // lambda / N / k / delta / dilation factor
    double b_ = 0.0;  // M for bump
    cplx coeff_{1.0, 0.0};
    std::shared_ptr<const HoloFn> child0_;
    std::shared_ptr<const HoloFn> child1_;
};

// m_a^b comparison weight.
inline double m_weight(double t, double a, double b) {
    if (t <= 1.0) return std::isinf(a) ? 0.0 : std::pow(t, a);
    return std::isinf(b) ? 0.0 : std::pow(t, -b);
}

// ---------------------------------------------------------------------------
// Psi-norm probe
// ---------------------------------------------------------------------------

// sup over sampled boundary rays of |f(z)| / m_sigma^tau(|z|); rays are
// arg z in {0, pi, +-mu, pi -+ mu}, |z| log-spaced over [1e-6, 1e6].
inline double psi_norm(const HoloFn& f, double sigma, double tau,
                       double mu = std::numbers::pi / 4.0, int samples = 64) {
    if (samples < 64) throw std::invalid_argument("psi_norm: samples >= 64 per ray");
    const double args[6] = {0.0, std::numbers::pi, mu, -mu,
                            std::numbers::pi - mu, std::numbers::pi + mu};
    double best = 0.0;
    const double lo = std::log(1e-6), hi = std::log(1e6);
    for (double ang : args) {
        const cplx dir = std::exp(cplx(0.0, ang));
        for (int i = 0; i < samples; ++i) {
            const double r = std::exp(lo + (hi - lo) * i / (samples - 1));
            const double w = m_weight(r, sigma, tau);
            if (w <= 0.0) return std::numeric_limits<double>::infinity();
            best = std::max(best, std::abs(f.eval(r * dir)) / w);
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Pairing integral  Phi_{psi,phi}(z) = int_0^inf psi(tz) phi(tz) dt/t
// ---------------------------------------------------------------------------

struct PairIntegral {
    cplx value{0.0, 0.0};
    double error_estimate = 0.0;
};

inline PairIntegral pair_integral(const HoloFn& psi, const HoloFn& phi, cplx z) {
    const double sigma = psi.sigma() + phi.sigma();
    const double tau =
        (std::isinf(psi.tau()) || std::isinf(phi.tau())) ? HoloFn::inf()
                                                         : psi.tau() + phi.tau();
    if (!(sigma > 0.0) || !(tau > 0.0)) {
        throw std::invalid_argument(
            "pair_integral: combined decay must be strictly positive");
    }
    // Composite midpoint rule in u = log t; the integrand decays like
    // e^{sigma u} at -inf and e^{-tau u} (or faster) at +inf, so a fixed wide
    // window with refinement-doubling gives a reliable error estimate.
    const double lo = std::min(-60.0 / sigma, -40.0);
    const double hi = std::isinf(tau) ? 60.0 : std::max(60.0 / tau, 40.0);
    auto integrate = [&](int nsteps) {
        const double h = (hi - lo) / nsteps;
        cplx acc(0.0, 0.0);
        for (int i = 0; i < nsteps; ++i) {
            const double u = lo + (i + 0.5) * h;
            const cplx w = std::exp(u) * z;
            acc += psi.eval(w) * phi.eval(w);
        }
        return acc * h;
    };
    const cplx coarse = integrate(4096);
    const cplx fine = integrate(8192);
    PairIntegral out;
    out.value = fine;
    out.error_estimate = std::abs(fine - coarse);
    return out;
}

// ---------------------------------------------------------------------------
// Calderon siblings
// ---------------------------------------------------------------------------

struct Sibling {
    HoloFn psi;          // c * bump(N, M)
    cplx c{0.0, 0.0};
    double residual = 0.0;  // max |Phi_{psi,phi} - 1| over sampled z
};

// Finds c so that psi = c * bump(N, M) satisfies Phi_{psi,phi} = 1, by a
// least-squares scalar fit over sampled z across the bisector; when the
// product is homogeneous in [z] the fit is exact and the residual is at
// quadrature level.
inline Sibling calderon_sibling(const HoloFn& phi, int N, int M = 0,
                                double mu = std::numbers::pi / 4.0) {
    if (phi.is_degenerate()) {
        throw std::invalid_argument(
            "calderon_sibling: function vanishes on an open set");
    }
    const HoloFn base = HoloFn::bump(N, M);
    // Sample z on four rays inside the bisector, both signs of Re z.
    std::vector<cplx> zs;
    const double angs[4] = {0.0, 0.5 * mu, std::numbers::pi,
                            std::numbers::pi - 0.5 * mu};
    for (double ang : angs) {
        for (double r : {0.5, 1.0, 2.0, 5.0}) {
            zs.push_back(r * std::exp(cplx(0.0, ang)));
        }
    }
    cplx num(0.0, 0.0);
    double den = 0.0;
    std::vector<cplx> vals;
    for (cplx z : zs) {
        const cplx v = pair_integral(base, phi, z).value;
        vals.push_back(v);
        num += std::conj(v);
        den += std::norm(v);
    }
    if (!(den > 0.0)) {
        throw std::invalid_argument("calderon_sibling: pairing integral vanishes");
    }
    Sibling out{base.scaled(num / den), num / den, 0.0};
    for (cplx v : vals) {
        out.residual = std::max(out.residual, std::abs(out.c * v - 1.0));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Catalogue string grammar (for CLI config):
//   sgp | chi+ | chi- | one | power(l) | bump(N,M) | resolvent(k) | eta(d)
// ---------------------------------------------------------------------------

inline HoloFn parse_holo(const std::string& s) {
    auto args_of = [&](const std::string& name) -> std::vector<double> {
        const std::size_t open = s.find('(');
        if (s.substr(0, open) != name || s.back() != ')') {
            throw std::invalid_argument("parse_holo: bad catalogue entry: " + s);
        }
        std::vector<double> out;
        std::string body = s.substr(open + 1, s.size() - open - 2);
        std::size_t pos = 0;
        while (pos < body.size()) {
            std::size_t next = body.find(',', pos);
            if (next == std::string::npos) next = body.size();
            out.push_back(std::stod(body.substr(pos, next - pos)));
            pos = next + 1;
        }
        return out;
    };
    if (s == "sgp") return HoloFn::sgp();
    if (s == "chi+") return HoloFn::chi_plus();
    if (s == "chi-") return HoloFn::chi_minus();
    if (s == "one") return HoloFn::one();
    if (s.rfind("power(", 0) == 0) return HoloFn::power(args_of("power").at(0));
    if (s.rfind("bump(", 0) == 0) {
        auto a = args_of("bump");
        return HoloFn::bump(static_cast<int>(a.at(0)), static_cast<int>(a.at(1)));
    }
    if (s.rfind("resolvent(", 0) == 0) {
        return HoloFn::resolvent(static_cast<int>(args_of("resolvent").at(0)));
    }
    if (s.rfind("eta(", 0) == 0) return HoloFn::eta(args_of("eta").at(0));
    throw std::invalid_argument("parse_holo: unknown catalogue entry: " + s);
}

}  // namespace hsl
