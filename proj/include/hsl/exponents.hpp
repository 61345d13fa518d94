#pragma once

// Exponent arithmetic and exponent-region geometry in the (j, theta) plane.
//
// An exponent is either finite, written (p, s) with 0 < p < infinity, or
// infinite, written (infinity, s; alpha) with alpha >= 0.  Both kinds are
// represented internally by the pair of views
//
//   j     : 1/p for finite exponents, -alpha/n for infinite ones,
//   theta : the regularity s in both cases,
//
// which determines the exponent uniquely (j > 0 iff finite).  The remaining
// views are the integrability i (= p, or infinity) and the auxiliary
// regularity r (= s for finite exponents, s + alpha for infinite ones).
//
// Regions are finite unions of convex polygons with per-edge openness flags;
// membership tests are half-plane tests with a reported tolerance band.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hsl {

inline constexpr double kGeomTol = 1e-12;

// ---------------------------------------------------------------------------
// Exponent
// ---------------------------------------------------------------------------

class Exponent {
public:
    // Finite exponent (p, s), 0 < p < infinity.
    static Exponent finite(double p, double s) {
        if (!(p > 0.0) || !std::isfinite(p)) {
            throw std::invalid_argument("finite exponent requires 0 < p < infinity");
        }
        return Exponent(1.0 / p, s);
    }

    // Infinite exponent (infinity, s; alpha), alpha >= 0, ambient dimension n.
    static Exponent infinite(double s, double alpha, int n) {
        if (alpha < 0.0) {
            throw std::invalid_argument("infinite exponent requires alpha >= 0");
        }
        return Exponent(-alpha / static_cast<double>(n), s);
    }

    // From the (j, theta) views directly (j > 0 iff finite).
    static Exponent from_views(double j, double theta) { return Exponent(j, theta); }

    double j() const { return j_; }
    double theta() const { return theta_; }

    bool is_finite() const { return j_ > 0.0; }

    // Integrability view: p for finite exponents, +infinity otherwise.
    double i() const {
        return is_finite() ? 1.0 / j_ : std::numeric_limits<double>::infinity();
    }

    // p as stored for finite exponents; throws for infinite ones.
    double p() const {
        if (!is_finite()) throw std::logic_error("p() undefined for infinite exponent");
        return 1.0 / j_;
    }

    double s() const { return theta_; }

    // Carleson order alpha = -n j for infinite exponents (needs the dimension).
    double alpha(int n) const {
        if (is_finite()) throw std::logic_error("alpha() undefined for finite exponent");
        return -static_cast<double>(n) * j_;
    }

    // r view: s for finite exponents, s + alpha for infinite ones.
    double r(int n) const {
        return is_finite() ? theta_ : theta_ - static_cast<double>(n) * j_;
    }

    bool almost_equal(const Exponent& o, double tol = kGeomTol) const {
        return std::abs(j_ - o.j_) <= tol && std::abs(theta_ - o.theta_) <= tol;
    }

private:
    Exponent(double j, double theta) : j_(j), theta_(theta) {}
    double j_;
    double theta_;
};

// Holder conjugation gap: delta_{p,q} = 1/q - 1/p.
inline double delta(double p, double q) { return 1.0 / q - 1.0 / p; }

// Dual exponent: the unique q with j(q) + j(p) = 1 and theta(q) + theta(p) = 0.
inline Exponent dual(const Exponent& e) {
    return Exponent::from_views(1.0 - e.j(), -e.theta());
}

// Heart dual p^heart = p' - 1: reflection of (j, theta) about (1/2, -1/2).
inline Exponent heart(const Exponent& e) {
    return Exponent::from_views(1.0 - e.j(), -1.0 - e.theta());
}

// Regularity shift: j fixed, theta incremented by r.
inline Exponent shift(const Exponent& e, double r) {
    return Exponent::from_views(e.j(), e.theta() + r);
}

// Sharp Sobolev-type embedding relation in dimension n:
// p embeds into q iff theta(p) >= theta(q) and
// theta(q) - theta(p) = n (j(q) - j(p)).
inline bool embeds(const Exponent& p, const Exponent& q, int n, double tol = kGeomTol) {
    const double dtheta = q.theta() - p.theta();
    const double dj = q.j() - p.j();
    return dtheta <= tol && std::abs(dtheta - static_cast<double>(n) * dj) <= tol;
}

// Affine interpolation [p, q]_eta in the (j, theta) plane (eta unrestricted).
inline Exponent interp(const Exponent& p, const Exponent& q, double eta) {
    return Exponent::from_views((1.0 - eta) * p.j() + eta * q.j(),
                                (1.0 - eta) * p.theta() + eta * q.theta());
}

// The energy exponent (2, -1/2), the fixed point of the heart reflection.
inline Exponent energy_exponent() { return Exponent::finite(2.0, -0.5); }

// ---------------------------------------------------------------------------
// Regions
// ---------------------------------------------------------------------------

struct JThetaPoint {
    double j;
    double theta;
};

enum class Membership { inside, boundary, outside };

// A convex polygon with vertices in counterclockwise order in the (j, theta)
// plane.  Edge k joins vertex k to vertex k+1 (mod size); open edges exclude
// their points from the region.
struct ConvexPolygon {
    std::vector<JThetaPoint> vertices;
    std::vector<bool> edge_open;  // same length as vertices

    Membership classify(double j, double theta, double tol = kGeomTol) const {
        const std::size_t nv = vertices.size();
        if (nv < 3) return Membership::outside;
        bool on_open_boundary = false;
        bool on_closed_boundary = false;
        for (std::size_t k = 0; k < nv; ++k) {
            const auto& a = vertices[k];
            const auto& b = vertices[(k + 1) % nv];
            // Inward half-plane test for CCW orientation.
            const double cross =
                (b.j - a.j) * (theta - a.theta) - (b.theta - a.theta) * (j - a.j);
            const double scale = std::hypot(b.j - a.j, b.theta - a.theta);
            const double d = cross / std::max(scale, 1e-300);
            if (d < -tol) return Membership::outside;
            if (d <= tol) {
                if (edge_open.empty() || !edge_open[k]) {
                    on_closed_boundary = true;
                } else {
                    on_open_boundary = true;
                }
            }
        }
        if (on_open_boundary || on_closed_boundary) return Membership::boundary;
        return Membership::inside;
    }

    // Strict containment semantics: boundary points count only on closed edges.
    bool contains(double j, double theta, double tol = kGeomTol) const {
        const std::size_t nv = vertices.size();
        if (nv < 3) return false;
        for (std::size_t k = 0; k < nv; ++k) {
            const auto& a = vertices[k];
            const auto& b = vertices[(k + 1) % nv];
            const double cross =
                (b.j - a.j) * (theta - a.theta) - (b.theta - a.theta) * (j - a.j);
            const double scale = std::hypot(b.j - a.j, b.theta - a.theta);
            const double d = cross / std::max(scale, 1e-300);
            const bool open_edge = !edge_open.empty() && edge_open[k];
            if (open_edge ? (d <= tol) : (d < -tol)) return false;
        }
        return true;
    }
};

struct RegionParams {
    int n = 1;
    std::optional<double> lambda;
    std::optional<double> eps;
    std::optional<double> eps_prime;
};

struct Region {
    std::vector<ConvexPolygon> polygons;
    RegionParams params;

    bool contains(double j, double theta, double tol = kGeomTol) const {
        for (const auto& poly : polygons) {
            if (poly.contains(j, theta, tol)) return true;
        }
        return false;
    }
    bool contains(const Exponent& e, double tol = kGeomTol) const {
        return contains(e.j(), e.theta(), tol);
    }
    Membership classify(double j, double theta, double tol = kGeomTol) const {
        Membership best = Membership::outside;
        for (const auto& poly : polygons) {
            Membership m = poly.classify(j, theta, tol);
            if (m == Membership::inside) return m;
            if (m == Membership::boundary) best = m;
        }
        return best;
    }
    bool empty() const { return polygons.empty(); }
};

// I_max in dimension n: the convex hull of the segments
// {theta = 0, j in (0, (n+1)/n)} and {theta = -1, j in (-1/n, 1)};
// equivalently theta in [-1, 0] (closed) and theta/n < j < (n+1+theta)/n
// (open).  Vertices CCW starting at the origin; the slanted edges are open.
inline Region region_imax(int n) {
    if (n < 1) throw std::invalid_argument("region_imax: n >= 1 required");
    const double nd = static_cast<double>(n);
    ConvexPolygon poly;
    poly.vertices = {
        {0.0, 0.0},            // origin: on the open edge j = theta/n
        {-1.0 / nd, -1.0},     // lower-left
        {1.0, -1.0},           // lower-right: on the open edge j = (n+1+theta)/n
        {(nd + 1.0) / nd, 0.0} // upper-right
    };
    // Edges (CCW): 0->1 slanted j = theta/n (open); 1->2 bottom theta = -1
    // (closed in theta, open at its j endpoints via the adjacent open edges);
    // 2->3 slanted j = (n+1+theta)/n (open); 3->0 top theta = 0 (closed).
    poly.edge_open = {true, false, true, false};
    Region region;
    region.polygons.push_back(std::move(poly));
    region.params.n = n;
    return region;
}

// Decay half-plane j > theta/n - (n+1-lambda)/(2n), clipped to a bounding box
// large enough to contain I_max with margin.
inline Region region_decay(int n, double lambda) {
    const double nd = static_cast<double>(n);
    if (!(lambda > 0.0) || !(lambda < nd + 1.0)) {
        throw std::invalid_argument("region_decay: lambda in (0, n+1) required");
    }
    const double intercept = -(nd + 1.0 - lambda) / (2.0 * nd);
    // Bounding box in (j, theta).
    const double j_lo = -4.0, j_hi = 5.0, th_lo = -4.0, th_hi = 3.0;
    // Boundary line: j = theta/n + intercept.  Keep the part of the box with
    // j above the line; the line edge is open.
    auto j_on_line = [&](double th) { return th / nd + intercept; };
    ConvexPolygon poly;
    poly.vertices = {
        {j_on_line(th_lo), th_lo},
        {j_hi, th_lo},
        {j_hi, th_hi},
        {j_on_line(th_hi), th_hi}
    };
    poly.edge_open = {false, false, false, true};  // edge 3->0 is the line
    Region region;
    region.polygons.push_back(std::move(poly));
    region.params.n = n;
    region.params.lambda = lambda;
    return region;
}

// Heart image of a region: vertex-wise map (j, theta) -> (1 - j, -1 - theta).
// This is the point reflection through (1/2, -1/2), which preserves
// orientation, so vertex order and edge flags carry over unchanged.
inline Region region_heart(const Region& r) {
    Region out;
    out.params = r.params;
    for (const auto& poly : r.polygons) {
        ConvexPolygon q;
        q.edge_open = poly.edge_open;
        q.vertices.reserve(poly.vertices.size());
        for (const auto& v : poly.vertices) {
            q.vertices.push_back({1.0 - v.j, -1.0 - v.theta});
        }
        out.polygons.push_back(std::move(q));
    }
    return out;
}

// Convex hull of a point set (monotone chain), CCW output.
inline std::vector<JThetaPoint> convex_hull(std::vector<JThetaPoint> pts) {
    std::sort(pts.begin(), pts.end(), [](const JThetaPoint& a, const JThetaPoint& b) {
        return a.j < b.j || (a.j == b.j && a.theta < b.theta);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const JThetaPoint& a, const JThetaPoint& b) {
                              return std::abs(a.j - b.j) <= kGeomTol &&
                                     std::abs(a.theta - b.theta) <= kGeomTol;
                          }),
              pts.end());
    const std::size_t np = pts.size();
    if (np < 3) return pts;
    auto cross = [](const JThetaPoint& o, const JThetaPoint& a, const JThetaPoint& b) {
        return (a.j - o.j) * (b.theta - o.theta) - (a.theta - o.theta) * (b.j - o.j);
    };
    std::vector<JThetaPoint> hull(2 * np);
    std::size_t k = 0;
    for (std::size_t i = 0; i < np; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= kGeomTol) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = np - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= kGeomTol) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

// Convex hull of two regions (all edges closed), restricted by construction to
// the theta range spanned by the inputs.
inline Region region_hull(const Region& a, const Region& b) {
    std::vector<JThetaPoint> pts;
    for (const Region* r : {&a, &b}) {
        for (const auto& poly : r->polygons) {
            pts.insert(pts.end(), poly.vertices.begin(), poly.vertices.end());
        }
    }
    Region out;
    out.params = a.params;
    if (pts.empty()) return out;
    ConvexPolygon poly;
    poly.vertices = convex_hull(std::move(pts));
    poly.edge_open.assign(poly.vertices.size(), false);
    if (poly.vertices.size() >= 3) out.polygons.push_back(std::move(poly));
    return out;
}

// I_min(n, eps, eps'): convex hull of the segment
// {theta = 0, j in (1/(2+eps'), (n+2)/(2n) + eps)} and its heart image on
// theta = -1.  Defaults eps = eps' = 0 give the closure of the guaranteed
// region; the sharp open parameters are not specified numerically.
inline Region region_imin(int n, double eps = 0.0, double eps_prime = 0.0) {
    if (n < 1) throw std::invalid_argument("region_imin: n >= 1 required");
    if (eps < 0.0 || eps_prime < 0.0) {
        throw std::invalid_argument("region_imin: eps, eps' >= 0 required");
    }
    const double nd = static_cast<double>(n);
    const double j0 = 1.0 / (2.0 + eps_prime);
    const double j1 = (nd + 2.0) / (2.0 * nd) + eps;
    // Heart image of {(j, 0)} is {(1 - j, -1)}.
    ConvexPolygon poly;
    poly.vertices = {
        {j0, 0.0},
        {1.0 - j1, -1.0},
        {1.0 - j0, -1.0},
        {j1, 0.0}
    };
    poly.edge_open.assign(4, false);
    Region region;
    region.polygons.push_back(std::move(poly));
    region.params.n = n;
    region.params.eps = eps;
    region.params.eps_prime = eps_prime;
    return region;
}

// CSV export: vertex table (j, theta, polygon id, open flag of the outgoing
// edge), optionally followed by a dense membership grid over a bounding box.
inline void region_export(const Region& r, const std::string& path,
                          int grid_points = 0) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("region_export: cannot open " + path);
    out << "j,theta,polygon,edge_open\n";
    for (std::size_t p = 0; p < r.polygons.size(); ++p) {
        const auto& poly = r.polygons[p];
        for (std::size_t k = 0; k < poly.vertices.size(); ++k) {
            const bool open_flag = !poly.edge_open.empty() && poly.edge_open[k];
            out << poly.vertices[k].j << ',' << poly.vertices[k].theta << ','
                << p << ',' << (open_flag ? 1 : 0) << '\n';
        }
    }
    if (grid_points > 1) {
        double j_lo = 1e300, j_hi = -1e300, th_lo = 1e300, th_hi = -1e300;
        for (const auto& poly : r.polygons) {
            for (const auto& v : poly.vertices) {
                j_lo = std::min(j_lo, v.j);
                j_hi = std::max(j_hi, v.j);
                th_lo = std::min(th_lo, v.theta);
                th_hi = std::max(th_hi, v.theta);
            }
        }
        const double margin_j = 0.1 * (j_hi - j_lo) + 1e-6;
        const double margin_t = 0.1 * (th_hi - th_lo) + 1e-6;
        j_lo -= margin_j; j_hi += margin_j;
        th_lo -= margin_t; th_hi += margin_t;
        out << "# grid j,theta,member\n";
        for (int a = 0; a < grid_points; ++a) {
            for (int b = 0; b < grid_points; ++b) {
                const double j = j_lo + (j_hi - j_lo) * a / (grid_points - 1);
                const double th = th_lo + (th_hi - th_lo) * b / (grid_points - 1);
                out << j << ',' << th << ',' << (r.contains(j, th) ? 1 : 0) << '\n';
            }
        }
    }
}

}  // namespace hsl
