#pragma once

// Atom validators for tent and Z spaces and the constructive Whitney-grid
// atomic decomposition of Z-space functions.
//
// The decomposition is the easy one: the Whitney boxes of scale offset k
// partition the grid, so  f = sum_Q lambda_Q a_Q  with
//   a_Q = 1_Q f / lambda_Q,
//   lambda_Q = t_Q^{-n delta(p,2)} || t^{-s} f ||_{L^2(Q, dx dt/t)},
//   t_Q = 3 * 2^{k-1} l(Q)  (the box's arithmetic t-midpoint),
// and the reconstruction is exact up to floating addition.  Each a_Q is a
// valid Z-atom associated with (t_Q, x_Q) provided the scale offset satisfies
// k >= ceil(log2(sqrt(n)/(3 c0)) + 1), which guarantees the box fits inside
// the Whitney region Omega_c(t_Q, x_Q).

#include <cmath>
#include <complex>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsl/exponents.hpp"
#include "hsl/grid.hpp"
#include "hsl/quasinorms.hpp"

namespace hsl {

// Discrete ball measure: number of cells whose center lies in B, times dx^n.
inline double ball_measure_discrete(const GridSpec& spec, std::size_t center,
                                    double r) {
    auto cc = spatial_coords(spec, center);
    std::size_t count = 0;
    for (std::size_t sp = 0; sp < spec.spatial_size(); ++sp) {
        auto yc = spatial_coords(spec, sp);
        double d2 = 0.0;
        for (int d = 0; d < spec.n; ++d) {
            const double dd = wrap_delta((yc[d] - cc[d]) * spec.dx(), spec.L);
            d2 += dd * dd;
        }
        if (d2 < r * r) ++count;
    }
    return static_cast<double>(count) * spec.cell_volume();
}

namespace detail {

// || t^{-s} a ||_{L^2(dx dt/t)}^2 restricted to a cell mask (mask empty =
// whole grid).
inline double l2s_sq_masked(const Field& a, double s,
                            const std::vector<char>* cell_mask) {
    const GridSpec& spec = a.spec;
    const double h = spec.log_step();
    double acc = 0.0;
    for (int k = 0; k < spec.K; ++k) {
        const double w = std::pow(spec.t_level(k), -2.0 * s) * h * spec.cell_volume();
        for (std::size_t sp = 0; sp < spec.spatial_size(); ++sp) {
            if (cell_mask && !(*cell_mask)[k * spec.spatial_size() + sp]) continue;
            double s2 = 0.0;
            for (int ch = 0; ch < spec.channels(); ++ch) {
                s2 += std::norm(a.at(k, sp, ch));
            }
            acc += w * s2;
        }
    }
    return acc;
}

inline std::vector<char> mask_from_weights(const GridSpec& spec,
                                           const CellWeights& cells) {
    std::vector<char> mask(static_cast<std::size_t>(spec.K) * spec.spatial_size(), 0);
    for (const CellWeight& cw : cells) {
        mask[cw.level * spec.spatial_size() + cw.spatial] = 1;
    }
    return mask;
}

}  // namespace detail

struct AtomCheck {
    bool ok = false;
    std::string reason;  // empty when ok
};

// Tent atom associated with B = B(x_center, r): support in T(B) up to a tol
// fraction of weighted-L^2 mass, and size || a ||_{T^2_s} <= |B|^{delta(p,2)}
// with |B| the discrete ball measure.
inline AtomCheck validate_tent_atom(const Field& a, const Exponent& p,
                                    std::size_t center, double r,
                                    const BallKernelCache& cache,
                                    double tol = 1e-10) {
    if (!(p.i() <= 1.0 + kGeomTol)) {
        throw std::invalid_argument("validate_tent_atom: i(p) <= 1 required");
    }
    const GridSpec& spec = a.spec;
    const auto tent = tent_cells(spec, cache, center, r);
    const auto mask = detail::mask_from_weights(spec, tent);
    const double total = detail::l2s_sq_masked(a, p.s(), nullptr);
    const double inside = detail::l2s_sq_masked(a, p.s(), &mask);
    if (total > 0.0 && (total - inside) > tol * total) {
        return {false, "support outside T(B)"};
    }
    const double size = tent_norm(a, Exponent::finite(2.0, p.s()), cache).value;
    const double bound =
        std::pow(ball_measure_discrete(spec, center, r), delta(p.p(), 2.0));
    if (size > bound * (1.0 + tol)) return {false, "size bound violated"};
    return {true, ""};
}

// Z-atom associated with (t, x): support in Omega_c(t, x) up to a tol mass
// fraction, and size || t^{-s} a ||_{L^2(dx dt/t)} <= t^{n delta(p,2)}.
inline AtomCheck validate_z_atom(const Field& a, const Exponent& p,
                                 const WhitneyParameter& c, double t,
                                 std::size_t x, const BallKernelCache& cache,
                                 double tol = 1e-10) {
    const GridSpec& spec = a.spec;
    const auto omega = whitney_cells(spec, cache, t, x, c);
    const auto mask = detail::mask_from_weights(spec, omega);
    const double total = detail::l2s_sq_masked(a, p.s(), nullptr);
    const double inside = detail::l2s_sq_masked(a, p.s(), &mask);
    if (total > 0.0 && (total - inside) > tol * total) {
        return {false, "support outside Omega_c(t,x)"};
    }
    const double size = std::sqrt(total);
    const double bound = std::pow(t, spec.n * delta(p.p(), 2.0));
    if (size > bound * (1.0 + tol)) return {false, "size bound violated"};
    return {true, ""};
}

// One atom of a Whitney-grid decomposition: values restricted to the box, in
// for_each_box_cell order.
struct ZAtom {
    double lambda = 0.0;
    std::size_t box = 0;  // index into the grid's box list
    std::vector<cplx> values;
};

struct AtomicDecomposition {
    Exponent exponent = Exponent::finite(1.0, 0.0);
    int k = 0;
    WhitneyParameter c;
    WhitneyGrid grid;
    std::vector<ZAtom> atoms;  // one entry per box, lambda = 0 for zero boxes

    // ell^p quasinorm of the coefficient sequence.
    double coefficient_norm() const {
        const double i = exponent.i();
        double acc = 0.0;
        for (const ZAtom& a : atoms) acc += std::pow(a.lambda, i);
        return std::pow(acc, 1.0 / i);
    }
};

// Materializes one atom as a full field.
inline Field atom_field(const GridSpec& spec, const AtomicDecomposition& dec,
                        const ZAtom& atom) {
    Field out = Field::zeros(spec);
    const WhitneyBox& box = dec.grid.boxes[atom.box];
    std::size_t pos = 0;
    for_each_box_cell(spec, box, [&](int k, std::size_t sp) {
        for (int ch = 0; ch < spec.channels(); ++ch) {
            out.values[out.index(k, sp, ch)] = atom.values[pos++];
        }
    });
    return out;
}

inline Field reconstruct(const GridSpec& spec, const AtomicDecomposition& dec) {
    Field out = Field::zeros(spec);
    for (const ZAtom& atom : dec.atoms) {
        if (atom.lambda == 0.0) continue;
        const WhitneyBox& box = dec.grid.boxes[atom.box];
        std::size_t pos = 0;
        for_each_box_cell(spec, box, [&](int k, std::size_t sp) {
            for (int ch = 0; ch < spec.channels(); ++ch) {
                out.values[out.index(k, sp, ch)] += atom.lambda * atom.values[pos++];
            }
        });
    }
    return out;
}

inline int z_decompose_min_k(int n, const WhitneyParameter& c) {
    return static_cast<int>(
        std::ceil(std::log2(std::sqrt(static_cast<double>(n)) / (3.0 * c.c0)) + 1.0));
}

inline AtomicDecomposition z_decompose(const Field& f, const Exponent& p, int k,
                                       const WhitneyParameter& c) {
    c.validate();
    if (!p.is_finite()) throw std::invalid_argument("z_decompose: finite p only");
    const GridSpec& spec = f.spec;
    if (k < z_decompose_min_k(spec.n, c)) {
        throw std::invalid_argument("z_decompose: support condition unobtainable "
                                    "(scale offset k too small for c0)");
    }
    AtomicDecomposition dec;
    dec.exponent = p;
    dec.k = k;
    dec.c = c;
    dec.grid = whitney_grid(spec, k);
    const double h = spec.log_step();
    const double dpow = spec.n * delta(p.p(), 2.0);
    for (std::size_t b = 0; b < dec.grid.boxes.size(); ++b) {
        const WhitneyBox& box = dec.grid.boxes[b];
        // lambda = t_Q^{-n delta(p,2)} || t^{-s} f ||_{L^2(box, dx dt/t)},
        // so the atom's size saturates the t_Q^{n delta(p,2)} bound exactly.
        double mass = 0.0;
        std::vector<cplx> vals;
        for_each_box_cell(spec, box, [&](int kk, std::size_t sp) {
            const double w =
                std::pow(spec.t_level(kk), -2.0 * p.s()) * h * spec.cell_volume();
            for (int ch = 0; ch < spec.channels(); ++ch) {
                const cplx v = f.at(kk, sp, ch);
                mass += w * std::norm(v);
                vals.push_back(v);
            }
        });
        ZAtom atom;
        atom.box = b;
        const double nrm = std::sqrt(mass);
        if (nrm > 0.0) {
            atom.lambda = std::pow(box.t_mid(), -dpow) * nrm;
            for (cplx& v : vals) v /= atom.lambda;
            atom.values = std::move(vals);
        } else {
            atom.lambda = 0.0;
            atom.values.assign(vals.size(), cplx(0.0, 0.0));
        }
        dec.atoms.push_back(std::move(atom));
    }
    return dec;
}

// Serializes the coefficient table as CSV (box index, band, origin, ell, lambda)
// and each nonzero atom as an HSF file <prefix>_atom<i>.hsf.
inline void decomposition_export(const GridSpec& spec,
                                 const AtomicDecomposition& dec,
                                 const std::string& prefix) {
    std::ofstream csv(prefix + "_coefficients.csv");
    if (!csv) throw std::runtime_error("decomposition_export: cannot open CSV");
    csv << "atom,band,origin0,origin1,origin2,ell,lambda\n";
    for (std::size_t i = 0; i < dec.atoms.size(); ++i) {
        const ZAtom& a = dec.atoms[i];
        const WhitneyBox& box = dec.grid.boxes[a.box];
        csv << i << ',' << box.band << ',' << box.origin[0] << ',' << box.origin[1]
            << ',' << box.origin[2] << ',' << box.ell << ',' << a.lambda << '\n';
        if (a.lambda != 0.0) {
            hsf_write(atom_field(spec, dec, a),
                      prefix + "_atom" + std::to_string(i) + ".hsf");
        }
    }
}

}  // namespace hsl
