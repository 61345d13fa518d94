#pragma once

// Shared helpers for the test suites: deterministic random accretive
// coefficient matrices and small convenience wrappers.

#include <Eigen/Dense>

#include "hsl/calculus.hpp"
#include "hsl/grid.hpp"

namespace hsl::testing {

// Deterministic random coefficient matrix of the form I + scale * R with
// complex Gaussian R, resampled (deterministically) until strictly accretive.
inline CoefficientMatrix random_accretive(int n, int m, std::uint64_t seed,
                                          double scale = 0.25) {
    GaussianSource src(seed);
    const int N = m * (1 + n);
    for (int attempt = 0; attempt < 64; ++attempt) {
        Mat A = Mat::Identity(N, N);
        for (int i = 0; i < N; ++i) {
            for (int j = 0; j < N; ++j) {
                A(i, j) += scale * src.normal_complex();
            }
        }
        CoefficientMatrix C{n, m, A};
        if (accretivity_check(C) > 0.05) return C;
    }
    throw std::runtime_error("random_accretive: no accretive sample found");
}

// Block-diagonal accretive matrix (A_pt = A_tp = 0).
inline CoefficientMatrix random_block_diagonal(int n, int m, std::uint64_t seed,
                                               double scale = 0.25) {
    CoefficientMatrix C = random_accretive(n, m, seed, scale);
    C.A.topRightCorner(m, m * n).setZero();
    C.A.bottomLeftCorner(m * n, m).setZero();
    if (!(accretivity_check(C) > 0.0)) {
        return random_block_diagonal(n, m, seed + 1, scale);
    }
    return C;
}

inline CoefficientMatrix identity_coefficients(int n, int m) {
    return CoefficientMatrix{n, m, Mat::Identity(m * (1 + n), m * (1 + n))};
}

inline double field_rel_err(const Field& a, const Field& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        num += std::norm(a.values[i] - b.values[i]);
        den += std::norm(b.values[i]);
    }
    return (den > 0.0) ? std::sqrt(num / den) : std::sqrt(num);
}

inline double boundary_rel_err(const BoundaryField& a, const BoundaryField& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        num += std::norm(a.values[i] - b.values[i]);
        den += std::norm(b.values[i]);
    }
    return (den > 0.0) ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace hsl::testing
