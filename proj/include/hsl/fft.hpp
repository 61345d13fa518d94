#pragma once

// Thin FFTW wrapper for in-order complex transforms on the periodic spatial
// torus (n = 1, 2, 3).  Plans are cached per shape; everything runs on a
// single thread so the cache needs no locking.

#include <complex>
#include <cstring>
#include <map>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace hsl {

class Fft {
public:
    // Forward DFT (negative exponent), unnormalized:
    //   out[q] = sum_x in[x] e^{-2 pi i q.x / Nx}.
    static void forward(int n, int Nx, std::complex<double>* data) {
        execute(n, Nx, data, FFTW_FORWARD);
    }

    // Inverse DFT (positive exponent), normalized by Nx^n so that
    // inverse(forward(f)) == f.
    static void inverse(int n, int Nx, std::complex<double>* data) {
        execute(n, Nx, data, FFTW_BACKWARD);
        const std::size_t total = size(n, Nx);
        const double scale = 1.0 / static_cast<double>(total);
        for (std::size_t i = 0; i < total; ++i) data[i] *= scale;
    }

    static std::size_t size(int n, int Nx) {
        std::size_t s = 1;
        for (int d = 0; d < n; ++d) s *= static_cast<std::size_t>(Nx);
        return s;
    }

private:
    static void execute(int n, int Nx, std::complex<double>* data, int sign) {
        if (n < 1 || n > 3) throw std::invalid_argument("Fft: n in {1,2,3}");
        fftw_plan plan = cached_plan(n, Nx, sign);
        fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(data),
                         reinterpret_cast<fftw_complex*>(data));
    }

    static fftw_plan cached_plan(int n, int Nx, int sign) {
        static std::map<std::tuple<int, int, int>, fftw_plan> cache;
        auto key = std::make_tuple(n, Nx, sign);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        // FFTW_ESTIMATE keeps planning deterministic and leaves the buffer
        // contents untouched; plan on a scratch buffer, execute via the
        // new-array interface.
        std::vector<std::complex<double>> scratch(size(n, Nx));
        std::vector<int> dims(static_cast<std::size_t>(n), Nx);
        fftw_plan plan = fftw_plan_dft(
            n, dims.data(), reinterpret_cast<fftw_complex*>(scratch.data()),
            reinterpret_cast<fftw_complex*>(scratch.data()), sign,
            FFTW_ESTIMATE);
        if (!plan) throw std::runtime_error("Fft: planning failed");
        cache.emplace(key, plan);
        return plan;
    }
};

}  // namespace hsl
