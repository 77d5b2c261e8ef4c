#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>

#include "errors.hpp"

namespace hkprop {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 DFT.
///   forward: X_k = sum_j x_j e^{-2 pi i jk/n}
///   inverse: x_j = (1/n) sum_k X_k e^{+2 pi i jk/n}
inline void fft_inplace(std::span<std::complex<double>> a, bool inverse = false) {
    const std::size_t n = a.size();
    if (!is_power_of_two(n)) throw Error(ErrorCode::BadShape, "FFT length must be a power of two");

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        for (std::size_t k = 0; k < half; ++k) {
            // Twiddles from the exact angle rather than a running product keep
            // the rounding error flat in n.
            const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
            const std::complex<double> w(std::cos(ang), std::sin(ang));
            for (std::size_t i = k; i < n; i += len) {
                const std::complex<double> u = a[i];
                const std::complex<double> v = a[i + half] * w;
                a[i] = u + v;
                a[i + half] = u - v;
            }
        }
    }
    if (inverse) {
        const double s = 1.0 / static_cast<double>(n);
        for (auto &x : a) x *= s;
    }
}

} // namespace hkprop
