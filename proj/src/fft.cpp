#include "mov/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace mov {

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft_inplace(std::vector<std::complex<double>>& a) {
    std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) {
        throw std::invalid_argument("fft length must be a power of two");
    }
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double pi = 3.14159265358979323846;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * pi / static_cast<double>(len);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

Tensor hamming_window(int n) {
    if (n <= 1) throw std::invalid_argument("window length must exceed 1");
    Tensor w({n});
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < n; ++i) {
        w.at(i) = 0.54 - 0.46 * std::cos(2.0 * pi * i / (n - 1));
    }
    return w;
}

Tensor rfft_magnitude(const Tensor& frame, const Tensor& window) {
    if (frame.rank() != 1 || frame.extent(0) == 0) {
        throw std::invalid_argument("rfft_magnitude expects a non-empty rank-1 frame");
    }
    if (window.rank() != 1 || window.extent(0) != frame.extent(0)) {
        throw std::invalid_argument("rfft_magnitude window must match the frame length");
    }
    int n = frame.extent(0);
    int p = next_pow2(n);
    std::vector<std::complex<double>> a(static_cast<std::size_t>(p), {0.0, 0.0});
    for (int i = 0; i < n; ++i) {
        a[static_cast<std::size_t>(i)] = {frame.at(i) * window.at(i), 0.0};
    }
    fft_inplace(a);
    Tensor out({p / 2 + 1});
    for (int k = 0; k <= p / 2; ++k) {
        out.at(k) = std::norm(a[static_cast<std::size_t>(k)]);
    }
    return out;
}

}  // namespace mov
