#pragma once

#include <complex>
#include <vector>

#include "mov/tensor.hpp"

namespace mov {

// In-place iterative radix-2 FFT; length must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a);

Tensor hamming_window(int n);

// Windows the frame, zero-pads to the next power of two p, and returns the
// power spectrum (|X|^2) of length p/2+1.
Tensor rfft_magnitude(const Tensor& frame, const Tensor& window);

int next_pow2(int n);

}  // namespace mov
