#pragma once

#include <complex>
#include <vector>

namespace vitts {

// In-place iterative radix-2 FFT; size must be a power of two.
// The inverse transform includes the 1/N scaling.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

std::vector<std::complex<double>> fft_real(const std::vector<double>& x);

}  // namespace vitts
