#pragma once

#include <complex>
#include <span>
#include <vector>

namespace capepde {

/// Radix-2 transforms for power-of-two lengths.
///
/// Conventions: forward is unnormalized, X_k = sum_j x_j e^{-2pi i jk/n};
/// the inverse carries the 1/n factor. Parseval under this convention reads
/// sum_j |x_j|^2 == (1/n) sum_k |X_k|^2 over the full n-bin spectrum.
namespace fft {

bool is_pow2(std::int64_t n);

/// In-place complex FFT; ConfigError unless n is a power of two.
void transform(std::complex<double>* a, std::int64_t n, bool inverse);

/// One-sided real FFT: n real values -> n/2+1 bins.
std::vector<std::complex<double>> rfft(std::span<const double> x);

/// Inverse of rfft for a Hermitian one-sided spectrum of length n/2+1.
std::vector<double> irfft(std::span<const std::complex<double>> half, std::int64_t n);

/// Allocation-free variants for hot paths; `scratch` must hold n complex
/// values and may not alias `out`.
void rfft_into(std::span<const double> x, std::complex<double>* out,
               std::complex<double>* scratch);
void irfft_into(std::span<const std::complex<double>> half, std::int64_t n, double* out,
                std::complex<double>* scratch);

/// Two real rows per complex transform (the standard packing trick).
void rfft_pair_into(std::span<const double> a, std::span<const double> b,
                    std::complex<double>* out_a, std::complex<double>* out_b,
                    std::complex<double>* scratch);
void irfft_pair_into(std::span<const std::complex<double>> A,
                     std::span<const std::complex<double>> B, std::int64_t n, double* out_a,
                     double* out_b, std::complex<double>* scratch);

}  // namespace fft
}  // namespace capepde
