#include "capepde/fft.hpp"

#include <cmath>
#include <unordered_map>

#include "capepde/errors.hpp"

namespace capepde::fft {

bool is_pow2(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

namespace {

// Twiddle factors e^{-+2pi i k/n}, k < n/2, cached per (length, direction)
// per thread.
const std::vector<std::complex<double>>& twiddles(std::int64_t n, bool inverse) {
    thread_local std::unordered_map<std::int64_t, std::vector<std::complex<double>>> fwd, inv;
    auto& cache = inverse ? inv : fwd;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<std::complex<double>> w(static_cast<std::size_t>(n / 2));
    const double sign = inverse ? 1.0 : -1.0;
    for (std::int64_t k = 0; k < n / 2; ++k) {
        const double ang = sign * 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
        w[static_cast<std::size_t>(k)] = {std::cos(ang), std::sin(ang)};
    }
    return cache.emplace(n, std::move(w)).first->second;
}

}  // namespace

void transform(std::complex<double>* a, std::int64_t n, bool inverse) {
    if (!is_pow2(n))
        throw ConfigError("FFT length " + std::to_string(n) + " is not a power of two");
    if (n == 1) return;

    // Bit-reversal permutation.
    for (std::int64_t i = 1, j = 0; i < n; ++i) {
        std::int64_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    const auto& w = twiddles(n, inverse);
    for (std::int64_t len = 2; len <= n; len <<= 1) {
        const std::int64_t step = n / len;
        for (std::int64_t i = 0; i < n; i += len) {
            for (std::int64_t k = 0; k < len / 2; ++k) {
                const std::complex<double> tw = w[static_cast<std::size_t>(k * step)];
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * tw;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }

    if (inverse) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::int64_t i = 0; i < n; ++i) a[i] *= inv_n;
    }
}

void rfft_pair_into(std::span<const double> a, std::span<const double> b,
                    std::complex<double>* out_a, std::complex<double>* out_b,
                    std::complex<double>* scratch) {
    const auto n = static_cast<std::int64_t>(a.size());
    if (static_cast<std::int64_t>(b.size()) != n) throw ShapeError("rfft_pair_into: row length mismatch");
    if (!is_pow2(n)) throw ConfigError("rfft length is not a power of two");
    for (std::int64_t j = 0; j < n; ++j)
        scratch[j] = {a[static_cast<std::size_t>(j)], b[static_cast<std::size_t>(j)]};
    transform(scratch, n, false);
    // Unpack Z = A + iB using A_k = (Z_k + conj(Z_{n-k}))/2, B_k = -i(Z_k - conj(Z_{n-k}))/2.
    for (std::int64_t k = 0; k <= n / 2; ++k) {
        const std::complex<double> zk = scratch[k];
        const std::complex<double> zm = std::conj(scratch[(n - k) % n]);
        out_a[k] = 0.5 * (zk + zm);
        const std::complex<double> d = zk - zm;
        out_b[k] = {0.5 * d.imag(), -0.5 * d.real()};
    }
}

void irfft_pair_into(std::span<const std::complex<double>> A,
                     std::span<const std::complex<double>> B, std::int64_t n, double* out_a,
                     double* out_b, std::complex<double>* scratch) {
    if (!is_pow2(n)) throw ConfigError("irfft length is not a power of two");
    if (static_cast<std::int64_t>(A.size()) != n / 2 + 1 || A.size() != B.size())
        throw ShapeError("irfft_pair_into expects n/2+1 bins per row");
    // Hermitian spectra combine into one complex signal: z = a + i b. The
    // imaginary parts at DC and Nyquist are ignored, matching the single-row
    // inverse (a real signal has none).
    for (std::int64_t k = 1; k < n / 2; ++k) {
        scratch[k] = A[static_cast<std::size_t>(k)] +
                     std::complex<double>(0, 1) * B[static_cast<std::size_t>(k)];
        scratch[n - k] = std::conj(A[static_cast<std::size_t>(k)]) +
                         std::complex<double>(0, 1) * std::conj(B[static_cast<std::size_t>(k)]);
    }
    scratch[0] = {A[0].real(), B[0].real()};
    scratch[n / 2] = {A[static_cast<std::size_t>(n / 2)].real(),
                      B[static_cast<std::size_t>(n / 2)].real()};
    transform(scratch, n, true);
    for (std::int64_t j = 0; j < n; ++j) {
        out_a[j] = scratch[j].real();
        out_b[j] = scratch[j].imag();
    }
}

void rfft_into(std::span<const double> x, std::complex<double>* out,
               std::complex<double>* scratch) {
    const auto n = static_cast<std::int64_t>(x.size());
    if (!is_pow2(n))
        throw ConfigError("rfft length " + std::to_string(n) + " is not a power of two");
    for (std::int64_t j = 0; j < n; ++j)
        scratch[j] = {x[static_cast<std::size_t>(j)], 0.0};
    transform(scratch, n, false);
    for (std::int64_t k = 0; k <= n / 2; ++k) out[k] = scratch[k];
}

void irfft_into(std::span<const std::complex<double>> half, std::int64_t n, double* out,
                std::complex<double>* scratch) {
    if (!is_pow2(n))
        throw ConfigError("irfft length " + std::to_string(n) + " is not a power of two");
    if (static_cast<std::int64_t>(half.size()) != n / 2 + 1)
        throw ShapeError("irfft expects n/2+1 bins");
    for (std::int64_t k = 0; k <= n / 2; ++k) scratch[k] = half[static_cast<std::size_t>(k)];
    for (std::int64_t k = 1; k < n / 2; ++k) scratch[n - k] = std::conj(half[static_cast<std::size_t>(k)]);
    transform(scratch, n, true);
    for (std::int64_t j = 0; j < n; ++j) out[j] = scratch[j].real();
}

std::vector<std::complex<double>> rfft(std::span<const double> x) {
    const auto n = static_cast<std::int64_t>(x.size());
    if (!is_pow2(n))
        throw ConfigError("rfft length " + std::to_string(n) + " is not a power of two");
    std::vector<std::complex<double>> scratch(static_cast<std::size_t>(n));
    std::vector<std::complex<double>> out(static_cast<std::size_t>(n / 2 + 1));
    rfft_into(x, out.data(), scratch.data());
    return out;
}

std::vector<double> irfft(std::span<const std::complex<double>> half, std::int64_t n) {
    if (!is_pow2(n))
        throw ConfigError("irfft length " + std::to_string(n) + " is not a power of two");
    std::vector<std::complex<double>> scratch(static_cast<std::size_t>(n));
    std::vector<double> out(static_cast<std::size_t>(n));
    irfft_into(half, n, out.data(), scratch.data());
    return out;
}

}  // namespace capepde::fft
