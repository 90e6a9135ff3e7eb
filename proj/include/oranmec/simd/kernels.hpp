#pragma once

// Dense double-precision kernels used by the network and the posterior
// solver. Every kernel has a scalar reference implementation; vector variants
// (AVX2+FMA on x86-64, NEON on AArch64) are picked once at startup from the
// CPU's capabilities. Set ORANMEC_SIMD=scalar to pin the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace oranmec::simd {

struct KernelTable {
    const char* name;

    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);

    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

    // C[m x n] = A[m x k] * B[n x k]^T + beta * C, all row-major with the
    // given leading dimensions. beta is either 0 or 1.
    void (*gemm_abt)(std::size_t m, std::size_t n, std::size_t k,
                     const double* a, std::size_t lda,
                     const double* b, std::size_t ldb,
                     double* c, std::size_t ldc, double beta);
};

const KernelTable& scalar_kernels();

// nullptr when the variant is not compiled in or the CPU lacks the feature.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// Kernel table chosen at startup.
const KernelTable& active();

// Overrides the dispatch choice; used by equivalence tests and benchmarks.
// Returns false when the requested variant is unavailable.
bool select(std::string_view name);

inline double dot(std::span<const double> a, std::span<const double> b)
{
    return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y)
{
    active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void gemm_abt(std::size_t m, std::size_t n, std::size_t k,
                     const double* a, std::size_t lda,
                     const double* b, std::size_t ldb,
                     double* c, std::size_t ldc, double beta)
{
    active().gemm_abt(m, n, k, a, lda, b, ldb, c, ldc, beta);
}

} // namespace oranmec::simd
