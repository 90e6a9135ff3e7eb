#include "oranmec/simd/kernels.hpp"

namespace oranmec::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n)
{
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        s += a[i] * b[i];
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i)
        y[i] += alpha * x[i];
}

void gemm_abt_scalar(std::size_t m, std::size_t n, std::size_t k,
                     const double* a, std::size_t lda,
                     const double* b, std::size_t ldb,
                     double* c, std::size_t ldc, double beta)
{
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * lda;
        double* ci = c + i * ldc;
        for (std::size_t j = 0; j < n; ++j) {
            const double s = dot_scalar(ai, b + j * ldb, k);
            ci[j] = beta == 0.0 ? s : ci[j] + s;
        }
    }
}

} // namespace

const KernelTable& scalar_kernels()
{
    static const KernelTable table{"scalar", dot_scalar, axpy_scalar, gemm_abt_scalar};
    return table;
}

} // namespace oranmec::simd
