// Compiled with -mavx2 -mfma. Keep this translation unit free of standard
// library templates so no AVX2-encoded copy of a shared inline function can
// leak into the rest of the program.

#include <cstddef>
#include <immintrin.h>

namespace oranmec::simd::detail {

namespace {

inline double hsum(__m256d v)
{
    __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    const __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

} // namespace

double dot_avx2(const double* a, const double* b, std::size_t n)
{
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i)
        s += a[i] * b[i];
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n)
{
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i)
        y[i] += alpha * x[i];
}

namespace {

// 4 rows of A against 3 rows of B: twelve 4-lane accumulators over k.
inline void tile_4x3(std::size_t k, const double* a, std::size_t lda,
                     const double* b, std::size_t ldb,
                     double* c, std::size_t ldc, double beta)
{
    __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd(), c02 = _mm256_setzero_pd();
    __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd(), c12 = _mm256_setzero_pd();
    __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd(), c22 = _mm256_setzero_pd();
    __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd(), c32 = _mm256_setzero_pd();
    const double* a0 = a;
    const double* a1 = a + lda;
    const double* a2 = a + 2 * lda;
    const double* a3 = a + 3 * lda;
    const double* b0 = b;
    const double* b1 = b + ldb;
    const double* b2 = b + 2 * ldb;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
        const __m256d vb0 = _mm256_loadu_pd(b0 + p);
        const __m256d vb1 = _mm256_loadu_pd(b1 + p);
        const __m256d vb2 = _mm256_loadu_pd(b2 + p);
        __m256d va = _mm256_loadu_pd(a0 + p);
        c00 = _mm256_fmadd_pd(va, vb0, c00);
        c01 = _mm256_fmadd_pd(va, vb1, c01);
        c02 = _mm256_fmadd_pd(va, vb2, c02);
        va = _mm256_loadu_pd(a1 + p);
        c10 = _mm256_fmadd_pd(va, vb0, c10);
        c11 = _mm256_fmadd_pd(va, vb1, c11);
        c12 = _mm256_fmadd_pd(va, vb2, c12);
        va = _mm256_loadu_pd(a2 + p);
        c20 = _mm256_fmadd_pd(va, vb0, c20);
        c21 = _mm256_fmadd_pd(va, vb1, c21);
        c22 = _mm256_fmadd_pd(va, vb2, c22);
        va = _mm256_loadu_pd(a3 + p);
        c30 = _mm256_fmadd_pd(va, vb0, c30);
        c31 = _mm256_fmadd_pd(va, vb1, c31);
        c32 = _mm256_fmadd_pd(va, vb2, c32);
    }
    double r[4][3] = {
        {hsum(c00), hsum(c01), hsum(c02)},
        {hsum(c10), hsum(c11), hsum(c12)},
        {hsum(c20), hsum(c21), hsum(c22)},
        {hsum(c30), hsum(c31), hsum(c32)},
    };
    for (; p < k; ++p) {
        const double* rows[4] = {a0, a1, a2, a3};
        for (int i = 0; i < 4; ++i) {
            r[i][0] += rows[i][p] * b0[p];
            r[i][1] += rows[i][p] * b1[p];
            r[i][2] += rows[i][p] * b2[p];
        }
    }
    for (int i = 0; i < 4; ++i) {
        double* ci = c + i * ldc;
        for (int j = 0; j < 3; ++j)
            ci[j] = beta == 0.0 ? r[i][j] : ci[j] + r[i][j];
    }
}

} // namespace

void gemm_abt_avx2(std::size_t m, std::size_t n, std::size_t k,
                   const double* a, std::size_t lda,
                   const double* b, std::size_t ldb,
                   double* c, std::size_t ldc, double beta)
{
    const std::size_t m4 = m - m % 4;
    const std::size_t n3 = n - n % 3;
    for (std::size_t i = 0; i < m4; i += 4)
        for (std::size_t j = 0; j < n3; j += 3)
            tile_4x3(k, a + i * lda, lda, b + j * ldb, ldb, c + i * ldc + j, ldc, beta);
    // Ragged edges fall back to single dot products.
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j0 = i < m4 ? n3 : 0;
        for (std::size_t j = j0; j < n; ++j) {
            const double s = dot_avx2(a + i * lda, b + j * ldb, k);
            double& cij = c[i * ldc + j];
            cij = beta == 0.0 ? s : cij + s;
        }
    }
}

} // namespace oranmec::simd::detail
