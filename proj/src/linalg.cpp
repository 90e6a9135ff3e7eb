#include "oranmec/linalg.hpp"

#include <cmath>

#include "oranmec/errors.hpp"
#include "oranmec/simd/kernels.hpp"

namespace oranmec::linalg {

Matrix cholesky(const Matrix& a, bool allow_semidefinite)
{
    if (a.rows != a.cols)
        throw DimensionError("cholesky needs a square matrix");
    const std::size_t n = a.rows;
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        scale = std::max(scale, std::abs(a(i, i)));
    const double tol = 1e-12 * std::max(scale, 1.0);

    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const double* lj = l.data.data() + j * n;
        double d = a(j, j) - simd::dot({lj, j}, {lj, j});
        if (!std::isfinite(d))
            throw NumericError("cholesky: non-finite pivot");
        if (d <= tol) {
            if (!allow_semidefinite || d < -tol)
                throw NumericError("cholesky: matrix is not positive definite (pivot " + std::to_string(d) + ")");
            continue; // column stays zero
        }
        const double djj = std::sqrt(d);
        l(j, j) = djj;
        for (std::size_t i = j + 1; i < n; ++i) {
            const double* li = l.data.data() + i * n;
            l(i, j) = (a(i, j) - simd::dot({li, j}, {lj, j})) / djj;
        }
    }
    return l;
}

std::vector<double> cholesky_solve(const Matrix& l, std::span<const double> b)
{
    const std::size_t n = l.rows;
    if (b.size() != n)
        throw DimensionError("cholesky_solve: size mismatch");
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k)
            s -= l(i, k) * y[k];
        y[i] = s / l(i, i);
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = y[i];
        for (std::size_t k = i + 1; k < n; ++k)
            s -= l(k, i) * x[k];
        x[i] = s / l(i, i);
    }
    return x;
}

Matrix spd_inverse(const Matrix& a)
{
    const Matrix l = cholesky(a);
    const std::size_t n = a.rows;
    Matrix inv(n, n);
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        const auto col = cholesky_solve(l, e);
        e[j] = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            inv(i, j) = col[i];
    }
    // exact symmetry
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            inv(i, j) = inv(j, i) = 0.5 * (inv(i, j) + inv(j, i));
    return inv;
}

Matrix gram(const Matrix& x)
{
    const std::size_t n = x.rows, d = x.cols;
    Matrix xt(d, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            xt(j, i) = x(i, j);
    Matrix g(d, d);
    if (n > 0 && d > 0)
        simd::gemm_abt(d, d, n, xt.data.data(), n, xt.data.data(), n, g.data.data(), d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
            g(j, i) = g(i, j);
    return g;
}

} // namespace oranmec::linalg
