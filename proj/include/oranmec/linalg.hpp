#pragma once

#include <span>
#include <vector>

#include "oranmec/neural.hpp"

namespace oranmec::linalg {

// Lower Cholesky factor of the symmetric n x n matrix `a` (row-major).
// With allow_semidefinite, pivots that are zero up to round-off produce a
// zero column instead of failing. Throws NumericError otherwise.
Matrix cholesky(const Matrix& a, bool allow_semidefinite = false);

// Solves L L^T x = b.
std::vector<double> cholesky_solve(const Matrix& l, std::span<const double> b);

// Inverse of a symmetric positive definite matrix.
Matrix spd_inverse(const Matrix& a);

// Gram matrix X^T X of an n x d matrix.
Matrix gram(const Matrix& x);

} // namespace oranmec::linalg
