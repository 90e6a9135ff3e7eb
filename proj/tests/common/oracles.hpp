#pragma once

#include <random>
#include <span>
#include <vector>

#include "oranmec/agents.hpp"

namespace oranmec::testing {

// Dense normal-equation solve with a full-pivot LU, independent of the
// library's Cholesky path.
BlrFit blr_dense_oracle(const Matrix& phi, std::span<const double> u, double sigma_eps, double prior_sigma);

struct BlrDataset {
    Matrix phi;
    std::vector<double> u;
    double sigma_eps = 1.0;
    double prior_sigma = 1.0;
};

BlrDataset random_blr_dataset(std::mt19937_64& rng);

// Max-abs difference over mu and sigma.
double blr_max_abs_diff(const BlrFit& a, const BlrFit& b);

// Zero every weight so the outputs equal the last layer's biases.
void make_constant(BranchingQNet& net);

} // namespace oranmec::testing
