#include "oracles.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace oranmec::testing {

BlrFit blr_dense_oracle(const Matrix& phi, std::span<const double> u, double sigma_eps, double prior_sigma)
{
    const Eigen::Index n = static_cast<Eigen::Index>(phi.rows);
    const Eigen::Index d = static_cast<Eigen::Index>(phi.cols);
    Eigen::MatrixXd X(n, d);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j)
            X(i, j) = phi(i, j);
        y(i) = u[i];
    }
    const double s2 = sigma_eps * sigma_eps;
    const Eigen::MatrixXd A = X.transpose() * X / s2 + Eigen::MatrixXd::Identity(d, d) / prior_sigma;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    const Eigen::MatrixXd S = lu.inverse();
    const Eigen::VectorXd mu = lu.solve(X.transpose() * y / s2);

    BlrFit out;
    out.mu.assign(mu.data(), mu.data() + d);
    out.sigma = Matrix(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            out.sigma(i, j) = S(i, j);
    return out;
}

BlrDataset random_blr_dataset(std::mt19937_64& rng)
{
    std::uniform_int_distribution<int> dd(1, 8), nn(1, 64);
    std::uniform_real_distribution<double> sig(0.2, 3.0);
    std::normal_distribution<double> g(0.0, 1.0);
    BlrDataset ds;
    const int d = dd(rng), n = nn(rng);
    ds.phi = Matrix(n, d);
    for (double& v : ds.phi.data)
        v = g(rng);
    std::vector<double> w(d);
    for (double& v : w)
        v = g(rng);
    for (int i = 0; i < n; ++i) {
        double y = 0.0;
        for (int j = 0; j < d; ++j)
            y += w[j] * ds.phi(i, j);
        ds.u.push_back(y + 0.3 * g(rng));
    }
    ds.sigma_eps = sig(rng);
    ds.prior_sigma = sig(rng);
    return ds;
}

double blr_max_abs_diff(const BlrFit& a, const BlrFit& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.mu.size(); ++i)
        m = std::max(m, std::abs(a.mu[i] - b.mu[i]));
    for (std::size_t i = 0; i < a.sigma.data.size(); ++i)
        m = std::max(m, std::abs(a.sigma.data[i] - b.sigma.data[i]));
    return m;
}

void make_constant(BranchingQNet& net)
{
    for (DenseLayer* l : net.layers()) {
        std::fill(l->w.begin(), l->w.end(), 0.0);
        std::fill(l->b.begin(), l->b.end(), 0.0);
    }
}

} // namespace oranmec::testing
