#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace oranmec::testing {

NetShape random_small_shape(std::mt19937_64& rng)
{
    auto pick = [&rng](int lo, int hi) { return static_cast<std::size_t>(std::uniform_int_distribution<int>(lo, hi)(rng)); };
    NetShape s;
    s.input = pick(2, 6);
    s.trunk.clear();
    for (std::size_t i = 0, n = pick(1, 2); i < n; ++i)
        s.trunk.push_back(pick(3, 7));
    s.features = pick(2, 5);
    for (std::size_t i = 0, n = pick(1, 3); i < n; ++i)
        s.branch_sizes.push_back(pick(2, 4));
    s.mode = pick(0, 1) ? HeadMode::Features : HeadMode::Linear;
    return s;
}

GradCheck gradient_check(std::uint64_t seed, double h)
{
    std::mt19937_64 rng(seed);
    const NetShape shape = random_small_shape(rng);
    BranchingQNet net(shape, seed);
    std::normal_distribution<double> g(0.0, 1.0);

    Matrix x(3, shape.input);
    for (double& v : x.data)
        v = g(rng);
    Matrix G(3, net.output_cols());
    for (double& v : G.data)
        v = g(rng);

    auto loss = [&](const BranchingQNet& n) {
        const Matrix out = n.predict(x);
        double l = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i)
            l += G.data[i] * out.data[i];
        return l;
    };

    net.zero_grad();
    net.forward(x);
    net.backward(G);

    GradCheck res;
    for (DenseLayer* layer : net.layers()) {
        for (auto [param, grad] : {std::pair{&layer->w, &layer->gw}, std::pair{&layer->b, &layer->gb}}) {
            for (std::size_t i = 0; i < param->size(); ++i) {
                const double keep = (*param)[i];
                (*param)[i] = keep + h;
                const double up = loss(net);
                (*param)[i] = keep - h;
                const double down = loss(net);
                (*param)[i] = keep;
                const double numeric = (up - down) / (2.0 * h);
                const double analytic = (*grad)[i];
                const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
                res.max_rel_err = std::max(res.max_rel_err, std::abs(numeric - analytic) / scale);
                ++res.params;
            }
        }
    }
    return res;
}

} // namespace oranmec::testing
