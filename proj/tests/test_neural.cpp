#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "common/gradcheck.hpp"
#include "oranmec/errors.hpp"
#include "oranmec/neural.hpp"

using namespace oranmec;
using namespace oranmec::testing;

namespace {

NetShape tiny_shape(HeadMode mode = HeadMode::Linear)
{
    NetShape s;
    s.input = 3;
    s.trunk = {5, 4};
    s.features = 3;
    s.branch_sizes = {2, 3};
    s.mode = mode;
    return s;
}

Matrix random_input(std::size_t rows, std::size_t cols, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(rows, cols);
    for (double& v : m.data)
        v = g(rng);
    return m;
}

} // namespace

TEST_SUITE("neural") {

TEST_CASE("single unit forward and backward by hand")
{
    DenseLayer l(1, 1);
    l.w = {2.0};
    l.b = {0.0};
    Matrix x = Matrix::from_rows({{3.0}});
    Matrix y;
    l.forward(x, y);
    CHECK(y(0, 0) == 6.0);

    // squared loss against 0 with w = 1, x = 2
    l.w = {1.0};
    x = Matrix::from_rows({{2.0}});
    l.forward(x, y);
    Matrix dy = Matrix::from_rows({{2.0 * (y(0, 0) - 0.0)}});
    Matrix dx;
    l.zero_grad();
    l.backward(x, dy, &dx);
    CHECK(l.gw[0] == 8.0);
    CHECK(l.gb[0] == 4.0);
    CHECK(dx(0, 0) == 4.0);

    // gradients accumulate until zero_grad
    l.backward(x, dy, nullptr);
    CHECK(l.gw[0] == 16.0);
    l.zero_grad();
    CHECK(l.gw[0] == 0.0);
}

TEST_CASE("layer matches a hand matrix product")
{
    DenseLayer l(3, 2);
    l.w = {1, 2, 3, -1, 0, 4};
    l.b = {0.5, -0.5};
    const Matrix x = Matrix::from_rows({{1, 1, 1}, {2, 0, -1}});
    Matrix y;
    l.forward(x, y);
    CHECK(y(0, 0) == 6.5);
    CHECK(y(0, 1) == 2.5);
    CHECK(y(1, 0) == -0.5);
    CHECK(y(1, 1) == -6.5);
}

TEST_CASE("analytic gradients match central differences")
{
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        const auto r = gradient_check(seed);
        CAPTURE(seed);
        CHECK(r.params > 0);
        CHECK(r.max_rel_err < 1e-4);
    }
}

TEST_CASE("output layout")
{
    BranchingQNet lin(tiny_shape(), 1);
    CHECK(lin.num_branches() == 2);
    CHECK(lin.output_cols() == 5);
    CHECK(lin.offset(1) == 2);
    CHECK(lin.width(1) == 3);

    BranchingQNet feat(tiny_shape(HeadMode::Features), 1);
    CHECK(feat.output_cols() == 6);
    CHECK(feat.width(0) == 3);

    // 3*5+5 + 5*4+4 + 4*6+6 + (3*2+2) + (3*3+3)
    CHECK(lin.num_params() == 20 + 24 + 30 + 8 + 12);
    CHECK(feat.num_params() == 20 + 24 + 30);

    // representation features are post-ReLU
    const Matrix out = feat.predict(random_input(20, 3, 2));
    for (double v : out.data)
        CHECK(v >= 0.0);
}

TEST_CASE("forward and predict agree")
{
    BranchingQNet net(tiny_shape(), 3);
    const Matrix x = random_input(4, 3, 4);
    const Matrix a = net.forward(x);
    const Matrix b = net.predict(x);
    CHECK(a.data == b.data);
    const auto row = net.predict(x.row(2));
    for (std::size_t j = 0; j < row.size(); ++j)
        CHECK(row[j] == a(2, j));
}

TEST_CASE("misuse is reported")
{
    BranchingQNet net(tiny_shape(), 3);
    CHECK_THROWS_AS(net.backward(Matrix(1, 5)), UsageError);
    net.forward(random_input(2, 3, 1));
    CHECK_THROWS_AS(net.backward(Matrix(2, 4)), DimensionError);
    CHECK_THROWS_AS(net.predict(random_input(2, 4, 1)), DimensionError);
}

TEST_CASE("seeded initialization")
{
    BranchingQNet a(tiny_shape(), 9), b(tiny_shape(), 9), c(tiny_shape(), 10);
    const Matrix x = random_input(3, 3, 5);
    CHECK(a.predict(x).data == b.predict(x).data);
    CHECK(a.predict(x).data != c.predict(x).data);
    for (const DenseLayer* l : a.layers()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l->in));
        for (double w : l->w)
            CHECK(std::abs(w) <= bound);
    }
}

TEST_CASE("Adam first step moves each parameter by about lr")
{
    BranchingQNet net(tiny_shape(), 1);
    const BranchingQNet before = net.clone();
    AdamState st(net, {.lr = 0.1});
    for (DenseLayer* l : net.layers()) {
        std::fill(l->gw.begin(), l->gw.end(), 1.0);
        std::fill(l->gb.begin(), l->gb.end(), 1.0);
    }
    adam_step(net, st);
    CHECK(st.step == 1);
    const auto old_layers = before.layers();
    const auto new_layers = net.layers();
    for (std::size_t i = 0; i < new_layers.size(); ++i)
        for (std::size_t k = 0; k < new_layers[i]->w.size(); ++k)
            CHECK(old_layers[i]->w[k] - new_layers[i]->w[k] == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("Adam rejects non-finite gradients untouched")
{
    BranchingQNet net(tiny_shape(), 1);
    AdamState st(net);
    const Matrix x = random_input(2, 3, 1);
    const Matrix before = net.predict(x);
    net.layers()[1]->gw[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(net, st), NumericError);
    CHECK(net.predict(x).data == before.data);
    CHECK(st.step == 0);
}

TEST_CASE("regression loss decreases under Adam")
{
    BranchingQNet net(tiny_shape(), 5);
    AdamState st(net, {.lr = 1e-2});
    const Matrix x = random_input(16, 3, 6);
    Matrix target(16, net.output_cols());
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < target.cols; ++j)
            target(i, j) = std::sin(x(i, 0) + static_cast<double>(j)) + 0.5 * x(i, 1);
    auto step = [&] {
        net.zero_grad();
        const Matrix& out = net.forward(x);
        Matrix d(out.rows, out.cols);
        double loss = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            const double e = out.data[i] - target.data[i];
            loss += e * e / static_cast<double>(out.data.size());
            d.data[i] = 2.0 * e / static_cast<double>(out.data.size());
        }
        net.backward(d);
        adam_step(net, st);
        return loss;
    };
    const double first = step();
    double last = first;
    for (int i = 0; i < 300; ++i)
        last = step();
    CHECK(last < 0.2 * first);
    CHECK(net.finite());
}

TEST_CASE("clones are independent")
{
    BranchingQNet a(tiny_shape(), 1);
    BranchingQNet b = a.clone();
    const Matrix x = random_input(2, 3, 1);
    const Matrix before = a.predict(x);
    b.layers()[0]->w[0] += 1.0;
    CHECK(a.predict(x).data == before.data);
    CHECK(b.predict(x).data != before.data);
}

TEST_CASE("checkpoint round trip")
{
    BranchingQNet a(tiny_shape(HeadMode::Features), 7);
    AdamState st(a, {.lr = 3e-3});
    std::stringstream ss;
    a.write(ss);
    st.write(ss);
    const BranchingQNet b = BranchingQNet::read(ss, a.shape());
    const AdamState st2 = AdamState::read(ss);
    const Matrix x = random_input(3, 3, 2);
    CHECK(a.predict(x).data == b.predict(x).data);
    CHECK(b.shape() == a.shape());
    CHECK(st2.config.lr == 3e-3);
    CHECK(st2.m.size() == st.m.size());

    std::stringstream again;
    a.write(again);
    CHECK_THROWS_AS(BranchingQNet::read(again, tiny_shape()), ValidationError);

    std::stringstream junk("not a checkpoint at all");
    CHECK_THROWS_AS(BranchingQNet::read(junk), ParseError);

    std::stringstream cut;
    a.write(cut);
    std::string bytes = cut.str();
    bytes.resize(bytes.size() / 2);
    std::stringstream half(bytes);
    CHECK_THROWS_AS(BranchingQNet::read(half), ParseError);
}

}
