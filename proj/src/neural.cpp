#include "oranmec/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "oranmec/errors.hpp"
#include "oranmec/simd/kernels.hpp"

namespace oranmec {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows)
{
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols)
            throw DimensionError("ragged rows");
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

namespace {

// Column-major copy of a row-major r x c block.
std::vector<double> transposed(const double* a, std::size_t r, std::size_t c)
{
    std::vector<double> t(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            t[j * r + i] = a[i * c + j];
    return t;
}

void relu_inplace(Matrix& m)
{
    for (double& v : m.data)
        v = v > 0.0 ? v : 0.0;
}

// dy *= 1[y > 0]
void relu_mask(const Matrix& y, Matrix& dy)
{
    for (std::size_t i = 0; i < dy.data.size(); ++i)
        if (!(y.data[i] > 0.0))
            dy.data[i] = 0.0;
}

bool all_finite(const std::vector<double>& v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace

DenseLayer::DenseLayer(std::size_t in_features, std::size_t out_features)
    : in(in_features), out(out_features), w(in * out, 0.0), b(out, 0.0), gw(in * out, 0.0), gb(out, 0.0)
{
}

void DenseLayer::init(std::mt19937_64& rng)
{
    const double bound = in > 0 ? 1.0 / std::sqrt(static_cast<double>(in)) : 0.0;
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& x : w)
        x = u(rng);
    for (double& x : b)
        x = u(rng);
}

void DenseLayer::forward(const Matrix& x, Matrix& y) const
{
    if (x.cols != in)
        throw DimensionError("layer expects " + std::to_string(in) + " inputs, got " + std::to_string(x.cols));
    y = Matrix(x.rows, out);
    for (std::size_t i = 0; i < x.rows; ++i)
        std::copy(b.begin(), b.end(), y.row(i).begin());
    if (x.rows > 0 && out > 0 && in > 0)
        simd::gemm_abt(x.rows, out, in, x.data.data(), in, w.data(), in, y.data.data(), out, 1.0);
}

void DenseLayer::backward(const Matrix& x, const Matrix& dy, Matrix* dx)
{
    if (x.cols != in || dy.cols != out || dy.rows != x.rows)
        throw DimensionError("layer backward shape mismatch");
    const std::size_t n = x.rows;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < out; ++o)
            gb[o] += dy(i, o);
    if (n > 0 && in > 0 && out > 0) {
        // gw[out x in] += dy^T x
        const auto dyt = transposed(dy.data.data(), n, out);
        const auto xt = transposed(x.data.data(), n, in);
        simd::gemm_abt(out, in, n, dyt.data(), n, xt.data(), n, gw.data(), in, 1.0);
    }
    if (dx) {
        *dx = Matrix(n, in);
        if (n > 0 && in > 0 && out > 0) {
            const auto wt = transposed(w.data(), out, in);
            simd::gemm_abt(n, in, out, dy.data.data(), out, wt.data(), out, dx->data.data(), in, 0.0);
        }
    }
}

void DenseLayer::zero_grad()
{
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
}

BranchingQNet::BranchingQNet(NetShape shape, std::uint64_t seed) : shape_(std::move(shape))
{
    if (shape_.input == 0 || shape_.features == 0 || shape_.branch_sizes.empty())
        throw ValidationError("network needs inputs, features and at least one branch");
    for (std::size_t w : shape_.trunk)
        if (w == 0)
            throw ValidationError("trunk widths must be positive");
    for (std::size_t s : shape_.branch_sizes)
        if (s == 0)
            throw ValidationError("branch sizes must be positive");

    std::mt19937_64 rng(seed);
    std::size_t width = shape_.input;
    for (std::size_t w : shape_.trunk) {
        trunk_.emplace_back(width, w);
        trunk_.back().init(rng);
        width = w;
    }
    const std::size_t nb = shape_.branch_sizes.size();
    repr_ = DenseLayer(width, nb * shape_.features);
    repr_.init(rng);
    if (shape_.mode == HeadMode::Linear) {
        for (std::size_t s : shape_.branch_sizes) {
            heads_.emplace_back(shape_.features, s);
            heads_.back().init(rng);
            offsets_.push_back(offsets_.back() + s);
        }
    } else {
        for (std::size_t j = 0; j < nb; ++j)
            offsets_.push_back(offsets_.back() + shape_.features);
    }
}

void BranchingQNet::run(const Matrix& x, std::vector<Matrix>& acts, Matrix& out) const
{
    if (x.cols != shape_.input)
        throw DimensionError("network expects " + std::to_string(shape_.input) + " inputs, got " +
                             std::to_string(x.cols));
    acts.assign(trunk_.size() + 2, Matrix{});
    acts[0] = x;
    for (std::size_t l = 0; l < trunk_.size(); ++l) {
        trunk_[l].forward(acts[l], acts[l + 1]);
        relu_inplace(acts[l + 1]);
    }
    Matrix& phi = acts.back();
    repr_.forward(acts[trunk_.size()], phi);
    relu_inplace(phi);

    if (shape_.mode == HeadMode::Features) {
        out = phi;
        return;
    }
    const std::size_t f = shape_.features;
    out = Matrix(x.rows, output_cols());
    Matrix block(x.rows, f), q;
    for (std::size_t j = 0; j < heads_.size(); ++j) {
        for (std::size_t i = 0; i < x.rows; ++i)
            std::copy_n(phi.row(i).begin() + j * f, f, block.row(i).begin());
        heads_[j].forward(block, q);
        for (std::size_t i = 0; i < x.rows; ++i)
            std::copy(q.row(i).begin(), q.row(i).end(), out.row(i).begin() + offsets_[j]);
    }
}

const Matrix& BranchingQNet::forward(const Matrix& x)
{
    run(x, acts_, out_);
    cached_ = true;
    return out_;
}

Matrix BranchingQNet::predict(const Matrix& x) const
{
    std::vector<Matrix> acts;
    Matrix out;
    run(x, acts, out);
    return out;
}

std::vector<double> BranchingQNet::predict(std::span<const double> x) const
{
    Matrix m(1, x.size());
    std::copy(x.begin(), x.end(), m.data.begin());
    return predict(m).data;
}

void BranchingQNet::backward(const Matrix& dout)
{
    if (!cached_)
        throw UsageError("backward() called before forward()");
    if (dout.rows != out_.rows || dout.cols != out_.cols)
        throw DimensionError("output gradient shape does not match the last forward pass");
    const std::size_t n = dout.rows;
    const std::size_t f = shape_.features;
    const Matrix& phi = acts_.back();

    Matrix dphi;
    if (shape_.mode == HeadMode::Features) {
        dphi = dout;
    } else {
        dphi = Matrix(n, phi.cols);
        Matrix block(n, f), dq, dblock;
        for (std::size_t j = 0; j < heads_.size(); ++j) {
            const std::size_t s = width(j);
            dq = Matrix(n, s);
            for (std::size_t i = 0; i < n; ++i) {
                std::copy_n(phi.row(i).begin() + j * f, f, block.row(i).begin());
                std::copy_n(dout.row(i).begin() + offsets_[j], s, dq.row(i).begin());
            }
            heads_[j].backward(block, dq, &dblock);
            for (std::size_t i = 0; i < n; ++i)
                std::copy(dblock.row(i).begin(), dblock.row(i).end(), dphi.row(i).begin() + j * f);
        }
    }
    relu_mask(phi, dphi);

    Matrix dh;
    repr_.backward(acts_[trunk_.size()], dphi, &dh);
    for (std::size_t l = trunk_.size(); l-- > 0;) {
        relu_mask(acts_[l + 1], dh);
        Matrix dprev;
        trunk_[l].backward(acts_[l], dh, l > 0 ? &dprev : nullptr);
        dh = std::move(dprev);
    }
}

void BranchingQNet::zero_grad()
{
    for (DenseLayer* l : layers())
        l->zero_grad();
}

std::vector<DenseLayer*> BranchingQNet::layers()
{
    std::vector<DenseLayer*> out;
    for (auto& l : trunk_)
        out.push_back(&l);
    out.push_back(&repr_);
    for (auto& l : heads_)
        out.push_back(&l);
    return out;
}

std::vector<const DenseLayer*> BranchingQNet::layers() const
{
    std::vector<const DenseLayer*> out;
    for (auto& l : trunk_)
        out.push_back(&l);
    out.push_back(&repr_);
    for (auto& l : heads_)
        out.push_back(&l);
    return out;
}

std::size_t BranchingQNet::num_params() const
{
    std::size_t n = 0;
    for (const DenseLayer* l : layers())
        n += l->num_params();
    return n;
}

bool BranchingQNet::finite() const
{
    for (const DenseLayer* l : layers())
        if (!all_finite(l->w) || !all_finite(l->b))
            return false;
    return true;
}

namespace io {

void write_u64(std::ostream& os, std::uint64_t v)
{
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i)
        buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is)
{
    unsigned char buf[8];
    if (!is.read(reinterpret_cast<char*>(buf), 8))
        throw ParseError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void write_f64(std::ostream& os, double v)
{
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    write_u64(os, bits);
}

double read_f64(std::istream& is)
{
    const std::uint64_t bits = read_u64(is);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

void write_vec(std::ostream& os, const std::vector<double>& v)
{
    write_u64(os, v.size());
    for (double x : v)
        write_f64(os, x);
}

std::vector<double> read_vec(std::istream& is)
{
    const std::uint64_t n = read_u64(is);
    if (n > (std::uint64_t{1} << 32))
        throw ParseError("checkpoint vector length is implausible");
    std::vector<double> v(n);
    for (double& x : v)
        x = read_f64(is);
    return v;
}

void write_tag(std::ostream& os, const char (&tag)[5])
{
    os.write(tag, 4);
}

void expect_tag(std::istream& is, const char (&tag)[5])
{
    char buf[4];
    if (!is.read(buf, 4) || std::memcmp(buf, tag, 4) != 0)
        throw ParseError(std::string("checkpoint section '") + tag + "' missing or corrupt");
}

} // namespace io

namespace {

constexpr std::uint64_t kNetVersion = 1;

void write_shape(std::ostream& os, const NetShape& s)
{
    io::write_u64(os, s.input);
    io::write_u64(os, s.trunk.size());
    for (std::size_t w : s.trunk)
        io::write_u64(os, w);
    io::write_u64(os, s.features);
    io::write_u64(os, s.branch_sizes.size());
    for (std::size_t b : s.branch_sizes)
        io::write_u64(os, b);
    io::write_u64(os, s.mode == HeadMode::Linear ? 0 : 1);
}

NetShape read_shape(std::istream& is)
{
    NetShape s;
    s.input = io::read_u64(is);
    s.trunk.resize(io::read_u64(is));
    for (std::size_t& w : s.trunk)
        w = io::read_u64(is);
    s.features = io::read_u64(is);
    const std::uint64_t nb = io::read_u64(is);
    if (nb > 1'000'000)
        throw ParseError("checkpoint branch table is implausible");
    s.branch_sizes.resize(nb);
    for (std::size_t& b : s.branch_sizes)
        b = io::read_u64(is);
    s.mode = io::read_u64(is) == 0 ? HeadMode::Linear : HeadMode::Features;
    return s;
}

} // namespace

void BranchingQNet::write(std::ostream& os) const
{
    io::write_tag(os, "QNET");
    io::write_u64(os, kNetVersion);
    write_shape(os, shape_);
    for (const DenseLayer* l : layers()) {
        io::write_vec(os, l->w);
        io::write_vec(os, l->b);
    }
}

BranchingQNet BranchingQNet::read(std::istream& is, const std::optional<NetShape>& expected)
{
    io::expect_tag(is, "QNET");
    const std::uint64_t version = io::read_u64(is);
    if (version != kNetVersion)
        throw ParseError("unsupported network checkpoint version " + std::to_string(version));
    const NetShape shape = read_shape(is);
    if (expected && !(shape == *expected))
        throw ValidationError("checkpoint network shape does not match the configured network");
    BranchingQNet net(shape, 0);
    for (DenseLayer* l : net.layers()) {
        auto w = io::read_vec(is);
        auto b = io::read_vec(is);
        if (w.size() != l->w.size() || b.size() != l->b.size())
            throw ValidationError("checkpoint layer size does not match its shape table");
        l->w = std::move(w);
        l->b = std::move(b);
    }
    return net;
}

AdamState::AdamState(const BranchingQNet& net, AdamConfig cfg) : config(cfg)
{
    for (const DenseLayer* l : net.layers()) {
        m.emplace_back(l->w.size(), 0.0);
        m.emplace_back(l->b.size(), 0.0);
        v.emplace_back(l->w.size(), 0.0);
        v.emplace_back(l->b.size(), 0.0);
    }
}

void AdamState::write(std::ostream& os) const
{
    io::write_tag(os, "ADAM");
    io::write_f64(os, config.lr);
    io::write_f64(os, config.beta1);
    io::write_f64(os, config.beta2);
    io::write_f64(os, config.eps);
    io::write_u64(os, step);
    io::write_u64(os, m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        io::write_vec(os, m[i]);
        io::write_vec(os, v[i]);
    }
}

AdamState AdamState::read(std::istream& is)
{
    io::expect_tag(is, "ADAM");
    AdamState s;
    s.config.lr = io::read_f64(is);
    s.config.beta1 = io::read_f64(is);
    s.config.beta2 = io::read_f64(is);
    s.config.eps = io::read_f64(is);
    s.step = io::read_u64(is);
    const std::uint64_t n = io::read_u64(is);
    if (n > 1'000'000)
        throw ParseError("checkpoint optimizer table is implausible");
    for (std::uint64_t i = 0; i < n; ++i) {
        s.m.push_back(io::read_vec(is));
        s.v.push_back(io::read_vec(is));
    }
    return s;
}

void adam_step(BranchingQNet& net, AdamState& state)
{
    auto ls = net.layers();
    if (state.m.size() != 2 * ls.size())
        throw DimensionError("optimizer state does not match the network");
    for (std::size_t i = 0; i < ls.size(); ++i) {
        if (state.m[2 * i].size() != ls[i]->gw.size() || state.m[2 * i + 1].size() != ls[i]->gb.size())
            throw DimensionError("optimizer state does not match the network");
        if (!all_finite(ls[i]->gw) || !all_finite(ls[i]->gb))
            throw NumericError("non-finite gradient; update rejected");
    }
    const AdamConfig& c = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(c.beta1, t);
    const double c2 = 1.0 - std::pow(c.beta2, t);
    auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
            p[j] -= c.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + c.eps);
        }
    };
    for (std::size_t i = 0; i < ls.size(); ++i) {
        update(ls[i]->w, ls[i]->gw, state.m[2 * i], state.v[2 * i]);
        update(ls[i]->b, ls[i]->gb, state.m[2 * i + 1], state.v[2 * i + 1]);
    }
    if (!net.finite())
        throw NumericError("parameters became non-finite after an optimizer step");
}

} // namespace oranmec
