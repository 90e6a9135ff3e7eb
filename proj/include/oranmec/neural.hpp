#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace oranmec {

// Row-major dense matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);
};

// y = x W^T + b
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w; // out x in
    std::vector<double> b;
    std::vector<double> gw;
    std::vector<double> gb;

    DenseLayer() = default;
    DenseLayer(std::size_t in_features, std::size_t out_features);

    // Uniform in +-1/sqrt(in) for weights and biases.
    void init(std::mt19937_64& rng);

    void forward(const Matrix& x, Matrix& y) const;
    // Accumulates into gw/gb; writes dL/dx when dx is non-null.
    void backward(const Matrix& x, const Matrix& dy, Matrix* dx);
    void zero_grad();
    std::size_t num_params() const { return w.size() + b.size(); }
};

enum class HeadMode {
    Linear,   // per-branch Q values
    Features, // per-branch feature vectors, scored outside the net
};

struct NetShape {
    std::size_t input = 0;
    std::vector<std::size_t> trunk{256, 256};
    std::size_t features = 128; // per-branch representation width
    std::vector<std::size_t> branch_sizes;
    HeadMode mode = HeadMode::Linear;

    bool operator==(const NetShape&) const = default;
};

// Shared trunk, one representation block per branch, optional linear heads.
// Outputs of all branches are laid out side by side in one row per input:
// branch j occupies columns [offset(j), offset(j) + width(j)).
class BranchingQNet {
public:
    BranchingQNet() = default;
    BranchingQNet(NetShape shape, std::uint64_t seed);

    const NetShape& shape() const { return shape_; }
    std::size_t num_branches() const { return shape_.branch_sizes.size(); }
    std::size_t output_cols() const { return offsets_.back(); }
    std::size_t offset(std::size_t branch) const { return offsets_[branch]; }
    std::size_t width(std::size_t branch) const { return offsets_[branch + 1] - offsets_[branch]; }

    // Stores activations for backward().
    const Matrix& forward(const Matrix& x);
    // Same values as forward(), no cache.
    Matrix predict(const Matrix& x) const;
    std::vector<double> predict(std::span<const double> x) const;

    // dout has the shape of the last forward() output. Accumulates gradients.
    void backward(const Matrix& dout);
    void zero_grad();

    // Trunk, representation and head layers, in that order.
    std::vector<DenseLayer*> layers();
    std::vector<const DenseLayer*> layers() const;
    std::size_t num_params() const;
    bool finite() const;

    // Deep copy for target networks.
    BranchingQNet clone() const { return *this; }

    void write(std::ostream& os) const;
    // Throws ValidationError if the stored shape differs from `expected`.
    static BranchingQNet read(std::istream& is, const std::optional<NetShape>& expected = std::nullopt);

private:
    void run(const Matrix& x, std::vector<Matrix>& acts, Matrix& out) const;

    NetShape shape_;
    std::vector<DenseLayer> trunk_;
    DenseLayer repr_;
    std::vector<DenseLayer> heads_;
    std::vector<std::size_t> offsets_{0};

    // forward cache: input, trunk activations, representation
    std::vector<Matrix> acts_;
    Matrix out_;
    bool cached_ = false;
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m; // per layer: weights then biases
    std::vector<std::vector<double>> v;

    AdamState() = default;
    AdamState(const BranchingQNet& net, AdamConfig cfg = {});

    void write(std::ostream& os) const;
    static AdamState read(std::istream& is);
};

// Applies one Adam update from the gradients held in `net`. Rejects NaN/Inf
// gradients with NumericError before touching any parameter.
void adam_step(BranchingQNet& net, AdamState& state);

// Binary helpers shared by checkpoint writers.
namespace io {
void write_u64(std::ostream& os, std::uint64_t v);
std::uint64_t read_u64(std::istream& is);
void write_f64(std::ostream& os, double v);
double read_f64(std::istream& is);
void write_vec(std::ostream& os, const std::vector<double>& v);
std::vector<double> read_vec(std::istream& is);
void write_tag(std::ostream& os, const char (&tag)[5]);
void expect_tag(std::istream& is, const char (&tag)[5]);
} // namespace io

} // namespace oranmec
