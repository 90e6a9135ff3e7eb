#include "oranmec/agents.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "oranmec/errors.hpp"
#include "oranmec/linalg.hpp"
#include "oranmec/log.hpp"
#include "oranmec/simd/kernels.hpp"

namespace oranmec {

// ---- replay ----

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity)
{
    if (capacity_ == 0)
        throw ValidationError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t)
{
    ++pushed_;
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
        return;
    }
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const
{
    if (i >= items_.size())
        throw ValidationError("replay index out of range");
    return items_[(head_ + i) % items_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const
{
    const std::size_t m = items_.size();
    if (n > m)
        throw ValidationError("cannot sample " + std::to_string(n) + " transitions from " + std::to_string(m));
    // Floyd's algorithm
    std::vector<std::size_t> out;
    std::unordered_set<std::size_t> seen;
    out.reserve(n);
    for (std::size_t j = m - n; j < m; ++j) {
        std::uniform_int_distribution<std::size_t> pick(0, j);
        std::size_t v = pick(rng);
        if (!seen.insert(v).second) {
            v = j;
            seen.insert(v);
        }
        out.push_back(v);
    }
    return out;
}

// ---- layout ----

BranchLayout BranchLayout::from(const ActionSpace& space)
{
    BranchLayout l;
    l.sizes = space.branch_sizes();
    const double k = space.num_bs();
    const double m = space.branches_per_bs();
    l.weight.assign(l.sizes.size(), 1.0 / (k * m));
    return l;
}

BranchLayout BranchLayout::single_bs(std::vector<std::size_t> sizes)
{
    BranchLayout l;
    l.sizes = std::move(sizes);
    l.weight.assign(l.sizes.size(), 1.0 / static_cast<double>(l.sizes.size()));
    return l;
}

std::vector<int> argmax_per_branch(std::span<const double> row, const std::vector<std::size_t>& sizes)
{
    std::vector<int> out;
    out.reserve(sizes.size());
    std::size_t off = 0;
    for (std::size_t s : sizes) {
        if (off + s > row.size())
            throw DimensionError("row is shorter than the branch layout");
        std::size_t best = 0;
        for (std::size_t a = 1; a < s; ++a)
            if (row[off + a] > row[off + best])
                best = a;
        out.push_back(static_cast<int>(best));
        off += s;
    }
    return out;
}

// ---- BLR ----

namespace {

// Precision ->(mu, sigma); retries once with jitter.
BlrFit solve_posterior(Matrix precision, std::span<const double> rhs)
{
    Matrix l;
    try {
        l = linalg::cholesky(precision);
    } catch (const NumericError&) {
        logger().warn("posterior precision is ill-conditioned; adding 1e-6 jitter");
        for (std::size_t i = 0; i < precision.rows; ++i)
            precision(i, i) += 1e-6;
        l = linalg::cholesky(precision);
    }
    BlrFit fit;
    fit.mu = linalg::cholesky_solve(l, rhs);
    const std::size_t d = precision.rows;
    fit.sigma = Matrix(d, d);
    std::vector<double> e(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        e[j] = 1.0;
        const auto col = linalg::cholesky_solve(l, e);
        e[j] = 0.0;
        for (std::size_t i = 0; i < d; ++i)
            fit.sigma(i, j) = col[i];
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
            fit.sigma(i, j) = fit.sigma(j, i) = 0.5 * (fit.sigma(i, j) + fit.sigma(j, i));
    return fit;
}

Matrix precision_from(const Matrix& gram, double sigma_eps, double prior_sigma)
{
    Matrix p = gram;
    const double s2 = sigma_eps * sigma_eps;
    for (double& v : p.data)
        v /= s2;
    for (std::size_t i = 0; i < p.rows; ++i)
        p(i, i) += 1.0 / prior_sigma;
    return p;
}

// gram/s2 + P0, and P0 mu0 added to rhs.
Matrix informative_precision(const Matrix& gram, double sigma_eps, std::span<const double> prior_mu,
                             const Matrix& prior_precision, std::span<double> rhs)
{
    Matrix p = gram;
    const double s2 = sigma_eps * sigma_eps;
    for (double& v : p.data)
        v /= s2;
    simd::axpy(1.0, prior_precision.data, p.data);
    for (std::size_t i = 0; i < p.rows; ++i)
        rhs[i] += simd::dot(prior_precision.row(i), prior_mu);
    return p;
}

} // namespace

BlrFit blr_fit(const Matrix& phi, std::span<const double> u, double sigma_eps, std::span<const double> prior_mu,
               const Matrix& prior_precision)
{
    if (phi.rows != u.size())
        throw DimensionError("feature rows and targets differ in length");
    const std::size_t d = phi.cols;
    if (prior_mu.size() != d || prior_precision.rows != d || prior_precision.cols != d)
        throw DimensionError("prior does not match the feature dimension");
    if (!(sigma_eps > 0.0))
        throw ValidationError("sigma_eps must be positive");
    std::vector<double> rhs(d, 0.0);
    const double s2 = sigma_eps * sigma_eps;
    for (std::size_t i = 0; i < phi.rows; ++i)
        simd::axpy(u[i] / s2, phi.row(i), rhs);
    Matrix precision = informative_precision(linalg::gram(phi), sigma_eps, prior_mu, prior_precision, rhs);
    return solve_posterior(std::move(precision), rhs);
}

BlrFit blr_fit(const Matrix& phi, std::span<const double> u, double sigma_eps, double prior_sigma)
{
    if (phi.rows != u.size())
        throw DimensionError("feature rows and targets differ in length");
    if (!(sigma_eps > 0.0) || !(prior_sigma > 0.0))
        throw ValidationError("sigma_eps and prior_sigma must be positive");
    const std::size_t d = phi.cols;
    std::vector<double> rhs(d, 0.0);
    const double s2 = sigma_eps * sigma_eps;
    for (std::size_t i = 0; i < phi.rows; ++i)
        simd::axpy(u[i] / s2, phi.row(i), rhs);
    return solve_posterior(precision_from(linalg::gram(phi), sigma_eps, prior_sigma), rhs);
}

PosteriorSet::PosteriorSet(std::vector<std::size_t> branch_sizes, std::size_t dim, double sigma_eps,
                           double prior_sigma)
    : sizes_(std::move(branch_sizes)), dim_(dim), sigma_eps_(sigma_eps), prior_sigma_(prior_sigma)
{
    if (!(sigma_eps_ > 0.0) || !(prior_sigma_ > 0.0))
        throw ValidationError("sigma_eps and prior_sigma must be positive");
    post_.resize(sizes_.size());
    for (std::size_t j = 0; j < sizes_.size(); ++j) {
        post_[j].resize(sizes_[j]);
        for (std::size_t a = 0; a < sizes_[j]; ++a)
            reset_to_prior(j, a);
    }
}

void PosteriorSet::reset_to_prior(std::size_t branch, std::size_t sub)
{
    SubActionPosterior& p = post_[branch][sub];
    p.num_samples = 0;
    if (!p.prior_mu.empty()) {
        p.mu = p.prior_mu;
        p.sigma = linalg::spd_inverse(p.prior_precision);
        return;
    }
    p.mu.assign(dim_, 0.0);
    p.sigma = Matrix(dim_, dim_);
    for (std::size_t i = 0; i < dim_; ++i)
        p.sigma(i, i) = prior_sigma_;
    if (p.omega.size() != dim_)
        p.omega.assign(dim_, 0.0);
    if (p.omega_target.size() != dim_)
        p.omega_target.assign(dim_, 0.0);
}

void PosteriorSet::adopt_as_prior()
{
    for (auto& branch : post_)
        for (auto& p : branch) {
            p.prior_precision = linalg::spd_inverse(p.sigma);
            p.prior_mu = p.mu;
        }
}

void PosteriorSet::sync_target()
{
    for (auto& branch : post_)
        for (auto& p : branch)
            p.omega_target = p.mu;
}

void PosteriorSet::write(std::ostream& os) const
{
    io::write_tag(os, "BPOS");
    io::write_u64(os, dim_);
    io::write_f64(os, sigma_eps_);
    io::write_f64(os, prior_sigma_);
    io::write_u64(os, sizes_.size());
    for (std::size_t s : sizes_)
        io::write_u64(os, s);
    for (const auto& branch : post_)
        for (const auto& p : branch) {
            io::write_vec(os, p.mu);
            io::write_vec(os, p.sigma.data);
            io::write_vec(os, p.omega);
            io::write_vec(os, p.omega_target);
            io::write_u64(os, p.num_samples);
            io::write_vec(os, p.prior_mu);
            io::write_vec(os, p.prior_precision.data);
        }
}

PosteriorSet PosteriorSet::read(std::istream& is)
{
    io::expect_tag(is, "BPOS");
    const std::size_t dim = io::read_u64(is);
    const double se = io::read_f64(is);
    const double ps = io::read_f64(is);
    const std::uint64_t nb = io::read_u64(is);
    if (nb > 1'000'000)
        throw ParseError("checkpoint posterior table is implausible");
    std::vector<std::size_t> sizes(nb);
    for (auto& s : sizes)
        s = io::read_u64(is);
    PosteriorSet set(sizes, dim, se, ps);
    for (auto& branch : set.post_)
        for (auto& p : branch) {
            p.mu = io::read_vec(is);
            p.sigma.data = io::read_vec(is);
            p.omega = io::read_vec(is);
            p.omega_target = io::read_vec(is);
            p.num_samples = io::read_u64(is);
            p.prior_mu = io::read_vec(is);
            p.prior_precision.data = io::read_vec(is);
            if (p.mu.size() != dim || p.sigma.data.size() != dim * dim || p.omega.size() != dim ||
                p.omega_target.size() != dim)
                throw ValidationError("checkpoint posterior entry has the wrong dimension");
            if (!p.prior_mu.empty()) {
                if (p.prior_mu.size() != dim || p.prior_precision.data.size() != dim * dim)
                    throw ValidationError("checkpoint posterior prior has the wrong dimension");
                p.prior_precision.rows = p.prior_precision.cols = dim;
            } else if (!p.prior_precision.data.empty()) {
                throw ValidationError("checkpoint posterior prior has the wrong dimension");
            }
        }
    return set;
}

std::vector<double> sample_gaussian(std::span<const double> mu, const Matrix& sigma, std::mt19937_64& rng)
{
    const std::size_t d = mu.size();
    if (sigma.rows != d || sigma.cols != d)
        throw DimensionError("covariance does not match the mean");
    Matrix l;
    try {
        l = linalg::cholesky(sigma, true);
    } catch (const NumericError&) {
        Matrix jittered = sigma;
        for (std::size_t i = 0; i < d; ++i)
            jittered(i, i) += 1e-6;
        l = linalg::cholesky(jittered, true); // throws again if still indefinite
    }
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<double> xi(d);
    for (double& x : xi)
        x = n01(rng);
    std::vector<double> out(mu.begin(), mu.end());
    for (std::size_t i = 0; i < d; ++i)
        out[i] += simd::dot({l.data.data() + i * d, i + 1}, {xi.data(), i + 1});
    return out;
}

void thompson_sample(PosteriorSet& post, std::mt19937_64& rng)
{
    for (std::size_t j = 0; j < post.num_branches(); ++j)
        for (std::size_t a = 0; a < post.branch_sizes()[j]; ++a) {
            SubActionPosterior& p = post.at(j, a);
            p.omega = sample_gaussian(p.mu, p.sigma, rng);
        }
}

namespace {

const std::vector<double>& weights_of(const SubActionPosterior& p, WeightKind which)
{
    switch (which) {
    case WeightKind::Sampled:
        return p.omega;
    case WeightKind::Mean:
        return p.mu;
    case WeightKind::Target:
        return p.omega_target;
    }
    return p.mu;
}

} // namespace

std::vector<double> posterior_scores(std::span<const double> features, const PosteriorSet& post, WeightKind which)
{
    const std::size_t d = post.dim();
    if (features.size() != d * post.num_branches())
        throw DimensionError("feature row does not match the posterior layout");
    std::vector<double> out;
    for (std::size_t j = 0; j < post.num_branches(); ++j) {
        const auto phi = features.subspan(j * d, d);
        for (std::size_t a = 0; a < post.branch_sizes()[j]; ++a)
            out.push_back(simd::dot(weights_of(post.at(j, a), which), phi));
    }
    return out;
}

// ---- selection ----

std::vector<int> select_action_egreedy(const BranchingQNet& net, std::span<const double> state, double epsilon,
                                       std::mt19937_64& rng)
{
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw ValidationError("epsilon must be in [0, 1]");
    const auto& sizes = net.shape().branch_sizes;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (epsilon > 0.0 && coin(rng) < epsilon) {
        std::vector<int> out;
        for (std::size_t s : sizes) {
            std::uniform_int_distribution<int> pick(0, static_cast<int>(s) - 1);
            out.push_back(pick(rng));
        }
        return out;
    }
    return argmax_per_branch(net.predict(state), sizes);
}

std::vector<int> select_action_thompson(const BranchingQNet& net, const PosteriorSet& post,
                                        std::span<const double> state, WeightKind which)
{
    return argmax_per_branch(posterior_scores(net.predict(state), post, which), post.branch_sizes());
}

// ---- targets ----

namespace {

Matrix stack(const std::vector<const Transition*>& batch, bool next)
{
    if (batch.empty())
        throw ValidationError("empty batch");
    const std::size_t n = (next ? batch[0]->s_next : batch[0]->s).size();
    Matrix m(batch.size(), n);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& v = next ? batch[i]->s_next : batch[i]->s;
        if (v.size() != n)
            throw DimensionError("batch states differ in length");
        std::copy(v.begin(), v.end(), m.row(i).begin());
    }
    return m;
}


} // namespace

double td_target_ddqn(std::span<const double> q_next_online, std::span<const double> q_next_target, double r,
                      double gamma, bool terminal)
{
    if (terminal)
        return r;
    std::size_t best = 0;
    for (std::size_t a = 1; a < q_next_online.size(); ++a)
        if (q_next_online[a] > q_next_online[best])
            best = a;
    return r + gamma * q_next_target[best];
}

std::vector<double> td_target_bddqn(const std::vector<const Transition*>& batch, const BranchingQNet& net,
                                    const BranchingQNet& target, const BranchLayout& layout, double gamma)
{
    const Matrix next = stack(batch, true);
    const Matrix qn = net.predict(next);
    const Matrix qt = target.predict(next);
    std::vector<double> u(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i]->terminal) {
            u[i] = batch[i]->r;
            continue;
        }
        const auto pick = argmax_per_branch(qn.row(i), layout.sizes);
        double sum = 0.0;
        std::size_t off = 0;
        for (std::size_t j = 0; j < layout.sizes.size(); ++j) {
            sum += layout.weight[j] * qt(i, off + pick[j]);
            off += layout.sizes[j];
        }
        u[i] = batch[i]->r + gamma * sum;
    }
    return u;
}

std::vector<double> td_target_bayes(const std::vector<const Transition*>& batch, const BranchingQNet& net,
                                    const BranchingQNet& target, const PosteriorSet& post,
                                    const BranchLayout& layout, double gamma)
{
    const Matrix next = stack(batch, true);
    const Matrix fn = net.predict(next);
    const Matrix ft = target.predict(next);
    const std::size_t d = post.dim();
    std::vector<double> u(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i]->terminal) {
            u[i] = batch[i]->r;
            continue;
        }
        const auto pick = argmax_per_branch(posterior_scores(fn.row(i), post, WeightKind::Sampled), layout.sizes);
        double sum = 0.0;
        for (std::size_t j = 0; j < layout.sizes.size(); ++j) {
            const auto phi = ft.row(i).subspan(j * d, d);
            sum += layout.weight[j] * simd::dot(post.at(j, pick[j]).omega_target, phi);
        }
        u[i] = batch[i]->r + gamma * sum;
    }
    return u;
}

// ---- gradient steps ----

double train_step_bddqn(BranchingQNet& net, const BranchingQNet& target, AdamState& adam,
                        const std::vector<const Transition*>& batch, const BranchLayout& layout, double gamma)
{
    const auto u = td_target_bddqn(batch, net, target, layout, gamma);
    const Matrix& q = net.forward(stack(batch, false));
    Matrix dout(q.rows, q.cols);
    const double n = static_cast<double>(batch.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::size_t off = 0;
        for (std::size_t j = 0; j < layout.sizes.size(); ++j) {
            const std::size_t col = off + batch[i]->a[j];
            const double err = u[i] - q(i, col);
            loss += layout.weight[j] * err * err;
            dout(i, col) = -2.0 * layout.weight[j] * err / n;
            off += layout.sizes[j];
        }
    }
    net.zero_grad();
    net.backward(dout);
    adam_step(net, adam);
    return loss / n;
}

double train_step_bayes(BranchingQNet& net, const BranchingQNet& target, const PosteriorSet& post, AdamState& adam,
                        const std::vector<const Transition*>& batch, const BranchLayout& layout, double gamma)
{
    const auto u = td_target_bayes(batch, net, target, post, layout, gamma);
    const Matrix& phi = net.forward(stack(batch, false));
    const std::size_t d = post.dim();
    Matrix dout(phi.rows, phi.cols);
    const double n = static_cast<double>(batch.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (std::size_t j = 0; j < layout.sizes.size(); ++j) {
            const auto& mu = post.at(j, batch[i]->a[j]).mu;
            const double err = u[i] - simd::dot(mu, phi.row(i).subspan(j * d, d));
            loss += layout.weight[j] * err * err;
            simd::axpy(-2.0 * layout.weight[j] * err / n, mu, dout.row(i).subspan(j * d, d));
        }
    }
    net.zero_grad();
    net.backward(dout);
    adam_step(net, adam);
    return loss / n;
}

void update_posteriors(PosteriorSet& post, const BranchingQNet& net, const BranchingQNet& target,
                       const ReplayBuffer& buffer, const BranchLayout& layout, double gamma, std::size_t cap)
{
    const std::size_t nb = layout.sizes.size();
    const std::size_t d = post.dim();
    const std::size_t m = buffer.size();

    // Most recent `cap` transitions per sub-action.
    std::vector<std::vector<std::size_t>> used(nb);
    std::vector<std::vector<char>> keep(nb, std::vector<char>(m, 0));
    for (std::size_t j = 0; j < nb; ++j)
        used[j].assign(layout.sizes[j], 0);
    for (std::size_t i = m; i-- > 0;) {
        const Transition& t = buffer.at(i);
        for (std::size_t j = 0; j < nb; ++j) {
            std::size_t& c = used[j][t.a[j]];
            if (c < cap) {
                ++c;
                keep[j][i] = 1;
            }
        }
    }

    // Sufficient statistics, accumulated in chunks.
    std::vector<std::vector<Matrix>> grams(nb);
    std::vector<std::vector<std::vector<double>>> rhs(nb);
    for (std::size_t j = 0; j < nb; ++j) {
        grams[j].assign(layout.sizes[j], Matrix(d, d));
        rhs[j].assign(layout.sizes[j], std::vector<double>(d, 0.0));
    }
    constexpr std::size_t kChunk = 512;
    for (std::size_t lo = 0; lo < m; lo += kChunk) {
        const std::size_t hi = std::min(m, lo + kChunk);
        std::vector<const Transition*> chunk;
        for (std::size_t i = lo; i < hi; ++i)
            chunk.push_back(&buffer.at(i));
        const auto u = td_target_bayes(chunk, net, target, post, layout, gamma);
        const Matrix phi = net.predict(stack(chunk, false));
        for (std::size_t j = 0; j < nb; ++j) {
            for (std::size_t a = 0; a < layout.sizes[j]; ++a) {
                std::vector<std::size_t> rows;
                for (std::size_t i = lo; i < hi; ++i)
                    if (keep[j][i] && chunk[i - lo]->a[j] == static_cast<int>(a))
                        rows.push_back(i - lo);
                if (rows.empty())
                    continue;
                Matrix x(rows.size(), d);
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    const auto src = phi.row(rows[r]).subspan(j * d, d);
                    std::copy(src.begin(), src.end(), x.row(r).begin());
                    simd::axpy(u[rows[r]], src, rhs[j][a]);
                }
                const Matrix g = linalg::gram(x);
                simd::axpy(1.0, g.data, grams[j][a].data);
            }
        }
    }

    const double s2 = post.sigma_eps() * post.sigma_eps();
    for (std::size_t j = 0; j < nb; ++j)
        for (std::size_t a = 0; a < layout.sizes[j]; ++a) {
            if (used[j][a] == 0) {
                post.reset_to_prior(j, a);
                continue;
            }
            for (double& v : rhs[j][a])
                v /= s2;
            SubActionPosterior& p = post.at(j, a);
            Matrix precision =
                p.prior_mu.empty()
                    ? precision_from(grams[j][a], post.sigma_eps(), post.prior_sigma())
                    : informative_precision(grams[j][a], post.sigma_eps(), p.prior_mu, p.prior_precision, rhs[j][a]);
            BlrFit fit = solve_posterior(std::move(precision), rhs[j][a]);
            p.mu = std::move(fit.mu);
            p.sigma = std::move(fit.sigma);
            p.num_samples = used[j][a];
        }
}

// ---- agent ----

std::string to_string(AgentMode m)
{
    return m == AgentMode::Bayes ? "bayes" : "egreedy";
}

AgentMode agent_mode_from_string(const std::string& s)
{
    if (s == "bayes")
        return AgentMode::Bayes;
    if (s == "egreedy")
        return AgentMode::EGreedy;
    throw ValidationError("unknown agent mode '" + s + "' (expected bayes or egreedy)");
}

AgentConfig agent_config_from_json(const nlohmann::json& j, AgentConfig c)
{
    if (!j.is_object())
        throw ValidationError("agent config must be an object");
    if (j.contains("mode"))
        c.mode = agent_mode_from_string(j.at("mode").get<std::string>());
    c.batch_size = j.value("batch_size", c.batch_size);
    c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
    c.lr = j.value("lr", c.lr);
    c.gamma = j.value("gamma", c.gamma);
    c.T_p = j.value("T_p", c.T_p);
    c.T_g = j.value("T_g", c.T_g);
    c.T_s = j.value("T_s", c.T_s);
    c.sigma_eps = j.value("sigma_eps", c.sigma_eps);
    c.prior_sigma = j.value("prior_sigma", c.prior_sigma);
    c.eps_max = j.value("eps_max", c.eps_max);
    c.eps_min = j.value("eps_min", c.eps_min);
    c.eps_decay_episodes = j.value("eps_decay_episodes", c.eps_decay_episodes);
    c.seed = j.value("seed", c.seed);
    c.pretrained_checkpoint = j.value("pretrained_checkpoint", c.pretrained_checkpoint);
    c.trunk = j.value("trunk", c.trunk);
    c.features = j.value("features", c.features);
    c.blr_cap = j.value("blr_cap", c.blr_cap);

    if (c.batch_size == 0 || c.buffer_capacity < c.batch_size)
        throw ValidationError("batch_size must be positive and no larger than buffer_capacity");
    if (c.T_p == 0 || c.T_g == 0 || c.T_s == 0)
        throw ValidationError("T_p, T_g and T_s must be positive");
    if (!(c.gamma > 0.0 && c.gamma <= 1.0))
        throw ValidationError("gamma must be in (0, 1]");
    if (!(c.eps_min >= 0.0 && c.eps_min <= c.eps_max && c.eps_max <= 1.0))
        throw ValidationError("need 0 <= eps_min <= eps_max <= 1");
    if (!(c.lr > 0.0) || !(c.sigma_eps > 0.0) || !(c.prior_sigma > 0.0))
        throw ValidationError("lr, sigma_eps and prior_sigma must be positive");
    if (c.features == 0 || c.blr_cap == 0 || c.eps_decay_episodes <= 0)
        throw ValidationError("features, blr_cap and eps_decay_episodes must be positive");
    return c;
}

nlohmann::json agent_config_to_json(const AgentConfig& c)
{
    return {{"mode", to_string(c.mode)},
            {"batch_size", c.batch_size},
            {"buffer_capacity", c.buffer_capacity},
            {"lr", c.lr},
            {"gamma", c.gamma},
            {"T_p", c.T_p},
            {"T_g", c.T_g},
            {"T_s", c.T_s},
            {"sigma_eps", c.sigma_eps},
            {"prior_sigma", c.prior_sigma},
            {"eps_max", c.eps_max},
            {"eps_min", c.eps_min},
            {"eps_decay_episodes", c.eps_decay_episodes},
            {"seed", c.seed},
            {"pretrained_checkpoint", c.pretrained_checkpoint},
            {"trunk", c.trunk},
            {"features", c.features},
            {"blr_cap", c.blr_cap}};
}

namespace {

std::mt19937_64 agent_rng(std::uint64_t seed)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xa9e7u};
    return std::mt19937_64(seq);
}

constexpr std::uint64_t kAgentVersion = 2;

} // namespace

Agent::Agent(const ActionSpace& space, std::size_t state_size, AgentConfig config)
    : config_(std::move(config)), layout_(BranchLayout::from(space)), buffer_(config_.buffer_capacity),
      rng_(agent_rng(config_.seed))
{
    shape_.input = state_size;
    shape_.trunk = config_.trunk;
    shape_.features = config_.features;
    shape_.branch_sizes = layout_.sizes;
    shape_.mode = config_.mode == AgentMode::Bayes ? HeadMode::Features : HeadMode::Linear;
    net_ = BranchingQNet(shape_, config_.seed);
    target_ = net_.clone();
    adam_ = AdamState(net_, AdamConfig{config_.lr});
    if (config_.mode == AgentMode::Bayes) {
        post_ = PosteriorSet(layout_.sizes, config_.features, config_.sigma_eps, config_.prior_sigma);
        thompson_sample(post_, rng_);
    }
    epsilon_ = config_.eps_max;
    if (!config_.pretrained_checkpoint.empty()) {
        load(config_.pretrained_checkpoint);
        if (config_.mode == AgentMode::Bayes)
            post_.adopt_as_prior();
    }
}

void Agent::begin_episode(int episode)
{
    const double frac = std::min(1.0, static_cast<double>(episode) / config_.eps_decay_episodes);
    epsilon_ = std::max(config_.eps_min, config_.eps_max - (config_.eps_max - config_.eps_min) * frac);
}

void Agent::begin_slot()
{
    if (config_.mode == AgentMode::Bayes && count_ % config_.T_p == 0 && !buffer_.empty())
        update_posteriors_now();
}

std::vector<int> Agent::act(std::span<const double> state)
{
    if (config_.mode == AgentMode::Bayes)
        return select_action_thompson(net_, post_, state, WeightKind::Sampled);
    return select_action_egreedy(net_, state, epsilon_, rng_);
}

std::vector<int> Agent::greedy(std::span<const double> state) const
{
    if (config_.mode == AgentMode::Bayes)
        return select_action_thompson(net_, post_, state, WeightKind::Mean);
    return argmax_per_branch(net_.predict(state), layout_.sizes);
}

std::optional<double> Agent::end_slot(Transition t)
{
    if (t.a.size() != layout_.sizes.size())
        throw DimensionError("transition action does not match the branch layout");
    buffer_.push(std::move(t));
    std::optional<double> loss;
    if (buffer_.size() >= config_.batch_size) {
        const auto idx = buffer_.sample(config_.batch_size, rng_);
        std::vector<const Transition*> batch;
        batch.reserve(idx.size());
        for (std::size_t i : idx)
            batch.push_back(&buffer_.at(i));
        loss = config_.mode == AgentMode::Bayes
                   ? train_step_bayes(net_, target_, post_, adam_, batch, layout_, config_.gamma)
                   : train_step_bddqn(net_, target_, adam_, batch, layout_, config_.gamma);
    }
    if (count_ % config_.T_g == 0)
        sync_target();
    if (config_.mode == AgentMode::Bayes && count_ % config_.T_s == 0)
        resample();
    ++count_;
    return loss;
}

void Agent::update_posteriors_now()
{
    update_posteriors(post_, net_, target_, buffer_, layout_, config_.gamma, config_.blr_cap);
}

void Agent::sync_target()
{
    target_ = net_.clone();
    if (config_.mode == AgentMode::Bayes)
        post_.sync_target();
}

void Agent::resample()
{
    thompson_sample(post_, rng_);
}

void Agent::save(const std::string& path) const
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw ValidationError("cannot write checkpoint " + path);
    io::write_tag(os, "ORAG");
    io::write_u64(os, kAgentVersion);
    io::write_u64(os, config_.mode == AgentMode::Bayes ? 0 : 1);
    io::write_u64(os, count_);
    io::write_f64(os, epsilon_);
    net_.write(os);
    target_.write(os);
    adam_.write(os);
    if (config_.mode == AgentMode::Bayes)
        post_.write(os);
    if (!os)
        throw ValidationError("failed writing checkpoint " + path);
}

void Agent::load(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw ValidationError("cannot open checkpoint " + path);
    io::expect_tag(is, "ORAG");
    const std::uint64_t version = io::read_u64(is);
    if (version != kAgentVersion)
        throw ParseError("unsupported agent checkpoint version " + std::to_string(version));
    const AgentMode mode = io::read_u64(is) == 0 ? AgentMode::Bayes : AgentMode::EGreedy;
    if (mode != config_.mode)
        throw ValidationError("checkpoint was written by a " + to_string(mode) + " agent");
    const std::uint64_t count = io::read_u64(is);
    const double eps = io::read_f64(is);
    BranchingQNet net = BranchingQNet::read(is, shape_);
    BranchingQNet target = BranchingQNet::read(is, shape_);
    AdamState adam = AdamState::read(is);
    if (adam.m.size() != 2 * net.layers().size())
        throw ValidationError("checkpoint optimizer state does not match the network");
    PosteriorSet post;
    if (mode == AgentMode::Bayes) {
        post = PosteriorSet::read(is);
        if (post.branch_sizes() != layout_.sizes || post.dim() != config_.features)
            throw ValidationError("checkpoint posteriors do not match the branch layout");
    }
    net_ = std::move(net);
    target_ = std::move(target);
    adam_ = std::move(adam);
    adam_.config.lr = config_.lr;
    post_ = std::move(post);
    count_ = count;
    epsilon_ = eps;
}

// ---- loop ----

namespace {

void accumulate(EpisodeMetrics& m, const StepResult& r)
{
    ++m.slots;
    m.total_reward += r.reward;
    m.costs += r.costs;
}

void finish(EpisodeMetrics& m)
{
    m.mean_reward = m.slots > 0 ? m.total_reward / m.slots : 0.0;
    m.penalty_total = m.costs.penalty_total();
}

} // namespace

std::vector<EpisodeMetrics> run_training(Environment& env, Agent& agent, const EpisodeSource& demands, int episodes,
                                         const TrainingHooks& hooks, int first_episode)
{
    std::vector<EpisodeMetrics> log;
    const ActionSpace& space = env.action_space();
    try {
        for (int e = first_episode; e < first_episode + episodes; ++e) {
            agent.begin_episode(e);
            State s = env.reset(demands(e), static_cast<std::uint64_t>(e));
            std::vector<double> enc = env.encode_state(s);
            EpisodeMetrics m;
            m.episode = e;
            m.epsilon = agent.epsilon();
            double loss_sum = 0.0;
            int loss_n = 0;
            while (true) {
                agent.begin_slot();
                std::vector<int> sub = agent.act(enc);
                const StepResult r = env.step(space.unflatten(sub));
                std::vector<double> enc_next = env.encode_state(r.next);
                if (hooks.on_step)
                    hooks.on_step(StepRecord{e, s.t, sub, r.reward, r.costs});
                if (auto loss = agent.end_slot(Transition{enc, sub, r.reward, enc_next, r.terminal})) {
                    loss_sum += *loss;
                    ++loss_n;
                }
                accumulate(m, r);
                s = r.next;
                enc = std::move(enc_next);
                if (r.terminal)
                    break;
            }
            m.mean_loss = loss_n > 0 ? loss_sum / loss_n : 0.0;
            finish(m);
            log.push_back(m);
            if (hooks.on_episode)
                hooks.on_episode(m);
        }
    } catch (...) {
        if (!hooks.crash_checkpoint.empty()) {
            try {
                agent.save(hooks.crash_checkpoint);
                logger().error("training aborted; state saved to {}", hooks.crash_checkpoint);
            } catch (const std::exception& e) {
                logger().error("training aborted and the checkpoint could not be written: {}", e.what());
            }
        }
        throw;
    }
    return log;
}

EpisodeMetrics evaluate_greedy(Environment& env, const Agent& agent, const DemandSeries& demands,
                               std::uint64_t episode_index)
{
    EpisodeMetrics m;
    m.episode = static_cast<int>(episode_index);
    State s = env.reset(demands, episode_index);
    while (true) {
        const auto sub = agent.greedy(env.encode_state(s));
        const StepResult r = env.step(env.action_space().unflatten(sub));
        accumulate(m, r);
        s = r.next;
        if (r.terminal)
            break;
    }
    finish(m);
    return m;
}

} // namespace oranmec
