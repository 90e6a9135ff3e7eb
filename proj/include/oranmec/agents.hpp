#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "oranmec/env.hpp"
#include "oranmec/neural.hpp"

namespace oranmec {

struct Transition {
    std::vector<double> s;
    std::vector<int> a; // flattened sub-action indices
    double r = 0.0;
    std::vector<double> s_next;
    bool terminal = false;
};

// Fixed-capacity ring; the oldest transition is overwritten first.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return items_.empty(); }
    std::uint64_t total_pushed() const { return pushed_; }

    // i = 0 is the oldest stored transition.
    const Transition& at(std::size_t i) const;
    // n distinct indices, uniformly at random.
    std::vector<std::size_t> sample(std::size_t n, std::mt19937_64& rng) const;

private:
    std::size_t capacity_;
    std::vector<Transition> items_;
    std::size_t head_ = 0; // next slot to overwrite once full
    std::uint64_t pushed_ = 0;
};

// Branch sizes with the 1/(K M_k) weights of the branch-averaged target.
struct BranchLayout {
    std::vector<std::size_t> sizes;
    std::vector<double> weight;

    static BranchLayout from(const ActionSpace& space);
    // Single BS with the given branch sizes.
    static BranchLayout single_bs(std::vector<std::size_t> sizes);
    std::size_t num_branches() const { return sizes.size(); }
};

// Per-branch argmax over concatenated rows; ties go to the lowest index.
std::vector<int> argmax_per_branch(std::span<const double> row, const std::vector<std::size_t>& sizes);

// ---- Bayesian linear regression over last-layer features ----

struct BlrFit {
    std::vector<double> mu;
    Matrix sigma;
};

// Posterior of y = w^T phi + e, e ~ N(0, sigma_eps^2), w ~ N(0, prior_sigma I).
BlrFit blr_fit(const Matrix& phi, std::span<const double> u, double sigma_eps, double prior_sigma);
// Same with w ~ N(prior_mu, prior_precision^-1).
BlrFit blr_fit(const Matrix& phi, std::span<const double> u, double sigma_eps, std::span<const double> prior_mu,
               const Matrix& prior_precision);

struct SubActionPosterior {
    std::vector<double> mu;
    Matrix sigma;
    std::vector<double> omega;        // sampled weights
    std::vector<double> omega_target; // weights used by target evaluation
    std::size_t num_samples = 0;
    // Informative prior; empty means N(0, prior_sigma I).
    std::vector<double> prior_mu;
    Matrix prior_precision;
};

// One posterior per sub-action of every branch.
class PosteriorSet {
public:
    PosteriorSet() = default;
    PosteriorSet(std::vector<std::size_t> branch_sizes, std::size_t dim, double sigma_eps, double prior_sigma);

    std::size_t dim() const { return dim_; }
    double sigma_eps() const { return sigma_eps_; }
    double prior_sigma() const { return prior_sigma_; }
    const std::vector<std::size_t>& branch_sizes() const { return sizes_; }
    std::size_t num_branches() const { return sizes_.size(); }

    SubActionPosterior& at(std::size_t branch, std::size_t sub) { return post_[branch][sub]; }
    const SubActionPosterior& at(std::size_t branch, std::size_t sub) const { return post_[branch][sub]; }

    void reset_to_prior(std::size_t branch, std::size_t sub);
    // Current posteriors become the priors of later refits.
    void adopt_as_prior();
    // omega_target <- mu everywhere.
    void sync_target();

    void write(std::ostream& os) const;
    static PosteriorSet read(std::istream& is);

private:
    std::vector<std::size_t> sizes_;
    std::size_t dim_ = 0;
    double sigma_eps_ = 1.0;
    double prior_sigma_ = 1.0;
    std::vector<std::vector<SubActionPosterior>> post_;
};

// omega ~ N(mu, sigma) via a Cholesky factor of sigma.
std::vector<double> sample_gaussian(std::span<const double> mu, const Matrix& sigma, std::mt19937_64& rng);
void thompson_sample(PosteriorSet& post, std::mt19937_64& rng);

enum class WeightKind { Sampled, Mean, Target };

// Linear scores w_a^T phi_j for every sub-action, laid out like a Q row.
std::vector<double> posterior_scores(std::span<const double> features, const PosteriorSet& post, WeightKind which);

// ---- action selection ----

std::vector<int> select_action_egreedy(const BranchingQNet& net, std::span<const double> state, double epsilon,
                                       std::mt19937_64& rng);
std::vector<int> select_action_thompson(const BranchingQNet& net, const PosteriorSet& post,
                                        std::span<const double> state, WeightKind which = WeightKind::Sampled);

// ---- TD targets ----

// Single-head double-DQN target.
double td_target_ddqn(std::span<const double> q_next_online, std::span<const double> q_next_target, double r,
                      double gamma, bool terminal);

// Branch-averaged double-DQN target for every transition of the batch.
std::vector<double> td_target_bddqn(const std::vector<const Transition*>& batch, const BranchingQNet& net,
                                    const BranchingQNet& target, const BranchLayout& layout, double gamma);

// Online features + sampled weights pick the sub-action, target features +
// target weights score it.
std::vector<double> td_target_bayes(const std::vector<const Transition*>& batch, const BranchingQNet& net,
                                    const BranchingQNet& target, const PosteriorSet& post,
                                    const BranchLayout& layout, double gamma);

// ---- gradient steps ----

// One Adam step on the branch-averaged squared TD error. Returns the loss.
double train_step_bddqn(BranchingQNet& net, const BranchingQNet& target, AdamState& adam,
                        const std::vector<const Transition*>& batch, const BranchLayout& layout, double gamma);

// Same loss with Q = mu^T phi.
double train_step_bayes(BranchingQNet& net, const BranchingQNet& target, const PosteriorSet& post, AdamState& adam,
                        const std::vector<const Transition*>& batch, const BranchLayout& layout, double gamma);

// Refits every sub-action posterior from the buffer, with targets recomputed
// by the current target network. Each per-sub-action dataset keeps only its
// `cap` most recent transitions; empty datasets fall back to the prior.
void update_posteriors(PosteriorSet& post, const BranchingQNet& net, const BranchingQNet& target,
                       const ReplayBuffer& buffer, const BranchLayout& layout, double gamma,
                       std::size_t cap = 10'000);

// ---- agent ----

enum class AgentMode { Bayes, EGreedy };

std::string to_string(AgentMode m);
AgentMode agent_mode_from_string(const std::string& s);

struct AgentConfig {
    AgentMode mode = AgentMode::Bayes;
    std::size_t batch_size = 128;
    std::size_t buffer_capacity = 1'000'000;
    double lr = 1e-4;
    double gamma = 1.0;
    std::uint64_t T_p = 1440;
    std::uint64_t T_g = 1440;
    std::uint64_t T_s = 144;
    double sigma_eps = 1.0;
    double prior_sigma = 1.0;
    double eps_max = 1.0;
    double eps_min = 0.05;
    int eps_decay_episodes = 100;
    std::uint64_t seed = 0;
    std::string pretrained_checkpoint;
    std::vector<std::size_t> trunk{256, 256};
    std::size_t features = 128;
    std::size_t blr_cap = 10'000;
};

AgentConfig agent_config_from_json(const nlohmann::json& j, AgentConfig base = {});
nlohmann::json agent_config_to_json(const AgentConfig& c);

class Agent {
public:
    Agent(const ActionSpace& space, std::size_t state_size, AgentConfig config);

    const AgentConfig& config() const { return config_; }
    AgentMode mode() const { return config_.mode; }
    std::uint64_t count() const { return count_; }
    double epsilon() const { return epsilon_; }

    // Sets the exploration rate for the episode (egreedy).
    void begin_episode(int episode);
    // Slot prologue: posterior refresh when the counter says so.
    void begin_slot();
    // Behaviour policy.
    std::vector<int> act(std::span<const double> state);
    // Exploitation policy: argmax Q, or argmax mu^T phi.
    std::vector<int> greedy(std::span<const double> state) const;
    // Slot epilogue: store, train, sync, resample, advance the counter.
    // Returns the training loss when a gradient step ran.
    std::optional<double> end_slot(Transition t);

    const BranchingQNet& net() const { return net_; }
    BranchingQNet& net() { return net_; }
    const BranchingQNet& target() const { return target_; }
    const PosteriorSet& posteriors() const { return post_; }
    PosteriorSet& posteriors() { return post_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    const BranchLayout& layout() const { return layout_; }

    void update_posteriors_now();
    void sync_target();
    void resample();

    // Networks, optimizer and posteriors; the replay buffer is not saved.
    void save(const std::string& path) const;
    void load(const std::string& path);

private:
    AgentConfig config_;
    BranchLayout layout_;
    NetShape shape_;
    BranchingQNet net_;
    BranchingQNet target_;
    AdamState adam_;
    PosteriorSet post_;
    ReplayBuffer buffer_;
    std::mt19937_64 rng_;
    std::uint64_t count_ = 0;
    double epsilon_ = 1.0;
};

// ---- training loop ----

struct EpisodeMetrics {
    int episode = 0;
    int slots = 0;
    double total_reward = 0.0;
    double mean_reward = 0.0;
    CostBreakdown costs; // sums over the episode
    double penalty_total = 0.0;
    double mean_loss = 0.0;
    double epsilon = 0.0;
};

struct StepRecord {
    int episode = 0;
    int t = 0;
    std::vector<int> action;
    double reward = 0.0;
    CostBreakdown costs;
};

struct TrainingHooks {
    std::function<void(const EpisodeMetrics&)> on_episode;
    std::function<void(const StepRecord&)> on_step;
    // Written when the loop aborts on an exception, before rethrowing.
    std::string crash_checkpoint;
};

using EpisodeSource = std::function<DemandSeries(int episode)>;

std::vector<EpisodeMetrics> run_training(Environment& env, Agent& agent, const EpisodeSource& demands, int episodes,
                                         const TrainingHooks& hooks = {}, int first_episode = 0);

// One episode under the agent's greedy policy, no learning.
EpisodeMetrics evaluate_greedy(Environment& env, const Agent& agent, const DemandSeries& demands,
                               std::uint64_t episode_index = 0);

} // namespace oranmec
