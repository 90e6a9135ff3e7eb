#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oranmec/splits.hpp"
#include "oranmec/topology.hpp"
#include "oranmec/workload.hpp"

namespace oranmec {

// Finite domains of the per-BS control variables.
struct ActionDomains {
    std::vector<SplitId> splits{kAllSplits.begin(), kAllSplits.end()};
    std::vector<double> flavors_rc;                 // DU/CU flavors
    std::vector<std::vector<double>> mec_flavors_rc; // per MEC class

    // {0, 1, ..., n-1} RC for DU/CU and every MEC class.
    static ActionDomains uniform(int num_flavors, int num_mec_classes);
};

// Sub-action indices for one BS. Every field indexes into its domain:
// split into ActionDomains::splits, flavors into the flavor lists, servers
// into Topology::du_servers()/cu_servers(). mec_at_cu is 1 when MEC class c
// runs next to the CU, 0 when it runs next to the DU.
struct BsAction {
    int split = 0;
    int du_flavor = 0;
    int cu_flavor = 0;
    std::vector<int> mec_flavor;
    int du_server = 0;
    int cu_server = 0;
    std::vector<int> mec_at_cu;

    bool operator==(const BsAction&) const = default;
};

struct Action {
    std::vector<BsAction> bs;

    bool operator==(const Action&) const = default;
};

// Branch layout of the per-BS decomposition. Per BS the branches are, in
// order: split, DU flavor, CU flavor, MEC flavor per class, DU server,
// CU server, MEC placement per class.
class ActionSpace {
public:
    ActionSpace(ActionDomains domains, int num_bs, int num_du_servers, int num_cu_servers);

    const ActionDomains& domains() const { return domains_; }
    int num_bs() const { return num_bs_; }
    int num_mec_classes() const { return static_cast<int>(domains_.mec_flavors_rc.size()); }
    int branches_per_bs() const { return 5 + 2 * num_mec_classes(); }
    int num_branches() const { return num_bs_ * branches_per_bs(); }

    // |A_km| for every branch, BS-major.
    const std::vector<std::size_t>& branch_sizes() const { return branch_sizes_; }
    // Owning BS of every branch.
    const std::vector<int>& branch_bs() const { return branch_bs_; }

    // Sum of |A_km|: output count of a branching network.
    std::size_t total_outputs() const;
    // Product of |A_km|: size of the joint action set (saturates at UINT64_MAX).
    std::uint64_t joint_cardinality() const;
    std::uint64_t per_bs_cardinality() const;

    std::vector<int> flatten(const Action& a) const;
    Action unflatten(std::span<const int> sub_actions) const;
    bool contains(const Action& a) const;

    SplitId split(const BsAction& a) const { return domains_.splits[a.split]; }
    double du_rc(const BsAction& a) const { return domains_.flavors_rc[a.du_flavor]; }
    double cu_rc(const BsAction& a) const { return domains_.flavors_rc[a.cu_flavor]; }
    double mec_rc(const BsAction& a, int c) const { return domains_.mec_flavors_rc[c][a.mec_flavor[c]]; }

private:
    ActionDomains domains_;
    int num_bs_;
    int num_du_;
    int num_cu_;
    std::vector<std::size_t> branch_sizes_;
    std::vector<int> branch_bs_;
};

struct ServiceClass {
    bool inelastic = false;
    double deadline = 1.0; // d_th, in the delay-model units; only for inelastic classes
};

// Cost coefficients ($ per unit) and delay-model parameters.
struct RewardConfig {
    double kappa_dm = 0.25;
    double kappa_cm = 0.125;
    double kappa_d = 5.0;
    double kappa_i = 0.05;
    double kappa_r = 0.05;
    double kappa_h = 1.0;
    double eta = 1.0;
    double delay_coeff = 1.0; // b in B(D) = -b * D
    double delta1 = 1.0;
    double delta2 = 1.0;
    double gamma = 1.0;
};

struct CostBreakdown {
    double compute_du_mec = 0.0;
    double compute_cu_mec = 0.0;
    double sla_underprovision = 0.0;
    double sla_server_capacity = 0.0;
    double sla_split_delay = 0.0;
    double sla_inelastic_delay = 0.0;
    double instantiation = 0.0;
    double reconfig_flavor = 0.0;
    double reconfig_mec_migration = 0.0;
    double reconfig_server_migration = 0.0;
    double routing = 0.0;
    double elastic_delay_cost = 0.0; // D, not part of total
    double total = 0.0;              // J
    double reward = 0.0;

    double compute_total() const { return compute_du_mec + compute_cu_mec; }
    double penalty_total() const
    {
        return sla_underprovision + sla_server_capacity + sla_split_delay + sla_inelastic_delay;
    }
    double reconfig_total() const
    {
        return instantiation + reconfig_flavor + reconfig_mec_migration + reconfig_server_migration;
    }

    CostBreakdown& operator+=(const CostBreakdown& o);
};

struct State {
    int t = 0;
    DemandSlot demand;
    Action previous;

    bool operator==(const State&) const = default;
};

// Actual compute use (RC) per BS.
struct BsUtilization {
    double du = 0.0;
    double cu = 0.0;
    std::vector<double> mec;
};

using Utilization = std::vector<BsUtilization>;

struct EnvConfig {
    std::shared_ptr<const Topology> topology;
    ActionDomains domains;
    std::vector<ServiceClass> services; // MEC classes; index c is service c+1 in demand slots
    RewardConfig reward;
    std::shared_ptr<const UtilizationModel> utilization;
    std::optional<Action> initial_action;
    double max_delay_ms = 1000.0; // stands in for D_kc when a loaded class has no MEC flavor
    bool strict_demand = false;   // throw instead of clipping demands above the cap
    SplitCatalog catalog = SplitCatalog::standard();
    std::uint64_t seed = 0; // utilization noise stream
};

// S1, 1 RC flavors, first DU/CU candidates, MEC next to the DU.
Action default_initial_action(const ActionSpace& space);

// Per-BS MEC delay D_kc for every class, given the action.
std::vector<std::vector<double>> mec_delays(const EnvConfig& cfg, const ActionSpace& space, const DemandSlot& demand,
                                            const Action& a, const Utilization& use);

// Itemized cost of applying `a` in `s` with the given actual utilizations.
CostBreakdown cost_model(const EnvConfig& cfg, const ActionSpace& space, const State& s, const Action& a,
                         const Utilization& use);

struct StepResult {
    State next;
    double reward = 0.0;
    CostBreakdown costs;
    bool terminal = false;
};

class Environment {
public:
    explicit Environment(EnvConfig config);

    const EnvConfig& config() const { return config_; }
    const ActionSpace& action_space() const { return space_; }
    const Topology& topology() const { return *config_.topology; }
    int num_bs() const { return space_.num_bs(); }
    int num_mec_classes() const { return space_.num_mec_classes(); }

    // Starts an episode; the noise stream restarts from the configured seed
    // advanced by `episode`.
    State reset(DemandSeries episode, std::uint64_t episode_index = 0);
    const State& state() const { return state_; }
    bool done() const { return done_; }
    int horizon() const { return static_cast<int>(episode_.size()); }

    // Applies `a` to the current state. Throws EpisodeEnded after the
    // terminal slot.
    StepResult step(const Action& a);

    // Utilization of the current demands under `a` (draws noise).
    Utilization utilization(const State& s, const Action& a);
    CostBreakdown compute_costs(const State& s, const Action& a);

    std::size_t state_size() const;
    std::vector<double> encode_state(const State& s) const;
    // Recovers the previous-configuration fields from an encoded state.
    Action decode_previous(std::span<const double> encoded) const;

private:
    DemandSlot clamp(const DemandSlot& d) const;

    EnvConfig config_;
    ActionSpace space_;
    DemandSeries episode_;
    State state_;
    bool done_ = true;
    Rng noise_rng_;
};

// Exhaustive enumeration of a single-BS joint action space.
class ActionEnumerator {
public:
    ActionEnumerator(const ActionSpace& space, std::uint64_t limit = 1'000'000);

    std::uint64_t cardinality() const { return cardinality_; }
    // Writes the next action; false once every action was produced.
    bool next(Action& out);

private:
    const ActionSpace& space_;
    std::uint64_t cardinality_;
    std::vector<int> digits_;
    bool exhausted_ = false;
};

} // namespace oranmec
