#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "oranmec/agents.hpp"
#include "oranmec/env.hpp"
#include "oranmec/topology.hpp"
#include "oranmec/workload.hpp"

namespace oranmec {

struct WorkloadSource {
    enum class Kind { Trace, Synthetic, Constant };
    Kind kind = Kind::Synthetic;
    std::string trace_path;
    SynthParams synth;
    DemandSlot constant; // Kind::Constant: demands of every slot
    int episode_slots = kSlotsPerDay;
};

struct ExperimentConfig {
    TopologyConfig topology = default_cluster();
    WorkloadSource workload;
    ActionDomains domains = ActionDomains::uniform(16, 2);
    std::vector<ServiceClass> services{{true, 1.0}, {false, 1.0}};
    RewardConfig reward;
    AffineUtilizationParams utilization;
    nlohmann::json split_overrides = nlohmann::json::object();
    double max_delay_ms = 1000.0;
    bool strict_demand = false;
    AgentConfig agent;
    int episodes = 300;
    std::vector<std::uint64_t> seeds{0};
    std::string out_dir = "runs";
    bool log_steps = false;
};

// Relative paths inside the config resolve against base_dir.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::string& path);

EnvConfig make_env_config(const ExperimentConfig& cfg, std::uint64_t seed);
// Full demand series of the workload.
DemandSeries workload_series(const ExperimentConfig& cfg, int num_bs, int num_mec_classes);
// Episode e takes the e-th window of episode_slots slots, wrapping around.
EpisodeSource episode_source(DemandSeries series, int episode_slots);

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<EpisodeMetrics> metrics;
    std::optional<int> convergence_episode; // 1-based
    std::string metrics_path;
    std::string checkpoint_path;
};

// Trains one agent per seed, writing <out>/<mode>_seed<N>.csv and .ckpt.
// The metrics file is appended episode by episode so a failed run keeps what
// it finished.
std::vector<SeedResult> run_experiment(const ExperimentConfig& cfg);

// Reloads a finished seed's checkpoint and plays episode 0 greedily.
EpisodeMetrics evaluate_checkpoint(const ExperimentConfig& cfg, const SeedResult& result);

struct OracleResult {
    Action best;
    std::vector<int> best_flat;
    double mean_reward = 0.0;   // per slot, stationary policy over the episode
    CostBreakdown mean_costs;   // per slot
    std::uint64_t evaluated = 0;
};

// Exhaustive search for the best stationary action on the first episode.
OracleResult run_oracle(const ExperimentConfig& cfg, std::uint64_t limit = 1'000'000);

// ---- metrics files ----

struct MetricsRow {
    int episode = 0;
    double total_reward = 0.0;
    double mean_reward = 0.0;
    double penalty_total = 0.0;
};

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const EpisodeMetrics& m, bool converged);
std::vector<MetricsRow> read_metrics(const std::string& path);

// First episode (1-based) from which the mean of the next `window` episodes
// stays within `tolerance` (relative) of `final_mean`.
std::optional<int> convergence_episode(const std::vector<double>& rewards, double final_mean, int window = 10,
                                       double tolerance = 0.05);
// Mean of the last 20% of episodes (at least one).
double final_mean(const std::vector<double>& rewards);

struct RunSummary {
    std::string path;
    int episodes = 0;
    double final_mean = 0.0;
    double diff_pct = 0.0; // relative to the first run
    std::optional<int> convergence_episode;
};

std::vector<RunSummary> compare_runs(const std::vector<std::string>& paths);
std::vector<RunSummary> compare_series(const std::vector<std::vector<double>>& rewards,
                                       const std::vector<std::string>& names);

} // namespace oranmec
