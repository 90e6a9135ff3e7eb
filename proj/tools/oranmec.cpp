#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "oranmec/errors.hpp"
#include "oranmec/harness.hpp"
#include "oranmec/log.hpp"

using namespace oranmec;

namespace {

int cmd_run(const std::string& config, const std::string& mode, std::optional<std::uint64_t> seed,
            std::optional<int> episodes, const std::string& out, const std::string& pretrained, bool eval)
{
    ExperimentConfig cfg = load_experiment_config(config);
    if (!mode.empty())
        cfg.agent.mode = agent_mode_from_string(mode);
    if (seed)
        cfg.seeds = {*seed};
    if (episodes) {
        if (*episodes <= 0)
            throw ValidationError("--episodes must be positive");
        cfg.episodes = *episodes;
    }
    if (!out.empty())
        cfg.out_dir = out;
    if (!pretrained.empty())
        cfg.agent.pretrained_checkpoint = pretrained;

    const auto results = run_experiment(cfg);
    for (const auto& r : results) {
        std::vector<double> rewards;
        for (const auto& m : r.metrics)
            rewards.push_back(m.total_reward);
        std::printf("seed %llu: %zu episodes, final mean reward %.4f, converged at %s -> %s\n",
                    static_cast<unsigned long long>(r.seed), r.metrics.size(), final_mean(rewards),
                    r.convergence_episode ? std::to_string(*r.convergence_episode).c_str() : "-",
                    r.metrics_path.c_str());
        if (eval) {
            const EpisodeMetrics m = evaluate_checkpoint(cfg, r);
            std::printf("  greedy: mean reward per slot %.6f, penalties %.6f\n", m.mean_reward, m.penalty_total);
        }
    }
    return 0;
}

int cmd_oracle(const std::string& config)
{
    const ExperimentConfig cfg = load_experiment_config(config);
    const OracleResult r = run_oracle(cfg);
    std::printf("evaluated %llu actions\n", static_cast<unsigned long long>(r.evaluated));
    std::printf("best mean reward per slot: %.6f\n", r.mean_reward);
    std::printf("best sub-actions:");
    for (int v : r.best_flat)
        std::printf(" %d", v);
    std::printf("\nmean cost per slot: compute %.6f penalty %.6f reconfig %.6f routing %.6f delay %.6f\n",
                r.mean_costs.compute_total(), r.mean_costs.penalty_total(), r.mean_costs.reconfig_total(),
                r.mean_costs.routing, r.mean_costs.elastic_delay_cost);
    return 0;
}

int cmd_compare(const std::vector<std::string>& files)
{
    const auto rows = compare_runs(files);
    std::printf("%-40s %8s %14s %9s %11s\n", "run", "episodes", "final_mean", "diff_%", "converged");
    for (const auto& r : rows)
        std::printf("%-40s %8d %14.4f %9.2f %11s\n", r.path.c_str(), r.episodes, r.final_mean, r.diff_pct,
                    r.convergence_episode ? std::to_string(*r.convergence_episode).c_str() : "-");
    return 0;
}

int cmd_synth(const std::string& out, const SynthParams& p)
{
    write_trace(out, synth_demands(p));
    std::printf("wrote %d slots to %s\n", p.horizon, out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"O-RAN + MEC joint configuration with branching deep Q-learning"};
    app.require_subcommand(1);

    std::string config, mode, out, pretrained;
    std::optional<std::uint64_t> seed;
    std::optional<int> episodes;
    bool eval = false;
    auto* run = app.add_subcommand("run", "train agents as configured");
    run->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--mode", mode, "bayes or egreedy")->check(CLI::IsMember({"bayes", "egreedy"}));
    run->add_option("--seed", seed, "single seed, replacing the configured list");
    run->add_option("--episodes", episodes, "number of episodes");
    run->add_option("--out", out, "output directory");
    run->add_option("--pretrained", pretrained, "checkpoint to start from")->check(CLI::ExistingFile);
    run->add_flag("--eval", eval, "report the greedy policy of each trained agent");

    auto* oracle = app.add_subcommand("oracle", "exhaustive best stationary action (single BS)");
    oracle->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

    std::vector<std::string> files;
    auto* compare = app.add_subcommand("compare", "summarize metric files");
    compare->add_option("files", files, "metric CSV files")->required()->expected(2, -1);

    SynthParams synth;
    int days = 1;
    auto* gen = app.add_subcommand("synth", "write a synthetic demand trace");
    gen->add_option("--out", out, "trace path")->required();
    gen->add_option("--seed", synth.seed, "noise seed");
    gen->add_option("--days", days, "days of 144 slots")->check(CLI::PositiveNumber);
    gen->add_option("--num-bs", synth.num_bs, "base stations")->check(CLI::PositiveNumber);
    gen->add_option("--classes", synth.num_mec_classes, "MEC classes")->check(CLI::NonNegativeNumber);
    gen->add_option("--peak", synth.peak_gbps, "peak demand (Gbps)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run)
            return cmd_run(config, mode, seed, episodes, out, pretrained, eval);
        if (*oracle)
            return cmd_oracle(config);
        if (*compare)
            return cmd_compare(files);
        if (*gen) {
            synth.horizon = days * kSlotsPerDay;
            return cmd_synth(out, synth);
        }
    } catch (const OracleTooLarge& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
