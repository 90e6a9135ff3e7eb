#include "oranmec/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "oranmec/errors.hpp"
#include "oranmec/log.hpp"

namespace oranmec {

namespace {

namespace fs = std::filesystem;

std::string resolve(const std::string& p, const fs::path& base)
{
    if (p.empty() || fs::path(p).is_absolute() || base.empty())
        return p;
    return (base / p).string();
}

RewardConfig reward_from_json(const nlohmann::json& j, RewardConfig r)
{
    r.kappa_dm = j.value("kappa_dm", r.kappa_dm);
    r.kappa_cm = j.value("kappa_cm", r.kappa_cm);
    r.kappa_d = j.value("kappa_d", r.kappa_d);
    r.kappa_i = j.value("kappa_i", r.kappa_i);
    r.kappa_r = j.value("kappa_r", r.kappa_r);
    r.kappa_h = j.value("kappa_h", r.kappa_h);
    r.eta = j.value("eta", r.eta);
    r.delay_coeff = j.value("delay_coeff", r.delay_coeff);
    r.delta1 = j.value("delta1", r.delta1);
    r.delta2 = j.value("delta2", r.delta2);
    r.gamma = j.value("gamma", r.gamma);
    return r;
}

AffineUtilizationParams utilization_from_json(const nlohmann::json& j)
{
    AffineUtilizationParams p;
    p.bbu_base = j.value("bbu_base", p.bbu_base);
    p.bbu_slope = j.value("bbu_slope", p.bbu_slope);
    p.mec_base = j.value("mec_base", p.mec_base);
    p.mec_slope = j.value("mec_slope", p.mec_slope);
    p.noise_std = j.value("noise_std", p.noise_std);
    const std::string platform = j.value("platform", std::string("A"));
    if (platform == "B")
        p = platform_b(p);
    else if (platform != "A")
        throw ValidationError("utilization platform must be A or B");
    return p;
}

ActionDomains domains_from_json(const nlohmann::json& j, std::size_t num_classes)
{
    ActionDomains d;
    if (j.contains("num_flavors")) {
        d = ActionDomains::uniform(j.at("num_flavors").get<int>(), static_cast<int>(num_classes));
    } else {
        d.flavors_rc = j.at("flavors").get<std::vector<double>>();
        if (j.contains("mec_flavors"))
            d.mec_flavors_rc = j.at("mec_flavors").get<std::vector<std::vector<double>>>();
        else
            d.mec_flavors_rc.assign(num_classes, d.flavors_rc);
    }
    if (j.contains("splits")) {
        d.splits.clear();
        for (const auto& s : j.at("splits"))
            d.splits.push_back(split_from_string(s.get<std::string>()));
    }
    return d;
}

WorkloadSource workload_from_json(const nlohmann::json& j, const fs::path& base)
{
    WorkloadSource w;
    const std::string type = j.value("type", std::string("synthetic"));
    w.episode_slots = j.value("episode_slots", w.episode_slots);
    if (type == "trace") {
        w.kind = WorkloadSource::Kind::Trace;
        w.trace_path = resolve(j.at("path").get<std::string>(), base);
        if (!fs::exists(w.trace_path))
            throw ValidationError("trace file not found: " + w.trace_path);
    } else if (type == "synthetic") {
        w.kind = WorkloadSource::Kind::Synthetic;
        w.synth.seed = j.value("seed", w.synth.seed);
        w.synth.horizon = j.value("horizon", w.synth.horizon);
        w.synth.peak_gbps = j.value("peak_gbps", w.synth.peak_gbps);
    } else if (type == "constant") {
        w.kind = WorkloadSource::Kind::Constant;
        const auto legacy = j.at("legacy").get<std::vector<double>>();
        const auto mec = j.at("mec").get<std::vector<std::vector<double>>>();
        if (legacy.empty() || mec.size() != legacy.size())
            throw ValidationError("constant workload needs one legacy value and one MEC row per BS");
        const int classes = static_cast<int>(mec.front().size());
        w.constant = DemandSlot(0, static_cast<int>(legacy.size()), classes + 1);
        for (std::size_t k = 0; k < legacy.size(); ++k) {
            if (static_cast<int>(mec[k].size()) != classes)
                throw ValidationError("constant workload MEC rows differ in length");
            w.constant.at(static_cast<int>(k), 0) = legacy[k];
            for (int c = 0; c < classes; ++c)
                w.constant.at(static_cast<int>(k), c + 1) = mec[k][c];
        }
    } else {
        throw ValidationError("unknown workload type '" + type + "'");
    }
    if (w.episode_slots <= 0)
        throw ValidationError("episode_slots must be positive");
    return w;
}

} // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const fs::path& base)
{
    if (!j.is_object())
        throw ValidationError("experiment config must be a JSON object");
    ExperimentConfig c;
    if (j.contains("topology")) {
        const auto& t = j.at("topology");
        if (t.is_string()) {
            if (t.get<std::string>() != "default")
                throw ValidationError("topology must be \"default\" or an object");
        } else {
            c.topology = topology_config_from_json(t);
        }
    }
    if (j.contains("services")) {
        c.services.clear();
        for (const auto& s : j.at("services"))
            c.services.push_back({s.value("inelastic", false), s.value("deadline", 1.0)});
    }
    if (j.contains("actions"))
        c.domains = domains_from_json(j.at("actions"), c.services.size());
    else
        c.domains = ActionDomains::uniform(16, static_cast<int>(c.services.size()));
    if (j.contains("workload"))
        c.workload = workload_from_json(j.at("workload"), base);
    if (j.contains("reward"))
        c.reward = reward_from_json(j.at("reward"), c.reward);
    if (j.contains("utilization"))
        c.utilization = utilization_from_json(j.at("utilization"));
    if (j.contains("splits"))
        c.split_overrides = j.at("splits");
    c.max_delay_ms = j.value("max_delay_ms", c.max_delay_ms);
    c.strict_demand = j.value("strict_demand", c.strict_demand);
    if (j.contains("agent"))
        c.agent = agent_config_from_json(j.at("agent"), c.agent);
    else
        c.agent = agent_config_from_json(nlohmann::json::object(), c.agent);
    // The reward-side discount follows the agent's.
    c.reward.gamma = c.agent.gamma;
    if (!c.agent.pretrained_checkpoint.empty()) {
        c.agent.pretrained_checkpoint = resolve(c.agent.pretrained_checkpoint, base);
        if (!fs::exists(c.agent.pretrained_checkpoint))
            throw ValidationError("pretrained checkpoint not found: " + c.agent.pretrained_checkpoint);
    }
    c.episodes = j.value("episodes", c.episodes);
    if (j.contains("seeds"))
        c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.out_dir = resolve(j.value("out", c.out_dir), base);
    c.log_steps = j.value("log_steps", c.log_steps);
    if (c.episodes <= 0)
        throw ValidationError("episodes must be positive");
    if (c.seeds.empty())
        throw ValidationError("seeds must be non-empty");
    if (c.domains.mec_flavors_rc.size() != c.services.size())
        throw ValidationError("one MEC flavor domain is required per service class");
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open config " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config " + path + ": " + e.what());
    }
    return experiment_config_from_json(j, fs::path(path).parent_path());
}

EnvConfig make_env_config(const ExperimentConfig& cfg, std::uint64_t seed)
{
    EnvConfig e;
    e.topology = std::make_shared<const Topology>(Topology::build(cfg.topology));
    e.domains = cfg.domains;
    e.services = cfg.services;
    e.reward = cfg.reward;
    e.utilization = std::make_shared<const AffineUtilization>(cfg.utilization);
    e.max_delay_ms = cfg.max_delay_ms;
    e.strict_demand = cfg.strict_demand;
    e.catalog = SplitCatalog::from_json(cfg.split_overrides);
    e.seed = seed;
    return e;
}

DemandSeries workload_series(const ExperimentConfig& cfg, int num_bs, int num_mec_classes)
{
    const WorkloadSource& w = cfg.workload;
    switch (w.kind) {
    case WorkloadSource::Kind::Trace:
        return load_trace(w.trace_path, num_bs, num_mec_classes);
    case WorkloadSource::Kind::Synthetic: {
        SynthParams p = w.synth;
        p.num_bs = num_bs;
        p.num_mec_classes = num_mec_classes;
        return synth_demands(p);
    }
    case WorkloadSource::Kind::Constant:
        if (w.constant.num_bs != num_bs || w.constant.num_services != num_mec_classes + 1)
            throw ValidationError("constant workload does not match the topology and service classes");
        return constant_demands(w.episode_slots, w.constant);
    }
    return {};
}

EpisodeSource episode_source(DemandSeries series, int episode_slots)
{
    if (series.empty())
        throw ValidationError("workload has no slots");
    if (episode_slots <= 0)
        throw ValidationError("episode_slots must be positive");
    auto shared = std::make_shared<const DemandSeries>(std::move(series));
    return [shared, episode_slots](int episode) {
        const std::size_t n = shared->size();
        DemandSeries out;
        out.reserve(episode_slots);
        const std::size_t start = (static_cast<std::size_t>(episode) * episode_slots) % n;
        for (int t = 0; t < episode_slots; ++t) {
            DemandSlot s = (*shared)[(start + t) % n];
            s.t = t;
            out.push_back(std::move(s));
        }
        return out;
    };
}

// ---- metrics ----

void write_metrics_header(std::ostream& os)
{
    os << "episode,slots,total_reward,mean_reward,compute_du_mec,compute_cu_mec,sla_underprovision,"
          "sla_server_capacity,sla_split_delay,sla_inelastic_delay,instantiation,reconfig_flavor,"
          "reconfig_mec_migration,reconfig_server_migration,routing,elastic_delay,total_cost,penalty_total,"
          "mean_loss,epsilon,converged\n";
}

void write_metrics_row(std::ostream& os, const EpisodeMetrics& m, bool converged)
{
    const CostBreakdown& c = m.costs;
    char buf[1024];
    std::snprintf(buf, sizeof buf,
                  "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%.17g,%.17g,%d\n",
                  m.episode + 1, m.slots, m.total_reward, m.mean_reward, c.compute_du_mec, c.compute_cu_mec,
                  c.sla_underprovision, c.sla_server_capacity, c.sla_split_delay, c.sla_inelastic_delay,
                  c.instantiation, c.reconfig_flavor, c.reconfig_mec_migration, c.reconfig_server_migration,
                  c.routing, c.elastic_delay_cost, c.total, m.penalty_total, m.mean_loss, m.epsilon,
                  converged ? 1 : 0);
    os << buf;
}

std::vector<MetricsRow> read_metrics(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open metrics file " + path);
    std::string line;
    if (!std::getline(in, line))
        throw ParseError("metrics file is empty", 1);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            header.push_back(cell);
    }
    auto col = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw ParseError("metrics file lacks column '" + name + "'", 1);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t ce = col("episode"), ct = col("total_reward"), cm = col("mean_reward"),
                      cp = col("penalty_total");
    std::vector<MetricsRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " columns", lineno);
        try {
            rows.push_back({std::stoi(cells[ce]), std::stod(cells[ct]), std::stod(cells[cm]), std::stod(cells[cp])});
        } catch (const std::logic_error&) {
            throw ParseError("non-numeric metrics value", lineno);
        }
    }
    return rows;
}

double final_mean(const std::vector<double>& rewards)
{
    if (rewards.empty())
        throw ValidationError("no episodes");
    const std::size_t tail = std::max<std::size_t>(1, rewards.size() / 5);
    double s = 0.0;
    for (std::size_t i = rewards.size() - tail; i < rewards.size(); ++i)
        s += rewards[i];
    return s / static_cast<double>(tail);
}

std::optional<int> convergence_episode(const std::vector<double>& rewards, double target, int window,
                                       double tolerance)
{
    const std::size_t n = rewards.size();
    for (std::size_t e = 0; e < n; ++e) {
        const std::size_t end = std::min(n, e + static_cast<std::size_t>(window));
        double s = 0.0;
        for (std::size_t i = e; i < end; ++i)
            s += rewards[i];
        const double avg = s / static_cast<double>(end - e);
        if (std::abs(avg - target) <= tolerance * std::abs(target))
            return static_cast<int>(e) + 1;
    }
    return std::nullopt;
}

std::vector<RunSummary> compare_series(const std::vector<std::vector<double>>& rewards,
                                       const std::vector<std::string>& names)
{
    if (rewards.size() < 2)
        throw ValidationError("compare needs at least two runs");
    std::vector<RunSummary> out;
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        if (rewards[i].size() != rewards[0].size())
            throw ValidationError("runs have different episode counts (" + std::to_string(rewards[0].size()) +
                                  " vs " + std::to_string(rewards[i].size()) + ")");
        RunSummary s;
        s.path = i < names.size() ? names[i] : std::to_string(i);
        s.episodes = static_cast<int>(rewards[i].size());
        s.final_mean = final_mean(rewards[i]);
        s.convergence_episode = convergence_episode(rewards[i], s.final_mean);
        out.push_back(s);
    }
    const double base = out.front().final_mean;
    for (auto& s : out)
        s.diff_pct = base == 0.0 ? (s.final_mean == 0.0 ? 0.0 : INFINITY) : 100.0 * (s.final_mean - base) / std::abs(base);
    return out;
}

std::vector<RunSummary> compare_runs(const std::vector<std::string>& paths)
{
    std::vector<std::vector<double>> rewards;
    for (const auto& p : paths) {
        std::vector<double> r;
        for (const auto& row : read_metrics(p))
            r.push_back(row.total_reward);
        rewards.push_back(std::move(r));
    }
    return compare_series(rewards, paths);
}

// ---- runs ----

std::vector<SeedResult> run_experiment(const ExperimentConfig& cfg)
{
    fs::create_directories(cfg.out_dir);
    std::vector<SeedResult> results;
    for (std::uint64_t seed : cfg.seeds) {
        Environment env(make_env_config(cfg, seed));
        AgentConfig ac = cfg.agent;
        ac.seed = seed;
        Agent agent(env.action_space(), env.state_size(), ac);
        auto source = episode_source(workload_series(cfg, env.num_bs(), env.num_mec_classes()),
                                     cfg.workload.episode_slots);

        SeedResult res;
        res.seed = seed;
        const std::string stem = (fs::path(cfg.out_dir) / (to_string(ac.mode) + "_seed" + std::to_string(seed))).string();
        res.metrics_path = stem + ".csv";
        res.checkpoint_path = stem + ".ckpt";

        std::ofstream metrics(res.metrics_path, std::ios::trunc);
        if (!metrics)
            throw ValidationError("cannot write " + res.metrics_path);
        write_metrics_header(metrics);
        std::ofstream steps;
        if (cfg.log_steps) {
            steps.open(stem + "_steps.csv", std::ios::trunc);
            steps << "episode,step,reward,total_cost,elastic_delay,penalty_total,reconfig_total,routing,action\n";
        }

        TrainingHooks hooks;
        hooks.crash_checkpoint = stem + "_crash.ckpt";
        hooks.on_episode = [&](const EpisodeMetrics& m) {
            write_metrics_row(metrics, m, false);
            metrics.flush();
            logger().info("seed {} episode {}: reward {:.4f}", seed, m.episode + 1, m.total_reward);
        };
        if (cfg.log_steps)
            hooks.on_step = [&](const StepRecord& r) {
                char buf[256];
                std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,", r.episode + 1, r.t, r.reward,
                              r.costs.total, r.costs.elastic_delay_cost, r.costs.penalty_total(),
                              r.costs.reconfig_total(), r.costs.routing);
                steps << buf;
                for (std::size_t i = 0; i < r.action.size(); ++i)
                    steps << (i ? " " : "") << r.action[i];
                steps << '\n';
            };
        res.metrics = run_training(env, agent, source, cfg.episodes, hooks);
        agent.save(res.checkpoint_path);

        // Rewrite with the convergence marker now that the run is complete.
        std::vector<double> rewards;
        for (const auto& m : res.metrics)
            rewards.push_back(m.total_reward);
        res.convergence_episode = convergence_episode(rewards, final_mean(rewards));
        metrics.close();
        std::ofstream final_file(res.metrics_path, std::ios::trunc);
        write_metrics_header(final_file);
        for (const auto& m : res.metrics)
            write_metrics_row(final_file, m,
                              res.convergence_episode && m.episode + 1 >= *res.convergence_episode);
        results.push_back(std::move(res));
    }
    return results;
}

EpisodeMetrics evaluate_checkpoint(const ExperimentConfig& cfg, const SeedResult& result)
{
    Environment env(make_env_config(cfg, result.seed));
    AgentConfig ac = cfg.agent;
    ac.seed = result.seed;
    ac.pretrained_checkpoint = result.checkpoint_path;
    const Agent agent(env.action_space(), env.state_size(), ac);
    const auto episode =
        episode_source(workload_series(cfg, env.num_bs(), env.num_mec_classes()), cfg.workload.episode_slots)(0);
    return evaluate_greedy(env, agent, episode);
}

OracleResult run_oracle(const ExperimentConfig& cfg, std::uint64_t limit)
{
    Environment env(make_env_config(cfg, cfg.seeds.front()));
    const ActionSpace& space = env.action_space();
    ActionEnumerator it(space, limit);
    const DemandSeries episode =
        episode_source(workload_series(cfg, env.num_bs(), env.num_mec_classes()), cfg.workload.episode_slots)(0);

    OracleResult best;
    bool have = false;
    Action a;
    while (it.next(a)) {
        ++best.evaluated;
        env.reset(episode, 0);
        double total = 0.0;
        CostBreakdown costs;
        while (true) {
            const StepResult r = env.step(a);
            total += r.reward;
            costs += r.costs;
            if (r.terminal)
                break;
        }
        const double mean = total / env.horizon();
        if (!have || mean > best.mean_reward) {
            have = true;
            best.best = a;
            best.mean_reward = mean;
            best.mean_costs = costs;
        }
    }
    const double h = env.horizon();
    CostBreakdown& m = best.mean_costs;
    for (double* v : {&m.compute_du_mec, &m.compute_cu_mec, &m.sla_underprovision, &m.sla_server_capacity,
                      &m.sla_split_delay, &m.sla_inelastic_delay, &m.instantiation, &m.reconfig_flavor,
                      &m.reconfig_mec_migration, &m.reconfig_server_migration, &m.routing, &m.elastic_delay_cost,
                      &m.total, &m.reward})
        *v /= h;
    best.best_flat = space.flatten(best.best);
    return best;
}

} // namespace oranmec
