#include "oranmec/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "oranmec/errors.hpp"
#include "oranmec/log.hpp"

namespace oranmec {

ActionDomains ActionDomains::uniform(int num_flavors, int num_mec_classes)
{
    ActionDomains d;
    for (int i = 0; i < num_flavors; ++i)
        d.flavors_rc.push_back(static_cast<double>(i));
    d.mec_flavors_rc.assign(num_mec_classes, d.flavors_rc);
    return d;
}

ActionSpace::ActionSpace(ActionDomains domains, int num_bs, int num_du_servers, int num_cu_servers)
    : domains_(std::move(domains)), num_bs_(num_bs), num_du_(num_du_servers), num_cu_(num_cu_servers)
{
    if (num_bs_ <= 0 || num_du_ <= 0 || num_cu_ <= 0)
        throw ValidationError("action space needs at least one BS, DU server and CU server");
    if (domains_.splits.empty() || domains_.flavors_rc.empty())
        throw ValidationError("split and flavor domains must be non-empty");
    for (const auto& f : domains_.mec_flavors_rc)
        if (f.empty())
            throw ValidationError("MEC flavor domains must be non-empty");
    auto nonneg = [](double v) { return v >= 0.0; };
    bool ok = std::all_of(domains_.flavors_rc.begin(), domains_.flavors_rc.end(), nonneg);
    for (const auto& f : domains_.mec_flavors_rc)
        ok = ok && std::all_of(f.begin(), f.end(), nonneg);
    if (!ok)
        throw ValidationError("flavors must be >= 0 RC");

    const int c = num_mec_classes();
    for (int k = 0; k < num_bs_; ++k) {
        branch_sizes_.push_back(domains_.splits.size());
        branch_sizes_.push_back(domains_.flavors_rc.size());
        branch_sizes_.push_back(domains_.flavors_rc.size());
        for (int i = 0; i < c; ++i)
            branch_sizes_.push_back(domains_.mec_flavors_rc[i].size());
        branch_sizes_.push_back(static_cast<std::size_t>(num_du_));
        branch_sizes_.push_back(static_cast<std::size_t>(num_cu_));
        for (int i = 0; i < c; ++i)
            branch_sizes_.push_back(2);
        branch_bs_.insert(branch_bs_.end(), branches_per_bs(), k);
    }
}

std::size_t ActionSpace::total_outputs() const
{
    std::size_t n = 0;
    for (std::size_t s : branch_sizes_)
        n += s;
    return n;
}

namespace {

std::uint64_t saturating_product(auto begin, auto end)
{
    std::uint64_t p = 1;
    for (auto it = begin; it != end; ++it) {
        const std::uint64_t s = *it;
        if (s != 0 && p > std::numeric_limits<std::uint64_t>::max() / s)
            return std::numeric_limits<std::uint64_t>::max();
        p *= s;
    }
    return p;
}

} // namespace

std::uint64_t ActionSpace::joint_cardinality() const
{
    return saturating_product(branch_sizes_.begin(), branch_sizes_.end());
}

std::uint64_t ActionSpace::per_bs_cardinality() const
{
    return saturating_product(branch_sizes_.begin(), branch_sizes_.begin() + branches_per_bs());
}

std::vector<int> ActionSpace::flatten(const Action& a) const
{
    if (static_cast<int>(a.bs.size()) != num_bs_)
        throw DimensionError("action has " + std::to_string(a.bs.size()) + " BS entries, expected " +
                             std::to_string(num_bs_));
    const int c = num_mec_classes();
    std::vector<int> out;
    out.reserve(branch_sizes_.size());
    for (const auto& b : a.bs) {
        if (static_cast<int>(b.mec_flavor.size()) != c || static_cast<int>(b.mec_at_cu.size()) != c)
            throw DimensionError("action MEC fields do not match the number of MEC classes");
        out.push_back(b.split);
        out.push_back(b.du_flavor);
        out.push_back(b.cu_flavor);
        out.insert(out.end(), b.mec_flavor.begin(), b.mec_flavor.end());
        out.push_back(b.du_server);
        out.push_back(b.cu_server);
        out.insert(out.end(), b.mec_at_cu.begin(), b.mec_at_cu.end());
    }
    return out;
}

Action ActionSpace::unflatten(std::span<const int> sub) const
{
    if (sub.size() != branch_sizes_.size())
        throw DimensionError("expected " + std::to_string(branch_sizes_.size()) + " sub-actions, got " +
                             std::to_string(sub.size()));
    for (std::size_t j = 0; j < sub.size(); ++j)
        if (sub[j] < 0 || static_cast<std::size_t>(sub[j]) >= branch_sizes_[j])
            throw ValidationError("sub-action " + std::to_string(j) + " out of range");
    const int c = num_mec_classes();
    Action a;
    std::size_t p = 0;
    for (int k = 0; k < num_bs_; ++k) {
        BsAction b;
        b.split = sub[p++];
        b.du_flavor = sub[p++];
        b.cu_flavor = sub[p++];
        b.mec_flavor.assign(sub.begin() + p, sub.begin() + p + c);
        p += c;
        b.du_server = sub[p++];
        b.cu_server = sub[p++];
        b.mec_at_cu.assign(sub.begin() + p, sub.begin() + p + c);
        p += c;
        a.bs.push_back(std::move(b));
    }
    return a;
}

bool ActionSpace::contains(const Action& a) const
{
    try {
        const auto flat = flatten(a);
        for (std::size_t j = 0; j < flat.size(); ++j)
            if (flat[j] < 0 || static_cast<std::size_t>(flat[j]) >= branch_sizes_[j])
                return false;
        return true;
    } catch (const DimensionError&) {
        return false;
    }
}

CostBreakdown& CostBreakdown::operator+=(const CostBreakdown& o)
{
    compute_du_mec += o.compute_du_mec;
    compute_cu_mec += o.compute_cu_mec;
    sla_underprovision += o.sla_underprovision;
    sla_server_capacity += o.sla_server_capacity;
    sla_split_delay += o.sla_split_delay;
    sla_inelastic_delay += o.sla_inelastic_delay;
    instantiation += o.instantiation;
    reconfig_flavor += o.reconfig_flavor;
    reconfig_mec_migration += o.reconfig_mec_migration;
    reconfig_server_migration += o.reconfig_server_migration;
    routing += o.routing;
    elastic_delay_cost += o.elastic_delay_cost;
    total += o.total;
    reward += o.reward;
    return *this;
}

Action default_initial_action(const ActionSpace& space)
{
    const auto& d = space.domains();
    auto nearest = [](const std::vector<double>& dom, double v) {
        int best = 0;
        for (int i = 1; i < static_cast<int>(dom.size()); ++i)
            if (std::abs(dom[i] - v) < std::abs(dom[best] - v))
                best = i;
        return best;
    };
    BsAction b;
    const auto s1 = std::find(d.splits.begin(), d.splits.end(), SplitId::S1);
    b.split = s1 == d.splits.end() ? 0 : static_cast<int>(s1 - d.splits.begin());
    b.du_flavor = nearest(d.flavors_rc, 1.0);
    b.cu_flavor = b.du_flavor;
    for (const auto& f : d.mec_flavors_rc)
        b.mec_flavor.push_back(nearest(f, 1.0));
    b.mec_at_cu.assign(d.mec_flavors_rc.size(), 0);
    return Action{std::vector<BsAction>(space.num_bs(), b)};
}

namespace {

struct BsPlacement {
    NodeId du;
    NodeId cu;
    const PathEntry* paths;
};

BsPlacement placement(const Topology& topo, int k, const BsAction& a)
{
    return {topo.du_servers()[a.du_server], topo.cu_servers()[a.cu_server], &topo.paths(k, a.du_server, a.cu_server)};
}

} // namespace

std::vector<std::vector<double>> mec_delays(const EnvConfig& cfg, const ActionSpace& space, const DemandSlot& demand,
                                            const Action& a, const Utilization& use)
{
    const Topology& topo = *cfg.topology;
    const RewardConfig& rc = cfg.reward;
    std::vector<std::vector<double>> out(space.num_bs());
    for (int k = 0; k < space.num_bs(); ++k) {
        const BsAction& ak = a.bs[k];
        const BsPlacement where = placement(topo, k, ak);
        for (int c = 0; c < space.num_mec_classes(); ++c) {
            const bool at_cu = ak.mec_at_cu[c] != 0;
            const NodeId host = at_cu ? where.cu : where.du;
            const double lambda = demand.mec(k, c);
            const double z = space.mec_rc(ak, c);
            double d = 0.0;
            if (z == 0.0 && lambda > 0.0) {
                logger().debug("bs {} class {}: no MEC flavor for {} Gbps, delay set to {}", k, c, lambda,
                               cfg.max_delay_ms);
                d = cfg.max_delay_ms;
            } else {
                const double route = mec_path(*where.paths, at_cu).delay_ms;
                const double processing = z > 0.0 ? lambda * topo.rate(host) / z : 0.0;
                const double load = use[k].mec[c] / topo.capacity_rc(host);
                d = lambda * route + rc.delta1 * processing + rc.delta2 * load * load;
            }
            out[k].push_back(d);
        }
    }
    return out;
}

CostBreakdown cost_model(const EnvConfig& cfg, const ActionSpace& space, const State& s, const Action& a,
                         const Utilization& use)
{
    const Topology& topo = *cfg.topology;
    const RewardConfig& rc = cfg.reward;
    const int nbs = space.num_bs();
    const int ncls = space.num_mec_classes();
    if (static_cast<int>(use.size()) != nbs || static_cast<int>(s.previous.bs.size()) != nbs)
        throw DimensionError("state/utilization do not match the action space");

    double du_mec_units = 0.0, cu_mec_units = 0.0;
    double under = 0.0, split_delay = 0.0, inelastic = 0.0, elastic = 0.0;
    double inst = 0.0, reflavor = 0.0, mec_move = 0.0, server_move = 0.0, routed = 0.0;
    double off_host = 0.0;
    std::map<NodeId, double> server_load;

    const auto delays = mec_delays(cfg, space, s.demand, a, use);

    for (int k = 0; k < nbs; ++k) {
        const BsAction& ak = a.bs[k];
        const BsAction& pk = s.previous.bs[k];
        const BsPlacement now = placement(topo, k, ak);
        const BsPlacement before = placement(topo, k, pk);

        const double x = space.du_rc(ak);
        const double y = space.cu_rc(ak);
        const double x_prev = space.du_rc(pk);
        const double y_prev = space.cu_rc(pk);

        double mec_du = 0.0, mec_cu = 0.0, mec_under = 0.0;
        for (int c = 0; c < ncls; ++c) {
            const double z = space.mec_rc(ak, c);
            const bool at_cu = ak.mec_at_cu[c] != 0;
            (at_cu ? mec_cu : mec_du) += z;
            mec_under += std::max(0.0, use[k].mec[c] - z);
            if (!topo.hosts_mec(at_cu ? now.cu : now.du))
                off_host += z;
        }
        du_mec_units += x + mec_du;
        cu_mec_units += y + mec_cu;
        under += std::max({0.0, use[k].du - x, use[k].cu - y}) + mec_under;
        server_load[now.du] += x + mec_du;
        server_load[now.cu] += y + mec_cu;

        const DelayRequirements req = delay_requirements(space.split(ak), cfg.catalog);
        split_delay += std::max({0.0, now.paths->fh.delay_ms - req.lls_ms, now.paths->mh.delay_ms - req.hls_ms});

        for (int c = 0; c < ncls; ++c) {
            const ServiceClass& svc = cfg.services[c];
            if (svc.inelastic)
                inelastic += std::max(0.0, delays[k][c] - svc.deadline);
            else
                elastic += delays[k][c];
        }

        // Resizing at an unchanged host pays for the delta; a move pays for the
        // whole instance at its new host.
        const bool du_moved = now.du != before.du;
        const bool cu_moved = now.cu != before.cu;
        if (!du_moved) {
            inst += std::max(0.0, x - x_prev);
            reflavor += std::abs(x - x_prev);
        }
        if (!cu_moved) {
            inst += std::max(0.0, y - y_prev);
            reflavor += std::abs(y - y_prev);
        }
        for (int c = 0; c < ncls; ++c) {
            const double z = space.mec_rc(ak, c);
            const double z_prev = space.mec_rc(pk, c);
            const int zeta = ak.mec_at_cu[c];
            const int zeta_prev = pk.mec_at_cu[c];
            const NodeId host = zeta ? now.cu : now.du;
            const NodeId host_prev = zeta_prev ? before.cu : before.du;
            if (zeta == zeta_prev && host == host_prev) {
                inst += std::max(0.0, z - z_prev);
                reflavor += std::abs(z - z_prev);
            }
            mec_move += z * std::abs(zeta - zeta_prev);
        }
        if (du_moved)
            server_move += x + mec_du;
        if (cu_moved)
            server_move += y + mec_cu;

        const SegmentLoads loads = segment_loads(space.split(ak), s.demand.legacy(k), cfg.catalog);
        routed += loads.fh_gbps + (now.paths->mh.empty() ? 0.0 : loads.mh_gbps) + loads.bh_gbps;
    }

    double over_capacity = off_host;
    for (const auto& [server, load] : server_load)
        over_capacity += std::max(0.0, load - topo.capacity_rc(server));

    CostBreakdown cb;
    cb.compute_du_mec = rc.kappa_dm * du_mec_units;
    cb.compute_cu_mec = rc.kappa_cm * cu_mec_units;
    cb.sla_underprovision = rc.kappa_d * under;
    cb.sla_server_capacity = rc.kappa_d * over_capacity;
    cb.sla_split_delay = rc.kappa_d * split_delay;
    cb.sla_inelastic_delay = rc.kappa_d * inelastic;
    cb.instantiation = rc.kappa_i * inst;
    cb.reconfig_flavor = rc.kappa_r * reflavor;
    cb.reconfig_mec_migration = rc.kappa_r * mec_move;
    cb.reconfig_server_migration = rc.kappa_r * server_move;
    cb.routing = rc.kappa_h * routed;
    cb.elastic_delay_cost = elastic;
    cb.total = cb.compute_du_mec + cb.compute_cu_mec + cb.sla_underprovision + cb.sla_server_capacity +
               cb.sla_split_delay + cb.sla_inelastic_delay + cb.instantiation + cb.reconfig_flavor +
               cb.reconfig_mec_migration + cb.reconfig_server_migration + cb.routing;
    cb.reward = -cb.total - rc.eta * rc.delay_coeff * cb.elastic_delay_cost;
    return cb;
}

Environment::Environment(EnvConfig config)
    : config_(std::move(config)),
      space_(config_.domains, config_.topology ? config_.topology->num_rus() : 0,
             config_.topology ? static_cast<int>(config_.topology->du_servers().size()) : 0,
             config_.topology ? static_cast<int>(config_.topology->cu_servers().size()) : 0)
{
    if (!config_.utilization)
        throw ValidationError("environment needs a utilization model");
    if (config_.services.size() != config_.domains.mec_flavors_rc.size())
        throw ValidationError("one MEC flavor domain is required per service class");
    const RewardConfig& r = config_.reward;
    for (double v : {r.kappa_dm, r.kappa_cm, r.kappa_d, r.kappa_i, r.kappa_r, r.kappa_h, r.eta, r.delay_coeff,
                     r.delta1, r.delta2})
        if (!(v >= 0.0))
            throw ValidationError("reward coefficients must be >= 0");
    if (!(r.gamma > 0.0 && r.gamma <= 1.0))
        throw ValidationError("gamma must be in (0, 1]");
    if (!(config_.max_delay_ms > 0.0))
        throw ValidationError("max_delay_ms must be > 0");
    if (config_.initial_action) {
        if (!space_.contains(*config_.initial_action))
            throw ValidationError("initial action is outside the action space");
    } else {
        config_.initial_action = default_initial_action(space_);
    }
}

DemandSlot Environment::clamp(const DemandSlot& d) const
{
    if (d.num_bs != num_bs() || d.num_services != num_mec_classes() + 1)
        throw DimensionError("demand slot has " + std::to_string(d.num_bs) + "x" + std::to_string(d.num_services) +
                             " entries, expected " + std::to_string(num_bs()) + "x" +
                             std::to_string(num_mec_classes() + 1));
    DemandSlot out = d;
    for (int k = 0; k < d.num_bs; ++k) {
        for (int c = 0; c < d.num_services; ++c)
            if (!(d.at(k, c) >= 0.0))
                throw ValidationError("negative demand in slot " + std::to_string(d.t));
        if (config_.strict_demand && d.legacy(k) > kMaxDemandGbps)
            throw DemandCapError("slot " + std::to_string(d.t) + ": legacy demand above the split table cap");
        out.at(k, 0) = clamp_demand(d.legacy(k));
    }
    return out;
}

State Environment::reset(DemandSeries episode, std::uint64_t episode_index)
{
    if (episode.empty())
        throw ValidationError("episode demand sequence is empty");
    episode_ = std::move(episode);
    std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                      static_cast<std::uint32_t>(episode_index), static_cast<std::uint32_t>(episode_index >> 32)};
    noise_rng_.seed(seq);
    state_ = State{0, clamp(episode_.front()), *config_.initial_action};
    done_ = false;
    return state_;
}

Utilization Environment::utilization(const State& s, const Action& a)
{
    Utilization use(num_bs());
    for (int k = 0; k < num_bs(); ++k) {
        const BbuUtilization bbu =
            bbu_utilization(*config_.utilization, space_.split(a.bs[k]), s.demand.legacy(k), noise_rng_);
        use[k].du = bbu.du;
        use[k].cu = bbu.cu;
        for (int c = 0; c < num_mec_classes(); ++c)
            use[k].mec.push_back(mec_utilization(*config_.utilization, c, s.demand.mec(k, c), noise_rng_));
    }
    return use;
}

CostBreakdown Environment::compute_costs(const State& s, const Action& a)
{
    if (!space_.contains(a))
        throw ValidationError("action is outside the action space");
    return cost_model(config_, space_, s, a, utilization(s, a));
}

StepResult Environment::step(const Action& a)
{
    if (done_)
        throw EpisodeEnded("episode has ended; call reset()");
    StepResult r;
    r.costs = compute_costs(state_, a);
    r.reward = r.costs.reward;
    const int t_next = state_.t + 1;
    r.terminal = t_next >= horizon();
    r.next.t = t_next;
    r.next.demand = r.terminal ? state_.demand : clamp(episode_[t_next]);
    r.next.previous = a;
    state_ = r.next;
    done_ = r.terminal;
    return r;
}

std::size_t Environment::state_size() const
{
    const std::size_t c = static_cast<std::size_t>(num_mec_classes());
    const std::size_t per_bs = (1 + c) + space_.domains().splits.size() + topology().du_servers().size() +
                               topology().cu_servers().size() + 2 * c + 2 + c;
    return per_bs * static_cast<std::size_t>(num_bs());
}

namespace {

double domain_scale(const std::vector<double>& dom)
{
    const double m = *std::max_element(dom.begin(), dom.end());
    return m > 0.0 ? m : 1.0;
}

} // namespace

std::vector<double> Environment::encode_state(const State& s) const
{
    const auto& d = space_.domains();
    const int ncls = num_mec_classes();
    const std::size_t nd = topology().du_servers().size();
    const std::size_t nc = topology().cu_servers().size();
    const double xs = domain_scale(d.flavors_rc);

    std::vector<double> v;
    v.reserve(state_size());
    for (int k = 0; k < num_bs(); ++k) {
        const BsAction& p = s.previous.bs[k];
        for (int c = 0; c <= ncls; ++c)
            v.push_back(s.demand.at(k, c) / kMaxDemandGbps);
        auto one_hot = [&v](std::size_t n, int idx) {
            for (std::size_t i = 0; i < n; ++i)
                v.push_back(static_cast<int>(i) == idx ? 1.0 : 0.0);
        };
        one_hot(d.splits.size(), p.split);
        one_hot(nd, p.du_server);
        one_hot(nc, p.cu_server);
        for (int c = 0; c < ncls; ++c)
            one_hot(2, p.mec_at_cu[c]);
        v.push_back(space_.du_rc(p) / xs);
        v.push_back(space_.cu_rc(p) / xs);
        for (int c = 0; c < ncls; ++c)
            v.push_back(space_.mec_rc(p, c) / domain_scale(d.mec_flavors_rc[c]));
    }
    return v;
}

Action Environment::decode_previous(std::span<const double> e) const
{
    if (e.size() != state_size())
        throw DimensionError("encoded state has the wrong length");
    const auto& d = space_.domains();
    const int ncls = num_mec_classes();
    const std::size_t nd = topology().du_servers().size();
    const std::size_t nc = topology().cu_servers().size();

    std::size_t p = 0;
    auto arg_max = [&](std::size_t n) {
        const auto first = e.begin() + p;
        p += n;
        return static_cast<int>(std::max_element(first, first + n) - first);
    };
    auto nearest = [](const std::vector<double>& dom, double value) {
        int best = 0;
        for (int i = 1; i < static_cast<int>(dom.size()); ++i)
            if (std::abs(dom[i] - value) < std::abs(dom[best] - value))
                best = i;
        return best;
    };

    Action a;
    for (int k = 0; k < num_bs(); ++k) {
        BsAction b;
        p += 1 + ncls;
        b.split = arg_max(d.splits.size());
        b.du_server = arg_max(nd);
        b.cu_server = arg_max(nc);
        for (int c = 0; c < ncls; ++c)
            b.mec_at_cu.push_back(arg_max(2));
        b.du_flavor = nearest(d.flavors_rc, e[p++] * domain_scale(d.flavors_rc));
        b.cu_flavor = nearest(d.flavors_rc, e[p++] * domain_scale(d.flavors_rc));
        for (int c = 0; c < ncls; ++c)
            b.mec_flavor.push_back(nearest(d.mec_flavors_rc[c], e[p++] * domain_scale(d.mec_flavors_rc[c])));
        a.bs.push_back(std::move(b));
    }
    return a;
}

ActionEnumerator::ActionEnumerator(const ActionSpace& space, std::uint64_t limit)
    : space_(space), cardinality_(space.joint_cardinality()), digits_(space.branch_sizes().size(), 0)
{
    if (space.num_bs() != 1)
        throw ValidationError("exhaustive enumeration is restricted to a single BS");
    if (cardinality_ > limit)
        throw OracleTooLarge(cardinality_, limit);
}

bool ActionEnumerator::next(Action& out)
{
    if (exhausted_)
        return false;
    out = space_.unflatten(digits_);
    const auto& sizes = space_.branch_sizes();
    int j = static_cast<int>(digits_.size()) - 1;
    for (; j >= 0; --j) {
        if (++digits_[j] < static_cast<int>(sizes[j]))
            break;
        digits_[j] = 0;
    }
    if (j < 0)
        exhausted_ = true;
    return true;
}

} // namespace oranmec
