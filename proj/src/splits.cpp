#include "oranmec/splits.hpp"

#include <limits>

#include "oranmec/errors.hpp"
#include "oranmec/log.hpp"

namespace oranmec {

std::string to_string(SplitOption o)
{
    return "O" + std::to_string(static_cast<int>(o) + 1);
}

std::string to_string(SplitId s)
{
    return "S" + std::to_string(static_cast<int>(s) + 1);
}

SplitId split_from_string(const std::string& s)
{
    for (SplitId id : kAllSplits)
        if (to_string(id) == s)
            return id;
    throw ValidationError("unknown split '" + s + "'");
}

const SplitCatalog& SplitCatalog::standard()
{
    static const SplitCatalog catalog = [] {
        SplitCatalog c;
        using O = SplitOption;
        //               option  slope intercept  max    delay (ms)
        c.options_[0] = {O::O1, 1.0, 0.0, 4.0, 10.0};
        c.options_[1] = {O::O2, 1.0, 0.0, 4.0, 10.0};
        c.options_[2] = {O::O3, 1.0, 0.0, 4.0, 10.0};
        c.options_[3] = {O::O4, 1.0, 0.0, 4.0, 1.0};
        c.options_[4] = {O::O5, 1.0, 0.0, 4.0, 1.0};
        // The 4.13 ceiling is kept as metadata; loads always use the formula.
        c.options_[5] = {O::O6, 1.02, 0.5, 4.13, 0.25};
        c.options_[6] = {O::O7, 0.0, 10.1, 10.1, 0.25};
        c.options_[7] = {O::O8, 0.0, 157.3, 157.3, 0.25};
        return c;
    }();
    return catalog;
}

SplitCatalog SplitCatalog::from_json(const nlohmann::json& overrides)
{
    SplitCatalog c = standard();
    for (auto it = overrides.begin(); it != overrides.end(); ++it) {
        int idx = -1;
        for (int i = 0; i < 8; ++i)
            if (to_string(static_cast<SplitOption>(i)) == it.key())
                idx = i;
        if (idx < 0)
            throw ValidationError("unknown split option '" + it.key() + "'");
        auto& spec = c.options_[idx];
        const auto& v = it.value();
        spec.slope = v.value("slope", spec.slope);
        spec.intercept = v.value("intercept", spec.intercept);
        spec.max_load_gbps = v.value("max_load_gbps", spec.max_load_gbps);
        spec.delay_req_ms = v.value("delay_req_ms", spec.delay_req_ms);
    }
    return c;
}

namespace {

// Share of total BBU processing per function, bottom of the stack first:
// Low PHY, High PHY, Low MAC, High MAC, Low RLC, High RLC, PDCP, RRC.
constexpr std::array<double, 8> kFunctionPercent{48.0, 17.0, 7.0, 7.0, 0.5, 0.5, 10.0, 10.0};

CompositeSplit make_split(SplitId id, std::optional<SplitOption> hls, SplitOption lls, int du_functions)
{
    double du = 0.0;
    for (int i = 0; i < du_functions; ++i)
        du += kFunctionPercent[i];
    double cu = 0.0;
    for (int i = du_functions; i < 8; ++i)
        cu += kFunctionPercent[i];
    return {id, hls, lls, du / 100.0, cu / 100.0};
}

} // namespace

const CompositeSplit& composite(SplitId id)
{
    using O = SplitOption;
    static const std::array<CompositeSplit, 4> table{
        make_split(SplitId::S1, O::O2, O::O7, 6), // PDCP and up at the CU
        make_split(SplitId::S2, O::O4, O::O7, 4), // High MAC and down at the DU
        make_split(SplitId::S3, O::O6, O::O7, 2), // only PHY at the DU
        make_split(SplitId::S4, std::nullopt, O::O8, 8),
    };
    return table[static_cast<int>(id)];
}

SegmentLoads segment_loads(SplitId split, double demand_gbps, const SplitCatalog& catalog)
{
    if (!(demand_gbps >= 0.0))
        throw ValidationError("demand must be >= 0");
    if (demand_gbps > kMaxDemandGbps)
        throw DemandCapError("demand " + std::to_string(demand_gbps) + " Gbps exceeds the " +
                             std::to_string(kMaxDemandGbps) + " Gbps split table cap");
    const CompositeSplit& v = composite(split);
    SegmentLoads loads;
    loads.fh_gbps = catalog.option(v.lls).load(demand_gbps);
    // The integrated stack forwards user-plane traffic unchanged.
    loads.mh_gbps = v.hls ? catalog.option(*v.hls).load(demand_gbps) : demand_gbps;
    loads.bh_gbps = demand_gbps;
    return loads;
}

double clamp_demand(double demand_gbps)
{
    if (demand_gbps > kMaxDemandGbps) {
        logger().warn("demand {} Gbps clipped to {} Gbps", demand_gbps, kMaxDemandGbps);
        return kMaxDemandGbps;
    }
    if (demand_gbps < 0.0) {
        logger().warn("negative demand {} Gbps clipped to 0", demand_gbps);
        return 0.0;
    }
    return demand_gbps;
}

DelayRequirements delay_requirements(SplitId split, const SplitCatalog& catalog)
{
    const CompositeSplit& v = composite(split);
    DelayRequirements d;
    d.hls_ms = v.hls ? catalog.option(*v.hls).delay_req_ms : std::numeric_limits<double>::infinity();
    d.lls_ms = catalog.option(v.lls).delay_req_ms;
    return d;
}

ComputeShares compute_shares(SplitId split)
{
    const CompositeSplit& v = composite(split);
    return {v.du_share, v.cu_share};
}

} // namespace oranmec
