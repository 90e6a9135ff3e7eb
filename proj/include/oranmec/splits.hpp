#pragma once

#include <array>
#include <optional>
#include <string>

#include <json.hpp>

namespace oranmec {

// 3GPP split options, O1 (RRC-PDCP) through O8 (Low PHY-RF).
enum class SplitOption { O1, O2, O3, O4, O5, O6, O7, O8 };

// Composite HLS/LLS choices available to a base station.
enum class SplitId { S1, S2, S3, S4 };

inline constexpr std::array<SplitId, 4> kAllSplits{SplitId::S1, SplitId::S2, SplitId::S3, SplitId::S4};

// Highest uplink rate the split table is dimensioned for (Gbps).
inline constexpr double kMaxDemandGbps = 4.0;

std::string to_string(SplitOption o);
std::string to_string(SplitId s);
SplitId split_from_string(const std::string& s);

// Load carried over the interface cut by an option: slope * demand + intercept.
struct SplitOptionSpec {
    SplitOption option = SplitOption::O1;
    double slope = 1.0;
    double intercept = 0.0;
    double max_load_gbps = kMaxDemandGbps;
    double delay_req_ms = 10.0;

    double load(double demand_gbps) const { return slope * demand_gbps + intercept; }
};

class SplitCatalog {
public:
    static const SplitCatalog& standard();

    // Replaces load constants of the standard table; keys are option names,
    // e.g. {"O6": {"slope": 1.02, "intercept": 0.5}, "O8": {"intercept": 157.3}}.
    static SplitCatalog from_json(const nlohmann::json& overrides);

    const SplitOptionSpec& option(SplitOption o) const { return options_[static_cast<int>(o)]; }

private:
    std::array<SplitOptionSpec, 8> options_{};
};

struct CompositeSplit {
    SplitId id = SplitId::S1;
    std::optional<SplitOption> hls; // none for the integrated C-RAN stack
    SplitOption lls = SplitOption::O7;
    double du_share = 1.0;
    double cu_share = 0.0;
};

const CompositeSplit& composite(SplitId id);

struct SegmentLoads {
    double fh_gbps = 0.0;
    double mh_gbps = 0.0;
    double bh_gbps = 0.0;
};

// Throws DemandCapError above kMaxDemandGbps and ValidationError below 0.
SegmentLoads segment_loads(SplitId split, double demand_gbps,
                           const SplitCatalog& catalog = SplitCatalog::standard());

// Clips a demand into [0, kMaxDemandGbps], logging a warning when it clips.
double clamp_demand(double demand_gbps);

struct DelayRequirements {
    double hls_ms = 0.0; // +inf when there is no HLS
    double lls_ms = 0.0;
};

DelayRequirements delay_requirements(SplitId split, const SplitCatalog& catalog = SplitCatalog::standard());

struct ComputeShares {
    double du = 1.0;
    double cu = 0.0;
};

// Fraction of the BBU processing that runs at the DU and CU hosts.
ComputeShares compute_shares(SplitId split);

} // namespace oranmec
