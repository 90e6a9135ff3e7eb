#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "oranmec/splits.hpp"

namespace oranmec {

using Rng = std::mt19937_64;

// Demands of one slot. Service 0 is legacy traffic, 1..C are MEC classes.
struct DemandSlot {
    int t = 0;
    int num_bs = 0;
    int num_services = 1; // 1 + |C|
    std::vector<double> gbps; // [bs][service]

    DemandSlot() = default;
    DemandSlot(int t_, int bs, int services)
        : t(t_), num_bs(bs), num_services(services), gbps(static_cast<std::size_t>(bs) * services, 0.0) {}

    double at(int bs, int svc) const { return gbps[static_cast<std::size_t>(bs) * num_services + svc]; }
    double& at(int bs, int svc) { return gbps[static_cast<std::size_t>(bs) * num_services + svc]; }
    double legacy(int bs) const { return at(bs, 0); }
    double mec(int bs, int mec_class) const { return at(bs, mec_class + 1); }

    bool operator==(const DemandSlot&) const = default;
};

using DemandSeries = std::vector<DemandSlot>;

// Reads `t,bs,svc,demand_gbps` rows. When num_bs or num_mec_classes is < 0 the
// dimension is inferred from the largest index in the file. Missing cells and
// missing slots read as zero with a warning.
DemandSeries load_trace(const std::string& path, int num_bs = -1, int num_mec_classes = -1);
void write_trace(const std::string& path, const DemandSeries& series);

struct SynthParams {
    std::uint64_t seed = 1;
    int horizon = 144;
    int num_bs = 4;
    int num_mec_classes = 2;
    double peak_gbps = kMaxDemandGbps;
};

inline constexpr int kSlotsPerDay = 144;

// Diurnal sinusoid per (bs, service), phase-shifted per BS, plus seeded noise,
// clipped to [0, peak]. Horizon must be a multiple of kSlotsPerDay.
DemandSeries synth_demands(const SynthParams& params);

// Same demands in every slot.
DemandSeries constant_demands(int horizon, const DemandSlot& demands);

// Maps demand to actual compute use (RC). Implementations must be pure given
// the random stream they are handed.
class UtilizationModel {
public:
    virtual ~UtilizationModel() = default;
    virtual double bbu_total(double legacy_gbps, Rng& rng) const = 0;
    virtual double mec(int mec_class, double gbps, Rng& rng) const = 0;
    virtual std::string platform_id() const = 0;
};

struct AffineUtilizationParams {
    double bbu_base = 0.5;
    double bbu_slope = 1.5;
    std::vector<double> mec_base{0.2}; // per class; the last entry repeats
    std::vector<double> mec_slope{1.0};
    double noise_std = 0.0;
    std::string platform_id = "A";
};

// Platform B: slopes x1.25, bases x1.1.
AffineUtilizationParams platform_b(const AffineUtilizationParams& a);

class AffineUtilization final : public UtilizationModel {
public:
    explicit AffineUtilization(AffineUtilizationParams params);

    double bbu_total(double legacy_gbps, Rng& rng) const override;
    double mec(int mec_class, double gbps, Rng& rng) const override;
    std::string platform_id() const override { return params_.platform_id; }
    const AffineUtilizationParams& params() const { return params_; }

private:
    double noise(Rng& rng) const;

    AffineUtilizationParams params_;
};

struct BbuUtilization {
    double du = 0.0; // x-hat
    double cu = 0.0; // y-hat
};

BbuUtilization bbu_utilization(const UtilizationModel& model, SplitId split, double legacy_gbps, Rng& rng);
double mec_utilization(const UtilizationModel& model, int mec_class, double gbps, Rng& rng);

} // namespace oranmec
