#include "oranmec/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <tuple>

#include "oranmec/errors.hpp"
#include "oranmec/log.hpp"

namespace oranmec {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

template <class T>
T parse_number(const std::string& s, std::size_t line, const char* what)
{
    T v{};
    std::istringstream is(s);
    is >> v;
    if (s.empty() || is.fail() || !is.eof())
        throw ParseError(std::string("malformed ") + what + " '" + s + "'", line);
    return v;
}

} // namespace

DemandSeries load_trace(const std::string& path, int num_bs, int num_mec_classes)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open trace file '" + path + "'");

    struct Row {
        int t, bs, svc;
        double gbps;
    };
    std::vector<Row> rows;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty())
            continue;
        const auto cells = split_csv(line);
        if (!header_seen) {
            header_seen = true;
            if (!cells.empty() && cells[0] == "t") {
                if (cells.size() != 4 || cells[1] != "bs" || cells[2] != "svc" || cells[3] != "demand_gbps")
                    throw ParseError("expected header t,bs,svc,demand_gbps", lineno);
                continue;
            }
        }
        if (cells.size() != 4)
            throw ParseError("expected 4 fields, got " + std::to_string(cells.size()), lineno);
        Row r{parse_number<int>(cells[0], lineno, "slot"), parse_number<int>(cells[1], lineno, "bs"),
              parse_number<int>(cells[2], lineno, "svc"), parse_number<double>(cells[3], lineno, "demand")};
        if (r.t < 0 || r.bs < 0 || r.svc < 0)
            throw ParseError("negative index", lineno);
        if (!rows.empty() && r.t < rows.back().t)
            throw ParseError("rows are not sorted by t", lineno);
        if (!(r.gbps >= 0.0))
            throw ValidationError("line " + std::to_string(lineno) + ": negative demand " + cells[3]);
        rows.push_back(r);
    }
    if (rows.empty())
        return {};

    int max_bs = 0, max_svc = 0;
    for (const auto& r : rows) {
        max_bs = std::max(max_bs, r.bs);
        max_svc = std::max(max_svc, r.svc);
    }
    const int bs_count = num_bs >= 0 ? num_bs : max_bs + 1;
    const int svc_count = num_mec_classes >= 0 ? num_mec_classes + 1 : max_svc + 1;
    if (max_bs >= bs_count || max_svc >= svc_count)
        throw ValidationError("trace references bs/svc outside the configured dimensions");

    const int horizon = rows.back().t + 1;
    DemandSeries series;
    series.reserve(horizon);
    for (int t = 0; t < horizon; ++t)
        series.emplace_back(t, bs_count, svc_count);
    std::vector<char> filled(static_cast<std::size_t>(horizon) * bs_count * svc_count, 0);
    for (const auto& r : rows) {
        series[r.t].at(r.bs, r.svc) = r.gbps;
        filled[(static_cast<std::size_t>(r.t) * bs_count + r.bs) * svc_count + r.svc] = 1;
    }
    const auto missing = std::count(filled.begin(), filled.end(), 0);
    if (missing > 0)
        logger().warn("trace '{}': {} missing (t, bs, svc) cells read as 0", path, missing);
    return series;
}

void write_trace(const std::string& path, const DemandSeries& series)
{
    std::ofstream out(path);
    if (!out)
        throw ValidationError("cannot write trace file '" + path + "'");
    out << "t,bs,svc,demand_gbps\n";
    out.precision(17);
    for (const auto& slot : series)
        for (int k = 0; k < slot.num_bs; ++k)
            for (int c = 0; c < slot.num_services; ++c)
                out << slot.t << ',' << k << ',' << c << ',' << slot.at(k, c) << '\n';
}

DemandSeries synth_demands(const SynthParams& p)
{
    if (p.horizon <= 0 || p.horizon % kSlotsPerDay != 0)
        throw ValidationError("synthetic horizon must be a positive multiple of " + std::to_string(kSlotsPerDay));
    if (p.num_bs <= 0 || p.num_mec_classes < 0 || !(p.peak_gbps >= 0.0))
        throw ValidationError("synthetic demand parameters out of range");

    Rng rng(p.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int services = p.num_mec_classes + 1;

    // Per-(bs, service) phase and level; legacy traffic runs at full scale.
    std::vector<double> phase(static_cast<std::size_t>(p.num_bs) * services);
    for (int k = 0; k < p.num_bs; ++k)
        for (int c = 0; c < services; ++c)
            phase[k * services + c] = 2.0 * std::numbers::pi * (k / static_cast<double>(p.num_bs)) + 0.3 * c;

    DemandSeries series;
    series.reserve(p.horizon);
    for (int t = 0; t < p.horizon; ++t) {
        DemandSlot slot(t, p.num_bs, services);
        const double angle = 2.0 * std::numbers::pi * (t % kSlotsPerDay) / kSlotsPerDay;
        for (int k = 0; k < p.num_bs; ++k)
            for (int c = 0; c < services; ++c) {
                const double level = c == 0 ? 1.0 : 0.5;
                const double mean = p.peak_gbps * level * (0.5 + 0.4 * std::sin(angle + phase[k * services + c]));
                const double v = mean + 0.05 * p.peak_gbps * gauss(rng);
                slot.at(k, c) = std::clamp(v, 0.0, p.peak_gbps);
            }
        series.push_back(std::move(slot));
    }
    return series;
}

DemandSeries constant_demands(int horizon, const DemandSlot& demands)
{
    DemandSeries series;
    series.reserve(horizon);
    for (int t = 0; t < horizon; ++t) {
        DemandSlot s = demands;
        s.t = t;
        series.push_back(std::move(s));
    }
    return series;
}

AffineUtilizationParams platform_b(const AffineUtilizationParams& a)
{
    AffineUtilizationParams b = a;
    b.bbu_base *= 1.1;
    b.bbu_slope *= 1.25;
    for (auto& v : b.mec_base)
        v *= 1.1;
    for (auto& v : b.mec_slope)
        v *= 1.25;
    b.platform_id = "B";
    return b;
}

AffineUtilization::AffineUtilization(AffineUtilizationParams params) : params_(std::move(params))
{
    auto nonneg = [](double v) { return v >= 0.0; };
    if (!nonneg(params_.bbu_base) || !nonneg(params_.bbu_slope) || !nonneg(params_.noise_std) ||
        !std::all_of(params_.mec_base.begin(), params_.mec_base.end(), nonneg) ||
        !std::all_of(params_.mec_slope.begin(), params_.mec_slope.end(), nonneg))
        throw ValidationError("utilization parameters must be >= 0");
    if (params_.mec_base.empty() || params_.mec_slope.empty())
        throw ValidationError("utilization model needs MEC base and slope values");
}

double AffineUtilization::noise(Rng& rng) const
{
    if (params_.noise_std == 0.0)
        return 0.0;
    std::normal_distribution<double> gauss(0.0, params_.noise_std);
    return gauss(rng);
}

double AffineUtilization::bbu_total(double legacy_gbps, Rng& rng) const
{
    return std::max(0.0, params_.bbu_base + params_.bbu_slope * legacy_gbps + noise(rng));
}

double AffineUtilization::mec(int mec_class, double gbps, Rng& rng) const
{
    auto pick = [mec_class](const std::vector<double>& v) {
        return v[std::min<std::size_t>(static_cast<std::size_t>(mec_class), v.size() - 1)];
    };
    return std::max(0.0, pick(params_.mec_base) + pick(params_.mec_slope) * gbps + noise(rng));
}

BbuUtilization bbu_utilization(const UtilizationModel& model, SplitId split, double legacy_gbps, Rng& rng)
{
    if (!(legacy_gbps >= 0.0))
        throw ValidationError("demand must be >= 0");
    const double total = model.bbu_total(legacy_gbps, rng);
    const ComputeShares shares = compute_shares(split);
    return {shares.du * total, shares.cu * total};
}

double mec_utilization(const UtilizationModel& model, int mec_class, double gbps, Rng& rng)
{
    if (!(gbps >= 0.0))
        throw ValidationError("demand must be >= 0");
    return model.mec(mec_class, gbps, rng);
}

} // namespace oranmec
