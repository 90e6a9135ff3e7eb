#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oranmec/errors.hpp"
#include "oranmec/workload.hpp"

using namespace oranmec;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "oranmec_unit";
    fs::create_directories(dir);
    return dir / name;
}

fs::path write_file(const std::string& name, const std::string& body)
{
    const auto p = scratch(name);
    std::ofstream(p) << body;
    return p;
}

int parse_error_line(const fs::path& p)
{
    try {
        load_trace(p.string());
    } catch (const ParseError& e) {
        return static_cast<int>(e.line());
    }
    return -1;
}

} // namespace

TEST_SUITE("workload") {

TEST_CASE("trace parsing")
{
    const auto p = write_file("ok.csv", "t,bs,svc,demand_gbps\n"
                                        "0,0,0,1.5\n0,0,1,0.25\n0,1,0,2\n0,1,1,0\n"
                                        "1,0,0,3\n1,0,1,0.5\n1,1,0,4\n1,1,1,1\n");
    const auto s = load_trace(p.string());
    REQUIRE(s.size() == 2);
    CHECK(s[0].num_bs == 2);
    CHECK(s[0].num_services == 2);
    CHECK(s[0].legacy(0) == 1.5);
    CHECK(s[0].mec(0, 0) == 0.25);
    CHECK(s[1].legacy(1) == 4.0);
    CHECK(s[1].t == 1);

    // write/read round-trip is exact
    write_trace(scratch("rt.csv").string(), s);
    CHECK(load_trace(scratch("rt.csv").string()) == s);
}

TEST_CASE("missing cells read as zero")
{
    const auto p = write_file("gap.csv", "t,bs,svc,demand_gbps\n0,0,0,1\n2,1,1,2\n");
    const auto s = load_trace(p.string());
    REQUIRE(s.size() == 3);
    CHECK(s[1].legacy(0) == 0.0);
    CHECK(s[2].mec(1, 0) == 2.0);
    CHECK(s[0].mec(1, 0) == 0.0);

    const auto wide = load_trace(p.string(), 4, 3);
    CHECK(wide[0].num_bs == 4);
    CHECK(wide[0].num_services == 4);
    CHECK_THROWS_AS(load_trace(p.string(), 1, 0), ValidationError);
}

TEST_CASE("malformed traces report the offending line")
{
    CHECK(parse_error_line(write_file("b1.csv", "t,bs,svc,demand_gbps\n0,0,0,1\n0,0,x,1\n")) == 3);
    CHECK(parse_error_line(write_file("b2.csv", "t,bs,svc,demand_gbps\n0,0,0\n")) == 2);
    CHECK(parse_error_line(write_file("b3.csv", "t,bs,svc,demand_gbps\n1,0,0,1\n0,0,0,1\n")) == 3);
    CHECK(parse_error_line(write_file("b4.csv", "t,bs,service,demand\n0,0,0,1\n")) == 1);
    CHECK(parse_error_line(write_file("b5.csv", "0,0,0,1.0abc\n")) == 1);
    CHECK_THROWS_AS(load_trace(write_file("b6.csv", "0,0,0,-1\n").string()), ValidationError);
    CHECK_THROWS_AS(load_trace(scratch("does_not_exist.csv").string()), ValidationError);
}

TEST_CASE("synthetic demands are seeded and bounded")
{
    SynthParams p;
    p.seed = 9;
    p.horizon = 2 * kSlotsPerDay;
    const auto a = synth_demands(p);
    const auto b = synth_demands(p);
    CHECK(a == b);
    p.seed = 10;
    CHECK_FALSE(synth_demands(p) == a);
    REQUIRE(a.size() == static_cast<std::size_t>(2 * kSlotsPerDay));
    double mean = 0.0;
    for (const auto& s : a) {
        CHECK(s.num_bs == 4);
        CHECK(s.num_services == 3);
        for (double v : s.gbps) {
            CHECK(v >= 0.0);
            CHECK(v <= kMaxDemandGbps);
        }
        mean += s.legacy(0);
    }
    mean /= a.size();
    CHECK(mean == doctest::Approx(0.5 * kMaxDemandGbps).epsilon(0.1));

    p.horizon = 100;
    CHECK_THROWS_AS(synth_demands(p), ValidationError);
}

TEST_CASE("constant demands")
{
    DemandSlot d(0, 2, 2);
    d.at(1, 1) = 0.5;
    const auto s = constant_demands(5, d);
    REQUIRE(s.size() == 5);
    CHECK(s[4].t == 4);
    CHECK(s[4].mec(1, 0) == 0.5);
}

TEST_CASE("affine utilization")
{
    AffineUtilizationParams p;
    p.bbu_base = 0.5;
    p.bbu_slope = 1.5;
    p.mec_base = {0.2, 0.4};
    p.mec_slope = {1.0, 2.0};
    const AffineUtilization m(p);
    Rng rng(1);
    CHECK(m.bbu_total(2.0, rng) == 3.5);
    CHECK(m.mec(0, 1.0, rng) == 1.2);
    CHECK(m.mec(1, 1.0, rng) == 2.4);
    CHECK(m.mec(5, 1.0, rng) == 2.4); // last entry repeats

    const auto u = bbu_utilization(m, SplitId::S2, 2.0, rng);
    CHECK(u.du == doctest::Approx(0.79 * 3.5).epsilon(1e-14));
    CHECK(u.cu == doctest::Approx(0.21 * 3.5).epsilon(1e-14));
    const auto u4 = bbu_utilization(m, SplitId::S4, 2.0, rng);
    CHECK(u4.du == 3.5);
    CHECK(u4.cu == 0.0);

    CHECK_THROWS_AS(bbu_utilization(m, SplitId::S1, -1.0, rng), ValidationError);
    CHECK_THROWS_AS(mec_utilization(m, 0, -0.1, rng), ValidationError);

    AffineUtilizationParams bad = p;
    bad.bbu_slope = -1.0;
    CHECK_THROWS_AS(AffineUtilization{bad}, ValidationError);
}

TEST_CASE("noise is drawn from the supplied stream")
{
    AffineUtilizationParams p;
    p.noise_std = 0.3;
    const AffineUtilization m(p);
    Rng r1(5), r2(5);
    for (int i = 0; i < 20; ++i)
        CHECK(m.bbu_total(1.0, r1) == m.bbu_total(1.0, r2));
    Rng r3(5);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i)
        sum += m.bbu_total(1.0, r3);
    CHECK(sum / n == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("platform B scales slopes and bases")
{
    AffineUtilizationParams a;
    a.mec_base = {0.2, 0.3};
    a.mec_slope = {1.0, 0.8};
    const auto b = platform_b(a);
    CHECK(b.bbu_base == doctest::Approx(0.55).epsilon(1e-15));
    CHECK(b.bbu_slope == doctest::Approx(1.875).epsilon(1e-15));
    CHECK(b.mec_base[1] == doctest::Approx(0.33).epsilon(1e-15));
    CHECK(b.mec_slope[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(b.platform_id == "B");
    CHECK(AffineUtilization(b).platform_id() == "B");
}

}
