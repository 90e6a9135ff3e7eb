#include <doctest.h>

#include <cmath>
#include <limits>

#include "oranmec/errors.hpp"
#include "oranmec/splits.hpp"

using namespace oranmec;

TEST_SUITE("splits") {

TEST_CASE("option table loads and deadlines")
{
    const SplitCatalog& c = SplitCatalog::standard();
    struct Row {
        SplitOption o;
        double slope, intercept, deadline;
    };
    const Row rows[] = {
        {SplitOption::O1, 1.0, 0.0, 10.0}, {SplitOption::O2, 1.0, 0.0, 10.0}, {SplitOption::O3, 1.0, 0.0, 10.0},
        {SplitOption::O4, 1.0, 0.0, 1.0},  {SplitOption::O5, 1.0, 0.0, 1.0},  {SplitOption::O6, 1.02, 0.5, 0.25},
        {SplitOption::O7, 0.0, 10.1, 0.25}, {SplitOption::O8, 0.0, 157.3, 0.25},
    };
    for (const Row& r : rows) {
        CAPTURE(to_string(r.o));
        for (double lambda : {0.0, 0.7, 2.0, 4.0}) {
            CHECK(c.option(r.o).load(lambda) == r.slope * lambda + r.intercept);
        }
        CHECK(c.option(r.o).delay_req_ms == r.deadline);
    }
    CHECK(c.option(SplitOption::O7).load(3.3) == 10.1);
    CHECK(c.option(SplitOption::O8).load(0.0) == 157.3);
    CHECK(c.option(SplitOption::O6).load(1.0) == 1.02 + 0.5);
    CHECK(c.option(SplitOption::O6).max_load_gbps == 4.13);
}

TEST_CASE("segment loads per composite split")
{
    const double l = 2.0;
    auto s1 = segment_loads(SplitId::S1, l);
    CHECK(s1.fh_gbps == 10.1);
    CHECK(s1.mh_gbps == 2.0);
    CHECK(s1.bh_gbps == 2.0);
    auto s2 = segment_loads(SplitId::S2, l);
    CHECK(s2.fh_gbps == 10.1);
    CHECK(s2.mh_gbps == 2.0);
    auto s3 = segment_loads(SplitId::S3, l);
    CHECK(s3.fh_gbps == 10.1);
    CHECK(s3.mh_gbps == 1.02 * 2.0 + 0.5);
    auto s4 = segment_loads(SplitId::S4, l);
    CHECK(s4.fh_gbps == 157.3);
    CHECK(s4.mh_gbps == 2.0);
    CHECK(s4.bh_gbps == 2.0);

    CHECK(segment_loads(SplitId::S1, 0.0).fh_gbps == 10.1);
    CHECK(segment_loads(SplitId::S3, 4.0).mh_gbps == 1.02 * 4.0 + 0.5);
}

TEST_CASE("demand cap and sign are enforced")
{
    CHECK_THROWS_AS(segment_loads(SplitId::S1, -0.1), ValidationError);
    CHECK_THROWS_AS(segment_loads(SplitId::S1, 4.0001), DemandCapError);
    CHECK_NOTHROW(segment_loads(SplitId::S1, 4.0));
    CHECK(clamp_demand(5.0) == 4.0);
    CHECK(clamp_demand(-1.0) == 0.0);
    CHECK(clamp_demand(1.5) == 1.5);
}

TEST_CASE("delay requirements of each split")
{
    auto d1 = delay_requirements(SplitId::S1);
    CHECK(d1.hls_ms == 10.0);
    CHECK(d1.lls_ms == 0.25);
    auto d2 = delay_requirements(SplitId::S2);
    CHECK(d2.hls_ms == 1.0);
    CHECK(d2.lls_ms == 0.25);
    auto d3 = delay_requirements(SplitId::S3);
    CHECK(d3.hls_ms == 0.25);
    CHECK(d3.lls_ms == 0.25);
    auto d4 = delay_requirements(SplitId::S4);
    CHECK(std::isinf(d4.hls_ms));
    CHECK(d4.lls_ms == 0.25);
}

TEST_CASE("compute shares follow the per-function processing table")
{
    // LowPHY 48, HighPHY 17, LowMAC 7, HighMAC 7, LowRLC .5, HighRLC .5, PDCP 10, RRC 10
    const double pct[] = {48, 17, 7, 7, 0.5, 0.5, 10, 10};
    auto du_share = [&](int n) {
        double s = 0;
        for (int i = 0; i < n; ++i)
            s += pct[i];
        return s / 100.0;
    };
    CHECK(compute_shares(SplitId::S1).du == doctest::Approx(du_share(6)).epsilon(1e-15));
    CHECK(compute_shares(SplitId::S2).du == doctest::Approx(du_share(4)).epsilon(1e-15));
    CHECK(compute_shares(SplitId::S3).du == doctest::Approx(du_share(2)).epsilon(1e-15));
    CHECK(compute_shares(SplitId::S4).du == 1.0);
    CHECK(compute_shares(SplitId::S4).cu == 0.0);
    for (SplitId s : kAllSplits) {
        const auto sh = compute_shares(s);
        CHECK(sh.du + sh.cu == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(sh.du >= 0.0);
        CHECK(sh.cu >= 0.0);
    }
    CHECK(compute_shares(SplitId::S1).du == doctest::Approx(0.80));
    CHECK(compute_shares(SplitId::S2).du == doctest::Approx(0.79));
    CHECK(compute_shares(SplitId::S3).du == doctest::Approx(0.65));
}

TEST_CASE("catalog overrides")
{
    auto c = SplitCatalog::from_json({{"O7", {{"intercept", 9.0}}}});
    CHECK(segment_loads(SplitId::S1, 1.0, c).fh_gbps == 9.0);
    CHECK(segment_loads(SplitId::S1, 1.0).fh_gbps == 10.1);
    CHECK_THROWS_AS(SplitCatalog::from_json({{"O9", {{"slope", 1.0}}}}), ValidationError);
}

TEST_CASE("split names round-trip")
{
    for (SplitId s : kAllSplits)
        CHECK(split_from_string(to_string(s)) == s);
    CHECK_THROWS(split_from_string("S5"));
}

}
