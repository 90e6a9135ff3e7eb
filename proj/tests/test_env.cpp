#include <doctest.h>

#include <set>

#include "common/cost_cases.hpp"
#include "oranmec/errors.hpp"
#include "oranmec/env.hpp"

using namespace oranmec;
using namespace oranmec::testing;

namespace {

EnvConfig default_env_config(double noise = 0.0)
{
    EnvConfig cfg;
    cfg.topology = std::make_shared<const Topology>(Topology::build(default_cluster()));
    cfg.domains = ActionDomains::uniform(16, 2);
    cfg.services = {{true, 1.0}, {false, 1.0}};
    AffineUtilizationParams u;
    u.noise_std = noise;
    cfg.utilization = std::make_shared<AffineUtilization>(u);
    return cfg;
}

DemandSeries flat_series(int horizon, int num_bs, double legacy, double mec)
{
    DemandSlot d(0, num_bs, 3);
    for (int k = 0; k < num_bs; ++k) {
        d.at(k, 0) = legacy;
        d.at(k, 1) = mec;
        d.at(k, 2) = mec;
    }
    return constant_demands(horizon, d);
}

Action random_action(const ActionSpace& space, Rng& rng)
{
    std::vector<int> sub;
    for (std::size_t n : space.branch_sizes())
        sub.push_back(static_cast<int>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)));
    return space.unflatten(sub);
}

} // namespace

TEST_SUITE("env") {

TEST_CASE("cost items match hand evaluation")
{
    const auto cases = cost_hand_cases();
    CHECK(cases.size() >= 10);
    for (const auto& c : cases) {
        CAPTURE(c.name);
        const auto bad = mismatches(c.expected, c.got, 1e-12);
        std::string joined;
        for (const auto& b : bad)
            joined += b + " ";
        CHECK_MESSAGE(bad.empty(), joined);
    }
}

TEST_CASE("MEC delay model")
{
    const auto rig = make_hand_rig();
    State s;
    s.demand = DemandSlot(0, 1, 2);
    s.demand.at(0, 1) = 1.0;
    const Action a{{rig.bs(SplitId::S1, 0, 0, 2, 0, 0)}};
    const auto d = mec_delays(rig.cfg, *rig.space, s.demand, a, Utilization{{0, 0, {1.0}}});
    CHECK(d[0][0] == doctest::Approx(0.5035).epsilon(1e-13));

    // zero flavor and zero load has no delay at all
    const Action idle{{rig.bs(SplitId::S1, 0, 0, 0, 0, 0)}};
    s.demand.at(0, 1) = 0.0;
    CHECK(mec_delays(rig.cfg, *rig.space, s.demand, idle, Utilization{{0, 0, {0.0}}})[0][0] == 0.0);
}

TEST_CASE("shape of the default action space")
{
    Environment env(default_env_config());
    const auto& space = env.action_space();
    CHECK(space.num_branches() == 4 * 9);
    CHECK(space.total_outputs() == 4 * (4 + 16 + 16 + 16 + 16 + 4 + 2 + 2 + 2));
    CHECK(env.state_size() == 84);

    // per-BS view
    ActionSpace one(ActionDomains::uniform(16, 2), 1, 4, 2);
    CHECK(one.total_outputs() == 78);
    CHECK(one.joint_cardinality() == 8388608ull);
    CHECK(one.per_bs_cardinality() == 8388608ull);

    // 4 BS overflow 64 bits: 2^92
    CHECK(space.joint_cardinality() == std::numeric_limits<std::uint64_t>::max());
}

TEST_CASE("flatten and unflatten are inverse")
{
    Environment env(default_env_config());
    const auto& space = env.action_space();
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const Action a = random_action(space, rng);
        CHECK(space.contains(a));
        const auto flat = space.flatten(a);
        CHECK(space.unflatten(flat) == a);
    }
    auto flat = space.flatten(default_initial_action(space));
    flat[0] = 4;
    CHECK_THROWS_AS(space.unflatten(flat), ValidationError);
    flat.pop_back();
    CHECK_THROWS_AS(space.unflatten(flat), DimensionError);

    Action bad = default_initial_action(space);
    bad.bs[0].mec_flavor.pop_back();
    CHECK_FALSE(space.contains(bad));
}

TEST_CASE("default initial action")
{
    Environment env(default_env_config());
    const auto a = *env.config().initial_action;
    for (const auto& b : a.bs) {
        CHECK(env.action_space().split(b) == SplitId::S1);
        CHECK(env.action_space().du_rc(b) == 1.0);
        CHECK(env.action_space().cu_rc(b) == 1.0);
        CHECK(b.mec_at_cu == std::vector<int>{0, 0});
    }
}

TEST_CASE("state encoding round-trips the previous configuration")
{
    Environment env(default_env_config());
    const auto& space = env.action_space();
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        State s;
        s.demand = flat_series(1, 4, 1.5, 0.25).front();
        s.previous = random_action(space, rng);
        const auto e = env.encode_state(s);
        REQUIRE(e.size() == env.state_size());
        CHECK(env.decode_previous(e) == s.previous);
        for (double v : e) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    std::vector<double> shortv(10);
    CHECK_THROWS_AS(env.decode_previous(shortv), DimensionError);
}

TEST_CASE("episode stepping")
{
    Environment env(default_env_config());
    CHECK_THROWS_AS(env.step(*env.config().initial_action), EpisodeEnded);
    const State s0 = env.reset(flat_series(3, 4, 1.0, 0.5));
    CHECK(s0.t == 0);
    CHECK(s0.previous == *env.config().initial_action);
    Rng rng(1);
    const Action a = random_action(env.action_space(), rng);
    auto r = env.step(a);
    CHECK_FALSE(r.terminal);
    CHECK(r.next.t == 1);
    CHECK(r.next.previous == a);
    CHECK(r.reward == r.costs.reward);
    env.step(a);
    r = env.step(a);
    CHECK(r.terminal);
    CHECK(env.done());
    CHECK_THROWS_AS(env.step(a), EpisodeEnded);
}

TEST_CASE("demand handling")
{
    auto cfg = default_env_config();
    Environment env(cfg);
    const State s = env.reset(flat_series(2, 4, 6.0, 7.0));
    CHECK(s.demand.legacy(0) == 4.0);
    CHECK(s.demand.mec(0, 0) == 7.0); // MEC demand is not tied to the split table

    CHECK_THROWS_AS(env.reset(flat_series(2, 4, -1.0, 0.0)), ValidationError);
    CHECK_THROWS_AS(env.reset(flat_series(2, 3, 1.0, 0.0)), DimensionError);
    CHECK_THROWS_AS(env.reset({}), ValidationError);

    cfg.strict_demand = true;
    Environment strict(cfg);
    CHECK_THROWS_AS(strict.reset(flat_series(2, 4, 6.0, 0.0)), DemandCapError);
}

TEST_CASE("seeded noise is reproducible per episode")
{
    Environment a(default_env_config(0.2)), b(default_env_config(0.2));
    Rng rng(4);
    const Action act = random_action(a.action_space(), rng);
    a.reset(flat_series(5, 4, 2.0, 0.5), 7);
    b.reset(flat_series(5, 4, 2.0, 0.5), 7);
    for (int t = 0; t < 5; ++t)
        CHECK(a.step(act).reward == b.step(act).reward);

    a.reset(flat_series(5, 4, 2.0, 0.5), 7);
    b.reset(flat_series(5, 4, 2.0, 0.5), 8);
    CHECK(a.step(act).reward != b.step(act).reward);
}

TEST_CASE("more demand never costs less with everything else fixed")
{
    Environment env(default_env_config());
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const Action a = random_action(env.action_space(), rng);
        double last = -1.0;
        for (double lam : {0.0, 0.5, 1.0, 2.0, 3.0, 4.0}) {
            State s = env.reset(flat_series(1, 4, lam, lam / 4));
            const double j = env.compute_costs(s, a).total;
            CHECK(j >= last - 1e-12);
            last = j;
        }
    }
}

TEST_CASE("keeping the configuration costs no reconfiguration")
{
    Environment env(default_env_config());
    Rng rng(6);
    for (int i = 0; i < 50; ++i) {
        State s = env.reset(flat_series(1, 4, 1.0, 0.5));
        s.previous = random_action(env.action_space(), rng);
        const auto c = env.compute_costs(s, s.previous);
        CHECK(c.reconfig_total() == 0.0);
    }
}

TEST_CASE("config validation")
{
    auto cfg = default_env_config();
    cfg.utilization.reset();
    CHECK_THROWS_AS(Environment{cfg}, ValidationError);

    cfg = default_env_config();
    cfg.services.pop_back();
    CHECK_THROWS_AS(Environment{cfg}, ValidationError);

    cfg = default_env_config();
    cfg.reward.kappa_d = -1.0;
    CHECK_THROWS_AS(Environment{cfg}, ValidationError);

    cfg = default_env_config();
    cfg.reward.gamma = 0.0;
    CHECK_THROWS_AS(Environment{cfg}, ValidationError);

    cfg = default_env_config();
    Action bad = default_initial_action(ActionSpace(cfg.domains, 4, 4, 2));
    bad.bs[0].du_server = 9;
    cfg.initial_action = bad;
    CHECK_THROWS_AS(Environment{cfg}, ValidationError);

    CHECK_THROWS_AS(ActionSpace(ActionDomains::uniform(0, 2), 1, 1, 1), ValidationError);
    CHECK_THROWS_AS(ActionSpace(ActionDomains::uniform(4, 2), 0, 1, 1), ValidationError);
}

TEST_CASE("exhaustive enumeration")
{
    // 4 splits, flavors {0..3}, 2 MEC classes, 2 DU, 1 CU
    ActionSpace toy(ActionDomains::uniform(4, 2), 1, 2, 1);
    ActionEnumerator en(toy);
    CHECK(en.cardinality() == 4ull * 4 * 4 * 4 * 4 * 2 * 1 * 2 * 2);
    std::set<std::vector<int>> seen;
    Action a;
    while (en.next(a)) {
        CHECK(toy.contains(a));
        seen.insert(toy.flatten(a));
    }
    CHECK(seen.size() == en.cardinality());
    CHECK_FALSE(en.next(a));

    ActionDomains one;
    one.splits = {SplitId::S4};
    one.flavors_rc = {1.0};
    ActionSpace single(one, 1, 1, 1);
    ActionEnumerator e1(single);
    CHECK(e1.cardinality() == 1);
    CHECK(e1.next(a));
    CHECK_FALSE(e1.next(a));

    ActionSpace big(ActionDomains::uniform(16, 2), 1, 4, 2);
    CHECK_THROWS_AS(ActionEnumerator(big, 1'000'000), OracleTooLarge);
    ActionSpace two(ActionDomains::uniform(2, 0), 2, 1, 1);
    CHECK_THROWS_AS(ActionEnumerator{two}, ValidationError);
}

TEST_CASE("small single-BS optimum matches hand reasoning")
{
    // Zero demand everywhere: zero flavors, no moves, and any split with the
    // 10.1 Gbps fronthaul beats the 157.3 Gbps one.
    auto rig = make_hand_rig();
    rig.cfg.domains.flavors_rc = {0, 1};
    rig.cfg.domains.mec_flavors_rc = {{0, 1}};
    ActionSpace space(rig.cfg.domains, 1, 2, 1);
    State s;
    s.demand = DemandSlot(0, 1, 2);
    s.previous = default_initial_action(space);
    ActionEnumerator en(space);
    Action a, best;
    double best_j = 1e300;
    while (en.next(a)) {
        const double j = cost_model(rig.cfg, space, s, a, Utilization{{0, 0, {0}}}).total;
        if (j < best_j) {
            best_j = j;
            best = a;
        }
    }
    // shrinking x and y from the 1 RC start pays kappa_R each; the MEC
    // instance dodges its resize charge by moving to the CU empty
    CHECK(best_j == doctest::Approx(10.1 + 2 * 0.05).epsilon(1e-12));
    CHECK(best.bs[0].mec_at_cu[0] == 1);
    CHECK(space.mec_rc(best.bs[0], 0) == 0.0);
    CHECK(space.du_rc(best.bs[0]) == 0.0);
    CHECK(space.split(best.bs[0]) != SplitId::S4);
    CHECK(best.bs[0].du_server == 0);
}

}
