#include <doctest.h>

#include <algorithm>
#include <functional>
#include <limits>
#include <random>

#include "oranmec/errors.hpp"
#include "oranmec/topology.hpp"

using namespace oranmec;

namespace {

struct BruteBest {
    double weight = std::numeric_limits<double>::infinity();
    std::vector<NodeId> nodes;
    double delay = 0.0;
};

// Enumerates every simple path by DFS.
BruteBest brute_force(const TopologyConfig& cfg, NodeId src, NodeId dst)
{
    const int n = static_cast<int>(cfg.nodes.size());
    std::vector<std::vector<const Link*>> adj(n);
    for (const auto& l : cfg.links) {
        adj[l.src].push_back(&l);
        adj[l.dst].push_back(&l);
    }
    BruteBest best;
    std::vector<NodeId> stack{src};
    std::vector<char> on(n, 0);
    on[src] = 1;
    std::function<void(NodeId, double, double)> dfs = [&](NodeId u, double w, double d) {
        if (u == dst) {
            if (w < best.weight || (w == best.weight && stack < best.nodes)) {
                best.weight = w;
                best.nodes = stack;
                best.delay = d;
            }
            return;
        }
        for (const Link* l : adj[u]) {
            const NodeId v = l->src == u ? l->dst : l->src;
            if (on[v])
                continue;
            on[v] = 1;
            stack.push_back(v);
            dfs(v, w + l->weight, d + l->delay_ms);
            stack.pop_back();
            on[v] = 0;
        }
    };
    dfs(src, 0.0, 0.0);
    return best;
}

TopologyConfig line_config()
{
    // 0 EPC - 1 CU - 2 DU - 3 RU
    TopologyConfig c;
    c.nodes = {{0, NodeKind::EPC}, {1, NodeKind::CUServer}, {2, NodeKind::DUServer}, {3, NodeKind::RU}};
    c.links = {{3, 2, 10, 0.1, 0.1}, {2, 1, 10, 0.2, 0.2}, {1, 0, 10, 0.3, 0.3}};
    c.du_servers = {2};
    c.cu_servers = {1};
    c.capacity_rc = {{1, 100.0}, {2, 20.0}};
    return c;
}

} // namespace

TEST_SUITE("topology") {

TEST_CASE("default cluster shape")
{
    const auto cfg = default_cluster();
    CHECK(cfg.nodes.size() == 11);
    CHECK(cfg.links.size() == 19);
    const auto t = Topology::build(cfg);
    CHECK(t.num_rus() == 4);
    CHECK(t.du_servers().size() == 4);
    CHECK(t.cu_servers().size() == 2);
    CHECK(t.mec_servers().size() == 6);
    CHECK(t.capacity_rc(3) == 20.0);
    CHECK(t.capacity_rc(1) == 100.0);
    CHECK(t.rate(3) == 1.0);
    CHECK_THROWS_AS(t.capacity_rc(7), ValidationError);
}

TEST_CASE("shortest paths match exhaustive enumeration")
{
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        WaxmanParams p;
        p.n = 9;
        p.seed = seed;
        p.num_du = 2;
        p.num_cu = 1;
        p.num_ru = 2;
        p.alpha = 0.8;
        p.beta = 0.4;
        const auto cfg = generate_waxman(p);
        const auto t = Topology::build(cfg);
        for (NodeId a = 0; a < p.n; ++a)
            for (NodeId b = 0; b < p.n; ++b) {
                if (a == b)
                    continue;
                const Path got = t.shortest_path(a, b);
                const BruteBest want = brute_force(cfg, a, b);
                CAPTURE(seed);
                CAPTURE(a);
                CAPTURE(b);
                CHECK(got.weight == doctest::Approx(want.weight).epsilon(1e-12));
                CHECK(got.nodes == want.nodes);
                CHECK(got.delay_ms == doctest::Approx(want.delay).epsilon(1e-12));
                CHECK(got.links.size() + 1 == got.nodes.size());
            }
    }
}

TEST_CASE("equal-weight routes pick the lexicographically smallest node sequence")
{
    // square: 0 EPC, 1 CU, 2 DU, 3 RU; 3-1-0 and 3-2-0 both weigh 2
    TopologyConfig c;
    c.nodes = {{0, NodeKind::EPC}, {1, NodeKind::CUServer}, {2, NodeKind::DUServer}, {3, NodeKind::RU}};
    c.links = {{3, 2, 10, 1, 1}, {2, 0, 10, 1, 1}, {3, 1, 10, 5, 1}, {1, 0, 10, 5, 1}};
    c.du_servers = {2};
    c.cu_servers = {1};
    c.capacity_rc = {{1, 100.0}, {2, 20.0}};
    const auto t = Topology::build(c);
    const Path p = t.shortest_path(3, 0);
    CHECK(p.nodes == std::vector<NodeId>{3, 1, 0});
    CHECK(p.delay_ms == 10.0);
}

TEST_CASE("path table and MEC routes")
{
    const auto t = Topology::build(line_config());
    const PathEntry& e = t.paths(0, 0, 0);
    CHECK(e.fh.nodes == std::vector<NodeId>{3, 2});
    CHECK(e.mh.nodes == std::vector<NodeId>{2, 1});
    CHECK(e.bh.nodes == std::vector<NodeId>{1, 0});
    CHECK(e.fh.delay_ms == 0.1);
    CHECK(e.mh.delay_ms == 0.2);
    CHECK(e.bh.delay_ms == 0.3);
    CHECK(mec_path(e, false).delay_ms == 0.1);
    CHECK(mec_path(e, true).delay_ms == doctest::Approx(0.1 + 0.2).epsilon(1e-15));
    CHECK(mec_path(e, true).path.nodes == std::vector<NodeId>{3, 2, 1});
    CHECK_THROWS_AS(t.paths(1, 0, 0), ValidationError);

    const auto d = Topology::build(default_cluster());
    for (int ru = 0; ru < d.num_rus(); ++ru)
        for (int du = 0; du < 4; ++du)
            for (int cu = 0; cu < 2; ++cu) {
                const PathEntry& p = d.paths(ru, du, cu);
                const PathEntry q = shortest_paths(d, d.rus()[ru], d.du_servers()[du], d.cu_servers()[cu]);
                CHECK(p.fh.nodes == q.fh.nodes);
                CHECK(p.mh.nodes == q.mh.nodes);
                CHECK(p.bh.nodes == q.bh.nodes);
                CHECK(p.fh.nodes.front() == d.rus()[ru]);
                CHECK(p.fh.nodes.back() == d.du_servers()[du]);
                CHECK(p.mh.nodes.back() == d.cu_servers()[cu]);
                CHECK(p.bh.nodes.back() == 0);
            }
}

TEST_CASE("a server listed as both DU and CU has an empty midhaul")
{
    auto c = line_config();
    c.du_servers = {1, 2};
    const auto t = Topology::build(c);
    CHECK(t.paths(0, 0, 0).mh.empty());
    CHECK(t.paths(0, 0, 0).mh.delay_ms == 0.0);
}

TEST_CASE("invalid descriptions are rejected")
{
    auto c = line_config();
    c.nodes[0].kind = NodeKind::Router;
    CHECK_THROWS_AS(Topology::build(c), ValidationError);

    c = line_config();
    c.nodes[2].id = 1;
    CHECK_THROWS_AS(Topology::build(c), ValidationError);

    c = line_config();
    c.links[0].delay_ms = -1.0;
    CHECK_THROWS_AS(Topology::build(c), ValidationError);

    c = line_config();
    c.links[0].capacity_gbps = 0.0;
    CHECK_THROWS_AS(Topology::build(c), ValidationError);

    c = line_config();
    c.du_servers = {3}; // an RU
    CHECK_THROWS_AS(Topology::build(c), ValidationError);

    c = line_config();
    c.capacity_rc.erase(2);
    CHECK_THROWS_AS(Topology::build(c), ValidationError);

    c = line_config();
    c.mec_servers = {0};
    CHECK_THROWS_AS(Topology::build(c), ValidationError);

    c = line_config();
    c.rate[2] = 0.0;
    CHECK_THROWS_AS(Topology::build(c), ValidationError);

    c = line_config();
    c.links.pop_back(); // CU-EPC gone
    CHECK_THROWS_AS(Topology::build(c), RoutingError);

    c = line_config();
    c.nodes.push_back({4, NodeKind::RU}); // isolated RU
    CHECK_THROWS_AS(Topology::build(c), RoutingError);
}

TEST_CASE("restricted MEC hosts")
{
    auto c = line_config();
    c.mec_servers = {1};
    const auto t = Topology::build(c);
    CHECK(t.hosts_mec(1));
    CHECK_FALSE(t.hosts_mec(2));
}

TEST_CASE("waxman generation is seeded and connected")
{
    WaxmanParams p;
    p.seed = 42;
    const auto a = generate_waxman(p);
    const auto b = generate_waxman(p);
    REQUIRE(a.links.size() == b.links.size());
    for (std::size_t i = 0; i < a.links.size(); ++i) {
        CHECK(a.links[i].src == b.links[i].src);
        CHECK(a.links[i].dst == b.links[i].dst);
        CHECK(a.links[i].delay_ms == b.links[i].delay_ms);
    }
    for (const auto& l : a.links) {
        CHECK(l.delay_ms >= 0.0);
        CHECK(l.delay_ms <= 0.1);
        CHECK(l.capacity_gbps >= 30.0);
        CHECK(l.capacity_gbps <= 160.0);
        CHECK(l.weight <= 0.1);
    }
    const auto t = Topology::build(a); // throws if any RU is cut off
    for (NodeId x = 1; x < p.n; ++x)
        CHECK_NOTHROW(t.shortest_path(x, 0));

    p.n = 5;
    CHECK_THROWS_AS(generate_waxman(p), ValidationError);
}

TEST_CASE("json round-trip")
{
    const auto cfg = default_cluster();
    const auto back = topology_config_from_json(topology_config_to_json(cfg));
    CHECK(back.nodes.size() == cfg.nodes.size());
    CHECK(back.links.size() == cfg.links.size());
    CHECK(back.du_servers == cfg.du_servers);
    CHECK(back.cu_servers == cfg.cu_servers);
    CHECK(back.capacity_rc == cfg.capacity_rc);

    const auto w = topology_config_from_json({{"waxman", {{"seed", 3}}}});
    REQUIRE(w.waxman);
    CHECK(w.waxman->seed == 3);
    CHECK_NOTHROW(Topology::build(w));

    CHECK_THROWS(node_kind_from_string("Satellite"));
    CHECK(node_kind_from_string("DU") == NodeKind::DUServer);
}

}
