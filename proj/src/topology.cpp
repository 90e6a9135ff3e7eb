#include "oranmec/topology.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "oranmec/errors.hpp"

namespace oranmec {

std::string to_string(NodeKind kind)
{
    switch (kind) {
    case NodeKind::RU: return "RU";
    case NodeKind::DUServer: return "DU";
    case NodeKind::CUServer: return "CU";
    case NodeKind::Router: return "Router";
    case NodeKind::EPC: return "EPC";
    }
    return "?";
}

NodeKind node_kind_from_string(const std::string& s)
{
    if (s == "RU") return NodeKind::RU;
    if (s == "DU" || s == "DUServer") return NodeKind::DUServer;
    if (s == "CU" || s == "CUServer") return NodeKind::CUServer;
    if (s == "Router") return NodeKind::Router;
    if (s == "EPC") return NodeKind::EPC;
    throw ValidationError("unknown node kind '" + s + "'");
}

namespace {

std::map<NodeId, double> server_map_from_json(const nlohmann::json& j)
{
    std::map<NodeId, double> out;
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            out[std::stoi(it.key())] = it.value().get<double>();
    } else if (j.is_array()) {
        for (const auto& e : j)
            out[e.at(0).get<NodeId>()] = e.at(1).get<double>();
    } else {
        throw ValidationError("server map must be an object or an array of pairs");
    }
    return out;
}

nlohmann::json server_map_to_json(const std::map<NodeId, double>& m)
{
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [id, v] : m)
        j[std::to_string(id)] = v;
    return j;
}

} // namespace

TopologyConfig topology_config_from_json(const nlohmann::json& j)
{
    TopologyConfig cfg;
    try {
        if (j.contains("waxman")) {
            const auto& w = j.at("waxman");
            WaxmanParams p;
            p.n = w.value("n", p.n);
            p.alpha = w.value("alpha", p.alpha);
            p.beta = w.value("beta", p.beta);
            p.seed = w.value("seed", p.seed);
            p.num_du = w.value("num_du", p.num_du);
            p.num_cu = w.value("num_cu", p.num_cu);
            p.num_ru = w.value("num_ru", p.num_ru);
            p.du_capacity_rc = w.value("du_capacity_rc", p.du_capacity_rc);
            p.cu_capacity_rc = w.value("cu_capacity_rc", p.cu_capacity_rc);
            cfg.waxman = p;
            return cfg;
        }
        for (const auto& n : j.at("nodes"))
            cfg.nodes.push_back({n.at("id").get<NodeId>(), node_kind_from_string(n.at("kind").get<std::string>())});
        for (const auto& l : j.at("links")) {
            Link link;
            link.src = l.at("src").get<NodeId>();
            link.dst = l.at("dst").get<NodeId>();
            link.capacity_gbps = l.at("capacity_gbps").get<double>();
            link.delay_ms = l.at("delay_ms").get<double>();
            link.weight = l.value("weight", link.delay_ms);
            cfg.links.push_back(link);
        }
        cfg.du_servers = j.at("du_servers").get<std::vector<NodeId>>();
        cfg.cu_servers = j.at("cu_servers").get<std::vector<NodeId>>();
        if (j.contains("mec_servers"))
            cfg.mec_servers = j.at("mec_servers").get<std::vector<NodeId>>();
        cfg.capacity_rc = server_map_from_json(j.at("capacity_rc"));
        if (j.contains("rate"))
            cfg.rate = server_map_from_json(j.at("rate"));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("topology config: ") + e.what());
    }
    return cfg;
}

nlohmann::json topology_config_to_json(const TopologyConfig& cfg)
{
    nlohmann::json j;
    if (cfg.waxman) {
        const auto& p = *cfg.waxman;
        j["waxman"] = {{"n", p.n}, {"alpha", p.alpha}, {"beta", p.beta}, {"seed", p.seed},
                       {"num_du", p.num_du}, {"num_cu", p.num_cu}, {"num_ru", p.num_ru},
                       {"du_capacity_rc", p.du_capacity_rc}, {"cu_capacity_rc", p.cu_capacity_rc}};
        return j;
    }
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : cfg.nodes)
        j["nodes"].push_back({{"id", n.id}, {"kind", to_string(n.kind)}});
    j["links"] = nlohmann::json::array();
    for (const auto& l : cfg.links)
        j["links"].push_back({{"src", l.src}, {"dst", l.dst}, {"capacity_gbps", l.capacity_gbps},
                              {"delay_ms", l.delay_ms}, {"weight", l.weight}});
    j["du_servers"] = cfg.du_servers;
    j["cu_servers"] = cfg.cu_servers;
    j["mec_servers"] = cfg.mec_servers;
    j["capacity_rc"] = server_map_to_json(cfg.capacity_rc);
    if (!cfg.rate.empty())
        j["rate"] = server_map_to_json(cfg.rate);
    return j;
}

TopologyConfig generate_waxman(const WaxmanParams& p)
{
    const int fixed = 1 + p.num_cu + p.num_du + p.num_ru;
    if (p.n < fixed)
        throw ValidationError("waxman: n=" + std::to_string(p.n) + " is smaller than the " +
                              std::to_string(fixed) + " required nodes");
    if (p.alpha <= 0.0 || p.alpha > 1.0 || p.beta <= 0.0)
        throw ValidationError("waxman: alpha must be in (0,1] and beta > 0");

    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    TopologyConfig cfg;
    std::vector<std::pair<double, double>> pos(p.n);
    for (auto& xy : pos) {
        xy.first = unit(rng);
        xy.second = unit(rng);
    }
    for (int i = 0; i < p.n; ++i) {
        NodeKind kind = NodeKind::Router;
        if (i == 0)
            kind = NodeKind::EPC;
        else if (i <= p.num_cu)
            kind = NodeKind::CUServer;
        else if (i <= p.num_cu + p.num_du)
            kind = NodeKind::DUServer;
        else if (i < fixed)
            kind = NodeKind::RU;
        cfg.nodes.push_back({i, kind});
        if (kind == NodeKind::CUServer) {
            cfg.cu_servers.push_back(i);
            cfg.capacity_rc[i] = p.cu_capacity_rc;
        } else if (kind == NodeKind::DUServer) {
            cfg.du_servers.push_back(i);
            cfg.capacity_rc[i] = p.du_capacity_rc;
        }
    }

    auto dist = [&](int a, int b) {
        return std::hypot(pos[a].first - pos[b].first, pos[a].second - pos[b].second);
    };
    double max_dist = 0.0;
    for (int a = 0; a < p.n; ++a)
        for (int b = a + 1; b < p.n; ++b)
            max_dist = std::max(max_dist, dist(a, b));
    if (max_dist == 0.0)
        max_dist = 1.0;

    auto add_link = [&](int a, int b) {
        Link l;
        l.src = a;
        l.dst = b;
        l.delay_ms = p.min_delay_ms + (p.max_delay_ms - p.min_delay_ms) * unit(rng);
        l.capacity_gbps = p.min_capacity_gbps + (p.max_capacity_gbps - p.min_capacity_gbps) * unit(rng);
        l.weight = p.max_weight * unit(rng);
        cfg.links.push_back(l);
    };

    for (int a = 0; a < p.n; ++a)
        for (int b = a + 1; b < p.n; ++b) {
            const double prob = p.alpha * std::exp(-dist(a, b) / (p.beta * max_dist));
            if (unit(rng) < prob)
                add_link(a, b);
        }

    // Join components until the graph is connected.
    std::vector<int> comp(p.n);
    auto label_components = [&] {
        std::iota(comp.begin(), comp.end(), 0);
        std::function<int(int)> find = [&](int x) { return comp[x] == x ? x : comp[x] = find(comp[x]); };
        for (const auto& l : cfg.links)
            comp[find(l.src)] = find(l.dst);
        for (int i = 0; i < p.n; ++i)
            comp[i] = find(i);
    };
    for (;;) {
        label_components();
        bool connected = std::all_of(comp.begin(), comp.end(), [&](int c) { return c == comp[0]; });
        if (connected)
            break;
        int best_a = -1, best_b = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int a = 0; a < p.n; ++a)
            for (int b = a + 1; b < p.n; ++b)
                if (comp[a] != comp[b] && dist(a, b) < best) {
                    best = dist(a, b);
                    best_a = a;
                    best_b = b;
                }
        add_link(best_a, best_b);
    }
    return cfg;
}

TopologyConfig default_cluster()
{
    TopologyConfig cfg;
    cfg.nodes = {{0, NodeKind::EPC},      {1, NodeKind::CUServer}, {2, NodeKind::CUServer},
                 {3, NodeKind::DUServer}, {4, NodeKind::DUServer}, {5, NodeKind::DUServer},
                 {6, NodeKind::DUServer}, {7, NodeKind::RU},       {8, NodeKind::RU},
                 {9, NodeKind::RU},       {10, NodeKind::RU}};
    // src, dst, capacity (Gbps), delay (ms), weight
    cfg.links = {
        {0, 1, 160, 0.06, 0.05}, {0, 2, 160, 0.08, 0.04}, {1, 2, 100, 0.03, 0.02},
        {1, 3, 100, 0.05, 0.03}, {1, 4, 100, 0.07, 0.06}, {2, 5, 100, 0.05, 0.03},
        {2, 6, 100, 0.06, 0.05}, {1, 5, 80, 0.09, 0.08},  {2, 4, 80, 0.09, 0.07},
        {3, 4, 60, 0.02, 0.02},  {5, 6, 60, 0.02, 0.02},  {7, 3, 40, 0.03, 0.01},
        {7, 4, 40, 0.06, 0.04},  {8, 4, 40, 0.04, 0.02},  {8, 5, 40, 0.08, 0.06},
        {9, 5, 40, 0.03, 0.01},  {9, 6, 40, 0.07, 0.05},  {10, 6, 40, 0.04, 0.02},
        {10, 3, 40, 0.09, 0.07},
    };
    cfg.du_servers = {3, 4, 5, 6};
    cfg.cu_servers = {1, 2};
    for (NodeId du : cfg.du_servers)
        cfg.capacity_rc[du] = 20.0;
    for (NodeId cu : cfg.cu_servers)
        cfg.capacity_rc[cu] = 100.0;
    return cfg;
}

Topology Topology::build(const TopologyConfig& input)
{
    const TopologyConfig cfg = input.waxman ? generate_waxman(*input.waxman) : input;

    Topology t;
    const int n = static_cast<int>(cfg.nodes.size());
    if (n == 0)
        throw ValidationError("topology has no nodes");
    t.nodes_.resize(n);
    std::vector<bool> seen(n, false);
    int epc_count = 0;
    for (const auto& node : cfg.nodes) {
        if (node.id < 0 || node.id >= n || seen[node.id])
            throw ValidationError("node ids must be unique and cover 0.." + std::to_string(n - 1));
        seen[node.id] = true;
        t.nodes_[node.id] = node;
        if (node.kind == NodeKind::EPC)
            ++epc_count;
        if (node.kind == NodeKind::RU)
            t.rus_.push_back(node.id);
    }
    if (epc_count != 1 || t.nodes_[0].kind != NodeKind::EPC)
        throw ValidationError("topology needs exactly one EPC node with id 0");
    if (t.rus_.empty())
        throw ValidationError("topology has no RU nodes");

    t.adjacency_.assign(n, {});
    for (const auto& l : cfg.links) {
        if (l.src < 0 || l.src >= n || l.dst < 0 || l.dst >= n || l.src == l.dst)
            throw ValidationError("link " + std::to_string(l.src) + "-" + std::to_string(l.dst) +
                                  " references an invalid node");
        if (!(l.capacity_gbps > 0.0))
            throw ValidationError("link capacity must be > 0");
        if (!(l.delay_ms >= 0.0) || !(l.weight >= 0.0))
            throw ValidationError("link delay and weight must be >= 0");
        const int idx = static_cast<int>(t.links_.size());
        t.links_.push_back(l);
        t.adjacency_[l.src].push_back({l.dst, idx});
        t.adjacency_[l.dst].push_back({l.src, idx});
    }

    auto check_servers = [&](const std::vector<NodeId>& ids, const char* what) {
        if (ids.empty())
            throw ValidationError(std::string(what) + " server set is empty");
        std::set<NodeId> uniq(ids.begin(), ids.end());
        if (uniq.size() != ids.size())
            throw ValidationError(std::string(what) + " server set has duplicates");
        for (NodeId id : ids) {
            if (id < 0 || id >= n)
                throw ValidationError(std::string(what) + " server " + std::to_string(id) + " does not exist");
            const NodeKind k = t.nodes_[id].kind;
            if (k == NodeKind::RU || k == NodeKind::EPC)
                throw ValidationError(std::string(what) + " server " + std::to_string(id) + " is not a server node");
            auto cap = cfg.capacity_rc.find(id);
            if (cap == cfg.capacity_rc.end() || !(cap->second > 0.0))
                throw ValidationError("server " + std::to_string(id) + " needs a capacity > 0");
        }
    };
    check_servers(cfg.du_servers, "DU");
    check_servers(cfg.cu_servers, "CU");
    t.du_servers_ = cfg.du_servers;
    t.cu_servers_ = cfg.cu_servers;

    std::set<NodeId> hosts(cfg.du_servers.begin(), cfg.du_servers.end());
    hosts.insert(cfg.cu_servers.begin(), cfg.cu_servers.end());
    if (cfg.mec_servers.empty()) {
        t.mec_servers_.assign(hosts.begin(), hosts.end());
    } else {
        for (NodeId id : cfg.mec_servers)
            if (!hosts.count(id))
                throw ValidationError("MEC server " + std::to_string(id) + " is neither a DU nor a CU candidate");
        t.mec_servers_ = cfg.mec_servers;
    }
    for (NodeId id : hosts) {
        t.capacity_[id] = cfg.capacity_rc.at(id);
        auto r = cfg.rate.find(id);
        const double rate = r == cfg.rate.end() ? 1.0 : r->second;
        if (!(rate > 0.0))
            throw ValidationError("server " + std::to_string(id) + " needs a processing rate > 0");
        t.rate_[id] = rate;
    }

    const int nd = static_cast<int>(t.du_servers_.size());
    const int nc = static_cast<int>(t.cu_servers_.size());
    t.table_.reserve(t.rus_.size() * nd * nc);
    for (NodeId ru : t.rus_) {
        try {
            t.shortest_path(ru, 0);
        } catch (const RoutingError&) {
            throw RoutingError("RU " + std::to_string(ru) + " cannot reach the EPC");
        }
        for (NodeId du : t.du_servers_)
            for (NodeId cu : t.cu_servers_)
                t.table_.push_back(shortest_paths(t, ru, du, cu));
    }
    return t;
}

double Topology::capacity_rc(NodeId server) const
{
    auto it = capacity_.find(server);
    if (it == capacity_.end())
        throw ValidationError("node " + std::to_string(server) + " is not a server");
    return it->second;
}

double Topology::rate(NodeId server) const
{
    auto it = rate_.find(server);
    if (it == rate_.end())
        throw ValidationError("node " + std::to_string(server) + " is not a server");
    return it->second;
}

bool Topology::hosts_mec(NodeId server) const
{
    return std::find(mec_servers_.begin(), mec_servers_.end(), server) != mec_servers_.end();
}

const PathEntry& Topology::paths(int ru_index, int du_index, int cu_index) const
{
    const int nd = static_cast<int>(du_servers_.size());
    const int nc = static_cast<int>(cu_servers_.size());
    if (ru_index < 0 || ru_index >= num_rus() || du_index < 0 || du_index >= nd || cu_index < 0 || cu_index >= nc)
        throw ValidationError("path table index out of range");
    return table_[(static_cast<std::size_t>(ru_index) * nd + du_index) * nc + cu_index];
}

Path Topology::shortest_path(NodeId src, NodeId dst) const
{
    const int n = static_cast<int>(nodes_.size());
    if (src < 0 || src >= n || dst < 0 || dst >= n)
        throw RoutingError("shortest_path: node out of range");

    struct Label {
        bool set = false;
        double weight = 0.0;
        Path path;
    };
    auto better = [](double w, const std::vector<NodeId>& seq, const Label& cur) {
        if (!cur.set || w < cur.weight)
            return true;
        if (w > cur.weight)
            return false;
        return std::lexicographical_compare(seq.begin(), seq.end(), cur.path.nodes.begin(), cur.path.nodes.end());
    };

    std::vector<Label> best(n);
    std::vector<bool> done(n, false);
    best[src].set = true;
    best[src].path.nodes = {src};

    for (;;) {
        int u = -1;
        for (int v = 0; v < n; ++v) {
            if (done[v] || !best[v].set)
                continue;
            if (u < 0 || better(best[v].weight, best[v].path.nodes, best[u]))
                u = v;
        }
        if (u < 0)
            break;
        done[u] = true;
        if (u == dst)
            break;
        for (const auto& [v, li] : adjacency_[u]) {
            if (done[v])
                continue;
            const Link& l = links_[li];
            const double w = best[u].weight + l.weight;
            std::vector<NodeId> seq = best[u].path.nodes;
            seq.push_back(v);
            if (better(w, seq, best[v])) {
                Label next;
                next.set = true;
                next.weight = w;
                next.path.nodes = std::move(seq);
                next.path.links = best[u].path.links;
                next.path.links.push_back(li);
                next.path.delay_ms = best[u].path.delay_ms + l.delay_ms;
                next.path.weight = w;
                best[v] = std::move(next);
            }
        }
    }
    if (!best[dst].set)
        throw RoutingError("no path from node " + std::to_string(src) + " to node " + std::to_string(dst));
    return best[dst].path;
}

PathEntry shortest_paths(const Topology& t, NodeId ru, NodeId du, NodeId cu)
{
    const auto& dus = t.du_servers();
    const auto& cus = t.cu_servers();
    if (std::find(dus.begin(), dus.end(), du) == dus.end())
        throw ValidationError("node " + std::to_string(du) + " is not a DU candidate");
    if (std::find(cus.begin(), cus.end(), cu) == cus.end())
        throw ValidationError("node " + std::to_string(cu) + " is not a CU candidate");
    PathEntry e;
    e.fh = t.shortest_path(ru, du);
    e.mh = t.shortest_path(du, cu);
    e.bh = t.shortest_path(cu, 0);
    return e;
}

MecRoute mec_path(const PathEntry& entry, bool colocated_with_cu)
{
    MecRoute r;
    r.path = entry.fh;
    r.delay_ms = entry.fh.delay_ms;
    if (colocated_with_cu && !entry.mh.empty()) {
        r.path.nodes.insert(r.path.nodes.end(), entry.mh.nodes.begin() + 1, entry.mh.nodes.end());
        r.path.links.insert(r.path.links.end(), entry.mh.links.begin(), entry.mh.links.end());
        r.path.delay_ms = entry.fh.delay_ms + entry.mh.delay_ms;
        r.path.weight = entry.fh.weight + entry.mh.weight;
        r.delay_ms = r.path.delay_ms;
    }
    return r;
}

} // namespace oranmec
