#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace oranmec {

using NodeId = int;

enum class NodeKind { RU, DUServer, CUServer, Router, EPC };

std::string to_string(NodeKind kind);
NodeKind node_kind_from_string(const std::string& s);

struct Node {
    NodeId id = 0;
    NodeKind kind = NodeKind::Router;
};

// Undirected link. Routing minimizes weight; delay feeds the constraints.
struct Link {
    NodeId src = 0;
    NodeId dst = 0;
    double capacity_gbps = 0.0;
    double delay_ms = 0.0;
    double weight = 0.0;
};

struct Path {
    std::vector<NodeId> nodes;
    std::vector<int> links; // indices into Topology::links()
    double delay_ms = 0.0;
    double weight = 0.0;

    bool empty() const { return links.empty(); }
};

// Fronthaul (RU -> DU host), midhaul (DU host -> CU host) and backhaul
// (CU host -> EPC) for one RU and one (DU, CU) placement.
struct PathEntry {
    Path fh;
    Path mh;
    Path bh;
};

struct WaxmanParams {
    int n = 11;
    double alpha = 0.5; // link probability
    double beta = 0.1;  // edge length control
    std::uint64_t seed = 1;
    int num_du = 4;
    int num_cu = 2;
    int num_ru = 4;
    double du_capacity_rc = 20.0;
    double cu_capacity_rc = 100.0;
    double min_delay_ms = 0.0;
    double max_delay_ms = 0.1;
    double min_capacity_gbps = 30.0;
    double max_capacity_gbps = 160.0;
    double max_weight = 0.1;
};

struct TopologyConfig {
    std::vector<Node> nodes;
    std::vector<Link> links;
    std::vector<NodeId> du_servers;
    std::vector<NodeId> cu_servers;
    std::vector<NodeId> mec_servers; // empty means du_servers + cu_servers
    std::map<NodeId, double> capacity_rc;
    std::map<NodeId, double> rate; // rho_l; servers without an entry use 1
    std::optional<WaxmanParams> waxman;
};

TopologyConfig topology_config_from_json(const nlohmann::json& j);
nlohmann::json topology_config_to_json(const TopologyConfig& cfg);

// Expands a Waxman description into an explicit node/link list. Node 0 is the
// EPC, then CU servers, DU servers, RUs, and routers. Disconnected components
// are joined by their geometrically closest node pair.
TopologyConfig generate_waxman(const WaxmanParams& params);

// Hand-built single cluster: 1 EPC, 2 CU servers, 4 DU servers, 4 RUs.
TopologyConfig default_cluster();

class Topology {
public:
    // Validates the description and precomputes every FH/MH/BH path.
    static Topology build(const TopologyConfig& config);

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Link>& links() const { return links_; }
    const std::vector<NodeId>& rus() const { return rus_; }
    const std::vector<NodeId>& du_servers() const { return du_servers_; }
    const std::vector<NodeId>& cu_servers() const { return cu_servers_; }
    const std::vector<NodeId>& mec_servers() const { return mec_servers_; }

    int num_rus() const { return static_cast<int>(rus_.size()); }
    double capacity_rc(NodeId server) const;
    double rate(NodeId server) const;
    bool hosts_mec(NodeId server) const;

    // Table lookup by position in rus() / du_servers() / cu_servers().
    const PathEntry& paths(int ru_index, int du_index, int cu_index) const;

    // Minimum-weight path; ties broken by the lexicographically smallest node
    // sequence. Throws RoutingError when dst is unreachable.
    Path shortest_path(NodeId src, NodeId dst) const;

private:
    Topology() = default;

    std::vector<Node> nodes_;
    std::vector<Link> links_;
    std::vector<std::vector<std::pair<NodeId, int>>> adjacency_; // (neighbor, link index)
    std::vector<NodeId> rus_;
    std::vector<NodeId> du_servers_;
    std::vector<NodeId> cu_servers_;
    std::vector<NodeId> mec_servers_;
    std::map<NodeId, double> capacity_;
    std::map<NodeId, double> rate_;
    std::vector<PathEntry> table_; // [ru][du][cu]
};

// Route for RU k with DU on `du` and CU on `cu` (node ids).
PathEntry shortest_paths(const Topology& t, NodeId ru, NodeId du, NodeId cu);

struct MecRoute {
    Path path;
    double delay_ms = 0.0;
};

// MEC traffic terminates at the DU host (FH only) or at the CU host (FH + MH).
MecRoute mec_path(const PathEntry& entry, bool colocated_with_cu);

} // namespace oranmec
