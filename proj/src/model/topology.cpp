#include "qla/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>

#include <nlohmann/json.hpp>

#include "qla/errors.hpp"
#include "qla/numfmt.hpp"

namespace qla {

void validate_topology(const Topology& topo) {
    const int n = topo.num_nodes();
    if (n == 0) throw ValidationError("topology '" + topo.name + "': no nodes");
    for (int i = 0; i < n; ++i) {
        if (topo.nodes[i].id != i) {
            throw ValidationError("topology '" + topo.name +
                                  "': node ids must be contiguous 0..n-1; found id " +
                                  std::to_string(topo.nodes[i].id) + " at position " +
                                  std::to_string(i));
        }
    }
    for (const Edge& e : topo.edges) {
        if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n) {
            throw ValidationError("topology '" + topo.name + "': edge endpoint out of range (" +
                                  std::to_string(e.a) + "," + std::to_string(e.b) + ")");
        }
        if (e.a == e.b) {
            throw ValidationError("topology '" + topo.name + "': self-loop at node " +
                                  std::to_string(e.a));
        }
        if (!(e.latency_s > 0.0) || !std::isfinite(e.latency_s)) {
            throw ValidationError("topology '" + topo.name + "': edge (" + std::to_string(e.a) +
                                  "," + std::to_string(e.b) +
                                  ") latency must be positive and finite");
        }
    }
    // Connectivity via BFS over the undirected edge set.
    std::vector<char> seen(n, 0);
    std::vector<std::vector<int>> adj(n);
    for (const Edge& e : topo.edges) {
        adj[e.a].push_back(e.b);
        adj[e.b].push_back(e.a);
    }
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = 1;
    int reached = 1;
    while (!frontier.empty()) {
        int u = frontier.front();
        frontier.pop();
        for (int v : adj[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                ++reached;
                frontier.push(v);
            }
        }
    }
    if (reached != n) {
        throw ValidationError("topology '" + topo.name + "': not connected (" +
                              std::to_string(reached) + " of " + std::to_string(n) +
                              " nodes reachable from node 0)");
    }
}

double haversine_km(const Coord& a, const Coord& b) {
    constexpr double kEarthRadiusKm = 6371.0;
    constexpr double kDegToRad = 0.017453292519943295;
    const double phi1 = a.lat_deg * kDegToRad;
    const double phi2 = b.lat_deg * kDegToRad;
    const double dphi = (b.lat_deg - a.lat_deg) * kDegToRad;
    const double dlam = (b.lon_deg - a.lon_deg) * kDegToRad;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlam / 2.0);
    const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

double latency_from_coords(const Coord& a, const Coord& b, double speed_s_per_km) {
    if (!(speed_s_per_km > 0.0)) {
        throw ValidationError("latency_from_coords: speed factor must be positive");
    }
    return haversine_km(a, b) * speed_s_per_km;
}

std::vector<std::vector<double>> shortest_path_latencies(const Topology& topo) {
    validate_topology(topo);
    const int n = topo.num_nodes();
    std::vector<std::vector<std::pair<int, double>>> adj(n);
    for (const Edge& e : topo.edges) {
        adj[e.a].emplace_back(e.b, e.latency_s);
        adj[e.b].emplace_back(e.a, e.latency_s);
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> dist(n, std::vector<double>(n, inf));
    for (int s = 0; s < n; ++s) {
        auto& d = dist[s];
        d[s] = 0.0;
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        heap.emplace(0.0, s);
        while (!heap.empty()) {
            auto [du, u] = heap.top();
            heap.pop();
            if (du > d[u]) continue;
            for (auto [v, w] : adj[u]) {
                if (du + w < d[v]) {
                    d[v] = du + w;
                    heap.emplace(d[v], v);
                }
            }
        }
    }
    return dist;
}

std::vector<int> select_facilities(const Topology& topo, int count) {
    const int n = topo.num_nodes();
    if (count < 1 || count > n) {
        throw ValidationError("select_facilities: count " + std::to_string(count) +
                              " out of range [1, " + std::to_string(n) + "]");
    }
    std::vector<int> degree(n, 0);
    for (const Edge& e : topo.edges) {
        ++degree[e.a];
        ++degree[e.b];
    }
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (degree[a] != degree[b]) return degree[a] > degree[b];
        return a < b;  // tie: smaller node id wins
    });
    std::vector<int> picked(order.begin(), order.begin() + count);
    std::sort(picked.begin(), picked.end());
    return picked;
}

namespace {

using nlohmann::json;

json coord_to_json(const Coord& c) { return json::array({c.lat_deg, c.lon_deg}); }

Coord coord_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2) {
        throw ValidationError("topology file: 'coord' must be [lat_deg, lon_deg]");
    }
    return Coord{j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

Topology topology_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open topology file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("topology file '" + path + "': " + e.what());
    }
    Topology topo;
    topo.name = j.value("name", std::string{});
    const double speed = j.value("speed_factor_s_per_km", 1e-5);
    if (!j.contains("nodes") || !j.contains("edges")) {
        throw ValidationError("topology file '" + path + "': missing 'nodes' or 'edges'");
    }
    for (const auto& jn : j.at("nodes")) {
        Node node;
        node.id = jn.at("id").get<int>();
        if (jn.contains("coord")) node.coord = coord_from_json(jn.at("coord"));
        topo.nodes.push_back(node);
    }
    for (const auto& je : j.at("edges")) {
        Edge e;
        e.a = je.at("a").get<int>();
        e.b = je.at("b").get<int>();
        if (je.contains("latency_ms")) {
            e.latency_s = ms_to_s(je.at("latency_ms").get<double>());
        } else {
            if (e.a < 0 || e.b < 0 || e.a >= topo.num_nodes() || e.b >= topo.num_nodes() ||
                !topo.nodes[e.a].coord || !topo.nodes[e.b].coord) {
                throw ValidationError("topology file '" + path + "': edge (" +
                                      std::to_string(e.a) + "," + std::to_string(e.b) +
                                      ") has no latency_ms and endpoints lack coordinates");
            }
            e.latency_s =
                latency_from_coords(*topo.nodes[e.a].coord, *topo.nodes[e.b].coord, speed);
        }
        e.latency_s = snap_to_ms_roundtrip(e.latency_s);
        topo.edges.push_back(e);
    }
    validate_topology(topo);
    return topo;
}

void topology_to_json_file(const Topology& topo, const std::string& path) {
    json j;
    j["name"] = topo.name;
    j["nodes"] = json::array();
    for (const Node& n : topo.nodes) {
        json jn;
        jn["id"] = n.id;
        if (n.coord) jn["coord"] = coord_to_json(*n.coord);
        j["nodes"].push_back(jn);
    }
    j["edges"] = json::array();
    for (const Edge& e : topo.edges) {
        json je;
        je["a"] = e.a;
        je["b"] = e.b;
        je["latency_ms"] = s_to_ms(e.latency_s);
        j["edges"].push_back(je);
    }
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write topology file '" + path + "'");
    out << j.dump(2) << '\n';
}

}  // namespace qla
