// Network topologies: nodes with optional geographic coordinates, undirected
// edges carrying one-way propagation latency in seconds.
//
// A topology is the raw material for an assignment instance: facility sites
// are chosen among its nodes by degree, and the client-facility round-trip
// matrix is twice the one-way shortest-path latency.
#pragma once

#include <optional>
#include <string>
#include <vector>

namespace qla {

struct Coord {
    double lat_deg = 0.0;
    double lon_deg = 0.0;
};

struct Node {
    int id = 0;
    std::optional<Coord> coord;
};

struct Edge {
    int a = 0;
    int b = 0;
    double latency_s = 0.0;  // one-way propagation latency
};

struct Topology {
    std::string name;
    std::vector<Node> nodes;
    std::vector<Edge> edges;

    int num_nodes() const { return static_cast<int>(nodes.size()); }
};

/// Throws ValidationError unless the topology is non-empty, has contiguous
/// node ids 0..n-1, no self-loops, edge endpoints that exist, strictly
/// positive finite edge latencies, and is connected.
void validate_topology(const Topology& topo);

/// Great-circle distance on a sphere of radius 6371 km.
double haversine_km(const Coord& a, const Coord& b);

/// One-way propagation latency between two coordinates: great-circle distance
/// times a seconds-per-km factor (default 1e-5 s/km, i.e. 10 us per km).
double latency_from_coords(const Coord& a, const Coord& b,
                           double speed_s_per_km = 1e-5);

/// One-way shortest-path latency from every node to every node (seconds).
/// Requires a validated topology.
std::vector<std::vector<double>> shortest_path_latencies(const Topology& topo);

/// The `count` nodes with the highest degree (ties broken by smaller id),
/// sorted by node id. Throws ValidationError if count is out of range.
std::vector<int> select_facilities(const Topology& topo, int count);

/// Topology JSON I/O. Edges may carry an explicit "latency_ms"; otherwise the
/// latency is derived from the endpoint coordinates with the file-level
/// "speed_factor_s_per_km" (default 1e-5).
Topology topology_from_json_file(const std::string& path);
void topology_to_json_file(const Topology& topo, const std::string& path);

}  // namespace qla
