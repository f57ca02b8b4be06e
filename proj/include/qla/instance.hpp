// Assignment instances and demand generation.
//
// An instance couples a topology with a client-facility round-trip matrix,
// per-client arrival rates, per-facility service rates, and the number p of
// facilities to operate. Every node is a client; facility sites are the
// highest-degree nodes. Internally every latency is in seconds and every
// rate in requests per second; files carry milliseconds for latencies.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qla/topology.hpp"

namespace qla {

struct Instance {
    std::string name;
    Topology topology;             // retained for provenance and serialization
    std::vector<int> clients;      // node ids; always all nodes, in id order
    std::vector<int> facilities;   // node ids of candidate facility sites
    std::vector<std::vector<double>> rtt;  // [client][facility], seconds
    std::vector<double> arrival_rps;       // per client
    std::vector<double> service_rps;       // per facility
    int p = 1;

    int num_clients() const { return static_cast<int>(clients.size()); }
    int num_facilities() const { return static_cast<int>(facilities.size()); }
    double total_arrival() const;

    /// True when total demand fits strictly inside the combined usable
    /// capacity of the p largest facilities, where a facility's usable
    /// capacity is `usable_fraction * service_rps`.
    bool demand_fits(double usable_fraction) const;
};

/// Throws ValidationError on dimension mismatches, negative arrivals,
/// non-positive service rates, invalid p, or non-finite/negative RTTs.
void validate_instance(const Instance& inst);

/// Client-facility RTT matrix: twice the one-way shortest-path latency, and
/// the local-loop RTT (default 1 ms) when client and facility are co-located.
std::vector<std::vector<double>> rtt_matrix(const Topology& topo,
                                            const std::vector<int>& facilities,
                                            double local_loop_rtt_s = 1e-3);

enum class DemandKind {
    uniform_normalized,  // u_c ~ U[0,1), scaled so the sum equals the target
    normal_narrow,       // max(0, N(lambda_hat, lambda_hat/20))
    normal_wide,         // max(0, N(lambda_hat, lambda_hat))
    exponential,         // Exp with mean lambda_hat
};

DemandKind demand_kind_from_string(const std::string& s);
std::string to_string(DemandKind kind);

/// Draw one arrival-rate vector. `param` is the normalization target for
/// uniform_normalized and the per-client target rate lambda_hat otherwise.
/// Fully determined by (seed, stream); uniform_normalized redraws from the
/// next stream in the all-zero corner case.
std::vector<double> generate_demand(DemandKind kind, double param, int n,
                                    std::uint64_t seed, std::uint64_t stream);

/// Assemble an instance: facilities by degree, RTTs via shortest paths,
/// homogeneous service rate, demand as given.
Instance make_instance(const Topology& topo, int facility_count,
                       std::vector<double> arrival_rps, double service_rps,
                       int p, double local_loop_rtt_s = 1e-3);

/// Instance JSON I/O (latencies in milliseconds on disk; see README).
/// Reading a written instance reproduces it bit-exactly.
Instance instance_from_json_file(const std::string& path);
void instance_to_json_file(const Instance& inst, const std::string& path);

/// A load assignment: x[c][f] requests/second routed from client c to
/// facility f, and the set of operated facilities.
struct Assignment {
    std::vector<std::vector<double>> x_rps;  // [client][facility]
    std::vector<int> y;                      // 0/1 per facility

    std::vector<double> facility_loads() const;  // column sums of x_rps
};

/// Assignment JSON I/O. `evaluated_rt_s` may be NaN for "not evaluable"
/// (serialized as null).
void assignment_to_json_file(const Assignment& a, double evaluated_rt_s,
                             const std::string& path);
Assignment assignment_from_json_file(const std::string& path,
                                     double* evaluated_rt_s = nullptr);

}  // namespace qla
