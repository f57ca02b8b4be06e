#include "qla/instance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "qla/errors.hpp"
#include "qla/numfmt.hpp"
#include "qla/rng.hpp"

namespace qla {

double Instance::total_arrival() const {
    return std::accumulate(arrival_rps.begin(), arrival_rps.end(), 0.0);
}

bool Instance::demand_fits(double usable_fraction) const {
    std::vector<double> usable(service_rps);
    for (double& u : usable) u *= usable_fraction;
    std::sort(usable.begin(), usable.end(), std::greater<>());
    double cap = 0.0;
    for (int f = 0; f < p && f < static_cast<int>(usable.size()); ++f) cap += usable[f];
    return total_arrival() < cap;
}

void validate_instance(const Instance& inst) {
    const int c = inst.num_clients();
    const int f = inst.num_facilities();
    if (c == 0) throw ValidationError("instance '" + inst.name + "': no clients");
    if (f == 0) throw ValidationError("instance '" + inst.name + "': no facilities");
    if (static_cast<int>(inst.arrival_rps.size()) != c) {
        throw ValidationError("instance '" + inst.name + "': arrival_rps size " +
                              std::to_string(inst.arrival_rps.size()) + " != clients " +
                              std::to_string(c));
    }
    if (static_cast<int>(inst.service_rps.size()) != f) {
        throw ValidationError("instance '" + inst.name + "': service_rps size " +
                              std::to_string(inst.service_rps.size()) + " != facilities " +
                              std::to_string(f));
    }
    if (static_cast<int>(inst.rtt.size()) != c) {
        throw ValidationError("instance '" + inst.name + "': rtt rows " +
                              std::to_string(inst.rtt.size()) + " != clients " +
                              std::to_string(c));
    }
    for (int i = 0; i < c; ++i) {
        if (static_cast<int>(inst.rtt[i].size()) != f) {
            throw ValidationError("instance '" + inst.name + "': rtt row " + std::to_string(i) +
                                  " has " + std::to_string(inst.rtt[i].size()) +
                                  " columns, expected " + std::to_string(f));
        }
        for (int j = 0; j < f; ++j) {
            if (!(inst.rtt[i][j] >= 0.0) || !std::isfinite(inst.rtt[i][j])) {
                throw ValidationError("instance '" + inst.name + "': rtt[" + std::to_string(i) +
                                      "][" + std::to_string(j) +
                                      "] must be finite and non-negative");
            }
        }
    }
    for (int i = 0; i < c; ++i) {
        if (!(inst.arrival_rps[i] >= 0.0) || !std::isfinite(inst.arrival_rps[i])) {
            throw ValidationError("instance '" + inst.name + "': arrival_rps[" +
                                  std::to_string(i) + "] must be finite and non-negative");
        }
    }
    for (int j = 0; j < f; ++j) {
        if (!(inst.service_rps[j] > 0.0) || !std::isfinite(inst.service_rps[j])) {
            throw ValidationError("instance '" + inst.name + "': service_rps[" +
                                  std::to_string(j) + "] must be finite and positive");
        }
    }
    if (inst.p < 1 || inst.p > f) {
        throw ValidationError("instance '" + inst.name + "': p=" + std::to_string(inst.p) +
                              " out of range [1, " + std::to_string(f) + "]");
    }
}

std::vector<std::vector<double>> rtt_matrix(const Topology& topo,
                                            const std::vector<int>& facilities,
                                            double local_loop_rtt_s) {
    if (!(local_loop_rtt_s > 0.0)) {
        throw ValidationError("rtt_matrix: local-loop RTT must be positive");
    }
    const auto spl = shortest_path_latencies(topo);
    const int n = topo.num_nodes();
    std::vector<std::vector<double>> rtt(n, std::vector<double>(facilities.size()));
    for (int c = 0; c < n; ++c) {
        for (std::size_t j = 0; j < facilities.size(); ++j) {
            const int f = facilities[j];
            rtt[c][j] = (c == f) ? local_loop_rtt_s : 2.0 * spl[c][f];
            rtt[c][j] = snap_to_ms_roundtrip(rtt[c][j]);
        }
    }
    return rtt;
}

DemandKind demand_kind_from_string(const std::string& s) {
    if (s == "uniform") return DemandKind::uniform_normalized;
    if (s == "narrow") return DemandKind::normal_narrow;
    if (s == "wide") return DemandKind::normal_wide;
    if (s == "exp") return DemandKind::exponential;
    throw ValidationError("unknown demand kind '" + s +
                          "' (expected uniform|narrow|wide|exp)");
}

std::string to_string(DemandKind kind) {
    switch (kind) {
        case DemandKind::uniform_normalized: return "uniform";
        case DemandKind::normal_narrow: return "narrow";
        case DemandKind::normal_wide: return "wide";
        case DemandKind::exponential: return "exp";
    }
    throw InvariantError("unhandled demand kind");
}

std::vector<double> generate_demand(DemandKind kind, double param, int n,
                                    std::uint64_t seed, std::uint64_t stream) {
    if (n <= 0) throw ValidationError("generate_demand: need at least one client");
    if (!(param > 0.0) || !std::isfinite(param)) {
        throw ValidationError("generate_demand: rate parameter must be positive and finite");
    }
    std::vector<double> out(n);
    if (kind == DemandKind::uniform_normalized) {
        // Draw raw weights; in the measure-zero event that all weights are
        // zero, move on to the next stream and redraw.
        for (std::uint64_t attempt = 0;; ++attempt) {
            Rng rng(seed, stream + attempt);
            double sum = 0.0;
            for (int i = 0; i < n; ++i) {
                out[i] = rng.uniform01();
                sum += out[i];
            }
            if (sum > 0.0) {
                for (int i = 0; i < n; ++i) out[i] *= param / sum;
                return out;
            }
        }
    }
    Rng rng(seed, stream);
    for (int i = 0; i < n; ++i) {
        switch (kind) {
            case DemandKind::normal_narrow:
                out[i] = std::max(0.0, rng.normal(param, param / 20.0));
                break;
            case DemandKind::normal_wide:
                out[i] = std::max(0.0, rng.normal(param, param));
                break;
            case DemandKind::exponential:
                out[i] = rng.exponential(param);
                break;
            default:
                throw InvariantError("unhandled demand kind");
        }
    }
    return out;
}

Instance make_instance(const Topology& topo, int facility_count,
                       std::vector<double> arrival_rps, double service_rps, int p,
                       double local_loop_rtt_s) {
    validate_topology(topo);
    Instance inst;
    inst.name = topo.name;
    inst.topology = topo;
    inst.clients.resize(topo.num_nodes());
    for (int i = 0; i < topo.num_nodes(); ++i) inst.clients[i] = i;
    inst.facilities = select_facilities(topo, facility_count);
    inst.rtt = rtt_matrix(topo, inst.facilities, local_loop_rtt_s);
    inst.arrival_rps = std::move(arrival_rps);
    inst.service_rps.assign(inst.facilities.size(), service_rps);
    inst.p = p;
    validate_instance(inst);
    return inst;
}

namespace {

using nlohmann::json;

}  // namespace

Instance instance_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open instance file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("instance file '" + path + "': " + e.what());
    }
    Instance inst;
    try {
        inst.name = j.value("name", std::string{});
        inst.topology.name = inst.name;
        for (const auto& jn : j.at("nodes")) {
            Node node;
            node.id = jn.at("id").get<int>();
            if (jn.contains("coord")) {
                node.coord = Coord{jn.at("coord")[0].get<double>(),
                                   jn.at("coord")[1].get<double>()};
            }
            inst.topology.nodes.push_back(node);
        }
        for (const auto& je : j.at("edges")) {
            Edge e;
            e.a = je.at("a").get<int>();
            e.b = je.at("b").get<int>();
            e.latency_s = ms_to_s(je.at("latency_ms").get<double>());
            inst.topology.edges.push_back(e);
        }
        inst.clients = j.at("clients").get<std::vector<int>>();
        inst.facilities = j.at("facilities").get<std::vector<int>>();
        for (const auto& row : j.at("rtt_ms")) {
            std::vector<double> r;
            for (const auto& v : row) r.push_back(ms_to_s(v.get<double>()));
            inst.rtt.push_back(std::move(r));
        }
        inst.arrival_rps = j.at("arrival_rps").get<std::vector<double>>();
        inst.service_rps = j.at("service_rps").get<std::vector<double>>();
        inst.p = j.at("p").get<int>();
    } catch (const json::exception& e) {
        throw ValidationError("instance file '" + path + "': " + e.what());
    }
    validate_instance(inst);
    return inst;
}

void instance_to_json_file(const Instance& inst, const std::string& path) {
    validate_instance(inst);
    json j;
    j["name"] = inst.name;
    j["nodes"] = json::array();
    for (const Node& n : inst.topology.nodes) {
        json jn;
        jn["id"] = n.id;
        if (n.coord) jn["coord"] = json::array({n.coord->lat_deg, n.coord->lon_deg});
        j["nodes"].push_back(jn);
    }
    j["edges"] = json::array();
    for (const Edge& e : inst.topology.edges) {
        j["edges"].push_back({{"a", e.a}, {"b", e.b}, {"latency_ms", s_to_ms(e.latency_s)}});
    }
    j["clients"] = inst.clients;
    j["facilities"] = inst.facilities;
    j["rtt_ms"] = json::array();
    for (const auto& row : inst.rtt) {
        json jr = json::array();
        for (double v : row) jr.push_back(s_to_ms(v));
        j["rtt_ms"].push_back(jr);
    }
    j["arrival_rps"] = inst.arrival_rps;
    j["service_rps"] = inst.service_rps;
    j["p"] = inst.p;
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write instance file '" + path + "'");
    out << j.dump(2) << '\n';
}

std::vector<double> Assignment::facility_loads() const {
    if (x_rps.empty()) return {};
    std::vector<double> loads(x_rps.front().size(), 0.0);
    for (const auto& row : x_rps) {
        for (std::size_t f = 0; f < loads.size(); ++f) loads[f] += row[f];
    }
    return loads;
}

void assignment_to_json_file(const Assignment& a, double evaluated_rt_s,
                             const std::string& path) {
    json j;
    j["x_rps"] = a.x_rps;
    j["y"] = a.y;
    if (std::isfinite(evaluated_rt_s)) {
        j["evaluated_rt_s"] = evaluated_rt_s;
    } else {
        j["evaluated_rt_s"] = nullptr;
    }
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write assignment file '" + path + "'");
    out << j.dump(2) << '\n';
}

Assignment assignment_from_json_file(const std::string& path, double* evaluated_rt_s) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open assignment file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("assignment file '" + path + "': " + e.what());
    }
    Assignment a;
    try {
        for (const auto& row : j.at("x_rps")) a.x_rps.push_back(row.get<std::vector<double>>());
        a.y = j.at("y").get<std::vector<int>>();
        if (evaluated_rt_s) {
            const auto& v = j.at("evaluated_rt_s");
            *evaluated_rt_s =
                v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
        }
    } catch (const json::exception& e) {
        throw ValidationError("assignment file '" + path + "': " + e.what());
    }
    return a;
}

}  // namespace qla
