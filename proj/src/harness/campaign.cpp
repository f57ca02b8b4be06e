// Campaign runners, record pairing/aggregation, and CSV plumbing.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "qla/convex.hpp"
#include "qla/harness.hpp"
#include "qla/milp.hpp"
#include "qla/mm1.hpp"
#include "qla/numfmt.hpp"
#include "qla/pwl.hpp"

namespace qla {

namespace {

constexpr double kTieThreshold = 1e-6;        // |delta| below this is a tie
constexpr double kDominanceTol = 1e-6;        // allowed negative delta slack
const double kNan = std::numeric_limits<double>::quiet_NaN();

/// Run `count` independent tasks, optionally on a small thread pool. The
/// first exception thrown by any task is rethrown after all workers stop.
void run_tasks(int jobs, int count, const std::function<void(int)>& fn) {
    if (jobs <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (first_error) return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int workers = std::min(jobs, count);
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

ExperimentRecord base_record(const std::string& topology, double mu_hat,
                             const std::string& dist, double rho_hat, int p,
                             int realization, const std::string& solver) {
    ExperimentRecord rec;
    rec.topology = topology;
    rec.mu_hat = mu_hat;
    rec.dist = dist;
    rec.rho_hat = rho_hat;
    rec.p = p;
    rec.realization = realization;
    rec.solver = solver;
    return rec;
}

void finish_infeasible(ExperimentRecord& rec) {
    rec.rt_s = kNan;
    rec.wall_s = 0.0;
    rec.status = "infeasible";
}

/// Exact-evaluated linearized solve; fills rt/wall/status.
void run_qp_lin(const Instance& inst, const std::vector<BasepointSet>& bps,
                ExperimentRecord& rec) {
    try {
        const MilpResult res = solve_milp(build_qp_lin_model(inst, bps));
        rec.rt_s = response_time(inst, res.assignment);
        rec.wall_s = res.wall_s;
    } catch (const InfeasibleError&) {
        finish_infeasible(rec);
    }
}

void run_p_baseline(const Instance& inst, double capacity_fraction,
                    ExperimentRecord& rec) {
    try {
        const MilpResult res = solve_milp(build_p_model(inst, capacity_fraction));
        rec.wall_s = res.wall_s;
        try {
            rec.rt_s = response_time(inst, res.assignment);
        } catch (const SteadyStateError&) {
            // A queueing-blind assignment may load a facility at its full
            // service rate; the queue then has no steady state and the exact
            // response time is unbounded.
            rec.rt_s = std::numeric_limits<double>::infinity();
        }
    } catch (const InfeasibleError&) {
        finish_infeasible(rec);
    }
}

void run_qp_exact(const Instance& inst, ExperimentRecord& rec) {
    try {
        const SolveReport rep = solve_qp_exact(inst, inst.p);
        rec.rt_s = response_time(inst, rep.assignment);
        rec.wall_s = rep.wall_s;
    } catch (const InfeasibleError&) {
        finish_infeasible(rec);
    }
}

std::vector<Topology> load_topologies(const std::vector<std::string>& paths) {
    if (paths.empty()) {
        throw ValidationError("experiment: no topologies configured");
    }
    std::vector<Topology> topos;
    topos.reserve(paths.size());
    for (const std::string& path : paths) topos.push_back(topology_from_json_file(path));
    return topos;
}

}  // namespace

std::vector<ExperimentRecord> run_campaign_1(const Campaign1Config& cfg) {
    if (cfg.realizations < 2) {
        throw ValidationError("campaign 1: need at least 2 realizations");
    }
    if (cfg.p_low > cfg.p_high || cfg.p_low < 1) {
        throw ValidationError(fmt::format(
            "campaign 1: budget range [{}, {}] is empty or invalid", cfg.p_low, cfg.p_high));
    }
    const std::vector<Topology> topos = load_topologies(cfg.topology_paths);
    const BasepointSet util_bp =
        imamoto_extended(weighted_tis_curve(), cfg.m, cfg.interval_end);
    const BasepointSet fac_bp = rescale(util_bp, cfg.service_rps);

    // One demand vector per (topology, realization); the draw does not depend
    // on the budget p, so the sweep holds everything else fixed.
    const int n_topo = static_cast<int>(topos.size());
    const int n_p = cfg.p_high - cfg.p_low + 1;
    std::vector<std::vector<std::vector<double>>> demand(n_topo);
    for (int t = 0; t < n_topo; ++t) {
        demand[t].resize(cfg.realizations);
        for (int r = 0; r < cfg.realizations; ++r) {
            demand[t][r] = generate_demand(
                DemandKind::uniform_normalized, cfg.total_demand_rps,
                topos[t].num_nodes(), cfg.seed,
                static_cast<std::uint64_t>(t) * 1024 + static_cast<std::uint64_t>(r));
        }
    }

    const int n_configs = n_topo * cfg.realizations * n_p;
    std::vector<std::vector<ExperimentRecord>> slots(n_configs);
    run_tasks(cfg.jobs, n_configs, [&](int idx) {
        const int t = idx / (cfg.realizations * n_p);
        const int r = (idx / n_p) % cfg.realizations;
        const int p = cfg.p_low + idx % n_p;
        const Topology& topo = topos[t];
        const Instance inst = make_instance(topo, cfg.facility_count, demand[t][r],
                                            cfg.service_rps, p);
        std::vector<BasepointSet> bps(inst.facilities.size(), fac_bp);

        std::vector<ExperimentRecord>& out = slots[idx];
        if (cfg.include_exact) {
            out.push_back(base_record(topo.name, cfg.service_rps, "uniform", 0.0, p, r,
                                      "qp-exact"));
            run_qp_exact(inst, out.back());
        }
        out.push_back(
            base_record(topo.name, cfg.service_rps, "uniform", 0.0, p, r, "qp-lin"));
        run_qp_lin(inst, bps, out.back());
        if (cfg.reproducible) {
            for (ExperimentRecord& rec : out) rec.wall_s = 0.0;
        }
    });

    std::vector<ExperimentRecord> records;
    for (const auto& slot : slots) records.insert(records.end(), slot.begin(), slot.end());
    return records;
}

std::vector<ExperimentRecord> run_campaign_2(const FactorGrid& grid) {
    if (grid.realizations < 2) {
        throw ValidationError("campaign 2: need at least 2 realizations");
    }
    if (grid.mu_levels.empty() || grid.distributions.empty() || grid.rho_levels.empty()) {
        throw ValidationError("campaign 2: every factor needs at least one level");
    }
    const std::vector<Topology> topos = load_topologies(grid.topology_paths);
    const BasepointSet util_bp =
        imamoto_extended(weighted_tis_curve(), grid.m, grid.interval_end);

    const int n_topo = static_cast<int>(topos.size());
    const int n_mu = static_cast<int>(grid.mu_levels.size());
    const int n_dist = static_cast<int>(grid.distributions.size());
    const int n_rho = static_cast<int>(grid.rho_levels.size());
    const int R = grid.realizations;

    // Per-service-rate basepoints (facilities are homogeneous per instance).
    std::vector<BasepointSet> mu_bp;
    mu_bp.reserve(n_mu);
    for (double mu : grid.mu_levels) mu_bp.push_back(rescale(util_bp, mu));

    // Demand draws depend on (topology, mu, dist, realization) but not on the
    // utilization level: the same load is assigned under different budgets.
    std::vector<std::vector<double>> demand(
        static_cast<std::size_t>(n_topo) * n_mu * n_dist * R);
    for (int t = 0; t < n_topo; ++t) {
        const int n_nodes = topos[t].num_nodes();
        for (int mi = 0; mi < n_mu; ++mi) {
            // lambda_hat depends only on mu and the node count.
            const CampaignParams base =
                derive_campaign_params(n_nodes, grid.mu_levels[mi], grid.rho_levels[0]);
            for (int di = 0; di < n_dist; ++di) {
                const DemandKind kind = demand_kind_from_string(grid.distributions[di]);
                for (int r = 0; r < R; ++r) {
                    const std::size_t stream =
                        ((static_cast<std::size_t>(t) * n_mu + mi) * n_dist + di) * R + r;
                    demand[stream] = generate_demand(kind, base.lambda_hat, n_nodes,
                                                     grid.seed, stream);
                }
            }
        }
    }

    const int n_configs = n_topo * n_mu * n_dist * n_rho * R;
    std::vector<std::vector<ExperimentRecord>> slots(n_configs);
    run_tasks(grid.jobs, n_configs, [&](int idx) {
        int rest = idx;
        const int r = rest % R;
        rest /= R;
        const int ri = rest % n_rho;
        rest /= n_rho;
        const int di = rest % n_dist;
        rest /= n_dist;
        const int mi = rest % n_mu;
        const int t = rest / n_mu;

        const Topology& topo = topos[t];
        const double mu_hat = grid.mu_levels[mi];
        const double rho_hat = grid.rho_levels[ri];
        const CampaignParams params =
            derive_campaign_params(topo.num_nodes(), mu_hat, rho_hat);
        const std::size_t stream =
            ((static_cast<std::size_t>(t) * n_mu + mi) * n_dist + di) * R + r;
        const Instance inst = make_instance(topo, params.num_facilities, demand[stream],
                                            mu_hat, params.p_hat);
        std::vector<BasepointSet> bps(inst.facilities.size(), mu_bp[mi]);

        std::vector<ExperimentRecord>& out = slots[idx];
        out.push_back(base_record(topo.name, mu_hat, grid.distributions[di], rho_hat,
                                  params.p_hat, r, "p"));
        // Both solvers face the same usable-capacity envelope (the basepoint
        // interval end, e.g. 0.96 of each service rate) so the paired
        // comparison isolates queue-awareness rather than capacity headroom.
        run_p_baseline(inst, grid.interval_end, out.back());
        out.push_back(base_record(topo.name, mu_hat, grid.distributions[di], rho_hat,
                                  params.p_hat, r, "qp-lin"));
        run_qp_lin(inst, bps, out.back());
        if (grid.reproducible) {
            for (ExperimentRecord& rec : out) rec.wall_s = 0.0;
        }
    });

    std::vector<ExperimentRecord> records;
    for (const auto& slot : slots) records.insert(records.end(), slot.begin(), slot.end());
    return records;
}

namespace {

int solver_rank(const std::string& solver) {
    if (solver == "p") return 0;
    if (solver == "qp-lin") return 1;
    if (solver == "qp-exact") return 2;
    throw ValidationError(fmt::format("compare: unknown solver id '{}'", solver));
}

using FactorKey = std::tuple<std::string, double, std::string, double, int>;

std::string describe(const FactorKey& key, int realization) {
    return fmt::format("topology={} mu_hat={} dist={} rho_hat={} p={} realization={}",
                       std::get<0>(key), std::get<1>(key), std::get<2>(key),
                       std::get<3>(key), std::get<4>(key), realization);
}

Interval interval_or_nan(const std::vector<double>& samples) {
    if (samples.size() < 2) {
        return {samples.size() == 1 ? samples.front() : kNan, kNan};
    }
    return confidence_interval(samples);
}

}  // namespace

CompareResult compare_records(const std::vector<ExperimentRecord>& records) {
    if (records.empty()) throw ValidationError("compare: no records");

    // Pair the two solvers of every (factor combination, realization).
    std::map<FactorKey, std::map<int, std::vector<const ExperimentRecord*>>> groups;
    for (const ExperimentRecord& rec : records) {
        solver_rank(rec.solver);  // validates the id
        const FactorKey key{rec.topology, rec.mu_hat, rec.dist, rec.rho_hat, rec.p};
        groups[key][rec.realization].push_back(&rec);
    }

    CompareResult result;
    for (const auto& [key, by_realization] : groups) {
        SummaryRow row;
        row.topology = std::get<0>(key);
        row.mu_hat = std::get<1>(key);
        row.dist = std::get<2>(key);
        row.rho_hat = std::get<3>(key);
        row.p = std::get<4>(key);

        std::vector<double> rt_base, rt_improved, delta, rel;
        std::vector<double> wall_base, wall_improved;
        for (const auto& [realization, recs] : by_realization) {
            if (recs.size() != 2 || recs[0]->solver == recs[1]->solver) {
                throw ValidationError(fmt::format(
                    "compare: expected exactly one record per solver pair at {}",
                    describe(key, realization)));
            }
            const ExperimentRecord* base = recs[0];
            const ExperimentRecord* improved = recs[1];
            if (solver_rank(base->solver) > solver_rank(improved->solver)) {
                std::swap(base, improved);
            }
            row.baseline = base->solver;
            row.improved = improved->solver;

            if (base->status != "ok" || improved->status != "ok") {
                ++row.infeasible;
                continue;
            }
            ++row.pairs;
            const double d = base->rt_s - improved->rt_s;
            if (std::abs(d) < kTieThreshold) ++row.ties;
            if (d < -kDominanceTol) {
                result.violations.push_back(fmt::format(
                    "{} : RT({}) = {} s beats RT({}) = {} s by more than {}",
                    describe(key, realization), base->solver,
                    format_double(base->rt_s), improved->solver,
                    format_double(improved->rt_s), kDominanceTol));
            }
            rt_base.push_back(base->rt_s);
            rt_improved.push_back(improved->rt_s);
            delta.push_back(d);
            // 1 - improved/base equals d/base for finite values and stays
            // finite (= 1) when a saturated baseline has infinite rt.
            rel.push_back(1.0 - improved->rt_s / base->rt_s);
            wall_base.push_back(base->wall_s);
            wall_improved.push_back(improved->wall_s);
        }

        const Interval ib = interval_or_nan(rt_base);
        const Interval ii = interval_or_nan(rt_improved);
        const Interval id = interval_or_nan(delta);
        const Interval ir = interval_or_nan(rel);
        const Interval iwb = interval_or_nan(wall_base);
        const Interval iwi = interval_or_nan(wall_improved);
        row.mean_rt_baseline = ib.mean;
        row.ci_rt_baseline = ib.half_width;
        row.mean_rt_improved = ii.mean;
        row.ci_rt_improved = ii.half_width;
        row.mean_delta = id.mean;
        row.ci_delta = id.half_width;
        row.mean_rel_improvement = ir.mean;
        row.mean_wall_baseline = iwb.mean;
        row.mean_wall_improved = iwi.mean;
        result.rows.push_back(std::move(row));
    }
    return result;
}

namespace {

std::string csv_number(double v) { return std::isnan(v) ? std::string{} : format_double(v); }

double parse_field(const std::string& field, const std::string& context) {
    try {
        return parse_double(field);
    } catch (const ValidationError& e) {
        throw ValidationError(context + ": " + e.what());
    }
}

double csv_parse_number(const std::string& field, const std::string& context) {
    if (field.empty()) return kNan;
    return parse_field(field, context);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

constexpr const char* kRecordsHeader =
    "topology,mu_hat,dist,rho_hat,p,realization,solver,rt_s,wall_s,status";

}  // namespace

void records_to_csv_file(const std::vector<ExperimentRecord>& records,
                         const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    out << kRecordsHeader << '\n';
    for (const ExperimentRecord& rec : records) {
        out << rec.topology << ',' << format_double(rec.mu_hat) << ',' << rec.dist << ','
            << format_double(rec.rho_hat) << ',' << rec.p << ',' << rec.realization << ','
            << rec.solver << ',' << csv_number(rec.rt_s) << ','
            << format_double(rec.wall_s) << ',' << rec.status << '\n';
    }
    if (!out.good()) throw ValidationError("write failed: " + path);
}

std::vector<ExperimentRecord> records_from_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open records file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kRecordsHeader) {
        throw ValidationError(fmt::format(
            "records file '{}': expected header '{}'", path, kRecordsHeader));
    }
    std::vector<ExperimentRecord> records;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 10) {
            throw ValidationError(fmt::format(
                "records file '{}' line {}: expected 10 fields, got {}", path, line_no,
                f.size()));
        }
        const std::string ctx = fmt::format("{}:{}", path, line_no);
        ExperimentRecord rec;
        rec.topology = f[0];
        rec.mu_hat = parse_field(f[1], ctx);
        rec.dist = f[2];
        rec.rho_hat = parse_field(f[3], ctx);
        rec.p = static_cast<int>(parse_field(f[4], ctx));
        rec.realization = static_cast<int>(parse_field(f[5], ctx));
        rec.solver = f[6];
        rec.rt_s = csv_parse_number(f[7], ctx);
        rec.wall_s = parse_field(f[8], ctx);
        rec.status = f[9];
        if (rec.status != "ok" && rec.status != "infeasible") {
            throw ValidationError(fmt::format(
                "records file '{}' line {}: unknown status '{}'", path, line_no, rec.status));
        }
        records.push_back(std::move(rec));
    }
    return records;
}

void summary_to_csv_file(const CompareResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    out << "topology,mu_hat,dist,rho_hat,p,baseline,improved,pairs,ties,infeasible,"
           "mean_rt_baseline,ci_rt_baseline,mean_rt_improved,ci_rt_improved,"
           "mean_delta,ci_delta,mean_rel_improvement,mean_wall_baseline,"
           "mean_wall_improved\n";
    for (const SummaryRow& row : result.rows) {
        out << row.topology << ',' << format_double(row.mu_hat) << ',' << row.dist << ','
            << format_double(row.rho_hat) << ',' << row.p << ',' << row.baseline << ','
            << row.improved << ',' << row.pairs << ',' << row.ties << ','
            << row.infeasible << ',' << csv_number(row.mean_rt_baseline) << ','
            << csv_number(row.ci_rt_baseline) << ',' << csv_number(row.mean_rt_improved)
            << ',' << csv_number(row.ci_rt_improved) << ',' << csv_number(row.mean_delta)
            << ',' << csv_number(row.ci_delta) << ','
            << csv_number(row.mean_rel_improvement) << ','
            << csv_number(row.mean_wall_baseline) << ','
            << csv_number(row.mean_wall_improved) << '\n';
    }
    if (!out.good()) throw ValidationError("write failed: " + path);
}

ExperimentConfig experiment_config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open experiment config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("experiment config '{}': {}", path, e.what()));
    }
    if (!j.is_object() || !j.contains("campaign")) {
        throw ValidationError(fmt::format(
            "experiment config '{}': missing 'campaign' (1 or 2)", path));
    }

    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const nlohmann::json& arr) {
        if (!arr.is_array() || arr.empty()) {
            throw ValidationError(fmt::format(
                "experiment config '{}': 'topologies' must be a non-empty list", path));
        }
        std::vector<std::string> out;
        for (const auto& item : arr) {
            out.push_back((base / item.get<std::string>()).string());
        }
        return out;
    };

    ExperimentConfig cfg;
    cfg.campaign = j.at("campaign").get<int>();
    try {
        if (cfg.campaign == 1) {
            Campaign1Config& c = cfg.c1;
            c.topology_paths = resolve(j.at("topologies"));
            c.facility_count = j.value("facility_count", c.facility_count);
            c.p_low = j.value("p_low", c.p_low);
            c.p_high = j.value("p_high", c.p_high);
            c.total_demand_rps = j.value("total_demand_rps", c.total_demand_rps);
            c.service_rps = j.value("service_rps", c.service_rps);
            c.realizations = j.value("realizations", c.realizations);
            c.m = j.value("m", c.m);
            c.interval_end = j.value("interval_end", c.interval_end);
            c.seed = j.value("seed", c.seed);
            c.include_exact = j.value("include_exact", c.include_exact);
            c.jobs = j.value("jobs", c.jobs);
        } else if (cfg.campaign == 2) {
            FactorGrid& g = cfg.c2;
            g.topology_paths = resolve(j.at("topologies"));
            g.mu_levels = j.at("mu_levels").get<std::vector<double>>();
            g.distributions = j.at("distributions").get<std::vector<std::string>>();
            g.rho_levels = j.at("rho_levels").get<std::vector<double>>();
            g.realizations = j.value("realizations", g.realizations);
            g.m = j.value("m", g.m);
            g.interval_end = j.value("interval_end", g.interval_end);
            g.seed = j.value("seed", g.seed);
            g.jobs = j.value("jobs", g.jobs);
            for (const std::string& d : g.distributions) demand_kind_from_string(d);
        } else {
            throw ValidationError(fmt::format(
                "experiment config '{}': campaign must be 1 or 2, got {}", path,
                cfg.campaign));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("experiment config '{}': {}", path, e.what()));
    }
    return cfg;
}

}  // namespace qla
