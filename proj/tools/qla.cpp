// qla — command-line front end for the queue-aware load assignment suite.
//
// Subcommands:
//   gen-instance  draw demand on a topology and write an instance file
//   linearize     place basepoints under the delay curve and report the error
//   solve         run one solver (p | qp-exact | qp-lin) on an instance file
//   experiment    run a campaign from a grid config and emit records + summary
//   compare       aggregate a records CSV into a per-cell summary
//
// Exit codes: 0 success, 2 usage/validation, 3 infeasible, 4 no convergence,
// 5 violated internal invariant (includes the baseline-beats-queue-aware
// sentinel, which theory rules out). Units at this boundary: milliseconds for
// latencies, requests/second for rates; everything internal runs in seconds.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "qla/convex.hpp"
#include "qla/harness.hpp"
#include "qla/instance.hpp"
#include "qla/milp.hpp"
#include "qla/mm1.hpp"
#include "qla/numfmt.hpp"
#include "qla/pwl.hpp"
#include "qla/topology.hpp"

namespace {

using qla::format_double;

void echo_flag(bool verbose, const std::string& name, const std::string& value) {
    if (verbose) fmt::print("flag {}={}\n", name, value);
}
void echo_flag(bool verbose, const std::string& name, double value) {
    echo_flag(verbose, name, format_double(value));
}
void echo_flag(bool verbose, const std::string& name, std::int64_t value) {
    echo_flag(verbose, name, fmt::format("{}", value));
}

struct GenInstanceArgs {
    std::string topology;
    std::string out;
    int facilities = 10;
    int p = 5;
    std::string demand = "uniform";
    double demand_param_rps = 470.0;
    double mu_rps = 100.0;
    double local_loop_ms = 1.0;
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;
};

int cmd_gen_instance(const GenInstanceArgs& a, bool verbose) {
    echo_flag(verbose, "facilities", std::int64_t{a.facilities});
    echo_flag(verbose, "p", std::int64_t{a.p});
    echo_flag(verbose, "demand-param", a.demand_param_rps);
    echo_flag(verbose, "mu", a.mu_rps);
    echo_flag(verbose, "local-loop-ms", a.local_loop_ms);
    echo_flag(verbose, "seed", static_cast<std::int64_t>(a.seed));
    echo_flag(verbose, "stream", static_cast<std::int64_t>(a.stream));

    const qla::Topology topo = qla::topology_from_json_file(a.topology);
    const qla::DemandKind kind = qla::demand_kind_from_string(a.demand);
    const std::vector<double> arrival = qla::generate_demand(
        kind, a.demand_param_rps, topo.num_nodes(), a.seed, a.stream);
    const qla::Instance inst = qla::make_instance(
        topo, a.facilities, arrival, a.mu_rps, a.p, qla::ms_to_s(a.local_loop_ms));
    qla::instance_to_json_file(inst, a.out);

    const double total = inst.total_arrival();
    const double capacity = static_cast<double>(a.p) * a.mu_rps;
    fmt::print("instance: clients={} facilities={} total_demand_rps={} p={} "
               "capacity_rps={} fits={}\n",
               inst.clients.size(), inst.facilities.size(), format_double(total), a.p,
               format_double(capacity), total < capacity ? "yes" : "no");
    return 0;
}

struct LinearizeArgs {
    int m = 6;
    double interval_end = 0.96;
    double mu_rps = 0.0;  // 0: stay in the utilization domain
    std::string out;
};

int cmd_linearize(const LinearizeArgs& a, bool verbose) {
    echo_flag(verbose, "m", std::int64_t{a.m});
    echo_flag(verbose, "end", a.interval_end);
    if (a.mu_rps != 0.0) echo_flag(verbose, "mu", a.mu_rps);

    if (!(a.interval_end > 0.0) || !(a.interval_end < 1.0)) {
        throw qla::ValidationError(fmt::format(
            "linearize: interval end {} outside (0, 1); the delay curve has an "
            "asymptote at utilization 1", a.interval_end));
    }
    qla::BasepointSet bp =
        qla::imamoto_extended(qla::weighted_tis_curve(), a.m, a.interval_end);
    if (a.mu_rps != 0.0) bp = qla::rescale(bp, a.mu_rps);
    if (!a.out.empty()) qla::basepoints_to_csv_file(bp, a.out);
    fmt::print("m={} interval_end={} epsilon={}\n", a.m, format_double(a.interval_end),
               format_double(bp.epsilon));
    return 0;
}

struct SolveArgs {
    std::string instance;
    std::string solver;
    int m = 6;
    double interval_end = 0.96;
    double capacity_fraction = 1.0;
    double tolerance = 1e-9;
    std::string out;
    std::string dump_model;
    bool reproducible = false;
};

nlohmann::ordered_json assignment_to_json(const qla::Instance& inst,
                                          const qla::Assignment& assign) {
    nlohmann::ordered_json j;
    j["facilities"] = inst.facilities;
    j["y"] = assign.y;
    j["x_rps"] = assign.x_rps;
    return j;
}

void write_report(const nlohmann::ordered_json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw qla::ValidationError("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out.good()) throw qla::ValidationError("write failed: " + path);
}

int cmd_solve(const SolveArgs& a, bool verbose) {
    echo_flag(verbose, "m", std::int64_t{a.m});
    echo_flag(verbose, "end", a.interval_end);
    echo_flag(verbose, "capacity-fraction", a.capacity_fraction);
    echo_flag(verbose, "tolerance", a.tolerance);

    const qla::Instance inst = qla::instance_from_json_file(a.instance);
    nlohmann::ordered_json report;
    report["solver"] = a.solver;
    report["status"] = "ok";
    report["p"] = inst.p;

    double rt = std::numeric_limits<double>::quiet_NaN();
    double wall = 0.0;
    if (a.solver == "qp-exact") {
        const qla::SolveReport rep =
            qla::solve_qp_exact(inst, inst.p, qla::kDefaultTauRel, a.tolerance);
        rt = qla::response_time(inst, rep.assignment);
        wall = rep.wall_s;
        report["rt_s"] = rt;
        report["kkt_residual"] = rep.kkt_residual;
        report["iterations"] = rep.iterations;
        report["assignment"] = assignment_to_json(inst, rep.assignment);
    } else if (a.solver == "qp-lin") {
        if (!(a.interval_end > 0.0) || !(a.interval_end < 1.0)) {
            throw qla::ValidationError(fmt::format(
                "solve: interval end {} outside (0, 1)", a.interval_end));
        }
        const qla::BasepointSet util_bp =
            qla::imamoto_extended(qla::weighted_tis_curve(), a.m, a.interval_end);
        std::vector<qla::BasepointSet> bps;
        bps.reserve(inst.facilities.size());
        for (std::size_t f = 0; f < inst.facilities.size(); ++f) {
            bps.push_back(qla::rescale(util_bp, inst.service_rps[f]));
        }
        const qla::MilpModel model = qla::build_qp_lin_model(inst, bps);
        if (!a.dump_model.empty()) qla::milp_to_text_file(model, a.dump_model);
        const qla::MilpResult res = qla::solve_milp(model);
        rt = qla::response_time(inst, res.assignment);
        wall = res.wall_s;
        report["rt_s"] = rt;
        report["model_objective_s"] = res.objective;
        report["nodes"] = res.nodes;
        report["lp_iterations"] = res.lp_iterations;
        report["gap"] = res.gap;
        report["assignment"] = assignment_to_json(inst, res.assignment);
    } else {  // "p" — the queue-ignoring baseline
        const qla::MilpModel model = qla::build_p_model(inst, a.capacity_fraction);
        if (!a.dump_model.empty()) qla::milp_to_text_file(model, a.dump_model);
        const qla::MilpResult res = qla::solve_milp(model);
        wall = res.wall_s;
        try {
            rt = qla::response_time(inst, res.assignment);
            report["rt_s"] = rt;
        } catch (const qla::SteadyStateError&) {
            // The baseline ignores queueing, so at full capacity fraction it
            // may legally saturate a facility; the response time is unbounded.
            report["status"] = "saturated";
            report["rt_s"] = nullptr;
        }
        report["model_objective_s"] = res.objective;
        report["nodes"] = res.nodes;
        report["lp_iterations"] = res.lp_iterations;
        report["gap"] = res.gap;
        report["assignment"] = assignment_to_json(inst, res.assignment);
    }
    report["wall_s"] = a.reproducible ? 0.0 : wall;
    if (!a.out.empty()) write_report(report, a.out);

    fmt::print("solver={} status={} rt_s={} p={} wall_s={}\n", a.solver,
               report["status"].get<std::string>(),
               std::isnan(rt) ? "unbounded" : format_double(rt), inst.p,
               format_double(a.reproducible ? 0.0 : wall));
    return 0;
}

struct ExperimentArgs {
    std::string config;
    std::string out_dir;
    bool reproducible = false;
    int jobs = 0;  // 0: keep the config's value
};

int cmd_experiment(const ExperimentArgs& a, bool verbose) {
    if (a.jobs != 0) echo_flag(verbose, "jobs", std::int64_t{a.jobs});

    qla::ExperimentConfig cfg = qla::experiment_config_from_json_file(a.config);
    if (a.reproducible) {
        cfg.c1.reproducible = true;
        cfg.c2.reproducible = true;
    }
    if (a.jobs != 0) {
        cfg.c1.jobs = a.jobs;
        cfg.c2.jobs = a.jobs;
    }
    const std::vector<qla::ExperimentRecord> records =
        cfg.campaign == 1 ? qla::run_campaign_1(cfg.c1) : qla::run_campaign_2(cfg.c2);

    std::filesystem::create_directories(a.out_dir);
    const std::filesystem::path dir(a.out_dir);
    qla::records_to_csv_file(records, (dir / "records.csv").string());
    const qla::CompareResult cmp = qla::compare_records(records);
    qla::summary_to_csv_file(cmp, (dir / "summary.csv").string());

    int pairs = 0, infeasible = 0;
    for (const qla::SummaryRow& row : cmp.rows) {
        pairs += row.pairs;
        infeasible += row.infeasible;
    }
    fmt::print("campaign={} records={} summary_rows={} pairs={} infeasible={} "
               "violations={}\n",
               cfg.campaign, records.size(), cmp.rows.size(), pairs, infeasible,
               cmp.violations.size());
    if (!cmp.violations.empty()) {
        for (const std::string& v : cmp.violations) {
            fmt::print(stderr, "dominance violation: {}\n", v);
        }
        throw qla::InvariantError(fmt::format(
            "experiment: {} record pair(s) where the queue-ignoring baseline beat "
            "the queue-aware solver beyond tolerance", cmp.violations.size()));
    }
    return 0;
}

struct CompareArgs {
    std::string records;
    std::string out;
};

int cmd_compare(const CompareArgs& a) {
    const std::vector<qla::ExperimentRecord> records =
        qla::records_from_csv_file(a.records);
    const qla::CompareResult cmp = qla::compare_records(records);
    if (!a.out.empty()) qla::summary_to_csv_file(cmp, a.out);
    for (const qla::SummaryRow& row : cmp.rows) {
        fmt::print("topology={} mu_hat={} dist={} rho_hat={} p={} {}->{} pairs={} "
                   "ties={} infeasible={} mean_delta_s={} mean_rel_improvement={}\n",
                   row.topology, format_double(row.mu_hat), row.dist,
                   format_double(row.rho_hat), row.p, row.baseline, row.improved,
                   row.pairs, row.ties, row.infeasible, format_double(row.mean_delta),
                   format_double(row.mean_rel_improvement));
    }
    fmt::print("rows={} violations={}\n", cmp.rows.size(), cmp.violations.size());
    if (!cmp.violations.empty()) {
        for (const std::string& v : cmp.violations) {
            fmt::print(stderr, "dominance violation: {}\n", v);
        }
        throw qla::InvariantError(fmt::format(
            "compare: {} record pair(s) violate the dominance property",
            cmp.violations.size()));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"queue-aware load assignment toolkit: generate instances, place "
                 "basepoints, solve, and run experiment campaigns"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("--verbose", verbose, "echo every parsed numeric flag value");

    GenInstanceArgs gen;
    CLI::App* gen_cmd = app.add_subcommand(
        "gen-instance", "draw a demand realization on a topology and write an "
                        "instance file (latencies stored in ms)");
    gen_cmd->add_option("--topology", gen.topology, "topology JSON file")
        ->required()->check(CLI::ExistingFile);
    gen_cmd->add_option("--out", gen.out, "output instance JSON file")->required();
    gen_cmd->add_option("--facilities", gen.facilities,
                        "number of candidate facilities (highest-degree nodes)")
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--p", gen.p, "facility budget (open exactly p)")
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--demand", gen.demand,
                        "demand distribution: uniform | narrow | wide | exp")
        ->check(CLI::IsMember({"uniform", "narrow", "wide", "exp"}));
    gen_cmd->add_option("--demand-param", gen.demand_param_rps,
                        "req/s: total demand for uniform, per-client target rate "
                        "for narrow/wide/exp")
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--mu", gen.mu_rps, "service rate per facility (req/s)")
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--local-loop-ms", gen.local_loop_ms,
                        "co-located client-facility RTT (milliseconds)")
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", gen.seed, "RNG seed");
    gen_cmd->add_option("--stream", gen.stream, "RNG stream index");

    LinearizeArgs lin;
    CLI::App* lin_cmd = app.add_subcommand(
        "linearize", "place basepoints under the weighted time-in-system curve "
                     "and print the approximation error");
    lin_cmd->add_option("--m", lin.m, "number of basepoints (>= 3)");
    lin_cmd->add_option("--end", lin.interval_end,
                        "linearization interval end as utilization, in (0, 1)");
    lin_cmd->add_option("--mu", lin.mu_rps,
                        "optional service rate (req/s) to rescale the basepoint "
                        "abscissae into the rate domain");
    lin_cmd->add_option("--out", lin.out, "output basepoint CSV file");

    SolveArgs sol;
    CLI::App* sol_cmd = app.add_subcommand(
        "solve", "solve one instance file and print the exact-evaluated average "
                 "response time (seconds)");
    sol_cmd->add_option("--instance", sol.instance, "instance JSON file")
        ->required()->check(CLI::ExistingFile);
    sol_cmd->add_option("--solver", sol.solver,
                        "p (queue-ignoring baseline) | qp-exact | qp-lin")
        ->required()->check(CLI::IsMember({"p", "qp-exact", "qp-lin"}));
    sol_cmd->add_option("--m", sol.m, "qp-lin: basepoints per facility (>= 3)");
    sol_cmd->add_option("--end", sol.interval_end,
                        "qp-lin: linearization interval end as utilization, in (0, 1)");
    sol_cmd->add_option("--capacity-fraction", sol.capacity_fraction,
                        "p: usable fraction of each service rate, in (0, 1]");
    sol_cmd->add_option("--tolerance", sol.tolerance,
                        "qp-exact: KKT residual tolerance");
    sol_cmd->add_option("--out", sol.out, "output report JSON file");
    sol_cmd->add_option("--dump-model", sol.dump_model,
                        "p/qp-lin: also write the model in LP text format");
    sol_cmd->add_flag("--reproducible", sol.reproducible,
                      "record wall time as 0 in the report for byte-stable output");

    ExperimentArgs exp;
    CLI::App* exp_cmd = app.add_subcommand(
        "experiment", "run a campaign from a grid config file and write "
                      "records.csv + summary.csv");
    exp_cmd->add_option("--config", exp.config, "grid config JSON file")
        ->required()->check(CLI::ExistingFile);
    exp_cmd->add_option("--out-dir", exp.out_dir, "output directory")->required();
    exp_cmd->add_flag("--reproducible", exp.reproducible,
                      "record wall times as 0 for byte-stable output");
    exp_cmd->add_option("--jobs", exp.jobs, "worker threads (overrides the config)")
        ->check(CLI::PositiveNumber);

    CompareArgs cmp;
    CLI::App* cmp_cmd = app.add_subcommand(
        "compare", "aggregate a records CSV into a per-cell summary");
    cmp_cmd->add_option("--records", cmp.records, "records CSV file")
        ->required()->check(CLI::ExistingFile);
    cmp_cmd->add_option("--out", cmp.out, "output summary CSV file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen_cmd->parsed()) return cmd_gen_instance(gen, verbose);
        if (lin_cmd->parsed()) return cmd_linearize(lin, verbose);
        if (sol_cmd->parsed()) return cmd_solve(sol, verbose);
        if (exp_cmd->parsed()) return cmd_experiment(exp, verbose);
        if (cmp_cmd->parsed()) return cmd_compare(cmp);
    } catch (const qla::Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        fmt::print(stderr, "internal error: {}\n", e.what());
        return 5;
    }
    return 0;
}
