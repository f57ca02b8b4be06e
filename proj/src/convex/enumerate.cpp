// Exact solve by enumeration of facility subsets, and report export.

#include "qla/convex.hpp"

#include <chrono>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace qla {

namespace {

// Advance a strictly increasing index combination; false when exhausted.
bool next_combination(std::vector<int>& comb, int universe) {
    const int k = static_cast<int>(comb.size());
    for (int i = k - 1; i >= 0; --i) {
        if (comb[i] < universe - (k - i)) {
            ++comb[i];
            for (int j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
            return true;
        }
    }
    return false;
}

}  // namespace

SolveReport solve_qp_exact(const Instance& inst, int p, double tau_rel, double tolerance) {
    const auto t_start = std::chrono::steady_clock::now();
    validate_instance(inst);
    const int nf = inst.num_facilities();
    if (p < 1 || p > nf) {
        throw ValidationError(fmt::format("exact solve: p={} out of range [1, {}]", p, nf));
    }

    bool have_best = false;
    SolveReport best;
    int total_iterations = 0;
    std::vector<int> comb(p);
    std::iota(comb.begin(), comb.end(), 0);
    // Lexicographic enumeration; a strictly-better-by-1e-9 rule keeps the
    // lexicographically smallest subset on ties.
    do {
        PqpProblem problem = make_pqp(inst, comb, tau_rel);
        double usable = 0.0;
        for (std::size_t j = 0; j < problem.subset.size(); ++j) {
            usable += inst.service_rps[problem.subset[j]] - problem.tau_rps[j];
        }
        if (!(inst.total_arrival() < usable * (1.0 - 1e-12))) continue;
        SolveReport r = solve_pqp(problem, tolerance);
        total_iterations += r.iterations;
        if (!have_best || r.objective_s < best.objective_s - 1e-9) {
            best = r;
            have_best = true;
        }
    } while (next_combination(comb, nf));

    if (!have_best) {
        throw InfeasibleError(fmt::format(
            "exact solve: no facility subset of size {} can carry {} req/s "
            "within its usable capacity", p, inst.total_arrival()));
    }
    best.iterations = total_iterations;
    best.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return best;
}

void solve_report_to_json_file(const SolveReport& report, const Instance& inst,
                               const std::string& path) {
    nlohmann::json j;
    j["objective_s"] = report.objective_s;
    j["kkt_residual"] = report.kkt_residual;
    j["iterations"] = report.iterations;
    j["wall_s"] = report.wall_s;
    nlohmann::json subset = nlohmann::json::array();
    nlohmann::json fac = nlohmann::json::array();
    const std::vector<double> loads = report.assignment.facility_loads();
    for (int col : report.subset) {
        subset.push_back(inst.facilities[col]);
        nlohmann::json f;
        f["node"] = inst.facilities[col];
        f["load_rps"] = loads[col];
        f["utilization"] = loads[col] / inst.service_rps[col];
        fac.push_back(f);
    }
    j["subset"] = subset;
    j["operated_facilities"] = fac;
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write report file '" + path + "'");
    out << j.dump(2) << '\n';
}

}  // namespace qla
