// Experiment harness: the two evaluation campaigns and their statistics.
//
// Campaign 1 sweeps the facility budget p on fixed-total-demand instances and
// runs the exact solver and the linearized solver side by side. Campaign 2
// walks a four-factor grid (topology, service rate, demand distribution,
// target utilization) and compares the queue-ignoring baseline against the
// linearized queue-aware solver. Every record stores the exact-evaluated
// response time of the returned assignment, never a solver-internal
// objective, so downstream comparisons are apples to apples.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qla/errors.hpp"
#include "qla/instance.hpp"

namespace qla {

/// Student-t confidence interval. Throws ValidationError when samples.size()
/// < 2 or level is outside (0, 1).
struct Interval {
    double mean = 0.0;
    double half_width = 0.0;
};
Interval confidence_interval(const std::vector<double>& samples, double level = 0.95);

/// Grid parameters derived from a topology size and two factor levels:
///   |F|   = min(|N|, 100)
///   p_min = floor(0.3 |F|)
///   λ̂     = μ̂ p_min / |N|      (per-client target arrival rate)
///   p̂     = floor(a |F|)        with a the published multiplier for the
///                                five standard utilization levels
///                                {0.97:0.31, 0.81:0.37, 0.67:0.45,
///                                 0.5:0.6, 0.375:0.8}, a = 0.3/ρ̂ otherwise.
/// Throws ValidationError when ρ̂ is outside (0,1], when the topology is too
/// small for a positive p_min, or when p̂ would exceed |F| (the requested
/// utilization cannot be reached).
struct CampaignParams {
    int num_facilities = 0;
    int p_min = 0;
    double lambda_hat = 0.0;
    int p_hat = 0;
};
CampaignParams derive_campaign_params(int num_nodes, double mu_hat, double rho_hat);

/// One solver run on one configuration. `rt_s` is NaN when the configuration
/// is infeasible for the solver; statuses are "ok" and "infeasible". A
/// queueing-blind baseline solution that saturates a facility has no steady
/// state; it is recorded as feasible with rt_s = +infinity.
struct ExperimentRecord {
    std::string topology;
    double mu_hat = 0.0;
    std::string dist;
    double rho_hat = 0.0;  // 0 when utilization is not a factor (campaign 1)
    int p = 0;
    int realization = 0;
    std::string solver;  // "p" | "qp-lin" | "qp-exact"
    double rt_s = 0.0;
    double wall_s = 0.0;
    std::string status = "ok";
};

/// Budget sweep with homogeneous service rates and normalized total demand.
struct Campaign1Config {
    std::vector<std::string> topology_paths;
    int facility_count = 10;
    int p_low = 4;
    int p_high = 10;
    double total_demand_rps = 470.0;
    double service_rps = 100.0;
    int realizations = 10;
    int m = 6;
    double interval_end = 0.96;
    std::uint64_t seed = 1;
    bool include_exact = true;  // false: only the linearized solver
    bool reproducible = false;  // true: wall times recorded as 0
    int jobs = 1;
};

/// Four-factor grid for the baseline-vs-queue-aware comparison.
struct FactorGrid {
    std::vector<std::string> topology_paths;
    std::vector<double> mu_levels;
    std::vector<std::string> distributions;  // narrow | wide | exp
    std::vector<double> rho_levels;
    int realizations = 6;
    int m = 6;
    double interval_end = 0.96;
    std::uint64_t seed = 1;
    bool reproducible = false;
    int jobs = 1;
};

/// Run the campaigns. Configurations are independent; `jobs` > 1 runs them on
/// a thread pool, and records are merged in configuration order so the output
/// does not depend on the parallel degree. Throws ValidationError on broken
/// configs; per-configuration infeasibility is recorded, not thrown.
std::vector<ExperimentRecord> run_campaign_1(const Campaign1Config& cfg);
std::vector<ExperimentRecord> run_campaign_2(const FactorGrid& grid);

/// Aggregated comparison of one factor combination. The baseline is the
/// coarser model of the pair found in the records ("p" when present,
/// otherwise "qp-lin"); `delta` is RT(baseline) - RT(improved), expected
/// nonnegative up to the 1e-6 tie threshold.
struct SummaryRow {
    std::string topology;
    double mu_hat = 0.0;
    std::string dist;
    double rho_hat = 0.0;
    int p = 0;
    std::string baseline;
    std::string improved;
    int pairs = 0;        // realizations with both solvers feasible
    int ties = 0;         // |delta| < 1e-6
    int infeasible = 0;   // realizations with at least one infeasible side
    double mean_rt_baseline = 0.0;
    double ci_rt_baseline = 0.0;
    double mean_rt_improved = 0.0;
    double ci_rt_improved = 0.0;
    double mean_delta = 0.0;
    double ci_delta = 0.0;
    double mean_rel_improvement = 0.0;  // mean of delta / RT(baseline)
    double mean_wall_baseline = 0.0;
    double mean_wall_improved = 0.0;
};

struct CompareResult {
    std::vector<SummaryRow> rows;
    std::vector<std::string> violations;  // records where the coarser model won
};

/// Pair up records, verify the dominance invariant, and aggregate per factor
/// combination. Throws ValidationError on unpaired records or empty input.
/// Statistics over fewer than 2 feasible pairs are emitted as NaN.
CompareResult compare_records(const std::vector<ExperimentRecord>& records);

/// Records CSV: header
///   topology,mu_hat,dist,rho_hat,p,realization,solver,rt_s,wall_s,status
/// with shortest-round-trip number formatting; NaN fields are written empty.
void records_to_csv_file(const std::vector<ExperimentRecord>& records,
                         const std::string& path);
std::vector<ExperimentRecord> records_from_csv_file(const std::string& path);

/// Summary CSV for CompareResult rows (one line per factor combination).
void summary_to_csv_file(const CompareResult& result, const std::string& path);

/// Experiment config file: JSON object with "campaign": 1 or 2 plus the
/// fields of Campaign1Config / FactorGrid. Paths inside the file are
/// resolved relative to the file's directory.
struct ExperimentConfig {
    int campaign = 2;
    Campaign1Config c1;
    FactorGrid c2;
};
ExperimentConfig experiment_config_from_json_file(const std::string& path);

}  // namespace qla
