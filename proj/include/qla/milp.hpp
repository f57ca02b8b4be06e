// Facility-assignment models over the in-repo LP core, plus a deterministic
// best-first branch-and-bound over the facility-open binaries.
//
// Two model builders are provided:
//   build_qp_lin_model  - the piecewise-linearized queue-aware model: per
//       facility, the demand-weighted time-in-system curve is replaced by a
//       convex combination of precomputed basepoints (SOS2 weights z), with
//       load linked to the chosen combination and facility activation.
//   build_p_model       - the classic queue-ignoring p-median model: pure
//       RTT objective with per-facility capacity gated by the open binary.
#pragma once

#include <string>
#include <vector>

#include "qla/instance.hpp"
#include "qla/pwl.hpp"
#include "qla/simplex.hpp"

namespace qla {

/// Ordered special-ordered-set-2 group: at most two of the listed columns may
/// be nonzero in a valid solution, and only at adjacent positions.
struct Sos2Group {
    int facility = 0;             // index into the model's facility order
    std::vector<int> z_cols;      // LP columns, basepoint order
    std::vector<double> alpha;    // load abscissae (req/s), rescaled
    std::vector<double> beta;     // weighted time-in-system ordinates
};

struct MilpModel {
    LpProblem lp;                 // continuous relaxation; binaries live in [0,1]
    std::vector<int> y_cols;      // facility-open binaries, facility order
    std::vector<int> x_cols;      // row-major [client][facility] allocations
    std::vector<Sos2Group> sos2;  // empty for the queue-ignoring model
    int num_clients = 0;
    int num_facilities = 0;
    int p = 0;                    // facilities to operate (budget row rhs)
    std::vector<int> facility_nodes;  // node ids, for reporting
};

/// Builds the linearized queue-aware model. `basepoints[f]` must already be
/// rescaled to facility f's service rate (abscissae in req/s, first one at
/// exactly zero, last one strictly below the service rate). Throws
/// ValidationError on malformed basepoints and InfeasibleError when total
/// demand exceeds p times the largest linearization interval end.
MilpModel build_qp_lin_model(const Instance& inst,
                             const std::vector<BasepointSet>& basepoints);

/// Builds the queue-ignoring p-median model. `capacity_fraction` scales every
/// facility's usable capacity. 1.0 is the textbook model; note its optima may
/// load a facility at exactly its service rate, where the queueing evaluation
/// has no steady state. The experiment harness passes the basepoint interval
/// end instead so both compared solvers see the same usable capacity.
MilpModel build_p_model(const Instance& inst, double capacity_fraction = 1.0);

struct MilpResult {
    Assignment assignment;
    double objective = 0.0;   // model objective (linearized one for qp-lin)
    int nodes = 0;            // branch-and-bound nodes processed
    int lp_iterations = 0;    // simplex pivots summed over all node solves
    double gap = 0.0;         // relative optimality gap at termination
    double wall_s = 0.0;
};

/// Result of auditing the SOS2 groups of an LP solution.
struct Sos2Audit {
    bool ok = true;                    // true when every group is adjacent
    std::vector<int> branch_groups;    // groups that need branching to fix
};

/// Verifies SOS2 adjacency on `values` and repairs violations in place by
/// re-expressing each group's (load, cost) point with adjacent weights.
/// Groups whose repair would *increase* the objective beyond a 1e-12
/// relative tolerance are reported for branching instead of repaired; on
/// convex basepoint curves the adjacent pair is never costlier, so there a
/// repair always succeeds (ties exactly, improves only off-optimum).
Sos2Audit sos2_check_repair(std::vector<double>& values, const MilpModel& model);

/// Deterministic best-first branch-and-bound: node bound from the LP
/// relaxation, branching on the most fractional binary (ties by facility
/// order), relative gap target 1e-6. Throws InfeasibleError when no binary
/// assignment is feasible and ConvergenceError at the node limit.
MilpResult solve_milp(const MilpModel& model);

/// Writes the model in the conventional LP text interchange format
/// (objective, rows, bounds, binaries, SOS2 groups) for cross-checking with
/// external solvers.
void milp_to_text_file(const MilpModel& model, const std::string& path);

}  // namespace qla
