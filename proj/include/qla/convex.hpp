// Exact solver for the queue-aware assignment problem.
//
// With the operated facility subset fixed, the problem becomes a smooth
// convex program over the assignment rates x_cf:
//
//     minimize  ( sum_cf x_cf l_cf + sum_f L_f/(mu_f - L_f) ) / L
//     s.t.      sum_f x_cf = lambda_c          (demand, per client)
//               L_f = sum_c x_cf <= mu_f - tau_f  (strict capacity margin)
//               x_cf >= 0
//
// solve_pqp handles one subset with a primal log-barrier Newton method that
// keeps the demand equalities exact at every iterate; solve_qp_exact takes
// the minimum over all facility subsets of size p.
//
// Analytic derivatives (with d_f = mu_f - L_f, L the total demand):
//     dF/dx_cf     = l_cf/L + mu_f/(L d_f^2)
//     d2F/dx dx    = 2 mu_f/(L d_f^3)   when both entries hit facility f,
//                    0                   across different facilities.
// The queueing term depends on x only through the facility loads, so each
// facility contributes a constant block (a rank-one matrix on its columns),
// which is positive semidefinite on the domain.
#pragma once

#include <string>
#include <vector>

#include "qla/errors.hpp"
#include "qla/instance.hpp"

namespace qla {

/// One convex subproblem: the instance with a fixed subset of operated
/// facilities (columns into instance.facilities) and per-facility strict
/// capacity margins tau.
struct PqpProblem {
    const Instance* instance = nullptr;
    std::vector<int> subset;       // facility column indices, strictly increasing
    std::vector<double> tau_rps;   // margin per subset entry, > 0

    int num_active() const { return static_cast<int>(subset.size()); }
};

/// Default margin: tau_f = tau_rel * mu_f (relative, so conditioning is
/// uniform across heterogeneous service rates).
constexpr double kDefaultTauRel = 1e-6;

/// Assemble a PqpProblem over the given facility columns.
PqpProblem make_pqp(const Instance& inst, std::vector<int> subset,
                    double tau_rel = kDefaultTauRel);

/// Solver outcome. `assignment` is over the full instance (closed-facility
/// columns zero); `objective_s` equals response_time(instance, assignment)
/// to 1e-9.
struct SolveReport {
    Assignment assignment;
    double objective_s = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    double wall_s = 0.0;
    std::vector<int> subset;  // facility column indices of the operated set
};

/// x vectors for the probe operations are row-major over all clients times
/// the subset facilities: x[c * subset.size() + j].

/// Objective value; throws ValidationError outside the domain (negative
/// entries, L_f >= mu_f - tau_f, zero total demand).
double pqp_objective(const PqpProblem& problem, const std::vector<double>& x);

/// Analytic gradient, same layout as x.
std::vector<double> pqp_gradient(const PqpProblem& problem, const std::vector<double>& x);

/// Analytic Hessian, dense (n x n, n = clients * subset size).
std::vector<std::vector<double>> pqp_hessian(const PqpProblem& problem,
                                             const std::vector<double>& x);

/// Barrier-Newton solve of one subset. Throws InfeasibleError when total
/// demand does not fit strictly inside the subset's usable capacity, and
/// ConvergenceError (with best residual in the message) if the iteration
/// caps are exhausted before the KKT residual drops below `tolerance`.
SolveReport solve_pqp(const PqpProblem& problem, double tolerance = 1e-9);

/// Exact solve: minimum of solve_pqp over all facility subsets of size p,
/// enumerated lexicographically; objective ties within 1e-9 keep the
/// lexicographically smaller subset. Throws InfeasibleError when no subset
/// is feasible.
SolveReport solve_qp_exact(const Instance& inst, int p,
                           double tau_rel = kDefaultTauRel, double tolerance = 1e-9);

/// Report export: objective, subset (node ids), per-facility load and
/// utilization, KKT residual, iteration and wall-time counters.
void solve_report_to_json_file(const SolveReport& report, const Instance& inst,
                               const std::string& path);

}  // namespace qla
