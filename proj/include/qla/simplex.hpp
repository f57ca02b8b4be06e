// Dense bounded-variable simplex for small and mid-size linear programs.
//
// The solver accepts rows in sparse form with <=, =, >= senses and per-column
// bounds (infinities allowed). It runs a two-phase revised simplex with an
// explicitly maintained basis inverse, Dantzig pricing with Bland's rule as
// the anti-cycling fallback, and periodic refactorization. The models solved
// here are desk-sized (at most a few thousand columns), so no sparse basis
// machinery is needed.
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "qla/errors.hpp"

namespace qla {

inline constexpr double kLpInfinity = std::numeric_limits<double>::infinity();

enum class RowSense { less_equal, equal, greater_equal };

/// One linear constraint in sparse form: sum(coeffs[k] * v[cols[k]]) sense rhs.
struct LpRow {
    std::vector<int> cols;
    std::vector<double> coeffs;
    RowSense sense = RowSense::equal;
    double rhs = 0.0;
    std::string name;  // diagnostics and model dumps only
};

/// Linear program over bounded variables.
struct LpProblem {
    std::vector<double> objective;         // minimized
    std::vector<double> lower;             // -kLpInfinity allowed
    std::vector<double> upper;             // +kLpInfinity allowed
    std::vector<std::string> col_names;    // diagnostics and model dumps only
    std::vector<LpRow> rows;

    int num_cols() const { return static_cast<int>(objective.size()); }

    /// Appends a column and returns its index.
    int add_col(double cost, double lo, double hi, std::string name = {});
};

enum class LpStatus { optimal, infeasible, unbounded };

std::string to_string(LpStatus status);

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    double objective = 0.0;
    std::vector<double> values;          // per column; empty unless optimal
    std::vector<double> duals;           // per row (audit)
    std::vector<double> reduced_costs;   // per column (audit)
    int iterations = 0;                  // simplex pivots across both phases
    double feasibility_residual = 0.0;   // worst violation at the returned point
};

/// Solves the LP. Optimal solutions satisfy a feasibility residual of at most
/// 1e-8; if roundoff prevents that even after refactorization, the solver
/// throws ConvergenceError rather than returning a corrupted point. Throws
/// ValidationError on structurally malformed input (dimension mismatches,
/// crossed bounds, non-finite coefficients).
LpSolution solve_lp(const LpProblem& lp);

}  // namespace qla
