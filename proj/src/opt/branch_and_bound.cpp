// Best-first branch-and-bound over the facility-open binaries.
//
// Node bounds come from the LP relaxation (binaries in [0,1]). Branching
// picks the most fractional binary, ties broken by facility order; the
// open-facility child is enqueued first. SOS2 groups are normally settled by
// convexity (verified and tie-repaired on every integral leaf); a group whose
// repair would change the objective triggers range branching on the group
// instead. All rules are deterministic, so a fixed model yields an identical
// incumbent and node count on every run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

#include <fmt/format.h>

#include "qla/milp.hpp"

namespace qla {

namespace {

constexpr double kIntegralityTol = 1e-7;  // |y - round(y)| below this is integral
constexpr double kGapTarget = 1e-6;       // relative optimality gap
constexpr int kMaxNodes = 200000;

struct BoundFix {
    int col;
    double lower;
    double upper;
};

struct BbNode {
    std::vector<BoundFix> fixes;
    double bound;    // objective of the parent relaxation (root: -inf)
    long long seq;   // insertion counter; deterministic tie-break
};

struct BbNodeOrder {
    bool operator()(const BbNode& a, const BbNode& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;  // smallest bound first
        return a.seq > b.seq;                              // then insertion order
    }
};

/// Index of the most fractional binary, or -1 when all are integral.
int most_fractional(const MilpModel& model, const std::vector<double>& values) {
    int pick = -1;
    double best = kIntegralityTol;
    for (std::size_t f = 0; f < model.y_cols.size(); ++f) {
        const double v = values[model.y_cols[f]];
        const double frac = std::min(v, 1.0 - v);
        if (frac > best) {
            best = frac;
            pick = static_cast<int>(f);
        }
    }
    return pick;
}

Assignment extract_assignment(const MilpModel& model, const std::vector<double>& values) {
    Assignment a;
    a.x_rps.assign(model.num_clients, std::vector<double>(model.num_facilities, 0.0));
    for (int c = 0; c < model.num_clients; ++c) {
        for (int f = 0; f < model.num_facilities; ++f) {
            const double v = values[model.x_cols[static_cast<std::size_t>(c) * model.num_facilities + f]];
            a.x_rps[c][f] = std::max(v, 0.0);  // clear LP-tolerance dust
        }
    }
    a.y.resize(model.num_facilities);
    for (int f = 0; f < model.num_facilities; ++f) {
        a.y[f] = values[model.y_cols[f]] > 0.5 ? 1 : 0;
    }
    return a;
}

}  // namespace

MilpResult solve_milp(const MilpModel& model) {
    const auto t0 = std::chrono::steady_clock::now();
    if (model.lp.num_cols() == 0 || model.y_cols.empty()) {
        throw ValidationError("milp: model has no columns or no binaries");
    }

    std::priority_queue<BbNode, std::vector<BbNode>, BbNodeOrder> open;
    long long seq = 0;
    {
        BbNode root;
        root.bound = -kLpInfinity;
        root.seq = seq++;
        if (model.p == static_cast<int>(model.y_cols.size())) {
            // Trivial fixing: the budget row forces every facility open.
            for (int col : model.y_cols) root.fixes.push_back({col, 1.0, 1.0});
        }
        open.push(std::move(root));
    }

    MilpResult result;
    bool have_incumbent = false;
    double incumbent_obj = kLpInfinity;
    std::vector<double> incumbent_values;
    double frontier_bound = kLpInfinity;  // best bound among pruned/open work

    auto cutoff = [&]() {
        return incumbent_obj - kGapTarget * std::max(1e-12, std::abs(incumbent_obj));
    };

    while (!open.empty()) {
        BbNode node = std::move(const_cast<BbNode&>(open.top()));
        open.pop();
        if (have_incumbent && node.bound >= cutoff()) {
            // Best-first order: every remaining node is at least as bad.
            frontier_bound = std::min(frontier_bound, node.bound);
            break;
        }
        if (++result.nodes > kMaxNodes) {
            throw ConvergenceError(fmt::format(
                "milp: node limit {} reached; incumbent {} with relative gap {}",
                kMaxNodes, have_incumbent ? fmt::format("{}", incumbent_obj) : "none",
                have_incumbent
                    ? (incumbent_obj - node.bound) / std::max(1e-12, std::abs(incumbent_obj))
                    : std::numeric_limits<double>::infinity()));
        }

        LpProblem lp = model.lp;
        for (const BoundFix& fix : node.fixes) {
            lp.lower[fix.col] = fix.lower;
            lp.upper[fix.col] = fix.upper;
        }
        const LpSolution sol = solve_lp(lp);
        result.lp_iterations += sol.iterations;
        if (sol.status == LpStatus::infeasible) continue;
        if (sol.status == LpStatus::unbounded) {
            throw InvariantError("milp: node relaxation unbounded on a nonnegative objective");
        }
        if (have_incumbent && sol.objective >= cutoff()) {
            frontier_bound = std::min(frontier_bound, sol.objective);
            continue;
        }

        const int branch_f = most_fractional(model, sol.values);
        if (branch_f >= 0) {
            BbNode child_open, child_closed;
            child_open.fixes = node.fixes;
            child_open.fixes.push_back({model.y_cols[branch_f], 1.0, 1.0});
            child_open.bound = sol.objective;
            child_open.seq = seq++;
            child_closed.fixes = node.fixes;
            child_closed.fixes.push_back({model.y_cols[branch_f], 0.0, 0.0});
            child_closed.bound = sol.objective;
            child_closed.seq = seq++;
            open.push(std::move(child_open));
            open.push(std::move(child_closed));
            continue;
        }

        std::vector<double> values = sol.values;
        const Sos2Audit audit = sos2_check_repair(values, model);
        if (!audit.ok) {
            // Range branching on the first unrepairable group: exclude the
            // right and left halves of its nonzero span in the two children.
            const Sos2Group& g = model.sos2[audit.branch_groups.front()];
            int first = -1, last = -1;
            for (std::size_t s = 0; s < g.z_cols.size(); ++s) {
                if (std::abs(values[g.z_cols[s]]) > 1e-9) {
                    if (first < 0) first = static_cast<int>(s);
                    last = static_cast<int>(s);
                }
            }
            const int split = (first + last) / 2;
            BbNode left, right;
            left.fixes = node.fixes;
            for (int s = split + 1; s < static_cast<int>(g.z_cols.size()); ++s) {
                left.fixes.push_back({g.z_cols[s], 0.0, 0.0});
            }
            left.bound = sol.objective;
            left.seq = seq++;
            right.fixes = node.fixes;
            for (int s = 0; s < split; ++s) right.fixes.push_back({g.z_cols[s], 0.0, 0.0});
            right.bound = sol.objective;
            right.seq = seq++;
            open.push(std::move(left));
            open.push(std::move(right));
            continue;
        }

        // Integral, SOS2-valid leaf: recompute the objective on the repaired
        // point (repair preserves it to roundoff) and update the incumbent.
        double obj = 0.0;
        for (int j = 0; j < model.lp.num_cols(); ++j) obj += model.lp.objective[j] * values[j];
        if (!have_incumbent || obj < incumbent_obj) {
            have_incumbent = true;
            incumbent_obj = obj;
            incumbent_values = std::move(values);
        }
    }

    if (!have_incumbent) {
        throw InfeasibleError("milp: no feasible binary assignment");
    }
    result.assignment = extract_assignment(model, incumbent_values);
    result.objective = incumbent_obj;
    const double denom = std::max(1e-12, std::abs(incumbent_obj));
    result.gap = std::isfinite(frontier_bound)
                     ? std::max(0.0, (incumbent_obj - frontier_bound) / denom)
                     : 0.0;
    result.wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace qla
