// Two-phase revised simplex over bounded variables.
//
// Internal form: the structural columns are augmented with one logical column
// per row (turning every row into an equality) and one artificial column per
// row (phase 1 starting basis). The basis inverse is kept explicitly and
// refreshed from scratch at a fixed pivot cadence, which is plenty at the
// problem sizes this repository produces.
//
// Robustness measures, all deterministic:
//   - geometric-mean equilibration with power-of-two scale factors (scaling
//     is exact in floating point, so it cannot perturb the model),
//   - a two-pass ratio test: the first pass finds the step length under
//     slightly relaxed basic bounds, the second picks the numerically largest
//     pivot among the rows that bind within that step, which keeps tiny pivot
//     elements out of the basis update,
//   - full-pivot LU refactorization on a fixed cadence,
//   - a safe-mode restart (Bland's rule throughout, frequent refactorization)
//     if the first pass ends with a residual above target.

#include "qla/simplex.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <fmt/format.h>

namespace qla {

namespace {

constexpr double kReducedCostTol = 1e-9;   // pricing threshold
constexpr double kPivotTol = 1e-9;         // smallest usable pivot element
constexpr double kRatioTieTol = 1e-9;      // window for ratio-test ties
constexpr double kFeasRelax = 1e-9;        // per-bound relaxation in ratio pass 1
constexpr double kDegenerateStep = 1e-11;  // step lengths below this count as degenerate
constexpr int kBlandStreak = 100;          // degenerate pivots before Bland's rule kicks in
constexpr double kFeasTarget = 1e-8;       // relative residual promised on optimal exit

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Column {
    std::vector<int> rows;
    std::vector<double> vals;
    double cost = 0.0;        // phase-2 cost
    double lower = 0.0;
    double upper = 0.0;
    bool artificial = false;
};

enum class VarState { at_lower, at_upper, basic };

struct Tableau {
    std::vector<Column> cols;
    Vec rhs;
    int num_rows = 0;
    int num_structural = 0;

    std::vector<VarState> state;
    std::vector<double> nonbasic_value;  // valid when state != basic
    std::vector<int> basis;              // column index per row
    Mat binv;
    Vec xb;                              // basic variable values, row order

    bool phase_one = true;
    bool safe_mode = false;  // Bland pricing + tight refactor cadence
    int pivots = 0;

    double col_cost(int j) const {
        if (phase_one) return cols[j].artificial ? 1.0 : 0.0;
        return cols[j].cost;
    }
    int refactor_every() const { return safe_mode ? 16 : 64; }
};

/// Starting value of a nonbasic column: its finite lower bound if any, else
/// its finite upper bound, else zero (free column).
double resting_value(const Column& c, VarState* st) {
    if (std::isfinite(c.lower)) {
        *st = VarState::at_lower;
        return c.lower;
    }
    if (std::isfinite(c.upper)) {
        *st = VarState::at_upper;
        return c.upper;
    }
    *st = VarState::at_lower;  // free: nominal zero, eligible in both directions
    return 0.0;
}

void validate(const LpProblem& lp) {
    const std::size_t n = lp.objective.size();
    if (lp.lower.size() != n || lp.upper.size() != n) {
        throw ValidationError("lp: bound vectors must match the objective length");
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (std::isnan(lp.objective[j]) || std::isinf(lp.objective[j])) {
            throw ValidationError(fmt::format("lp: non-finite objective coefficient at column {}", j));
        }
        if (std::isnan(lp.lower[j]) || std::isnan(lp.upper[j]) || lp.lower[j] > lp.upper[j]) {
            throw ValidationError(fmt::format("lp: crossed or NaN bounds at column {}", j));
        }
    }
    for (std::size_t r = 0; r < lp.rows.size(); ++r) {
        const LpRow& row = lp.rows[r];
        if (row.cols.size() != row.coeffs.size()) {
            throw ValidationError(fmt::format("lp: row {} has mismatched index/value lengths", r));
        }
        if (!std::isfinite(row.rhs)) {
            throw ValidationError(fmt::format("lp: row {} has non-finite right-hand side", r));
        }
        for (std::size_t k = 0; k < row.cols.size(); ++k) {
            if (row.cols[k] < 0 || row.cols[k] >= static_cast<int>(n)) {
                throw ValidationError(fmt::format("lp: row {} references column {}", r, row.cols[k]));
            }
            if (!std::isfinite(row.coeffs[k])) {
                throw ValidationError(fmt::format("lp: row {} has a non-finite coefficient", r));
            }
        }
    }
}

/// Row/column scale factors, snapped to powers of two so that applying them
/// is exact. Two rounds of geometric-mean equilibration.
struct Scaling {
    std::vector<double> row;
    std::vector<double> col;
};

double pow2_near(double v) { return std::exp2(std::round(std::log2(v))); }

Scaling equilibrate(const LpProblem& lp) {
    const int m = static_cast<int>(lp.rows.size());
    const int n = lp.num_cols();
    Scaling s;
    s.row.assign(m, 1.0);
    s.col.assign(n, 1.0);
    for (int round = 0; round < 2; ++round) {
        for (int r = 0; r < m; ++r) {
            double lo = 0.0, hi = 0.0;
            const LpRow& row = lp.rows[r];
            for (std::size_t k = 0; k < row.cols.size(); ++k) {
                const double a = std::abs(row.coeffs[k]) * s.row[r] * s.col[row.cols[k]];
                if (a == 0.0) continue;
                lo = lo == 0.0 ? a : std::min(lo, a);
                hi = std::max(hi, a);
            }
            if (hi > 0.0) s.row[r] = pow2_near(s.row[r] / std::sqrt(lo * hi));
        }
        std::vector<double> lo(n, 0.0), hi(n, 0.0);
        for (int r = 0; r < m; ++r) {
            const LpRow& row = lp.rows[r];
            for (std::size_t k = 0; k < row.cols.size(); ++k) {
                const int j = row.cols[k];
                const double a = std::abs(row.coeffs[k]) * s.row[r] * s.col[j];
                if (a == 0.0) continue;
                lo[j] = lo[j] == 0.0 ? a : std::min(lo[j], a);
                hi[j] = std::max(hi[j], a);
            }
        }
        for (int j = 0; j < n; ++j) {
            if (hi[j] > 0.0) s.col[j] = pow2_near(s.col[j] / std::sqrt(lo[j] * hi[j]));
        }
    }
    return s;
}

/// The problem with row r multiplied by s.row[r] and column j substituted by
/// v'_j = v_j / s.col[j]; minimizing the same objective value.
LpProblem apply_scaling(const LpProblem& lp, const Scaling& s) {
    LpProblem out = lp;
    for (std::size_t r = 0; r < out.rows.size(); ++r) {
        LpRow& row = out.rows[r];
        row.rhs *= s.row[r];
        for (std::size_t k = 0; k < row.cols.size(); ++k) {
            row.coeffs[k] *= s.row[r] * s.col[row.cols[k]];
        }
    }
    for (int j = 0; j < out.num_cols(); ++j) {
        out.objective[j] *= s.col[j];
        out.lower[j] = lp.lower[j] / s.col[j];  // +-inf stays +-inf
        out.upper[j] = lp.upper[j] / s.col[j];
    }
    return out;
}

Tableau build_tableau(const LpProblem& lp) {
    Tableau t;
    t.num_rows = static_cast<int>(lp.rows.size());
    t.num_structural = lp.num_cols();
    const int m = t.num_rows;
    const int ns = t.num_structural;

    t.cols.resize(static_cast<std::size_t>(ns) + 2u * static_cast<std::size_t>(m));
    for (int j = 0; j < ns; ++j) {
        t.cols[j].cost = lp.objective[j];
        t.cols[j].lower = lp.lower[j];
        t.cols[j].upper = lp.upper[j];
    }
    t.rhs = Vec::Zero(m);
    for (int r = 0; r < m; ++r) {
        const LpRow& row = lp.rows[r];
        t.rhs[r] = row.rhs;
        for (std::size_t k = 0; k < row.cols.size(); ++k) {
            if (row.coeffs[k] == 0.0) continue;
            t.cols[row.cols[k]].rows.push_back(r);
            t.cols[row.cols[k]].vals.push_back(row.coeffs[k]);
        }
        // Logical column: row activity + logical = rhs.
        Column& lg = t.cols[static_cast<std::size_t>(ns) + r];
        lg.rows.push_back(r);
        lg.vals.push_back(1.0);
        switch (row.sense) {
            case RowSense::less_equal:
                lg.lower = 0.0;
                lg.upper = kLpInfinity;
                break;
            case RowSense::equal:
                lg.lower = 0.0;
                lg.upper = 0.0;
                break;
            case RowSense::greater_equal:
                lg.lower = -kLpInfinity;
                lg.upper = 0.0;
                break;
        }
    }

    // Rest every structural and logical column at a bound, then cover the
    // residual of each row with its artificial so the start basis is the
    // identity (up to sign).
    const std::size_t total = t.cols.size();
    t.state.assign(total, VarState::at_lower);
    t.nonbasic_value.assign(total, 0.0);
    Vec residual = t.rhs;
    for (int j = 0; j < ns + m; ++j) {
        VarState st;
        const double v = resting_value(t.cols[j], &st);
        t.state[j] = st;
        t.nonbasic_value[j] = v;
        if (v != 0.0) {
            const Column& c = t.cols[j];
            for (std::size_t k = 0; k < c.rows.size(); ++k) residual[c.rows[k]] -= v * c.vals[k];
        }
    }
    t.basis.resize(m);
    t.binv = Mat::Zero(m, m);
    t.xb = Vec::Zero(m);
    for (int r = 0; r < m; ++r) {
        const int j = ns + m + r;
        Column& art = t.cols[j];
        art.artificial = true;
        art.lower = 0.0;
        art.upper = kLpInfinity;
        const double sign = residual[r] < 0.0 ? -1.0 : 1.0;
        art.rows.push_back(r);
        art.vals.push_back(sign);
        t.basis[r] = j;
        t.state[j] = VarState::basic;
        t.binv(r, r) = sign;
        t.xb[r] = std::abs(residual[r]);
    }
    return t;
}

/// Rebuilds the basis inverse and basic values from scratch.
void refactorize(Tableau& t) {
    const int m = t.num_rows;
    if (m == 0) return;  // row-free problem: nothing to invert
    Mat b = Mat::Zero(m, m);
    for (int r = 0; r < m; ++r) {
        const Column& c = t.cols[t.basis[r]];
        for (std::size_t k = 0; k < c.rows.size(); ++k) b(c.rows[k], r) = c.vals[k];
    }
    Eigen::FullPivLU<Mat> lu(b);
    t.binv = lu.inverse();
    Vec rhs = t.rhs;
    for (std::size_t j = 0; j < t.cols.size(); ++j) {
        if (t.state[j] == VarState::basic) continue;
        const double v = t.nonbasic_value[j];
        if (v == 0.0) continue;
        const Column& c = t.cols[j];
        for (std::size_t k = 0; k < c.rows.size(); ++k) rhs[c.rows[k]] -= v * c.vals[k];
    }
    t.xb = t.binv * rhs;
}

Vec dual_prices(const Tableau& t) {
    Vec cb(t.num_rows);
    for (int r = 0; r < t.num_rows; ++r) cb[r] = t.col_cost(t.basis[r]);
    return t.binv.transpose() * cb;
}

double reduced_cost(const Tableau& t, const Vec& y, int j) {
    const Column& c = t.cols[j];
    double d = t.col_cost(j);
    for (std::size_t k = 0; k < c.rows.size(); ++k) d -= y[c.rows[k]] * c.vals[k];
    return d;
}

struct PricingPick {
    int col = -1;
    double direction = 0.0;  // +1 enters increasing, -1 decreasing
};

/// Dantzig pricing (most negative improvement), or Bland's smallest-index
/// rule while anti-cycling is active.
PricingPick price(const Tableau& t, const Vec& y, bool bland) {
    PricingPick best;
    double best_score = kReducedCostTol;
    for (std::size_t j = 0; j < t.cols.size(); ++j) {
        if (t.state[j] == VarState::basic) continue;
        const Column& c = t.cols[j];
        if (c.lower == c.upper) continue;                 // fixed
        if (!t.phase_one && c.artificial) continue;       // sealed after phase 1
        const double d = reduced_cost(t, y, j);
        double dir = 0.0;
        const bool free_col = !std::isfinite(c.lower) && !std::isfinite(c.upper);
        if (free_col) {
            if (std::abs(d) > kReducedCostTol) dir = d < 0.0 ? 1.0 : -1.0;
        } else if (t.state[j] == VarState::at_lower) {
            if (d < -kReducedCostTol) dir = 1.0;
        } else {
            if (d > kReducedCostTol) dir = -1.0;
        }
        if (dir == 0.0) continue;
        if (bland) return {static_cast<int>(j), dir};
        const double score = std::abs(d);
        if (score > best_score) {
            best_score = score;
            best = {static_cast<int>(j), dir};
        }
    }
    return best;
}

enum class StepOutcome { pivoted, bound_flip, unbounded };

/// Applies the basis change for entering column q leaving at row `leave_pos`
/// (or a bound flip when `leave_pos` < 0) after a step of length `step`.
void apply_step(Tableau& t, int q, double dir, double step, const Vec& w, int leave_pos) {
    const Column& c = t.cols[q];
    t.xb -= (dir * step) * w;
    if (leave_pos < 0) {
        t.state[q] = (t.state[q] == VarState::at_lower) ? VarState::at_upper : VarState::at_lower;
        t.nonbasic_value[q] = (t.state[q] == VarState::at_lower) ? c.lower : c.upper;
        return;
    }
    const int leaving = t.basis[leave_pos];
    const Column& bc = t.cols[leaving];
    const double coeff = dir * w[leave_pos];
    if (coeff > 0.0) {
        t.state[leaving] = VarState::at_lower;
        t.nonbasic_value[leaving] = bc.lower;
    } else {
        t.state[leaving] = VarState::at_upper;
        t.nonbasic_value[leaving] = bc.upper;
    }

    const double enter_value = t.nonbasic_value[q] + dir * step;
    t.basis[leave_pos] = q;
    t.state[q] = VarState::basic;
    // Eta update of the inverse: new row = old row / pivot; others subtract.
    const double pivot = w[leave_pos];
    t.binv.row(leave_pos) /= pivot;
    for (int i = 0; i < t.num_rows; ++i) {
        if (i == leave_pos) continue;
        if (w[i] != 0.0) t.binv.row(i) -= w[i] * t.binv.row(leave_pos);
    }
    t.xb[leave_pos] = enter_value;
}

/// Ratio test and update for entering column q moving in `dir`.
///
/// Default mode is a two-pass test: pass 1 computes the largest step that
/// keeps every basic variable within its bounds relaxed by kFeasRelax; pass 2
/// picks, among the rows whose exact ratio fits under that step, the one with
/// the numerically largest pivot element. Under Bland's rule, ties pick the
/// smallest leaving variable index instead (required for the anti-cycling
/// guarantee).
StepOutcome take_step(Tableau& t, int q, double dir, bool bland) {
    const int m = t.num_rows;
    const Column& c = t.cols[q];
    Vec w = Vec::Zero(m);
    for (std::size_t k = 0; k < c.rows.size(); ++k) w += c.vals[k] * t.binv.col(c.rows[k]);

    double limit = kLpInfinity;  // bound-flip distance of the entering column
    if (std::isfinite(c.lower) && std::isfinite(c.upper)) limit = c.upper - c.lower;

    if (bland) {
        int leave_pos = -1;
        double best = limit;
        for (int i = 0; i < m; ++i) {
            const double coeff = dir * w[i];  // basic i changes by -coeff per unit step
            const Column& bc = t.cols[t.basis[i]];
            double ratio = kLpInfinity;
            if (coeff > kPivotTol) {
                if (std::isfinite(bc.lower)) ratio = (t.xb[i] - bc.lower) / coeff;
            } else if (coeff < -kPivotTol) {
                if (std::isfinite(bc.upper)) ratio = (t.xb[i] - bc.upper) / coeff;
            }
            if (ratio < best - kRatioTieTol) {
                best = std::max(ratio, 0.0);
                leave_pos = i;
            } else if (leave_pos >= 0 && ratio <= best + kRatioTieTol &&
                       t.basis[i] < t.basis[leave_pos]) {
                leave_pos = i;
            }
        }
        if (!std::isfinite(best)) return StepOutcome::unbounded;
        apply_step(t, q, dir, best, w, leave_pos);
        return leave_pos < 0 ? StepOutcome::bound_flip : StepOutcome::pivoted;
    }

    // Pass 1: step length under relaxed basic bounds.
    double theta = limit;
    for (int i = 0; i < m; ++i) {
        const double coeff = dir * w[i];
        const Column& bc = t.cols[t.basis[i]];
        double relaxed = kLpInfinity;
        if (coeff > kPivotTol) {
            if (std::isfinite(bc.lower)) {
                const double slack = kFeasRelax * (1.0 + std::abs(bc.lower));
                relaxed = (t.xb[i] - (bc.lower - slack)) / coeff;
            }
        } else if (coeff < -kPivotTol) {
            if (std::isfinite(bc.upper)) {
                const double slack = kFeasRelax * (1.0 + std::abs(bc.upper));
                relaxed = (t.xb[i] - (bc.upper + slack)) / coeff;
            }
        }
        theta = std::min(theta, std::max(relaxed, 0.0));
    }
    if (!std::isfinite(theta)) return StepOutcome::unbounded;

    // Pass 2: among rows binding within theta, take the largest pivot.
    int leave_pos = -1;
    double leave_pivot = 0.0;
    double leave_ratio = 0.0;
    for (int i = 0; i < m; ++i) {
        const double coeff = dir * w[i];
        const Column& bc = t.cols[t.basis[i]];
        double ratio = kLpInfinity;
        if (coeff > kPivotTol) {
            if (std::isfinite(bc.lower)) ratio = (t.xb[i] - bc.lower) / coeff;
        } else if (coeff < -kPivotTol) {
            if (std::isfinite(bc.upper)) ratio = (t.xb[i] - bc.upper) / coeff;
        }
        if (ratio <= theta + kRatioTieTol && std::abs(w[i]) > leave_pivot) {
            leave_pos = i;
            leave_pivot = std::abs(w[i]);
            leave_ratio = std::max(ratio, 0.0);
        }
    }
    if (leave_pos < 0) {
        // No basic bound binds before the entering column's own flip distance.
        apply_step(t, q, dir, limit, w, -1);
        return StepOutcome::bound_flip;
    }
    const double step = std::min(leave_ratio, limit);
    if (step >= limit && leave_ratio > limit) {
        apply_step(t, q, dir, limit, w, -1);
        return StepOutcome::bound_flip;
    }
    apply_step(t, q, dir, step, w, leave_pos);
    return StepOutcome::pivoted;
}

double phase_objective(const Tableau& t) {
    double obj = 0.0;
    for (int r = 0; r < t.num_rows; ++r) obj += t.col_cost(t.basis[r]) * t.xb[r];
    for (std::size_t j = 0; j < t.cols.size(); ++j) {
        if (t.state[j] != VarState::basic && t.nonbasic_value[j] != 0.0) {
            obj += t.col_cost(static_cast<int>(j)) * t.nonbasic_value[j];
        }
    }
    return obj;
}

/// Runs the simplex loop for the current phase. Returns false when the phase
/// objective is unbounded below (possible only in phase 2).
bool run_phase(Tableau& t, int max_pivots) {
    int degenerate_streak = 0;
    bool bland = t.safe_mode;
    while (true) {
        if (t.pivots > max_pivots) {
            throw ConvergenceError(fmt::format(
                "lp: pivot budget {} exhausted in phase {}", max_pivots, t.phase_one ? 1 : 2));
        }
        const Vec y = dual_prices(t);
        const PricingPick pick = price(t, y, bland);
        if (pick.col < 0) return true;
        ++t.pivots;
        const double before = phase_objective(t);
        const StepOutcome out = take_step(t, pick.col, pick.direction, bland);
        if (out == StepOutcome::unbounded) return false;
        const double after = phase_objective(t);
        if (before - after > kDegenerateStep * (1.0 + std::abs(before))) {
            degenerate_streak = 0;
            bland = t.safe_mode;
        } else if (++degenerate_streak >= kBlandStreak) {
            bland = true;  // anti-cycling: Bland's rule until real progress resumes
        }
        if (t.pivots % t.refactor_every() == 0) refactorize(t);
    }
}

/// Pivots basic artificials out of the basis (or seals dependent rows) so
/// phase 2 starts from a clean basis.
void expel_artificials(Tableau& t) {
    const int m = t.num_rows;
    constexpr double kExpelPivotTol = 1e-7;  // refuse near-singular replacements
    for (int i = 0; i < m; ++i) {
        if (!t.cols[t.basis[i]].artificial) continue;
        int replacement = -1;
        double best = kExpelPivotTol;
        for (int j = 0; j < t.num_structural + m; ++j) {
            if (t.state[j] == VarState::basic) continue;
            const Column& c = t.cols[j];
            if (c.lower == c.upper) continue;
            double wr = 0.0;
            for (std::size_t k = 0; k < c.rows.size(); ++k) wr += c.vals[k] * t.binv(i, c.rows[k]);
            if (std::abs(wr) > best) {
                best = std::abs(wr);
                replacement = j;
            }
        }
        if (replacement < 0) {
            // Linearly dependent (or numerically dependent) row: keep the
            // artificial basic, pinned at 0.
            t.cols[t.basis[i]].upper = 0.0;
            continue;
        }
        const Column& c = t.cols[replacement];
        Vec w = Vec::Zero(m);
        for (std::size_t k = 0; k < c.rows.size(); ++k) w += c.vals[k] * t.binv.col(c.rows[k]);
        const int leaving = t.basis[i];
        t.state[leaving] = VarState::at_lower;
        t.nonbasic_value[leaving] = 0.0;
        const double entering_value = t.nonbasic_value[replacement];
        t.basis[i] = replacement;
        t.state[replacement] = VarState::basic;
        const double pivot = w[i];
        t.binv.row(i) /= pivot;
        for (int r = 0; r < m; ++r) {
            if (r != i && w[r] != 0.0) t.binv.row(r) -= w[r] * t.binv.row(i);
        }
        t.xb[i] = entering_value;
    }
    // Artificials may never re-enter.
    for (auto& c : t.cols) {
        if (c.artificial) {
            c.lower = 0.0;
            c.upper = 0.0;
        }
    }
}

/// Worst constraint/bound violation relative to the row and bound magnitudes.
double solution_residual(const LpProblem& lp, const std::vector<double>& v) {
    double worst = 0.0;
    for (int j = 0; j < lp.num_cols(); ++j) {
        if (std::isfinite(lp.lower[j])) {
            worst = std::max(worst, (lp.lower[j] - v[j]) / (1.0 + std::abs(lp.lower[j])));
        }
        if (std::isfinite(lp.upper[j])) {
            worst = std::max(worst, (v[j] - lp.upper[j]) / (1.0 + std::abs(lp.upper[j])));
        }
    }
    for (const LpRow& row : lp.rows) {
        double act = 0.0;
        for (std::size_t k = 0; k < row.cols.size(); ++k) act += row.coeffs[k] * v[row.cols[k]];
        const double scale = 1.0 + std::abs(row.rhs);
        switch (row.sense) {
            case RowSense::less_equal: worst = std::max(worst, (act - row.rhs) / scale); break;
            case RowSense::equal: worst = std::max(worst, std::abs(act - row.rhs) / scale); break;
            case RowSense::greater_equal: worst = std::max(worst, (row.rhs - act) / scale); break;
        }
    }
    return std::max(worst, 0.0);
}

std::vector<double> extract_values(const Tableau& t) {
    std::vector<double> v(static_cast<std::size_t>(t.num_structural), 0.0);
    for (int j = 0; j < t.num_structural; ++j) {
        v[j] = t.state[j] == VarState::basic ? 0.0 : t.nonbasic_value[j];
    }
    for (int r = 0; r < t.num_rows; ++r) {
        if (t.basis[r] < t.num_structural) v[t.basis[r]] = t.xb[r];
    }
    return v;
}

/// One full two-phase run on the (scaled) problem. Returns the solution in
/// the scaled variable space without the residual gate applied.
LpSolution run_two_phase(const LpProblem& scaled, bool safe_mode, int pivots_so_far) {
    Tableau t = build_tableau(scaled);
    t.safe_mode = safe_mode;
    const int m = t.num_rows;
    const int max_pivots =
        pivots_so_far + 50000 + 100 * (m + scaled.num_cols());

    LpSolution sol;
    t.pivots = pivots_so_far;
    run_phase(t, max_pivots);  // phase 1 objective is bounded below by zero
    double rhs_scale = 1.0;
    for (int r = 0; r < m; ++r) rhs_scale = std::max(rhs_scale, std::abs(t.rhs[r]));
    if (phase_objective(t) > 1e-7 * rhs_scale) {
        sol.status = LpStatus::infeasible;
        sol.iterations = t.pivots;
        return sol;
    }
    expel_artificials(t);
    refactorize(t);  // clean basic values before optimizing the real objective
    t.phase_one = false;
    if (!run_phase(t, max_pivots)) {
        sol.status = LpStatus::unbounded;
        sol.iterations = t.pivots;
        return sol;
    }
    refactorize(t);  // settle roundoff before extraction

    sol.status = LpStatus::optimal;
    sol.values = extract_values(t);
    const Vec y = dual_prices(t);
    sol.duals.assign(y.data(), y.data() + m);
    sol.reduced_costs.resize(static_cast<std::size_t>(scaled.num_cols()));
    for (int j = 0; j < scaled.num_cols(); ++j) sol.reduced_costs[j] = reduced_cost(t, y, j);
    sol.iterations = t.pivots;
    return sol;
}

}  // namespace

int LpProblem::add_col(double cost, double lo, double hi, std::string name) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    col_names.push_back(std::move(name));
    return static_cast<int>(objective.size()) - 1;
}

std::string to_string(LpStatus status) {
    switch (status) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::unbounded: return "unbounded";
        case LpStatus::infeasible: return "infeasible";
    }
    return "unknown";
}

LpSolution solve_lp(const LpProblem& lp) {
    validate(lp);
    const Scaling scaling = equilibrate(lp);
    const LpProblem scaled = apply_scaling(lp, scaling);

    auto unscale = [&](LpSolution& sol) {
        if (sol.status != LpStatus::optimal) return;
        for (int j = 0; j < lp.num_cols(); ++j) {
            sol.values[j] *= scaling.col[j];
            sol.reduced_costs[j] /= scaling.col[j];
        }
        for (std::size_t r = 0; r < sol.duals.size(); ++r) sol.duals[r] *= scaling.row[r];
        sol.objective = 0.0;
        for (int j = 0; j < lp.num_cols(); ++j) sol.objective += lp.objective[j] * sol.values[j];
        sol.feasibility_residual = solution_residual(lp, sol.values);
    };

    LpSolution sol = run_two_phase(scaled, /*safe_mode=*/false, 0);
    unscale(sol);
    if (sol.status != LpStatus::optimal || sol.feasibility_residual <= kFeasTarget) {
        return sol;
    }
    // Roundoff got ahead of the fast path: redo the whole solve in safe mode
    // (Bland pricing, tight refactor cadence) before giving up.
    LpSolution retry = run_two_phase(scaled, /*safe_mode=*/true, sol.iterations);
    unscale(retry);
    if (retry.status != LpStatus::optimal || retry.feasibility_residual <= kFeasTarget) {
        return retry;
    }
    throw ConvergenceError(fmt::format(
        "lp: feasibility residual {} exceeds {} after a safe-mode restart",
        retry.feasibility_residual, kFeasTarget));
}

}  // namespace qla
