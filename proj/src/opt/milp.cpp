// Model builders for the linearized queue-aware problem and the classic
// queue-ignoring p-median problem, the SOS2 adjacency audit/repair, and the
// LP text-format dump.

#include "qla/milp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "qla/numfmt.hpp"

namespace qla {

namespace {

constexpr double kZeroWeightTol = 1e-9;   // z below this counts as zero
constexpr double kRepairRelTol = 1e-12;   // allowed relative objective change

}  // namespace

MilpModel build_qp_lin_model(const Instance& inst,
                             const std::vector<BasepointSet>& basepoints) {
    validate_instance(inst);
    const int nc = inst.num_clients();
    const int nf = inst.num_facilities();
    if (static_cast<int>(basepoints.size()) != nf) {
        throw ValidationError(fmt::format(
            "qp-lin model: got {} basepoint sets for {} facilities", basepoints.size(), nf));
    }
    for (int f = 0; f < nf; ++f) {
        const BasepointSet& bp = basepoints[f];
        validate_basepoints(bp);
        if (bp.alpha.front() != 0.0) {
            throw ValidationError(fmt::format(
                "qp-lin model: facility {} basepoints start at {}, not 0, so the convex "
                "combination cannot express zero load",
                inst.facilities[f], bp.alpha.front()));
        }
        if (!(bp.alpha.back() < inst.service_rps[f])) {
            throw ValidationError(fmt::format(
                "qp-lin model: facility {} linearization interval ends at {} req/s, not "
                "strictly below its service rate {} req/s",
                inst.facilities[f], bp.alpha.back(), inst.service_rps[f]));
        }
    }
    // Necessary feasibility check before any solving: total demand must fit
    // within p copies of the largest linearization interval.
    double max_interval_end = 0.0;
    for (int f = 0; f < nf; ++f) max_interval_end = std::max(max_interval_end, basepoints[f].alpha.back());
    const double total = inst.total_arrival();
    if (total > static_cast<double>(inst.p) * max_interval_end) {
        throw InfeasibleError(fmt::format(
            "qp-lin model: total demand {} req/s exceeds p={} times the largest "
            "linearization interval end {} req/s",
            total, inst.p, max_interval_end));
    }

    MilpModel model;
    model.num_clients = nc;
    model.num_facilities = nf;
    model.p = inst.p;
    model.facility_nodes = inst.facilities;

    // Columns: x (client-facility allocations), z (basepoint weights), y (open).
    model.x_cols.resize(static_cast<std::size_t>(nc) * nf);
    for (int c = 0; c < nc; ++c) {
        for (int f = 0; f < nf; ++f) {
            model.x_cols[static_cast<std::size_t>(c) * nf + f] = model.lp.add_col(
                inst.rtt[c][f] / total, 0.0, kLpInfinity,
                fmt::format("x_c{}_f{}", inst.clients[c], inst.facilities[f]));
        }
    }
    model.sos2.resize(nf);
    for (int f = 0; f < nf; ++f) {
        Sos2Group& g = model.sos2[f];
        g.facility = f;
        g.alpha = basepoints[f].alpha;
        g.beta = basepoints[f].beta;
        for (int s = 0; s < basepoints[f].m(); ++s) {
            g.z_cols.push_back(model.lp.add_col(
                basepoints[f].beta[s] / total, 0.0, 1.0,
                fmt::format("z_f{}_s{}", inst.facilities[f], s)));
        }
    }
    model.y_cols.resize(nf);
    for (int f = 0; f < nf; ++f) {
        model.y_cols[f] =
            model.lp.add_col(0.0, 0.0, 1.0, fmt::format("y_f{}", inst.facilities[f]));
    }

    // Demand rows: each client's allocations sum to its arrival rate.
    for (int c = 0; c < nc; ++c) {
        LpRow row;
        row.sense = RowSense::equal;
        row.rhs = inst.arrival_rps[c];
        row.name = fmt::format("demand_c{}", inst.clients[c]);
        for (int f = 0; f < nf; ++f) {
            row.cols.push_back(model.x_cols[static_cast<std::size_t>(c) * nf + f]);
            row.coeffs.push_back(1.0);
        }
        model.lp.rows.push_back(std::move(row));
    }
    // Capacity-link rows: facility load equals the basepoint combination.
    for (int f = 0; f < nf; ++f) {
        LpRow row;
        row.sense = RowSense::equal;
        row.rhs = 0.0;
        row.name = fmt::format("cap_f{}", inst.facilities[f]);
        for (int c = 0; c < nc; ++c) {
            row.cols.push_back(model.x_cols[static_cast<std::size_t>(c) * nf + f]);
            row.coeffs.push_back(1.0);
        }
        for (int s = 0; s < static_cast<int>(model.sos2[f].z_cols.size()); ++s) {
            row.cols.push_back(model.sos2[f].z_cols[s]);
            row.coeffs.push_back(-model.sos2[f].alpha[s]);
        }
        model.lp.rows.push_back(std::move(row));
    }
    // Convex-combination rows: weights sum to one (closed facilities sit at
    // the zero basepoint, which costs nothing).
    for (int f = 0; f < nf; ++f) {
        LpRow row;
        row.sense = RowSense::equal;
        row.rhs = 1.0;
        row.name = fmt::format("pwl_f{}", inst.facilities[f]);
        for (int col : model.sos2[f].z_cols) {
            row.cols.push_back(col);
            row.coeffs.push_back(1.0);
        }
        model.lp.rows.push_back(std::move(row));
    }
    // Activation rows: load at a closed facility is forced to zero. The
    // binary is scaled by the linearization interval end (the largest load
    // the model can express), keeping the units of the row consistent.
    for (int f = 0; f < nf; ++f) {
        LpRow row;
        row.sense = RowSense::less_equal;
        row.rhs = 0.0;
        row.name = fmt::format("flip_f{}", inst.facilities[f]);
        for (int c = 0; c < nc; ++c) {
            row.cols.push_back(model.x_cols[static_cast<std::size_t>(c) * nf + f]);
            row.coeffs.push_back(1.0);
        }
        row.cols.push_back(model.y_cols[f]);
        row.coeffs.push_back(-basepoints[f].alpha.back());
        model.lp.rows.push_back(std::move(row));
    }
    // Budget row: exactly p facilities operate.
    {
        LpRow row;
        row.sense = RowSense::equal;
        row.rhs = static_cast<double>(inst.p);
        row.name = "limit";
        for (int f = 0; f < nf; ++f) {
            row.cols.push_back(model.y_cols[f]);
            row.coeffs.push_back(1.0);
        }
        model.lp.rows.push_back(std::move(row));
    }
    return model;
}

MilpModel build_p_model(const Instance& inst, double capacity_fraction) {
    validate_instance(inst);
    if (!(capacity_fraction > 0.0) || capacity_fraction > 1.0) {
        throw ValidationError(fmt::format(
            "p model: capacity fraction {} outside (0, 1]", capacity_fraction));
    }
    const int nc = inst.num_clients();
    const int nf = inst.num_facilities();
    const double total = inst.total_arrival();

    MilpModel model;
    model.num_clients = nc;
    model.num_facilities = nf;
    model.p = inst.p;
    model.facility_nodes = inst.facilities;

    model.x_cols.resize(static_cast<std::size_t>(nc) * nf);
    for (int c = 0; c < nc; ++c) {
        for (int f = 0; f < nf; ++f) {
            model.x_cols[static_cast<std::size_t>(c) * nf + f] = model.lp.add_col(
                inst.rtt[c][f] / total, 0.0, kLpInfinity,
                fmt::format("x_c{}_f{}", inst.clients[c], inst.facilities[f]));
        }
    }
    model.y_cols.resize(nf);
    for (int f = 0; f < nf; ++f) {
        model.y_cols[f] =
            model.lp.add_col(0.0, 0.0, 1.0, fmt::format("y_f{}", inst.facilities[f]));
    }

    for (int c = 0; c < nc; ++c) {
        LpRow row;
        row.sense = RowSense::equal;
        row.rhs = inst.arrival_rps[c];
        row.name = fmt::format("demand_c{}", inst.clients[c]);
        for (int f = 0; f < nf; ++f) {
            row.cols.push_back(model.x_cols[static_cast<std::size_t>(c) * nf + f]);
            row.coeffs.push_back(1.0);
        }
        model.lp.rows.push_back(std::move(row));
    }
    for (int f = 0; f < nf; ++f) {
        LpRow row;
        row.sense = RowSense::less_equal;
        row.rhs = 0.0;
        row.name = fmt::format("cap_f{}", inst.facilities[f]);
        for (int c = 0; c < nc; ++c) {
            row.cols.push_back(model.x_cols[static_cast<std::size_t>(c) * nf + f]);
            row.coeffs.push_back(1.0);
        }
        row.cols.push_back(model.y_cols[f]);
        row.coeffs.push_back(-capacity_fraction * inst.service_rps[f]);
        model.lp.rows.push_back(std::move(row));
    }
    {
        LpRow row;
        row.sense = RowSense::equal;
        row.rhs = static_cast<double>(inst.p);
        row.name = "limit";
        for (int f = 0; f < nf; ++f) {
            row.cols.push_back(model.y_cols[f]);
            row.coeffs.push_back(1.0);
        }
        model.lp.rows.push_back(std::move(row));
    }
    return model;
}

Sos2Audit sos2_check_repair(std::vector<double>& values, const MilpModel& model) {
    Sos2Audit audit;
    for (std::size_t g = 0; g < model.sos2.size(); ++g) {
        const Sos2Group& group = model.sos2[g];
        const int m = static_cast<int>(group.z_cols.size());
        int first = -1, last = -1, count = 0;
        for (int s = 0; s < m; ++s) {
            if (std::abs(values[group.z_cols[s]]) > kZeroWeightTol) {
                if (first < 0) first = s;
                last = s;
                ++count;
            }
        }
        if (count <= 1 || (count == 2 && last == first + 1)) continue;  // adjacent

        // Re-express the same load with the adjacent pair that brackets it.
        double load = 0.0;
        double old_cost = 0.0;
        for (int s = 0; s < m; ++s) {
            load += group.alpha[s] * values[group.z_cols[s]];
            old_cost += group.beta[s] * values[group.z_cols[s]];
        }
        int seg = m - 2;
        for (int s = 0; s + 1 < m; ++s) {
            if (load <= group.alpha[s + 1]) {
                seg = s;
                break;
            }
        }
        const double a0 = group.alpha[seg], a1 = group.alpha[seg + 1];
        const double theta = (a1 - load) / (a1 - a0);
        const double new_cost = theta * group.beta[seg] + (1.0 - theta) * group.beta[seg + 1];
        if (new_cost > old_cost + kRepairRelTol * (1.0 + std::abs(old_cost))) {
            // The non-adjacent representation is strictly cheaper than the
            // bracketing pair: the curve is not convex here, so only
            // branching can restore adjacency.
            audit.ok = false;
            audit.branch_groups.push_back(static_cast<int>(g));
            continue;
        }
        for (int s = 0; s < m; ++s) values[group.z_cols[s]] = 0.0;
        values[group.z_cols[seg]] = theta;
        values[group.z_cols[seg + 1]] = 1.0 - theta;
    }
    return audit;
}

void milp_to_text_file(const MilpModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    const LpProblem& lp = model.lp;
    auto col_name = [&](int j) {
        if (j < static_cast<int>(lp.col_names.size()) && !lp.col_names[j].empty()) {
            return lp.col_names[j];
        }
        return fmt::format("c{}", j);
    };
    auto term = [&](double coeff, int j) {
        return fmt::format("{} {} {}", coeff < 0.0 ? '-' : '+',
                           format_double(std::abs(coeff)), col_name(j));
    };

    out << "\\ Facility-assignment model dump\n";
    out << "Minimize\n obj:";
    for (int j = 0; j < lp.num_cols(); ++j) {
        if (lp.objective[j] != 0.0) out << ' ' << term(lp.objective[j], j);
    }
    out << "\nSubject To\n";
    for (std::size_t r = 0; r < lp.rows.size(); ++r) {
        const LpRow& row = lp.rows[r];
        out << ' ' << (row.name.empty() ? fmt::format("r{}", r) : row.name) << ':';
        for (std::size_t k = 0; k < row.cols.size(); ++k) {
            out << ' ' << term(row.coeffs[k], row.cols[k]);
        }
        const char* rel = row.sense == RowSense::less_equal   ? "<="
                          : row.sense == RowSense::equal      ? "="
                                                              : ">=";
        out << ' ' << rel << ' ' << format_double(row.rhs) << '\n';
    }
    out << "Bounds\n";
    for (int j = 0; j < lp.num_cols(); ++j) {
        const double lo = lp.lower[j], hi = lp.upper[j];
        if (lo == 0.0 && hi == kLpInfinity) continue;  // LP-format default
        if (!std::isfinite(lo) && !std::isfinite(hi)) {
            out << ' ' << col_name(j) << " free\n";
        } else {
            out << ' ';
            if (std::isfinite(lo)) out << format_double(lo) << " <= ";
            else out << "-infinity <= ";
            out << col_name(j);
            if (std::isfinite(hi)) out << " <= " << format_double(hi);
            out << '\n';
        }
    }
    if (!model.y_cols.empty()) {
        out << "Binary\n";
        for (int j : model.y_cols) out << ' ' << col_name(j) << '\n';
    }
    if (!model.sos2.empty()) {
        out << "SOS\n";
        for (std::size_t g = 0; g < model.sos2.size(); ++g) {
            out << fmt::format(" s{}: S2::", g);
            for (std::size_t s = 0; s < model.sos2[g].z_cols.size(); ++s) {
                out << ' ' << col_name(model.sos2[g].z_cols[s]) << ':' << (s + 1);
            }
            out << '\n';
        }
    }
    out << "End\n";
    if (!out) throw ValidationError("failed while writing: " + path);
}

}  // namespace qla
