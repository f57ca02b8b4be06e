// Objective, analytic derivatives, and the barrier-Newton solve of one
// fixed-subset subproblem.

#include "qla/convex.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace qla {

namespace {

// Barrier schedule and Newton/line-search constants. The barrier weight t
// multiplies the objective; each stage centers with damped Newton steps and
// then t grows by kBarrierGrowth until the duality measure
// (#inequalities)/t falls below the requested tolerance.
constexpr double kBarrierGrowth = 10.0;
constexpr double kArmijoSlope = 1e-4;
constexpr double kBacktrack = 0.5;
constexpr double kBoundaryFractionX = 0.99;    // keep 1% of the distance to x >= 0
constexpr double kBoundaryFractionCap = 0.995; // and 0.5% of each capacity margin
constexpr int kMaxNewtonPerStage = 80;
constexpr int kMaxTotalNewton = 20000;
constexpr double kFeasLiftRel = 1e-12;  // strict-interior slack required of the input

struct ProblemView {
    const Instance& inst;
    const std::vector<int>& subset;
    const std::vector<double>& tau;
    std::vector<double> usable;   // mu_f - tau_f per subset entry
    double total_demand = 0.0;

    explicit ProblemView(const PqpProblem& p) : inst(*p.instance), subset(p.subset), tau(p.tau_rps) {
        usable.reserve(subset.size());
        for (std::size_t j = 0; j < subset.size(); ++j) {
            usable.push_back(inst.service_rps[subset[j]] - tau[j]);
        }
        total_demand = inst.total_arrival();
    }
};

void validate_problem(const PqpProblem& p) {
    if (p.instance == nullptr) throw ValidationError("pqp: no instance attached");
    validate_instance(*p.instance);
    if (p.subset.empty()) throw ValidationError("pqp: empty facility subset");
    if (p.subset.size() != p.tau_rps.size()) {
        throw ValidationError("pqp: subset and margin sizes differ");
    }
    const int nf = p.instance->num_facilities();
    for (std::size_t j = 0; j < p.subset.size(); ++j) {
        if (p.subset[j] < 0 || p.subset[j] >= nf) {
            throw ValidationError(fmt::format("pqp: facility column {} out of range", p.subset[j]));
        }
        if (j > 0 && p.subset[j] <= p.subset[j - 1]) {
            throw ValidationError("pqp: subset columns must be strictly increasing");
        }
        if (!(p.tau_rps[j] > 0.0) ||
            p.tau_rps[j] >= p.instance->service_rps[p.subset[j]]) {
            throw ValidationError(fmt::format(
                "pqp: margin {} invalid for service rate {}", p.tau_rps[j],
                p.instance->service_rps[p.subset[j]]));
        }
    }
    if (!(p.instance->total_arrival() > 0.0)) {
        throw ValidationError("pqp: total demand is zero; objective undefined");
    }
}

// Per-facility loads of a flat x (row-major clients x subset).
std::vector<double> subset_loads(const ProblemView& v, const std::vector<double>& x) {
    const std::size_t nf = v.subset.size();
    std::vector<double> load(nf, 0.0);
    for (std::size_t c = 0; c < v.inst.clients.size(); ++c) {
        for (std::size_t j = 0; j < nf; ++j) load[j] += x[c * nf + j];
    }
    return load;
}

void check_domain(const ProblemView& v, const std::vector<double>& x,
                  std::vector<double>* loads_out) {
    const std::size_t n = v.inst.clients.size() * v.subset.size();
    if (x.size() != n) {
        throw ValidationError(fmt::format("pqp: x has {} entries, expected {}", x.size(), n));
    }
    for (double xi : x) {
        if (!std::isfinite(xi) || xi < -1e-12) {
            throw ValidationError(fmt::format("pqp: x entry {} outside the domain", xi));
        }
    }
    std::vector<double> loads = subset_loads(v, x);
    for (std::size_t j = 0; j < loads.size(); ++j) {
        if (!(loads[j] < v.usable[j])) {
            throw ValidationError(fmt::format(
                "pqp: facility {} load {} req/s reaches its usable capacity {} req/s",
                v.inst.facilities[v.subset[j]], loads[j], v.usable[j]));
        }
    }
    if (loads_out) *loads_out = std::move(loads);
}

}  // namespace

PqpProblem make_pqp(const Instance& inst, std::vector<int> subset, double tau_rel) {
    if (!(tau_rel > 0.0) || tau_rel >= 1.0) {
        throw ValidationError(fmt::format("pqp: relative margin {} outside (0,1)", tau_rel));
    }
    PqpProblem p;
    p.instance = &inst;
    std::sort(subset.begin(), subset.end());
    p.subset = std::move(subset);
    for (int col : p.subset) {
        if (col < 0 || col >= inst.num_facilities()) {
            throw ValidationError(fmt::format("pqp: facility column {} out of range", col));
        }
        p.tau_rps.push_back(tau_rel * inst.service_rps[col]);
    }
    validate_problem(p);
    return p;
}

double pqp_objective(const PqpProblem& problem, const std::vector<double>& x) {
    validate_problem(problem);
    ProblemView v(problem);
    std::vector<double> loads;
    check_domain(v, x, &loads);
    const std::size_t nf = v.subset.size();
    double network = 0.0;
    for (std::size_t c = 0; c < v.inst.clients.size(); ++c) {
        for (std::size_t j = 0; j < nf; ++j) {
            network += x[c * nf + j] * v.inst.rtt[c][v.subset[j]];
        }
    }
    double queueing = 0.0;
    for (std::size_t j = 0; j < nf; ++j) {
        queueing += loads[j] / (v.inst.service_rps[v.subset[j]] - loads[j]);
    }
    return (network + queueing) / v.total_demand;
}

std::vector<double> pqp_gradient(const PqpProblem& problem, const std::vector<double>& x) {
    validate_problem(problem);
    ProblemView v(problem);
    std::vector<double> loads;
    check_domain(v, x, &loads);
    const std::size_t nf = v.subset.size();
    // Queueing contribution depends on x only through the facility load:
    // d/dL [L/(mu-L)] = mu/(mu-L)^2, shared by every client of facility f.
    std::vector<double> qterm(nf);
    for (std::size_t j = 0; j < nf; ++j) {
        const double mu = v.inst.service_rps[v.subset[j]];
        const double d = mu - loads[j];
        qterm[j] = mu / (v.total_demand * d * d);
    }
    std::vector<double> g(x.size());
    for (std::size_t c = 0; c < v.inst.clients.size(); ++c) {
        for (std::size_t j = 0; j < nf; ++j) {
            g[c * nf + j] = v.inst.rtt[c][v.subset[j]] / v.total_demand + qterm[j];
        }
    }
    return g;
}

std::vector<std::vector<double>> pqp_hessian(const PqpProblem& problem,
                                             const std::vector<double>& x) {
    validate_problem(problem);
    ProblemView v(problem);
    std::vector<double> loads;
    check_domain(v, x, &loads);
    const std::size_t nf = v.subset.size();
    const std::size_t nc = v.inst.clients.size();
    // d2/dL2 [L/(mu-L)] = 2 mu/(mu-L)^3; every pair of entries sharing
    // facility f gets this constant, pairs across facilities get zero.
    std::vector<double> hterm(nf);
    for (std::size_t j = 0; j < nf; ++j) {
        const double mu = v.inst.service_rps[v.subset[j]];
        const double d = mu - loads[j];
        hterm[j] = 2.0 * mu / (v.total_demand * d * d * d);
    }
    const std::size_t n = nc * nf;
    std::vector<std::vector<double>> h(n, std::vector<double>(n, 0.0));
    for (std::size_t c = 0; c < nc; ++c) {
        for (std::size_t d = 0; d < nc; ++d) {
            for (std::size_t j = 0; j < nf; ++j) {
                h[c * nf + j][d * nf + j] = hterm[j];
            }
        }
    }
    return h;
}

SolveReport solve_pqp(const PqpProblem& problem, double tolerance) {
    const auto t_start = std::chrono::steady_clock::now();
    validate_problem(problem);
    if (!(tolerance > 0.0)) throw ValidationError("pqp: tolerance must be positive");
    ProblemView v(problem);
    const std::size_t nf = v.subset.size();
    const double usable_sum = std::accumulate(v.usable.begin(), v.usable.end(), 0.0);
    if (!(v.total_demand < usable_sum * (1.0 - kFeasLiftRel))) {
        throw InfeasibleError(fmt::format(
            "pqp: total demand {} req/s does not fit strictly inside the usable capacity "
            "{} req/s of the operated subset", v.total_demand, usable_sum));
    }

    // Only clients with demand carry variables; zero-demand rows stay zero.
    std::vector<std::size_t> active;
    for (std::size_t c = 0; c < v.inst.clients.size(); ++c) {
        if (v.inst.arrival_rps[c] > 0.0) active.push_back(c);
    }
    const std::size_t nc = active.size();
    const std::size_t n = nc * nf;

    using Vec = Eigen::VectorXd;
    using Mat = Eigen::MatrixXd;

    // Strictly feasible start: every client splits proportionally to the
    // usable capacities, so each margin keeps the same relative headroom.
    Vec x(n);
    for (std::size_t a = 0; a < nc; ++a) {
        const double lam = v.inst.arrival_rps[active[a]];
        for (std::size_t j = 0; j < nf; ++j) {
            x[a * nf + j] = lam * v.usable[j] / usable_sum;
        }
    }

    std::vector<double> rtt_flat(n);
    for (std::size_t a = 0; a < nc; ++a) {
        for (std::size_t j = 0; j < nf; ++j) {
            rtt_flat[a * nf + j] = v.inst.rtt[active[a]][v.subset[j]];
        }
    }

    auto loads_of = [&](const Vec& xx) {
        Vec load = Vec::Zero(nf);
        for (std::size_t a = 0; a < nc; ++a) {
            for (std::size_t j = 0; j < nf; ++j) load[j] += xx[a * nf + j];
        }
        return load;
    };
    auto objective_of = [&](const Vec& xx, const Vec& load) {
        double network = 0.0;
        for (std::size_t i = 0; i < n; ++i) network += xx[i] * rtt_flat[i];
        double queueing = 0.0;
        for (std::size_t j = 0; j < nf; ++j) {
            queueing += load[j] / (v.inst.service_rps[v.subset[j]] - load[j]);
        }
        return (network + queueing) / v.total_demand;
    };
    // Barrier value at weight t; +inf when any log argument is non-positive.
    auto barrier_of = [&](double t, const Vec& xx) {
        Vec load = loads_of(xx);
        for (std::size_t j = 0; j < nf; ++j) {
            if (!(load[j] < v.usable[j])) return std::numeric_limits<double>::infinity();
        }
        double b = t * objective_of(xx, load);
        for (std::size_t i = 0; i < n; ++i) {
            if (!(xx[i] > 0.0)) return std::numeric_limits<double>::infinity();
            b -= std::log(xx[i]);
        }
        for (std::size_t j = 0; j < nf; ++j) b -= std::log(v.usable[j] - load[j]);
        return b;
    };

    const double num_ineq = static_cast<double>(n + nf);
    double t = 1.0;
    int total_newton = 0;
    Vec nu = Vec::Zero(nc);  // equality multipliers of the last KKT solve

    // Stationarity of the original problem at barrier weight t: multipliers
    // z = 1/(t x) for x >= 0 and w = 1/(t margin) for capacity, nu/t for the
    // equalities.  Evaluated in original (unscaled) units, so it keeps full
    // double precision even when t is large.
    auto stationarity_at = [&](const Vec& xx, const Vec& nu_t) {
        Vec load = loads_of(xx);
        double resid = 0.0;
        for (std::size_t a = 0; a < nc; ++a) {
            for (std::size_t j = 0; j < nf; ++j) {
                const std::size_t i = a * nf + j;
                const double mu = v.inst.service_rps[v.subset[j]];
                const double d = mu - load[j];
                const double grad = rtt_flat[i] / v.total_demand + mu / (v.total_demand * d * d);
                const double z = 1.0 / (t * xx[i]);
                const double w = 1.0 / (t * (v.usable[j] - load[j]));
                resid = std::max(resid, std::abs(grad + nu_t[a] - z + w));
            }
        }
        return resid;
    };
    // Full first-order residual: stationarity plus the duality measure.
    auto kkt_residual_at = [&](const Vec& xx, const Vec& nu_t) {
        return std::max(stationarity_at(xx, nu_t), num_ineq / t);
    };

    bool done = false;
    while (!done) {
        // Once the duality measure meets the tolerance, this is the final
        // stage: polish at fixed t until the true first-order residual
        // passes (growing t further only stiffens the system).
        const bool final_stage = (num_ineq / t <= tolerance);
        const int stage_budget = final_stage ? 4 * kMaxNewtonPerStage : kMaxNewtonPerStage;
        for (int it = 0; it < stage_budget; ++it) {
            if (++total_newton > kMaxTotalNewton) {
                throw ConvergenceError(fmt::format(
                    "pqp: barrier Newton exhausted {} iterations; best residual {}",
                    kMaxTotalNewton, kkt_residual_at(x, nu / t)));
            }
            Vec load = loads_of(x);
            // Gradient of the barrier.
            Vec g(n);
            std::vector<double> qgrad(nf), caprec(nf), hblock(nf);
            for (std::size_t j = 0; j < nf; ++j) {
                const double mu = v.inst.service_rps[v.subset[j]];
                const double d = mu - load[j];
                qgrad[j] = mu / (v.total_demand * d * d);
                caprec[j] = 1.0 / (v.usable[j] - load[j]);
                hblock[j] = t * 2.0 * mu / (v.total_demand * d * d * d) + caprec[j] * caprec[j];
            }
            for (std::size_t a = 0; a < nc; ++a) {
                for (std::size_t j = 0; j < nf; ++j) {
                    const std::size_t i = a * nf + j;
                    g[i] = t * (rtt_flat[i] / v.total_demand + qgrad[j]) - 1.0 / x[i] + caprec[j];
                }
            }
            // Hessian: H = diag(1/x^2) + sum_j hblock[j] * e_j e_j^T where
            // e_j marks facility j's entries.  Its inverse has a closed form
            // (Woodbury) whose operations are all products of x^2-scale
            // quantities, so the solve stays accurate even when the barrier
            // diagonal spans sixteen orders of magnitude late in the path:
            //   H^-1 r = x^2.(r - coef_{f(i)}),
            //   coef_j = (sum_{i in j} x_i^2 r_i) / (1/hblock_j + sum_{i in j} x_i^2).
            Vec xsq(n);
            for (std::size_t i = 0; i < n; ++i) xsq[i] = x[i] * x[i];
            std::vector<double> kf(nf);
            for (std::size_t j = 0; j < nf; ++j) {
                double s = 1.0 / hblock[j];
                for (std::size_t a = 0; a < nc; ++a) s += xsq[a * nf + j];
                kf[j] = s;
            }
            auto solve_h = [&](const Vec& r) {
                std::vector<double> coef(nf, 0.0);
                for (std::size_t j = 0; j < nf; ++j) {
                    double num = 0.0;
                    for (std::size_t a = 0; a < nc; ++a) {
                        const std::size_t i = a * nf + j;
                        num += xsq[i] * r[i];
                    }
                    coef[j] = num / kf[j];
                }
                Vec out(n);
                for (std::size_t a = 0; a < nc; ++a) {
                    for (std::size_t j = 0; j < nf; ++j) {
                        const std::size_t i = a * nf + j;
                        out[i] = xsq[i] * (r[i] - coef[j]);
                    }
                }
                return out;
            };
            // Schur complement of the demand equalities: with M_aj = x_aj^2,
            //   S = A H^-1 A^T = diag(rowsum(M)) - M diag(1/kf) M^T,
            // a small positive definite client-by-client system.
            Mat S = Mat::Zero(static_cast<Eigen::Index>(nc), static_cast<Eigen::Index>(nc));
            for (std::size_t a = 0; a < nc; ++a) {
                for (std::size_t b = 0; b < nc; ++b) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < nf; ++j) {
                        s -= xsq[a * nf + j] * xsq[b * nf + j] / kf[j];
                    }
                    if (a == b) {
                        for (std::size_t j = 0; j < nf; ++j) s += xsq[a * nf + j];
                    }
                    S(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = s;
                }
            }
            Eigen::LDLT<Mat> sldlt(S);
            if (sldlt.info() != Eigen::Success) {
                S.diagonal().array() += 1e-14 * (1.0 + S.diagonal().maxCoeff());
                sldlt.compute(S);
                if (sldlt.info() != Eigen::Success) {
                    throw ConvergenceError("pqp: equality Schur factorization failed");
                }
            }
            Vec Hig = solve_h(g);
            Vec rhs = Vec::Zero(static_cast<Eigen::Index>(nc));
            for (std::size_t a = 0; a < nc; ++a) {
                for (std::size_t j = 0; j < nf; ++j) rhs[a] -= Hig[a * nf + j];
            }
            nu = sldlt.solve(rhs);
            Vec gnu = g;
            for (std::size_t a = 0; a < nc; ++a) {
                for (std::size_t j = 0; j < nf; ++j) gnu[a * nf + j] += nu[a];
            }
            Vec dx = -solve_h(gnu);
            // Project each client's step to zero sum so the demand rows stay
            // exact; otherwise Schur-solve error drifts the equalities and,
            // scaled by nu ~ t, poisons the computed decrement.  Weight the
            // correction by x^2 (the inverse barrier curvature) so the noise
            // lands on large allocations, where it is harmless, instead of
            // swamping near-zero ones.
            for (std::size_t a = 0; a < nc; ++a) {
                double rowsum = 0.0;
                double wsum = 0.0;
                for (std::size_t j = 0; j < nf; ++j) {
                    rowsum += dx[a * nf + j];
                    wsum += xsq[a * nf + j];
                }
                for (std::size_t j = 0; j < nf; ++j) {
                    const std::size_t i = a * nf + j;
                    dx[i] -= xsq[i] * rowsum / wsum;
                }
            }

            const double stat = stationarity_at(x, nu / t);
            if (final_stage && stat <= tolerance) {
                done = true;
                break;
            }
            // Mid-path stages only need to center far enough that the
            // residual is dominated by the duality measure.
            if (!final_stage && stat <= num_ineq / t) break;
            // Newton decrement from the quadratic model dx^T H dx, assembled
            // from well-scaled ratios so it is non-negative by construction.
            double decrement2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = dx[i] / x[i];
                decrement2 += r * r;
            }
            for (std::size_t j = 0; j < nf; ++j) {
                double colsum = 0.0;
                for (std::size_t a = 0; a < nc; ++a) colsum += dx[a * nf + j];
                decrement2 += hblock[j] * colsum * colsum;
            }
            if (!(decrement2 > 0.0)) break;  // numerically stationary

            // Fraction to the boundary first; the cap keeps every backtracked
            // point strictly interior.
            double alpha = 1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (dx[i] < 0.0) alpha = std::min(alpha, kBoundaryFractionX * x[i] / -dx[i]);
            }
            Vec dload = loads_of(dx);
            for (std::size_t j = 0; j < nf; ++j) {
                if (dload[j] > 0.0) {
                    alpha = std::min(alpha, kBoundaryFractionCap * (v.usable[j] - load[j]) / dload[j]);
                }
            }
            if (final_stage) {
                // Near the end of the path the barrier value t*objective is
                // too large for its decrease to be representable, so accept
                // steps on the stationarity residual instead.
                bool accepted = false;
                for (int bt = 0; bt < 60; ++bt) {
                    Vec xt = x + alpha * dx;
                    // Strict decrease: a step too small to change x must not
                    // count as progress.
                    if (stationarity_at(xt, nu / t) < stat * (1.0 - kArmijoSlope * alpha)) {
                        x = xt;
                        accepted = true;
                        break;
                    }
                    alpha *= kBacktrack;
                }
                if (!accepted) break;  // residual no longer reducible in doubles
            } else {
                const double b0 = barrier_of(t, x);
                const double slope = -decrement2;
                int bt = 0;
                for (; bt < 60; ++bt) {
                    if (barrier_of(t, x + alpha * dx) <= b0 + kArmijoSlope * alpha * slope) break;
                    alpha *= kBacktrack;
                }
                if (bt == 60) break;  // step underflow: as centered as doubles allow
                x += alpha * dx;
            }
        }
        if (done) break;
        if (final_stage) {
            throw ConvergenceError(fmt::format(
                "pqp: polish stage stalled at residual {} (tolerance {})",
                kkt_residual_at(x, nu / t), tolerance));
        }
        t *= kBarrierGrowth;
    }

    SolveReport report;
    report.subset = problem.subset;
    report.iterations = total_newton;
    report.kkt_residual = kkt_residual_at(x, nu / t);
    // Expand to the full instance layout.
    report.assignment.x_rps.assign(v.inst.clients.size(),
                                   std::vector<double>(v.inst.facilities.size(), 0.0));
    for (std::size_t a = 0; a < nc; ++a) {
        for (std::size_t j = 0; j < nf; ++j) {
            report.assignment.x_rps[active[a]][v.subset[j]] = x[a * nf + j];
        }
    }
    report.assignment.y.assign(v.inst.facilities.size(), 0);
    for (int col : problem.subset) report.assignment.y[col] = 1;
    Vec load = loads_of(x);
    report.objective_s = objective_of(x, load);
    report.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

}  // namespace qla
