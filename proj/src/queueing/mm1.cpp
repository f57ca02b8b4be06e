// M/M/1 formulas and exact assignment evaluation.

#include "qla/mm1.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>

namespace qla {

namespace {
constexpr double kLoadEps = 1e-9;       // tolerated numerical dust in x
constexpr double kDemandRelTol = 1e-6;  // per-client demand satisfaction
}  // namespace

double tis(double mu_rps, double lambda_rps) {
    if (!(mu_rps > 0.0) || !std::isfinite(mu_rps)) {
        throw ValidationError(fmt::format("tis: service rate must be positive and finite, got {}", mu_rps));
    }
    if (!(lambda_rps >= 0.0) || !std::isfinite(lambda_rps)) {
        throw ValidationError(fmt::format("tis: arrival rate must be non-negative and finite, got {}", lambda_rps));
    }
    if (lambda_rps >= mu_rps) {
        throw SteadyStateError(fmt::format(
            "tis: arrival rate {} >= service rate {}; queue has no steady state", lambda_rps, mu_rps));
    }
    return 1.0 / (mu_rps - lambda_rps);
}

double weighted_tis(double mu_rps, double lambda_rps) {
    return lambda_rps * tis(mu_rps, lambda_rps);
}

double weighted_tis_util(double rho) {
    if (!(rho >= 0.0) || !std::isfinite(rho)) {
        throw ValidationError(fmt::format("weighted_tis_util: utilization must be non-negative and finite, got {}", rho));
    }
    if (rho >= 1.0) {
        throw SteadyStateError(fmt::format(
            "weighted_tis_util: utilization {} >= 1; queue has no steady state", rho));
    }
    return rho / (1.0 - rho);
}

double response_time(const Instance& inst, const Assignment& a) {
    const std::size_t n_clients = inst.clients.size();
    const std::size_t n_fac = inst.facilities.size();
    if (a.x_rps.size() != n_clients) {
        throw ValidationError(fmt::format(
            "response_time: assignment has {} client rows, instance has {} clients",
            a.x_rps.size(), n_clients));
    }
    for (std::size_t c = 0; c < n_clients; ++c) {
        if (a.x_rps[c].size() != n_fac) {
            throw ValidationError(fmt::format(
                "response_time: client row {} has {} facility columns, instance has {} facilities",
                c, a.x_rps[c].size(), n_fac));
        }
    }
    const bool have_y = !a.y.empty();
    if (have_y && a.y.size() != n_fac) {
        throw ValidationError(fmt::format(
            "response_time: assignment has {} open/closed flags, instance has {} facilities",
            a.y.size(), n_fac));
    }

    const double total = inst.total_arrival();
    if (!(total > 0.0)) {
        throw ValidationError("response_time: total demand is zero; average response time is undefined");
    }

    // Validate rows and accumulate the network term and per-facility loads.
    double network = 0.0;
    std::vector<double> load(n_fac, 0.0);
    for (std::size_t c = 0; c < n_clients; ++c) {
        double row_sum = 0.0;
        for (std::size_t f = 0; f < n_fac; ++f) {
            const double x = a.x_rps[c][f];
            if (!std::isfinite(x)) {
                throw ValidationError(fmt::format(
                    "response_time: x[{}][{}] is not finite", c, f));
            }
            if (x < -kLoadEps) {
                throw ValidationError(fmt::format(
                    "response_time: x[{}][{}] = {} is negative", c, f, x));
            }
            const double xc = x < 0.0 ? 0.0 : x;
            if (have_y && !a.y[f] && xc > kLoadEps) {
                throw ValidationError(fmt::format(
                    "response_time: x[{}][{}] = {} routed to closed facility {}",
                    c, f, xc, inst.facilities[f]));
            }
            row_sum += xc;
            load[f] += xc;
            network += xc * inst.rtt[c][f];
        }
        const double lam = inst.arrival_rps[c];
        if (std::abs(row_sum - lam) > kDemandRelTol * std::max(1.0, lam)) {
            throw ValidationError(fmt::format(
                "response_time: client {} demand {} req/s but assignment routes {} req/s",
                inst.clients[c], lam, row_sum));
        }
    }

    // Queueing term. Facilities at or over capacity have no steady state.
    double queueing = 0.0;
    for (std::size_t f = 0; f < n_fac; ++f) {
        if (load[f] <= kLoadEps) continue;
        const double mu = inst.service_rps[f];
        if (load[f] >= mu) {
            throw SteadyStateError(fmt::format(
                "response_time: facility {} loaded at {} req/s >= service rate {} req/s; "
                "no steady state", inst.facilities[f], load[f], mu));
        }
        queueing += load[f] / (mu - load[f]);
    }

    return (network + queueing) / total;
}

}  // namespace qla
