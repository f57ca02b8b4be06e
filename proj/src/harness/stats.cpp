// Statistics and derived grid parameters for the experiment harness.

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "qla/harness.hpp"

namespace qla {

Interval confidence_interval(const std::vector<double>& samples, double level) {
    const std::size_t n = samples.size();
    if (n < 2) {
        throw ValidationError(fmt::format(
            "confidence_interval: need at least 2 samples, got {}", n));
    }
    if (!(level > 0.0) || !(level < 1.0)) {
        throw ValidationError(fmt::format(
            "confidence_interval: level {} outside (0, 1)", level));
    }
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : samples) ss += (v - mean) * (v - mean);
    const double stddev = std::sqrt(ss / static_cast<double>(n - 1));

    const boost::math::students_t dist(static_cast<double>(n - 1));
    const double t = boost::math::quantile(dist, 0.5 * (1.0 + level));
    return {mean, t * stddev / std::sqrt(static_cast<double>(n))};
}

CampaignParams derive_campaign_params(int num_nodes, double mu_hat, double rho_hat) {
    if (num_nodes < 1) {
        throw ValidationError("derive_campaign_params: topology has no nodes");
    }
    if (!(mu_hat > 0.0)) {
        throw ValidationError(fmt::format(
            "derive_campaign_params: service rate {} req/s must be positive", mu_hat));
    }
    if (!(rho_hat > 0.0) || rho_hat > 1.0) {
        throw ValidationError(fmt::format(
            "derive_campaign_params: target utilization {} outside (0, 1]", rho_hat));
    }

    CampaignParams out;
    out.num_facilities = std::min(num_nodes, 100);
    out.p_min = static_cast<int>(std::floor(0.3 * out.num_facilities));
    if (out.p_min < 1) {
        throw ValidationError(fmt::format(
            "derive_campaign_params: {} nodes give p_min = floor(0.3*{}) = 0; the "
            "topology is too small for the grid recipe",
            num_nodes, out.num_facilities));
    }
    out.lambda_hat = mu_hat * static_cast<double>(out.p_min) / static_cast<double>(num_nodes);

    // Published budget multipliers for the five standard utilization levels;
    // other levels fall back to the generating rule a = 0.3 / rho.
    static constexpr struct {
        double rho;
        double a;
    } kMultipliers[] = {
        {0.97, 0.31}, {0.81, 0.37}, {0.67, 0.45}, {0.5, 0.6}, {0.375, 0.8},
    };
    double a = 0.3 / rho_hat;
    for (const auto& entry : kMultipliers) {
        if (std::abs(rho_hat - entry.rho) < 1e-12) {
            a = entry.a;
            break;
        }
    }
    out.p_hat = static_cast<int>(std::floor(a * out.num_facilities));
    if (out.p_hat > out.num_facilities) {
        throw ValidationError(fmt::format(
            "derive_campaign_params: utilization {} needs {} facilities but only {} "
            "exist; the target cannot be reached",
            rho_hat, out.p_hat, out.num_facilities));
    }
    if (out.p_hat < 1) {
        throw ValidationError(fmt::format(
            "derive_campaign_params: utilization {} yields p = {}; no facility budget",
            rho_hat, out.p_hat));
    }
    return out;
}

}  // namespace qla
