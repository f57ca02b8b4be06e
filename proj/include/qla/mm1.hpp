// M/M/1 steady-state response-time formulas and the exact evaluation of a
// load assignment.
//
// Every operated facility is modelled as an independent M/M/1 queue with
// service rate mu and Poisson arrivals at the facility's total assigned load.
// The quality of an assignment is the demand-weighted average of network
// round trip plus time in system:
//
//     RT(x) = ( sum_cf x_cf * rtt_cf  +  sum_f  L_f / (mu_f - L_f) ) / L
//
// where L_f is facility f's load and L the total demand. The second summand
// uses the load-weighted time in system L_f * (1/(mu_f - L_f)).
#pragma once

#include "qla/errors.hpp"
#include "qla/instance.hpp"

namespace qla {

/// Thrown when an assignment drives a facility at or beyond its service rate,
/// i.e. the M/M/1 queue has no steady state and the response time diverges.
class SteadyStateError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Expected time in system of one request: 1/(mu - lambda). Requires
/// 0 <= lambda < mu.
double tis(double mu_rps, double lambda_rps);

/// Load-weighted time in system: lambda/(mu - lambda). Requires
/// 0 <= lambda < mu.
double weighted_tis(double mu_rps, double lambda_rps);

/// Load-weighted time in system as a function of utilization: rho/(1-rho).
/// Requires 0 <= rho < 1. This is the curve the linearizer approximates; it
/// is service-rate free (multiplying the abscissa by mu recovers the
/// rate-domain curve with unchanged ordinates).
double weighted_tis_util(double rho);

/// Exact demand-weighted average response time of an assignment.
/// Validates dimensions, non-negativity, per-client demand satisfaction
/// (1e-6 relative), that no load is routed to a closed facility, and the
/// steady-state condition L_f < mu_f (SteadyStateError otherwise).
double response_time(const Instance& inst, const Assignment& a);

}  // namespace qla
