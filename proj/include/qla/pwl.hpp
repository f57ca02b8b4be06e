// Piecewise-linear under-structure for the weighted time-in-system curve.
//
// A BasepointSet holds m points (alpha_s, beta_s) on a convex curve; the PWL
// approximation interpolates linearly between consecutive basepoints. For a
// convex curve every chord lies on or above the curve, so the PWL function
// over-estimates and the approximation error
//
//     epsilon = max_x | pwl(x) - f(x) |
//
// is attained inside some segment where f' equals the chord slope.
//
// Basepoint placement uses an iterative refinement: starting from uniform
// spacing, nodes are pulled toward the error-equalizing configuration with a
// geometrically decaying update weight (gradually finer changes), aborting
// when basepoints stop moving. Two robustness fixes are built in: the
// no-change abort itself, and removal/reinsertion of basepoints whose curve
// derivatives coincide (which otherwise pin the iteration on locally linear
// curves).
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qla/errors.hpp"

namespace qla {

struct BasepointSet {
    std::vector<double> alpha;  // strictly increasing abscissae
    std::vector<double> beta;   // ordinates beta_s = f(alpha_s)
    double epsilon = 0.0;       // recorded max |pwl - f| over [alpha_0, alpha_{m-1}]

    int m() const { return static_cast<int>(alpha.size()); }
};

/// Throws ValidationError unless sizes match, m >= 2, all values are finite,
/// and alpha is strictly increasing.
void validate_basepoints(const BasepointSet& bp);

/// A convex scalar curve. `f` is required. `fprime` enables closed-form
/// per-segment error location (bisection on the slope); `chord_error`, when
/// present, returns the exact max chord error on [a, b] and short-circuits
/// both. Without either, errors fall back to a dense grid scan.
struct Curve {
    std::function<double(double)> f;
    std::function<double(double)> fprime;
    std::function<double(double, double)> chord_error;
};

/// The utilization-domain weighted time-in-system curve rho/(1-rho) with
/// analytic derivative 1/(1-rho)^2 and the exact chord-error closed form
/// (1/sqrt(1-a) - 1/sqrt(1-b))^2.
Curve weighted_tis_curve();

/// Linear interpolation within the bracketing segment; exact at basepoints.
/// Throws ValidationError when x lies outside [alpha_0, alpha_{m-1}] beyond
/// a 1e-9 relative slack (values within the slack are clamped).
double eval_pwl(const BasepointSet& bp, double x);

/// Maximum absolute deviation between the PWL function and the curve over
/// [alpha_0, alpha_{m-1}]. Uses curve.chord_error when available, otherwise
/// locates the stationary point of (chord - f) by bisection on f', otherwise
/// scans a 10^4-point grid per segment.
double max_error(const BasepointSet& bp, const Curve& curve);

/// Iterative basepoint refinement for convex f on [0, interval_end] with
/// m >= 3 basepoints; endpoints stay fixed. Deterministic; the result's
/// error never exceeds that of uniform spacing with the same m.
BasepointSet imamoto_extended(const Curve& curve, int m, double interval_end);

/// Uniformly spaced basepoints on [0, interval_end] (the refinement start
/// and the comparison baseline).
BasepointSet uniform_basepoints(const Curve& curve, int m, double interval_end);

/// Rate-domain rescaling: alpha'_s = mu * alpha_s, beta and epsilon
/// unchanged. Throws ValidationError when mu <= 0.
BasepointSet rescale(const BasepointSet& bp, double mu);

/// CSV I/O: a comment line `# m=<m> interval_end=<v> epsilon=<v>` followed by
/// a `s,alpha,beta` header and one row per basepoint. Values use
/// shortest-round-trip formatting, so read(write(bp)) is bit-exact.
void basepoints_to_csv_file(const BasepointSet& bp, const std::string& path);
BasepointSet basepoints_from_csv_file(const std::string& path);

}  // namespace qla
