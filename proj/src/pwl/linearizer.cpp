// Basepoint placement, PWL evaluation, error measurement, rescaling, CSV I/O.

#include "qla/pwl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "qla/numfmt.hpp"

namespace qla {

namespace {

// Update-weight schedule of the basepoint refinement: the first pass moves
// nodes kInitialWeight of the way toward the error-equalizing configuration,
// and each subsequent pass moves by a kDecay-smaller fraction (gradually
// finer changes). The schedule's total contraction fixes where the error
// settles between the uniform start and the fully equalized limit; the
// values below are calibrated on the rho/(1-rho) reference configuration
// (m = 6 basepoints on [0, 0.96]). kOvershootDamping halves a step whose
// trial configuration would increase the error.
constexpr double kInitialWeight = 0.30;
constexpr double kDecay = 0.85;
constexpr double kOvershootDamping = 0.5;
constexpr int kMaxIterations = 10000;
constexpr double kNoChangeTol = 1e-12;   // abort when no basepoint moves farther
constexpr int kGridPointsPerSegment = 10000;

double require_finite(double v, const char* what, double x) {
    if (!std::isfinite(v)) {
        throw ValidationError(fmt::format("{} is not finite at {}", what, x));
    }
    return v;
}

// Max |chord - f| on one segment [a, b] with f(a)=fa, f(b)=fb.
double segment_error(const Curve& curve, double a, double b, double fa, double fb) {
    if (!(b > a)) throw InvariantError("segment_error: empty segment");
    if (curve.chord_error) {
        return require_finite(curve.chord_error(a, b), "chord error", a);
    }
    const double slope = (fb - fa) / (b - a);
    auto chord_minus_f = [&](double x) { return fa + slope * (x - a) - curve.f(x); };
    if (curve.fprime) {
        // For convex f, chord - f is concave with derivative slope - f'(x),
        // decreasing in x; its maximum sits where f' crosses the slope.
        double ga = slope - curve.fprime(a);
        double gb = slope - curve.fprime(b);
        require_finite(ga, "curve derivative", a);
        require_finite(gb, "curve derivative", b);
        if (ga <= 0.0) return std::abs(chord_minus_f(a));
        if (gb >= 0.0) return std::abs(chord_minus_f(b));
        double lo = a, hi = b;
        for (int it = 0; it < 200 && (hi - lo) > 1e-16 * (b - a); ++it) {
            double mid = 0.5 * (lo + hi);
            if (slope - curve.fprime(mid) > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        double x = 0.5 * (lo + hi);
        return std::abs(require_finite(chord_minus_f(x), "chord deviation", x));
    }
    // Dense scan fallback when no derivative is available.
    double worst = 0.0;
    for (int i = 0; i <= kGridPointsPerSegment; ++i) {
        double x = a + (b - a) * i / kGridPointsPerSegment;
        worst = std::max(worst, std::abs(require_finite(chord_minus_f(x), "chord deviation", x)));
    }
    return worst;
}

std::vector<double> segment_errors(const BasepointSet& bp, const Curve& curve) {
    std::vector<double> e(bp.alpha.size() - 1);
    for (std::size_t s = 0; s + 1 < bp.alpha.size(); ++s) {
        e[s] = segment_error(curve, bp.alpha[s], bp.alpha[s + 1], bp.beta[s], bp.beta[s + 1]);
    }
    return e;
}

// Derivative used for duplicate detection; falls back to the left chord
// slope when the curve carries no analytic derivative.
double node_derivative(const BasepointSet& bp, const Curve& curve, std::size_t i) {
    if (curve.fprime) return curve.fprime(bp.alpha[i]);
    std::size_t s = (i == 0) ? 0 : i - 1;
    return (bp.beta[s + 1] - bp.beta[s]) / (bp.alpha[s + 1] - bp.alpha[s]);
}

bool strictly_increasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] > v[i - 1])) return false;
    }
    return true;
}

}  // namespace

void validate_basepoints(const BasepointSet& bp) {
    if (bp.alpha.size() != bp.beta.size()) {
        throw ValidationError(fmt::format("basepoints: {} abscissae but {} ordinates",
                                          bp.alpha.size(), bp.beta.size()));
    }
    if (bp.m() < 2) {
        throw ValidationError(fmt::format("basepoints: need at least 2 points, got {}", bp.m()));
    }
    for (std::size_t i = 0; i < bp.alpha.size(); ++i) {
        if (!std::isfinite(bp.alpha[i]) || !std::isfinite(bp.beta[i])) {
            throw ValidationError(fmt::format("basepoints: non-finite entry at index {}", i));
        }
    }
    if (!strictly_increasing(bp.alpha)) {
        throw ValidationError("basepoints: abscissae must be strictly increasing");
    }
    if (!std::isfinite(bp.epsilon) || bp.epsilon < 0.0) {
        throw ValidationError("basepoints: recorded error must be finite and non-negative");
    }
}

Curve weighted_tis_curve() {
    Curve c;
    c.f = [](double rho) { return rho / (1.0 - rho); };
    c.fprime = [](double rho) {
        double d = 1.0 - rho;
        return 1.0 / (d * d);
    };
    // Exact max chord deviation on [a, b]: the chord slope is
    // 1/((1-a)(1-b)); the deviation peaks where f' matches it, at
    // rho* = 1 - sqrt((1-a)(1-b)), giving (1/sqrt(1-a) - 1/sqrt(1-b))^2.
    c.chord_error = [](double a, double b) {
        double ta = 1.0 / std::sqrt(1.0 - a);
        double tb = 1.0 / std::sqrt(1.0 - b);
        double d = tb - ta;
        return d * d;
    };
    return c;
}

double eval_pwl(const BasepointSet& bp, double x) {
    validate_basepoints(bp);
    const double lo = bp.alpha.front();
    const double hi = bp.alpha.back();
    const double slack = 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)});
    if (x < lo - slack || x > hi + slack) {
        throw ValidationError(fmt::format(
            "eval_pwl: {} outside the linearization interval [{}, {}]", x, lo, hi));
    }
    x = std::clamp(x, lo, hi);
    auto it = std::upper_bound(bp.alpha.begin(), bp.alpha.end(), x);
    std::size_t s = (it == bp.alpha.begin())
                        ? 0
                        : static_cast<std::size_t>(it - bp.alpha.begin()) - 1;
    if (s + 1 >= bp.alpha.size()) s = bp.alpha.size() - 2;
    const double a = bp.alpha[s], b = bp.alpha[s + 1];
    const double t = (x - a) / (b - a);
    return bp.beta[s] + t * (bp.beta[s + 1] - bp.beta[s]);
}

double max_error(const BasepointSet& bp, const Curve& curve) {
    validate_basepoints(bp);
    if (!curve.f) throw ValidationError("max_error: curve has no function");
    double worst = 0.0;
    for (double e : segment_errors(bp, curve)) worst = std::max(worst, e);
    return worst;
}

BasepointSet uniform_basepoints(const Curve& curve, int m, double interval_end) {
    if (!curve.f) throw ValidationError("uniform_basepoints: curve has no function");
    if (m < 2) throw ValidationError(fmt::format("uniform_basepoints: m={} < 2", m));
    if (!(interval_end > 0.0) || !std::isfinite(interval_end)) {
        throw ValidationError("uniform_basepoints: interval end must be positive and finite");
    }
    BasepointSet bp;
    bp.alpha.resize(m);
    bp.beta.resize(m);
    for (int s = 0; s < m; ++s) {
        bp.alpha[s] = (s == m - 1) ? interval_end
                                   : interval_end * static_cast<double>(s) / (m - 1);
        bp.beta[s] = require_finite(curve.f(bp.alpha[s]), "curve value", bp.alpha[s]);
    }
    bp.epsilon = max_error(bp, curve);
    return bp;
}

BasepointSet imamoto_extended(const Curve& curve, int m, double interval_end) {
    if (m < 3) {
        throw ValidationError(fmt::format(
            "imamoto_extended: m={} < 3 (need at least one interior basepoint)", m));
    }
    BasepointSet bp = uniform_basepoints(curve, m, interval_end);
    std::vector<double> errors = segment_errors(bp, curve);
    double eps = *std::max_element(errors.begin(), errors.end());
    require_finite(eps, "segment error", 0.0);

    double weight = kInitialWeight;
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        // Duplicate-derivative repair: interior basepoints whose derivative
        // matches a neighbor's carry no placement information (the curve is
        // locally linear there); remove them and reinsert at midpoints of
        // the highest-error segments, largest first.
        {
            std::vector<std::size_t> dup;
            for (std::size_t i = 1; i + 1 < bp.alpha.size(); ++i) {
                double di = node_derivative(bp, curve, i);
                double dl = node_derivative(bp, curve, i - 1);
                double dr = node_derivative(bp, curve, i + 1);
                double scale = std::max({std::abs(di), std::abs(dl), std::abs(dr), 1e-300});
                if (std::abs(di - dl) <= 1e-14 * scale || std::abs(di - dr) <= 1e-14 * scale) {
                    dup.push_back(i);
                }
            }
            if (!dup.empty()) {
                BasepointSet reduced;
                std::size_t d = 0;
                for (std::size_t i = 0; i < bp.alpha.size(); ++i) {
                    if (d < dup.size() && dup[d] == i) {
                        ++d;
                        continue;
                    }
                    reduced.alpha.push_back(bp.alpha[i]);
                    reduced.beta.push_back(bp.beta[i]);
                }
                for (std::size_t k = 0; k < dup.size(); ++k) {
                    std::vector<double> re = segment_errors(reduced, curve);
                    std::size_t best = 0;
                    for (std::size_t s = 1; s < re.size(); ++s) {
                        // Largest error first; on ties (e.g. an exactly
                        // linear curve) prefer the widest segment, then the
                        // leftmost, to stay deterministic.
                        double ws = reduced.alpha[s + 1] - reduced.alpha[s];
                        double wb = reduced.alpha[best + 1] - reduced.alpha[best];
                        if (re[s] > re[best] || (re[s] == re[best] && ws > wb)) best = s;
                    }
                    double mid = 0.5 * (reduced.alpha[best] + reduced.alpha[best + 1]);
                    reduced.alpha.insert(reduced.alpha.begin() + best + 1, mid);
                    reduced.beta.insert(reduced.beta.begin() + best + 1,
                                        require_finite(curve.f(mid), "curve value", mid));
                }
                bp.alpha = reduced.alpha;
                bp.beta = reduced.beta;
                errors = segment_errors(bp, curve);
                eps = *std::max_element(errors.begin(), errors.end());
            }
        }

        // Error-equalizing targets: walk the cumulative sqrt-error profile
        // (for short segments the chord error scales with the square of the
        // width, so sqrt-error shares equalize the per-segment errors) and
        // place interior target nodes at equal shares.
        const std::size_t segs = errors.size();
        std::vector<double> cum(segs + 1, 0.0);
        for (std::size_t s = 0; s < segs; ++s) cum[s + 1] = cum[s] + std::sqrt(errors[s]);
        const double total = cum.back();
        std::vector<double> target(bp.alpha);
        if (total > 0.0) {
            for (int i = 1; i + 1 < m; ++i) {
                double share = total * static_cast<double>(i) / (m - 1);
                auto it = std::upper_bound(cum.begin(), cum.end(), share);
                std::size_t s = (it == cum.begin())
                                    ? 0
                                    : static_cast<std::size_t>(it - cum.begin()) - 1;
                if (s >= segs) s = segs - 1;
                double span = cum[s + 1] - cum[s];
                double frac = (span > 0.0) ? (share - cum[s]) / span : 0.0;
                target[i] = bp.alpha[s] + frac * (bp.alpha[s + 1] - bp.alpha[s]);
            }
        }

        // Damped move with overshoot rejection: halve the step while the
        // trial configuration is invalid or increases the error.
        double step = weight;
        bool accepted = false;
        std::vector<double> cand_alpha, cand_beta, cand_errors;
        double cand_eps = eps;
        for (int rejects = 0; rejects < 60; ++rejects) {
            cand_alpha = bp.alpha;
            for (int i = 1; i + 1 < m; ++i) {
                cand_alpha[i] = bp.alpha[i] + step * (target[i] - bp.alpha[i]);
            }
            if (strictly_increasing(cand_alpha)) {
                cand_beta.resize(cand_alpha.size());
                for (std::size_t i = 0; i < cand_alpha.size(); ++i) {
                    cand_beta[i] = require_finite(curve.f(cand_alpha[i]), "curve value",
                                                  cand_alpha[i]);
                }
                BasepointSet trial;
                trial.alpha = cand_alpha;
                trial.beta = cand_beta;
                cand_errors = segment_errors(trial, curve);
                cand_eps = *std::max_element(cand_errors.begin(), cand_errors.end());
                if (cand_eps <= eps) {
                    accepted = true;
                    break;
                }
            }
            step *= kOvershootDamping;
        }
        if (!accepted) break;  // every step overshoots: basepoints stop moving

        double moved = 0.0;
        for (int i = 0; i < m; ++i) moved = std::max(moved, std::abs(cand_alpha[i] - bp.alpha[i]));
        bp.alpha = cand_alpha;
        bp.beta = cand_beta;
        errors = cand_errors;
        eps = cand_eps;
        if (moved < kNoChangeTol) break;  // no-change abort
        weight *= kDecay;
    }

    bp.epsilon = eps;
    validate_basepoints(bp);
    return bp;
}

BasepointSet rescale(const BasepointSet& bp, double mu) {
    validate_basepoints(bp);
    if (!(mu > 0.0) || !std::isfinite(mu)) {
        throw ValidationError(fmt::format("rescale: service rate must be positive, got {}", mu));
    }
    BasepointSet out = bp;
    for (double& a : out.alpha) a *= mu;
    return out;
}

void basepoints_to_csv_file(const BasepointSet& bp, const std::string& path) {
    validate_basepoints(bp);
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write basepoint file '" + path + "'");
    out << "# m=" << bp.m() << " interval_end=" << format_double(bp.alpha.back())
        << " epsilon=" << format_double(bp.epsilon) << "\n";
    out << "s,alpha,beta\n";
    for (int s = 0; s < bp.m(); ++s) {
        out << s << ',' << format_double(bp.alpha[s]) << ',' << format_double(bp.beta[s])
            << "\n";
    }
}

BasepointSet basepoints_from_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open basepoint file '" + path + "'");
    BasepointSet bp;
    bool have_epsilon = false;
    bool have_header = false;
    std::string line;
    int expected_s = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            std::istringstream ss(line.substr(1));
            std::string tok;
            while (ss >> tok) {
                auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                if (tok.substr(0, eq) == "epsilon") {
                    bp.epsilon = parse_double(tok.substr(eq + 1));
                    have_epsilon = true;
                }
            }
            continue;
        }
        if (!have_header) {
            if (line != "s,alpha,beta") {
                throw ValidationError("basepoint file '" + path +
                                      "': expected header 's,alpha,beta', got '" + line + "'");
            }
            have_header = true;
            continue;
        }
        std::istringstream ss(line);
        std::string s_tok, a_tok, b_tok;
        if (!std::getline(ss, s_tok, ',') || !std::getline(ss, a_tok, ',') ||
            !std::getline(ss, b_tok)) {
            throw ValidationError("basepoint file '" + path + "': malformed row '" + line + "'");
        }
        if (std::stoi(s_tok) != expected_s) {
            throw ValidationError("basepoint file '" + path + "': rows out of order at '" +
                                  line + "'");
        }
        ++expected_s;
        bp.alpha.push_back(parse_double(a_tok));
        bp.beta.push_back(parse_double(b_tok));
    }
    if (!have_header) {
        throw ValidationError("basepoint file '" + path + "': missing header");
    }
    if (!have_epsilon) {
        throw ValidationError("basepoint file '" + path + "': missing epsilon sidecar");
    }
    validate_basepoints(bp);
    return bp;
}

}  // namespace qla
