// Unit tests for the convex solver: objective/derivative formulas against
// finite differences, the barrier solve against independent grid and
// projected-gradient oracles, and subset enumeration behavior.
//
// Hand-derived expectations:
//   - 1 client (10 req/s), one facility (mu=100, RTT 60 ms), x=10:
//       objective = 0.060 + 1/90 ~= 0.0711111 s
//       gradient  = 0.06/10 + (1/10)(1/90 + 10/90^2) ~= 0.0072345679
//       hessian   = (1/10)(2/90^2 + 2*10/90^3) = 2*100/(10*90^3) ~= 2.743484e-5
//   - even 20/20 split of 40 req/s over the 60/70 ms pair -> 0.0775 s.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <vector>

#include "qla/convex.hpp"
#include "qla/mm1.hpp"
#include "qla/rng.hpp"

using namespace qla;

namespace {

Instance one_by_one() {
    Instance inst;
    inst.name = "one-by-one";
    inst.clients = {0};
    inst.facilities = {1};
    inst.rtt = {{0.060}};
    inst.arrival_rps = {10.0};
    inst.service_rps = {100.0};
    inst.p = 1;
    return inst;
}

Instance toy_pair(double lambda, double rtt_b_s = 0.070) {
    Instance inst;
    inst.name = "toy-1x2";
    inst.clients = {0};
    inst.facilities = {1, 2};
    inst.rtt = {{0.060, rtt_b_s}};
    inst.arrival_rps = {lambda};
    inst.service_rps = {100.0, 100.0};
    inst.p = 2;
    return inst;
}

// Random well-conditioned instance with guaranteed two-facility feasibility.
Instance random_instance(int clients, int facilities, std::uint64_t seed) {
    Rng rng(seed, 0);
    Instance inst;
    inst.name = "random";
    for (int c = 0; c < clients; ++c) inst.clients.push_back(c);
    for (int f = 0; f < facilities; ++f) inst.facilities.push_back(100 + f);
    inst.rtt.assign(clients, std::vector<double>(facilities));
    for (auto& row : inst.rtt) {
        for (double& v : row) v = rng.uniform(0.005, 0.120);
    }
    for (int c = 0; c < clients; ++c) inst.arrival_rps.push_back(rng.uniform(1.0, 6.0));
    for (int f = 0; f < facilities; ++f) inst.service_rps.push_back(rng.uniform(60.0, 140.0));
    inst.p = std::min(2, facilities);
    return inst;
}

// Random strictly interior point: proportional fill perturbed multiplicatively,
// then renormalized per client so demands hold exactly.
std::vector<double> random_interior_point(const PqpProblem& prob, Rng& rng) {
    const Instance& inst = *prob.instance;
    const std::size_t nf = prob.subset.size();
    std::vector<double> usable(nf);
    double usable_sum = 0.0;
    for (std::size_t j = 0; j < nf; ++j) {
        usable[j] = inst.service_rps[prob.subset[j]] - prob.tau_rps[j];
        usable_sum += usable[j];
    }
    std::vector<double> x(inst.clients.size() * nf);
    for (std::size_t c = 0; c < inst.clients.size(); ++c) {
        double lam = inst.arrival_rps[c];
        double row = 0.0;
        for (std::size_t j = 0; j < nf; ++j) {
            x[c * nf + j] = (usable[j] / usable_sum) * rng.uniform(0.5, 1.5);
            row += x[c * nf + j];
        }
        for (std::size_t j = 0; j < nf; ++j) x[c * nf + j] *= lam / row;
    }
    return x;
}

double fd_gradient_entry(const PqpProblem& prob, std::vector<double> x, std::size_t i,
                         double h) {
    x[i] += h;
    double fp = pqp_objective(prob, x);
    x[i] -= 2.0 * h;
    double fm = pqp_objective(prob, x);
    return (fp - fm) / (2.0 * h);
}

double fd_hessian_entry(const PqpProblem& prob, std::vector<double> x, std::size_t i,
                        std::size_t j, double h) {
    auto f = [&](double di, double dj) {
        std::vector<double> xx = x;
        xx[i] += di;
        xx[j] += dj;
        return pqp_objective(prob, xx);
    };
    return (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
}

// Independent optimizer: multi-start projected gradient with per-client
// simplex projection and objective-based step control.
void project_row_simplex(std::vector<double>& row, double lam) {
    // Euclidean projection onto { v >= 0, sum v = lam }.
    std::vector<double> u(row);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    int k = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        cum += u[i];
        double cand = (cum - lam) / static_cast<double>(i + 1);
        if (u[i] - cand > 0.0) {
            theta = cand;
            k = static_cast<int>(i + 1);
        }
    }
    (void)k;
    for (double& v : row) v = std::max(0.0, v - theta);
    // Compensate residual rounding so the sum is exact.
    double s = 0.0;
    for (double v : row) s += v;
    if (s > 0.0) {
        for (double& v : row) v *= lam / s;
    } else if (!row.empty()) {
        row[0] = lam;
    }
}

double projected_gradient_oracle(const Instance& inst, const std::vector<int>& subset,
                                 int starts, int iters, std::uint64_t seed) {
    PqpProblem prob = make_pqp(inst, subset);
    const std::size_t nf = prob.subset.size();
    const std::size_t nc = inst.clients.size();
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < starts; ++s) {
        Rng rng(seed, static_cast<std::uint64_t>(s));
        std::vector<double> x;
        // Draw random feasible starts; blend toward proportional fill until
        // inside the capacity region.
        for (int attempt = 0; attempt < 64; ++attempt) {
            x = random_interior_point(prob, rng);
            try {
                pqp_objective(prob, x);
                break;
            } catch (const ValidationError&) {
                x.clear();
            }
        }
        if (x.empty()) continue;
        double fx = pqp_objective(prob, x);
        double step = 1.0;
        for (int it = 0; it < iters; ++it) {
            std::vector<double> g = pqp_gradient(prob, x);
            std::vector<double> xn(x.size());
            bool improved = false;
            for (int bt = 0; bt < 40 && !improved; ++bt) {
                for (std::size_t i = 0; i < x.size(); ++i) xn[i] = x[i] - step * g[i];
                for (std::size_t c = 0; c < nc; ++c) {
                    std::vector<double> row(xn.begin() + c * nf, xn.begin() + (c + 1) * nf);
                    project_row_simplex(row, inst.arrival_rps[c]);
                    std::copy(row.begin(), row.end(), xn.begin() + c * nf);
                }
                try {
                    double fn = pqp_objective(prob, xn);
                    if (fn < fx) {
                        x = xn;
                        fx = fn;
                        improved = true;
                        step *= 1.2;
                    } else {
                        step *= 0.5;
                    }
                } catch (const ValidationError&) {
                    step *= 0.5;
                }
            }
            if (!improved && step < 1e-14) break;
        }
        best = std::min(best, fx);
    }
    return best;
}

}  // namespace

TEST_CASE("objective matches closed forms and the exact evaluator") {
    Instance inst = one_by_one();
    PqpProblem prob = make_pqp(inst, {0});
    CHECK(pqp_objective(prob, {10.0}) == doctest::Approx(0.060 + 1.0 / 90.0).epsilon(1e-13));

    Instance pair = toy_pair(40.0);
    PqpProblem prob2 = make_pqp(pair, {0, 1});
    CHECK(pqp_objective(prob2, {20.0, 20.0}) == doctest::Approx(0.0775).epsilon(1e-13));

    // Cross-module agreement with the queueing evaluator.
    Assignment a;
    a.x_rps = {{20.0, 20.0}};
    a.y = {1, 1};
    CHECK(pqp_objective(prob2, {20.0, 20.0}) ==
          doctest::Approx(response_time(pair, a)).epsilon(1e-12));
}

TEST_CASE("objective rejects domain violations") {
    Instance inst = one_by_one();
    PqpProblem prob = make_pqp(inst, {0});
    CHECK_THROWS_AS(pqp_objective(prob, {10.0, 5.0}), ValidationError);  // wrong size
    CHECK_THROWS_AS(pqp_objective(prob, {-1.0}), ValidationError);
    CHECK_THROWS_AS(pqp_objective(prob, {100.0}), ValidationError);  // at capacity

    Instance zero = one_by_one();
    zero.arrival_rps = {0.0};
    CHECK_THROWS_AS(make_pqp(zero, {0}), ValidationError);  // zero total demand
}

TEST_CASE("gradient matches the closed form and finite differences") {
    Instance inst = one_by_one();
    PqpProblem prob = make_pqp(inst, {0});
    auto g = pqp_gradient(prob, {10.0});
    REQUIRE(g.size() == 1);
    const double expected = 0.06 / 10.0 + (1.0 / 10.0) * (1.0 / 90.0 + 10.0 / (90.0 * 90.0));
    CHECK(g[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(g[0] == doctest::Approx(fd_gradient_entry(prob, {10.0}, 0, 1e-5)).epsilon(1e-7));

    SUBCASE("zero-load form") {
        Instance pair = toy_pair(40.0);
        PqpProblem p2 = make_pqp(pair, {0, 1});
        auto gz = pqp_gradient(p2, {0.0, 0.0});
        CHECK(gz[0] == doctest::Approx(0.060 / 40.0 + 1.0 / (40.0 * 100.0)).epsilon(1e-12));
        CHECK(gz[1] == doctest::Approx(0.070 / 40.0 + 1.0 / (40.0 * 100.0)).epsilon(1e-12));
    }
    SUBCASE("symmetric data gives symmetric components") {
        Instance pair = toy_pair(80.0, 0.060);  // both RTTs 60 ms
        PqpProblem p2 = make_pqp(pair, {0, 1});
        auto gs = pqp_gradient(p2, {40.0, 40.0});
        CHECK(gs[0] == doctest::Approx(gs[1]).epsilon(1e-14));
    }
}

TEST_CASE("gradient and hessian match finite differences on random instances") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Instance inst = random_instance(4, 3, seed);
        PqpProblem prob = make_pqp(inst, {0, 1, 2});
        Rng rng(seed, 77);
        for (int probe = 0; probe < 5; ++probe) {
            std::vector<double> x = random_interior_point(prob, rng);
            const double h = 1e-5 * 60.0;
            auto g = pqp_gradient(prob, x);
            for (std::size_t i = 0; i < x.size(); i += 3) {
                double fd = fd_gradient_entry(prob, x, i, h);
                CHECK(g[i] == doctest::Approx(fd).epsilon(1e-5));
            }
            auto H = pqp_hessian(prob, x);
            for (std::size_t i = 0; i < x.size(); i += 4) {
                for (std::size_t j = i; j < x.size(); j += 5) {
                    double fd = fd_hessian_entry(prob, x, i, j, h);
                    if (std::abs(fd) > 1e-12 || std::abs(H[i][j]) > 1e-12) {
                        CHECK(H[i][j] == doctest::Approx(fd).epsilon(1e-4));
                    }
                    CHECK(H[i][j] == H[j][i]);
                }
            }
        }
    }
}

TEST_CASE("hessian closed form, block structure, and positive semidefiniteness") {
    Instance inst = one_by_one();
    PqpProblem prob = make_pqp(inst, {0});
    auto H = pqp_hessian(prob, {10.0});
    CHECK(H[0][0] == doctest::Approx(2.743484e-5).epsilon(1e-6));

    Instance pair = toy_pair(40.0);
    PqpProblem p2 = make_pqp(pair, {0, 1});
    auto H2 = pqp_hessian(p2, {20.0, 20.0});
    CHECK(H2[0][1] == 0.0);  // different facilities never couple
    CHECK(H2[1][0] == 0.0);
    CHECK(H2[0][0] > 0.0);
    CHECK(H2[1][1] > 0.0);

    Rng rng(3, 0);
    Instance rnd = random_instance(5, 3, 12);
    PqpProblem p3 = make_pqp(rnd, {0, 1, 2});
    std::vector<double> x = random_interior_point(p3, rng);
    auto H3 = pqp_hessian(p3, x);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> d(x.size());
        for (double& v : d) v = rng.uniform(-1.0, 1.0);
        double quad = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            for (std::size_t j = 0; j < d.size(); ++j) quad += d[i] * H3[i][j] * d[j];
        }
        CHECK(quad >= -1e-10);
    }
}

TEST_CASE("barrier solve reproduces the 1-D grid oracle on the toy pair") {
    SUBCASE("light load goes all to the nearer facility") {
        Instance inst = toy_pair(10.0);
        PqpProblem prob = make_pqp(inst, {0, 1});
        SolveReport r = solve_pqp(prob);
        // Grid oracle over the nearer facility's share.
        double best = 1e300, best_l1 = -1.0;
        PqpProblem scan = make_pqp(inst, {0, 1});
        for (int i = 0; i <= 10000; ++i) {
            double l1 = 10.0 * i / 10000.0;
            double obj = pqp_objective(scan, {l1, 10.0 - l1});
            if (obj < best) {
                best = obj;
                best_l1 = l1;
            }
        }
        CHECK(best_l1 == doctest::Approx(10.0).epsilon(1e-9));  // all on the nearer
        CHECK(r.objective_s == doctest::Approx(0.060 + 1.0 / 90.0).epsilon(1e-6));
        CHECK(r.objective_s <= best + 1e-6);
        CHECK(r.assignment.x_rps[0][0] == doctest::Approx(10.0).epsilon(1e-4));
    }
    SUBCASE("heavy load splits with the nearer facility favored") {
        Instance inst = toy_pair(160.0);
        PqpProblem prob = make_pqp(inst, {0, 1});
        SolveReport r = solve_pqp(prob);
        double best = 1e300, best_l1 = -1.0;
        for (int i = 0; i <= 16000; ++i) {
            double l1 = 160.0 * i / 16000.0;
            double l2 = 160.0 - l1;
            if (l1 >= 100.0 - 1e-4 || l2 >= 100.0 - 1e-4) continue;
            double obj = pqp_objective(prob, {l1, l2});
            if (obj < best) {
                best = obj;
                best_l1 = l1;
            }
        }
        CHECK(std::abs(r.objective_s - best) < 1e-4);
        CHECK(r.assignment.x_rps[0][0] > 80.0);  // nearer gets more than half
        CHECK(r.assignment.x_rps[0][0] == doctest::Approx(best_l1).epsilon(1e-2));
    }
    SUBCASE("symmetric facilities split evenly") {
        Instance inst = toy_pair(80.0, 0.060);
        PqpProblem prob = make_pqp(inst, {0, 1});
        SolveReport r = solve_pqp(prob);
        CHECK(r.assignment.x_rps[0][0] == doctest::Approx(40.0).epsilon(1e-6));
        CHECK(r.assignment.x_rps[0][1] == doctest::Approx(40.0).epsilon(1e-6));
    }
}

TEST_CASE("solve reports satisfy their own invariants") {
    Instance inst = random_instance(6, 3, 42);
    PqpProblem prob = make_pqp(inst, {0, 1, 2});
    SolveReport r = solve_pqp(prob);
    CHECK(r.kkt_residual <= 1e-9);
    // Demand rows hold exactly (maintained by the method).
    for (std::size_t c = 0; c < inst.clients.size(); ++c) {
        double row = 0.0;
        for (double v : r.assignment.x_rps[c]) row += v;
        CHECK(row == doctest::Approx(inst.arrival_rps[c]).epsilon(1e-12));
    }
    // Strict capacity with margin.
    auto loads = r.assignment.facility_loads();
    for (std::size_t f = 0; f < loads.size(); ++f) {
        CHECK(loads[f] <= inst.service_rps[f] - kDefaultTauRel * inst.service_rps[f] + 1e-9);
    }
    // Objective agrees with the exact evaluator.
    CHECK(r.objective_s == doctest::Approx(response_time(inst, r.assignment)).epsilon(1e-9));
}

TEST_CASE("objective is invariant under client and facility permutations") {
    Instance inst = random_instance(5, 3, 7);
    PqpProblem prob = make_pqp(inst, {0, 1, 2});
    double base = solve_pqp(prob).objective_s;

    Instance perm = inst;  // swap clients 0<->3 and facilities 0<->2
    std::swap(perm.arrival_rps[0], perm.arrival_rps[3]);
    std::swap(perm.rtt[0], perm.rtt[3]);
    for (auto& row : perm.rtt) std::swap(row[0], row[2]);
    std::swap(perm.service_rps[0], perm.service_rps[2]);
    double permuted = solve_pqp(make_pqp(perm, {0, 1, 2})).objective_s;
    CHECK(base == doctest::Approx(permuted).epsilon(1e-8));
}

TEST_CASE("subset enumeration finds the exact optimum") {
    SUBCASE("single subset when p equals the facility count") {
        Instance inst = random_instance(4, 3, 9);
        SolveReport whole = solve_qp_exact(inst, 3);
        SolveReport direct = solve_pqp(make_pqp(inst, {0, 1, 2}));
        CHECK(whole.objective_s == doctest::Approx(direct.objective_s).epsilon(1e-10));
        CHECK(whole.subset == std::vector<int>{0, 1, 2});
    }
    SUBCASE("nearer facility wins at p=1") {
        Instance inst = toy_pair(10.0);
        SolveReport r = solve_qp_exact(inst, 1);
        CHECK(r.subset == std::vector<int>{0});
        CHECK(r.assignment.y == std::vector<int>{1, 0});
        CHECK(r.objective_s == doctest::Approx(0.060 + 1.0 / 90.0).epsilon(1e-9));
    }
    SUBCASE("matches the projected-gradient oracle over all subsets") {
        Instance inst = random_instance(5, 4, 21);
        SolveReport r = solve_qp_exact(inst, 2);
        double oracle = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 4; ++a) {
            for (int b = a + 1; b < 4; ++b) {
                double cap = inst.service_rps[a] + inst.service_rps[b];
                if (inst.total_arrival() >= cap * (1.0 - 1e-6)) continue;
                oracle = std::min(oracle,
                                  projected_gradient_oracle(inst, {a, b}, 4, 400, 5));
            }
        }
        CHECK(r.objective_s <= oracle + 1e-7);
        CHECK(r.objective_s >= oracle - 1e-5);
    }
    SUBCASE("monotone in p") {
        Instance inst = random_instance(6, 4, 33);
        double prev = std::numeric_limits<double>::infinity();
        for (int p = 1; p <= 4; ++p) {
            try {
                double obj = solve_qp_exact(inst, p).objective_s;
                CHECK(obj <= prev + 1e-9);
                prev = obj;
            } catch (const InfeasibleError&) {
                // Small p may not carry the demand; larger p must.
                CHECK(p < 4);
            }
        }
    }
    SUBCASE("infeasible when demand exceeds every subset") {
        Instance inst = toy_pair(150.0);
        CHECK_THROWS_AS(solve_qp_exact(inst, 1), InfeasibleError);  // 150 > 100
        SolveReport r = solve_qp_exact(inst, 2);                    // 150 < 200
        CHECK(r.objective_s > 0.0);
    }
}

TEST_CASE("report export writes objective, subset, and utilizations") {
    Instance inst = toy_pair(80.0);
    SolveReport r = solve_qp_exact(inst, 2);
    const std::string path = "ut_report.json";
    solve_report_to_json_file(r, inst, path);
    std::ifstream in(path);
    REQUIRE(in);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("objective_s") != std::string::npos);
    CHECK(text.find("utilization") != std::string::npos);
    CHECK(text.find("kkt_residual") != std::string::npos);
    std::remove(path.c_str());
}
