#include "support.hpp"

#include <meco/bcd.hpp>
#include <meco/error.hpp>
#include <meco/oracle.hpp>
#include <meco/ordered.hpp>
#include <meco/schedule.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace meco;
using namespace meco::ordered;
using namespace testsupport;

namespace {

TaskSpec unbounded(int id, double a, double d, double bits = 2e4, double cpb = 1000, double gain = 1e-3)
{
    TaskSpec t;
    t.id = id;
    t.arrival = a;
    t.deadline = d;
    t.data_bits = bits;
    t.cycles_per_bit = cpb;
    t.max_cpu_freq = kInf;
    t.vm_cap_cycles = kInf;
    t.channel_gain = gain;
    return t;
}

double bcd_objective(std::span<const TaskSpec> ts, const SystemParams& p)
{
    bcd::Options opt;
    opt.tol = 1e-10;
    opt.max_iters = 5000;
    return bcd::solve(ts, p, build_timeline(ts), opt).report.objective_joules;
}

// Objective of the expanded schedule, evaluated by the energy module.
double schedule_objective(const MasterSolution& sol, std::span<const TaskSpec> ts, const SystemParams& p)
{
    const auto tl = build_timeline(ts);
    return objective(ts, p, tl, schedule_to_allocation(expand_to_schedule(sol), ts, tl));
}

} // namespace

TEST_CASE("require_ordered_model")
{
    SystemParams p;
    std::vector<TaskSpec> ts{unbounded(1, 0, 1)};
    CHECK_NOTHROW(require_ordered_model(ts, p));
    p.monomial_order = 2.5;
    CHECK_THROWS_AS(require_ordered_model(ts, p), SolverMismatch);
    p = params_for(EnergyModel::Exponential);
    CHECK_THROWS_AS(require_ordered_model(ts, p), SolverMismatch);
    p = SystemParams{};
    ts[0].max_cpu_freq = 1e6; // T F / C = 1000 < L
    CHECK_THROWS_AS(require_ordered_model(ts, p), SolverMismatch);
    ts[0].max_cpu_freq = kInf;
    ts[0].vm_cap_cycles = 1e6;
    CHECK_THROWS_AS(require_ordered_model(ts, p), SolverMismatch);
    // Finite caps that never bind are fine.
    ts[0].vm_cap_cycles = 1e12;
    ts[0].max_cpu_freq = 1e12;
    CHECK_NOTHROW(require_ordered_model(ts, p));
}

TEST_CASE("optimal_order_identical")
{
    std::vector<TaskSpec> ts{unbounded(1, 0, 5), unbounded(2, 1, 6), unbounded(3, 2, 7)};
    CHECK(optimal_order_identical(ts) == std::vector<int>{0, 1, 2});
    CHECK(optimal_order_identical(std::span(ts).first(1)) == std::vector<int>{0});
    std::vector<TaskSpec> rev{unbounded(1, 0, 7), unbounded(2, 1, 6), unbounded(3, 2, 5)};
    CHECK_THROWS_AS(optimal_order_identical(rev), SolverMismatch);
}

TEST_CASE("fully tied instance: every order gives the same objective")
{
    SystemParams p;
    Rng rng(41);
    std::vector<TaskSpec> ts;
    for (int k = 0; k < 4; ++k) {
        ts.push_back(unbounded(k + 1, 0.0, 2.0, rng.uniform(1e3, 6e4), rng.uniform(500, 1500), rng.uniform(2e-4, 3e-3)));
    }
    CHECK(optimal_order_identical(ts) == std::vector<int>{0, 1, 2, 3});
    const double base = solve_master(ts, p).objective;
    std::vector<int> perm{0, 1, 2, 3};
    do {
        CHECK(rel_diff(solve_in_order(ts, p, perm).objective, base) <= 1e-9);
    } while (std::next_permutation(perm.begin(), perm.end()));

    // The oracle does not see orders at all; permuting its input changes nothing.
    auto shuffled = ts;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto o1 = oracle::oracle_solve(ts, p, build_timeline(ts));
    const auto o2 = oracle::oracle_solve(shuffled, p, build_timeline(shuffled));
    CHECK(rel_diff(o1.objective, o2.objective) <= 1e-6);
    CHECK(rel_diff(o1.objective, base) <= 1e-6);
}

TEST_CASE("slave_partition closed form")
{
    SystemParams p;
    const auto t = unbounded(1, 0.0, 0.8, 3e4, 900, 1.5e-3);
    const auto c = mobile_coeffs(t, p);

    auto s = slave_partition(c, t, 0.0);
    CHECK(s.bits == 0.0);
    CHECK(s.energy == doctest::Approx(c.b * std::pow(t.data_bits, 3) / std::pow(t.latency(), 2)).epsilon(1e-13));
    CHECK(s.energy == doctest::Approx(local_energy(t, p, 0.0)).epsilon(1e-13));

    const double unit = std::sqrt(c.a / c.b) * t.latency(); // theta = 1
    s = slave_partition(c, t, unit);
    CHECK(s.bits == doctest::Approx(t.data_bits / 2).epsilon(1e-13));

    CHECK_THROWS_AS(slave_partition(c, t, -1.0), InvalidInput);
}

TEST_CASE("slave_partition matches a scalar minimization")
{
    SystemParams p;
    Rng rng(42);
    for (int trial = 0; trial < 300; ++trial) {
        const auto t = unbounded(1, 0.0, rng.uniform(0.05, 3.0), rng.uniform(100, 6e4), rng.uniform(500, 1500),
                                 1e-3 * std::max(rng.exponential(1.0), 0.01));
        const auto c = mobile_coeffs(t, p);
        const double air = rng.uniform(1e-4, t.latency());
        const auto cost = [&](double x) { return local_energy(t, p, x) + offload_energy(t, p, x, air); };
        const double ref = golden_section(cost, 0.0, t.data_bits);
        const auto s = slave_partition(c, t, air);
        CHECK(std::abs(s.bits - ref) <= 1e-8 * t.data_bits);
        CHECK(s.energy == doctest::Approx(cost(s.bits)).epsilon(1e-12));
        CHECK(s.energy <= cost(ref) * (1 + 1e-12));
    }
}

TEST_CASE("reference_f")
{
    SystemParams p;
    auto t = unbounded(1, 0.0, 0.6, 2e4, 800, 2e-3);
    const auto c = mobile_coeffs(t, p);
    const double T = t.latency(), L = t.data_bits;
    CHECK(reference_f(c, t, 0.0)
          == doctest::Approx(std::pow(c.b, 1.5) * L * L * L / (std::sqrt(c.a) * T * T * T)).epsilon(1e-12));
    auto t2 = t;
    t2.data_bits *= 2;
    CHECK(reference_f(c, t2, 0.3) == doctest::Approx(8 * reference_f(c, t, 0.3)).epsilon(1e-13));

    // Strictly decreasing in x, increasing in b.
    double prev = reference_f(c, t, 0.0);
    for (double x = 0.05; x < 2.0; x += 0.05) {
        const double f = reference_f(c, t, x);
        CHECK(f < prev);
        prev = f;
        auto cb = c;
        cb.b *= 1.1;
        CHECK(reference_f(cb, t, x) > f);
    }

    // The derivative in a changes sign at a = 4 b x^2 / T^2.
    for (double x : {0.01, 0.1, 0.4, 1.0}) {
        const double turn = 4 * c.b * x * x / (T * T);
        const auto f_of_a = [&](double a) {
            auto ca = c;
            ca.a = a;
            return reference_f(ca, t, x);
        };
        const auto slope = [&](double a) {
            const double h = 1e-6 * a;
            return (f_of_a(a + h) - f_of_a(a - h)) / (2 * h);
        };
        CHECK(slope(0.9 * turn) > 0.0);
        CHECK(slope(1.1 * turn) < 0.0);
    }
}

TEST_CASE("solve_master: one mobile takes the whole window")
{
    SystemParams p;
    std::vector<TaskSpec> ts{unbounded(1, 0.5, 2.5)};
    const auto sol = solve_master(ts, p);
    CHECK(sol.durations[0] == 2.0);
    CHECK(sol.cumulative == std::vector<double>{0.5, 2.5});
    CHECK(sol.objective == doctest::Approx(slave_partition(mobile_coeffs(ts[0], p), ts[0], 2.0).energy));
    const auto sched = expand_to_schedule(sol);
    REQUIRE(sched.intervals[0].size() == 1);
    CHECK(sched.intervals[0][0].start == 0.5);
    CHECK(sched.intervals[0][0].end == 2.5);
}

TEST_CASE("solve_master: symmetric pair splits evenly")
{
    SystemParams p;
    std::vector<TaskSpec> ts{unbounded(1, 0, 3), unbounded(2, 0, 3)};
    const auto sol = solve_master(ts, p);
    CHECK(sol.durations[0] == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(sol.durations[1] == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(sol.effective_power[0] == doctest::Approx(sol.effective_power[1]).epsilon(1e-8));
}

TEST_CASE("solve_master: infeasible chain")
{
    SystemParams p;
    std::vector<TaskSpec> ts{unbounded(1, 0, 1), unbounded(2, 2, 3)};
    CHECK_THROWS_AS(solve_master(ts, p), InfeasibleChain);
}

TEST_CASE("solve_master agrees with bcd and the oracle; KKT and structure")
{
    SystemParams p;
    Rng rng(43);
    for (int trial = 0; trial < 40; ++trial) {
        const auto ts = identical_instance(rng, rng.integer(1, 5));
        const auto sol = solve_master(ts, p);
        CHECK(sol.kkt.max() <= 1e-6);
        // Full horizon.
        CHECK(sol.cumulative.front() == ts.front().arrival);
        CHECK(sol.cumulative.back() == ts.back().deadline);
        for (std::size_t k = 0; k < ts.size(); ++k) {
            CHECK(sol.cumulative[k] >= ts[k].arrival);
            CHECK(sol.cumulative[k + 1] <= ts[k].deadline);
            CHECK(sol.durations[k] >= 0.0);
            CHECK(sol.omega[k] >= 0.0);
            CHECK(sol.mu[k] >= 0.0);
            CHECK(sol.sigma[k] >= 0.0);
        }
        // Stationarity restated: 2 f_k = sum omega - sum mu - sigma.
        for (std::size_t k = 0; k < ts.size(); ++k) {
            double rhs = -sol.sigma[k];
            for (std::size_t i = k; i < ts.size(); ++i) rhs += sol.omega[i] - (i + 1 < ts.size() ? sol.mu[i] : 0.0);
            const double scale = 2 * *std::max_element(sol.effective_power.begin(), sol.effective_power.end());
            CHECK(std::abs(2 * sol.effective_power[k] - rhs) <= 1e-6 * scale);
        }
        CHECK(rel_diff(schedule_objective(sol, ts, p), sol.objective) <= 1e-10);
        CHECK(rel_diff(sol.objective, bcd_objective(ts, p)) <= 1e-3);
        const auto orc = oracle::oracle_solve(ts, p, build_timeline(ts));
        CHECK(rel_diff(sol.objective, orc.objective) <= 1e-3);
        CHECK(check_schedule(expand_to_schedule(sol), ts).ok);
    }
}

TEST_CASE("effective power: identical arrivals are nonincreasing")
{
    SystemParams p;
    Rng rng(44);
    for (int trial = 0; trial < 30; ++trial) {
        const int K = rng.integer(2, 5);
        std::vector<double> d;
        for (int k = 0; k < K; ++k) d.push_back(rng.uniform(0.2, 3.0));
        std::sort(d.begin(), d.end());
        std::vector<TaskSpec> ts;
        for (int k = 0; k < K; ++k) {
            ts.push_back(unbounded(k + 1, 0.0, d[k], rng.uniform(1e3, 6e4), rng.uniform(500, 1500), rng.uniform(2e-4, 3e-3)));
        }
        const auto sol = solve_master(ts, p);
        const auto rep = effective_power_report(sol, ts);
        CHECK(rep.identical_arrivals);
        CHECK(rep.monotone_ok);
        CHECK(rep.all_hold);
        for (std::size_t x = 1; x < rep.offloaders.size(); ++x) {
            const double p0 = sol.effective_power[rep.offloaders[x - 1]], p1 = sol.effective_power[rep.offloaders[x]];
            CHECK(p1 <= p0 * (1 + 1e-6));
        }
    }
}

TEST_CASE("effective power: identical deadlines are nondecreasing")
{
    SystemParams p;
    Rng rng(45);
    for (int trial = 0; trial < 30; ++trial) {
        const int K = rng.integer(2, 5);
        std::vector<double> a;
        for (int k = 0; k < K; ++k) a.push_back(rng.uniform(0.0, 2.5));
        std::sort(a.begin(), a.end());
        std::vector<TaskSpec> ts;
        for (int k = 0; k < K; ++k) {
            ts.push_back(unbounded(k + 1, a[k], 3.0, rng.uniform(1e3, 6e4), rng.uniform(500, 1500), rng.uniform(2e-4, 3e-3)));
        }
        const auto sol = solve_master(ts, p);
        const auto rep = effective_power_report(sol, ts);
        CHECK(rep.identical_deadlines);
        CHECK(rep.monotone_ok);
        CHECK(rep.all_hold);
        for (std::size_t x = 1; x < rep.offloaders.size(); ++x) {
            const double p0 = sol.effective_power[rep.offloaders[x - 1]], p1 = sol.effective_power[rep.offloaders[x]];
            CHECK(p1 >= p0 * (1 - 1e-6));
        }
    }
}

TEST_CASE("effective power: interior boundaries balance")
{
    SystemParams p;
    Rng rng(46);
    // Common window: the only active constraint is the full-horizon one.
    std::vector<TaskSpec> ts;
    for (int k = 0; k < 4; ++k) ts.push_back(unbounded(k + 1, 0.0, 2.0, rng.uniform(1e4, 6e4)));
    const auto sol = solve_master(ts, p);
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
        CHECK(sol.mu[k] == 0.0);
        CHECK(sol.omega[k] == 0.0);
    }
    const auto rep = effective_power_report(sol, ts);
    CHECK(rep.offloaders.size() == 4);
    for (const auto& pc : rep.pairs) {
        CHECK(pc.relation == PairRelation::Equal);
        CHECK(pc.holds);
        CHECK_FALSE(pc.skipped);
    }
    for (int k : rep.offloaders) {
        CHECK(sol.effective_power[k] == doctest::Approx(sol.effective_power[0]).epsilon(1e-6));
    }
}

TEST_CASE("effective power report flags a skipped mobile")
{
    MasterSolution sol;
    sol.order = {0, 1, 2};
    sol.durations = {1.0, 0.0, 1.0};
    sol.cumulative = {0.0, 1.0, 1.0, 2.0};
    sol.effective_power = {1.0, 5.0, 2.0};
    std::vector<TaskSpec> ts{unbounded(1, 0, 1.5), unbounded(2, 0.5, 1.8), unbounded(3, 0.8, 2)};
    const auto rep = effective_power_report(sol, ts);
    CHECK(rep.offloaders == std::vector<int>{0, 2});
    REQUIRE(rep.pairs.size() == 1);
    CHECK(rep.pairs[0].skipped);
}

TEST_CASE("two-user closed form: each case by construction")
{
    SystemParams p;
    // Mobile 1 much heavier: it keeps the channel until its deadline.
    std::vector<TaskSpec> heavy1{unbounded(1, 0.0, 1.0, 6e4, 1000, 1e-3), unbounded(2, 0.5, 2.0, 1e3, 1000, 1e-3)};
    auto s = solve_two_user(heavy1, p);
    CHECK(s.regime == TwoUserCase::FirstTakesAll);
    CHECK(s.t1 == 1.0);
    CHECK(s.t2 == 1.0);

    // Mobile 2 much heavier: mobile 1 stops when mobile 2 arrives.
    std::vector<TaskSpec> heavy2{unbounded(1, 0.0, 1.5, 1e3, 1000, 1e-3), unbounded(2, 0.5, 2.0, 6e4, 1000, 1e-3)};
    s = solve_two_user(heavy2, p);
    CHECK(s.regime == TwoUserCase::SecondTakesAll);
    CHECK(s.t1 == 0.5);
    CHECK(s.t2 == 1.5);

    std::vector<TaskSpec> even{unbounded(1, 0.0, 1.5, 2e4), unbounded(2, 0.5, 2.0, 2e4)};
    s = solve_two_user(even, p);
    REQUIRE(s.regime == TwoUserCase::Balanced);
    const auto c1 = mobile_coeffs(even[0], p), c2 = mobile_coeffs(even[1], p);
    CHECK(reference_f(c1, even[0], s.t1) == doctest::Approx(s.omega / 2).epsilon(1e-9));
    CHECK(reference_f(c2, even[1], s.t2) == doctest::Approx(s.omega / 2).epsilon(1e-9));
    CHECK(s.t1 + s.t2 == 2.0);

    CHECK_THROWS_AS(solve_two_user(std::span(even).first(1), p), InvalidInput);
    std::vector<TaskSpec> bad{unbounded(1, 0.0, 1.0), unbounded(2, 1.5, 2.0)};
    CHECK_THROWS_AS(solve_two_user(bad, p), InvalidInput);
}

TEST_CASE("two-user closed form matches the master solver")
{
    SystemParams p;
    Rng rng(47);
    int seen[3] = {0, 0, 0};
    for (int trial = 0; trial < 300; ++trial) {
        const double a2 = rng.uniform(0.05, 1.0);
        const double d1 = a2 + rng.uniform(0.05, 1.0);
        const double d2 = d1 + rng.uniform(0.05, 1.0);
        std::vector<TaskSpec> ts{
            unbounded(1, 0.0, d1, std::exp(rng.uniform(std::log(1e2), std::log(6e4))), rng.uniform(500, 1500),
                      rng.uniform(2e-4, 3e-3)),
            unbounded(2, a2, d2, std::exp(rng.uniform(std::log(1e2), std::log(6e4))), rng.uniform(500, 1500),
                      rng.uniform(2e-4, 3e-3))};
        const auto s = solve_two_user(ts, p);
        ++seen[static_cast<int>(s.regime)];
        const auto m = solve_master(ts, p);
        CHECK(std::abs(s.t1 - m.durations[0]) <= 1e-8 * d2);
        CHECK(std::abs(s.t2 - m.durations[1]) <= 1e-8 * d2);
    }
    CHECK(seen[0] > 10);
    CHECK(seen[1] > 10);
    CHECK(seen[2] > 10);
}

TEST_CASE("expand_to_schedule")
{
    SystemParams p;
    MasterSolution sol;
    sol.order = {0, 1, 2};
    sol.cumulative = {0.0, 1.0, 1.0, 2.5};
    sol.durations = {1.0, 0.0, 1.5};
    sol.bits = {100.0, 0.0, 50.0};
    std::vector<TaskSpec> ts{unbounded(1, 0, 1.2), unbounded(2, 0.5, 2.0), unbounded(3, 0.8, 2.5)};
    const auto sched = expand_to_schedule(sol);
    CHECK(sched.intervals[0].size() == 1);
    CHECK(sched.intervals[1].empty());
    CHECK(sched.order == std::vector<int>{0, 2});
    CHECK(check_schedule(sched, ts).ok);

    Rng rng(48);
    for (int trial = 0; trial < 20; ++trial) {
        const auto inst = identical_instance(rng, 5);
        const auto s = expand_to_schedule(solve_master(inst, p));
        CHECK(std::is_sorted(s.order.begin(), s.order.end()));
        CHECK(std::adjacent_find(s.order.begin(), s.order.end()) == s.order.end());
        CHECK(check_schedule(s, inst).ok);
    }
}

TEST_CASE("adjacent swaps never beat the arrival order")
{
    SystemParams p;
    Rng rng(49);
    int compared = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const int K = rng.integer(2, 5);
        const auto ts = identical_instance(rng, K);
        const double base = solve_master(ts, p).objective;
        for (int i = 0; i + 1 < K; ++i) {
            std::vector<int> order(static_cast<std::size_t>(K));
            std::iota(order.begin(), order.end(), 0);
            std::swap(order[i], order[i + 1]);
            try {
                const double swapped = solve_in_order(ts, p, order).objective;
                CHECK(swapped >= base * (1 - 1e-9));
                ++compared;
            } catch (const InfeasibleChain&) {
                // The swapped order has no feasible placement.
            }
        }
    }
    CHECK(compared > 50);
}
