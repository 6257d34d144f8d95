#include "support.hpp"

#include <meco/error.hpp>
#include <meco/harness.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

using namespace meco;
using namespace meco::harness;
using testsupport::rel_diff;

namespace {

bool same_tasks(std::span<const TaskSpec> a, std::span<const TaskSpec> b)
{
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const auto &x = a[k], &y = b[k];
        if (x.id != y.id || x.arrival != y.arrival || x.deadline != y.deadline || x.data_bits != y.data_bits
            || x.cycles_per_bit != y.cycles_per_bit || x.max_cpu_freq != y.max_cpu_freq
            || x.vm_cap_cycles != y.vm_cap_cycles || x.channel_gain != y.channel_gain) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("names round-trip")
{
    for (auto r : {ScenarioRegime::General, ScenarioRegime::Identical, ScenarioRegime::Reverse}) {
        CHECK(regime_from_string(to_string(r)) == r);
    }
    for (auto p : kAllPolicies) CHECK(policy_from_string(to_string(p)) == p);
    for (auto a : {SweepAxis::MonomialOrder, SweepAxis::ExpectedLatency, SweepAxis::ExpectedDataSize,
                   SweepAxis::TotalDuration}) {
        CHECK(axis_from_string(to_string(a)) == a);
    }
    CHECK_FALSE(regime_from_string("Identical").has_value());
    CHECK_FALSE(policy_from_string("best").has_value());
    CHECK_FALSE(axis_from_string("").has_value());
}

TEST_CASE("generate_scenario is deterministic in the seed")
{
    ScenarioConfig cfg;
    cfg.seed = 99;
    const auto a = generate_scenario(cfg);
    const auto b = generate_scenario(cfg);
    CHECK(same_tasks(a.tasks, b.tasks));
    cfg.seed = 100;
    CHECK_FALSE(same_tasks(a.tasks, generate_scenario(cfg).tasks));
}

TEST_CASE("default scenario follows the simulation setup")
{
    ScenarioConfig cfg;
    CHECK(cfg.mobiles == 30);
    CHECK(cfg.window_s == 3.0);
    CHECK(cfg.expected_latency_s == 0.6);
    CHECK(cfg.data_max_kb * cfg.kb_bits == 6e4);
    CHECK(cfg.params.monomial_order == 3.0);

    const std::set<double> freqs(cfg.cpu_freqs_hz.begin(), cfg.cpu_freqs_hz.end());
    CHECK(freqs.size() == 10);
    CHECK(*freqs.begin() == 1e8);
    CHECK(*freqs.rbegin() == 1e9);

    double latency = 0.0, gain = 0.0, arrival = 0.0, bits = 0.0;
    std::map<double, int> freq_count;
    int n = 0;
    for (std::uint64_t seed = 1; seed <= 300; ++seed) {
        cfg.seed = seed;
        const auto sc = generate_scenario(cfg);
        REQUIRE(sc.tasks.size() == 30);
        for (const auto& t : sc.tasks) {
            CHECK(t.arrival >= 0.0);
            CHECK(t.arrival < 3.0);
            CHECK(t.deadline > t.arrival);
            CHECK(t.data_bits >= 0.0);
            CHECK(t.data_bits < 6e4);
            CHECK(t.cycles_per_bit >= 500.0);
            CHECK(t.cycles_per_bit < 1500.0);
            CHECK(freqs.count(t.max_cpu_freq) == 1);
            CHECK(t.vm_cap_cycles >= 0.0);
            CHECK(t.vm_cap_cycles < 4e9);
            CHECK(t.channel_gain > 0.0);
            latency += t.latency();
            gain += t.channel_gain;
            arrival += t.arrival;
            bits += t.data_bits;
            ++freq_count[t.max_cpu_freq];
            ++n;
        }
    }
    // 9000 draws: standard errors are about 1% of the mean for the
    // exponentials and 0.6% for the uniforms.
    CHECK(latency / n == doctest::Approx(0.6).epsilon(0.05));
    CHECK(gain / n == doctest::Approx(1e-3).epsilon(0.05));
    CHECK(arrival / n == doctest::Approx(1.5).epsilon(0.03));
    CHECK(bits / n == doctest::Approx(3e4).epsilon(0.03));
    for (const auto& [f, c] : freq_count) CHECK(c == doctest::Approx(n / 10.0).epsilon(0.15));
}

TEST_CASE("identical and reverse regimes use sorted instants on [0, T]")
{
    for (auto regime : {ScenarioRegime::Identical, ScenarioRegime::Reverse}) {
        ScenarioConfig cfg;
        cfg.regime = regime;
        cfg.mobiles = 7;
        cfg.window_s = 4.0;
        for (std::uint64_t seed = 1; seed <= 50; ++seed) {
            cfg.seed = seed;
            const auto sc = generate_scenario(cfg);
            const auto& ts = sc.tasks;
            std::vector<double> instants;
            for (const auto& t : ts) instants.push_back(t.arrival);
            for (const auto& t : ts) instants.push_back(t.deadline);
            CHECK(ts.front().arrival == 0.0);
            for (std::size_t k = 1; k < ts.size(); ++k) CHECK(ts[k].arrival >= ts[k - 1].arrival);
            // Every arrival precedes every deadline.
            const double last_arrival = ts.back().arrival;
            for (const auto& t : ts) CHECK(t.deadline >= last_arrival);
            if (regime == ScenarioRegime::Identical) {
                CHECK(classify_order(ts) == OrderClass::Identical);
                CHECK(ts.back().deadline == 4.0);
            } else {
                CHECK(classify_order(ts) == OrderClass::Reverse);
                CHECK(ts.front().deadline == 4.0);
            }
        }
    }
}

TEST_CASE("check_config rejects bad ranges")
{
    const ScenarioConfig good;
    CHECK_NOTHROW(check_config(good));
    auto bad = good;
    bad.mobiles = 0;
    CHECK_THROWS_AS(check_config(bad), InvalidInput);
    bad = good;
    bad.data_min_kb = 10;
    bad.data_max_kb = 5;
    CHECK_THROWS_AS(check_config(bad), InvalidInput);
    bad = good;
    bad.cpu_freqs_hz.clear();
    CHECK_THROWS_AS(check_config(bad), InvalidInput);
    bad = good;
    bad.expected_latency_s = 0.0;
    CHECK_THROWS_AS(check_config(bad), InvalidInput);
    bad.regime = ScenarioRegime::Identical; // latency unused there
    CHECK_NOTHROW(check_config(bad));
    bad = good;
    bad.params.monomial_order = 0.5;
    CHECK_THROWS_AS(generate_scenario(bad), InvalidInput);
}

TEST_CASE("sub_seed")
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t r = 0; r < 10000; ++r) seen.insert(sub_seed(7, r));
    CHECK(seen.size() == 10000);
    CHECK(sub_seed(7, 3) == sub_seed(7, 3));
    CHECK(sub_seed(7, 3) != sub_seed(8, 3));
}

TEST_CASE("apply_axis")
{
    const ScenarioConfig base;
    CHECK(apply_axis(base, SweepAxis::MonomialOrder, 2.5).params.monomial_order == 2.5);
    CHECK(apply_axis(base, SweepAxis::ExpectedLatency, 0.9).expected_latency_s == 0.9);
    const auto d = apply_axis(base, SweepAxis::ExpectedDataSize, 20);
    CHECK(d.data_min_kb == 0.0);
    CHECK(d.data_max_kb == 40.0);
    CHECK(apply_axis(base, SweepAxis::TotalDuration, 5).window_s == 5.0);
}

TEST_CASE("baseline chain holds instance by instance")
{
    for (auto regime : {ScenarioRegime::General, ScenarioRegime::Identical, ScenarioRegime::Reverse}) {
        ScenarioConfig cfg;
        cfg.mobiles = 10;
        cfg.regime = regime;
        int checked = 0;
        for (std::uint64_t seed = 1; seed <= 40; ++seed) {
            cfg.seed = seed;
            const auto sc = generate_scenario(cfg);
            if (!validate_tasks(sc.tasks, sc.params).all_feasible()) continue;
            double e[4];
            for (int p = 0; p < 4; ++p) e[p] = run_baseline(kAllPolicies[p], sc.tasks, sc.params).objective;
            CHECK(e[3] <= e[2]);
            CHECK(e[2] <= e[1]);
            CHECK(e[1] <= e[0] + 1e-9);
            ++checked;
        }
        CHECK(checked > 10);
    }
}

TEST_CASE("optimal falls back to the best iterate when the budget runs out")
{
    ScenarioConfig cfg;
    cfg.mobiles = 8;
    cfg.regime = ScenarioRegime::Identical;
    const auto sc = generate_scenario(cfg);
    bcd::Options opt;
    opt.max_iters = 1;
    const auto r = run_baseline(Policy::Optimal, sc.tasks, sc.params, opt);
    const auto one = run_baseline(Policy::OneRound, sc.tasks, sc.params);
    CHECK(r.objective == one.objective);
}

TEST_CASE("run_sweep: layout, counts and determinism")
{
    SweepSpec spec;
    spec.base.mobiles = 6;
    spec.base.seed = 5;
    spec.axis = SweepAxis::ExpectedLatency;
    spec.values = {0.3, 0.9};
    spec.realizations = 12;
    spec.jobs = 1;
    const auto rows = run_sweep(spec);
    REQUIRE(rows.size() == 8);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].value == spec.values[i / 4]);
        CHECK(rows[i].policy == kAllPolicies[i % 4]);
        CHECK(rows[i].sweep_var == "expected_latency");
        CHECK(rows[i].realizations + rows[i].failures == 12);
        CHECK(rows[i].mean_time_s >= 0.0);
    }

    spec.jobs = 3;
    const auto threaded = run_sweep(spec);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(threaded[i].mean_energy_j == rows[i].mean_energy_j);
        CHECK(threaded[i].stderr_energy_j == rows[i].stderr_energy_j);
        CHECK(threaded[i].realizations == rows[i].realizations);
    }

    // The sweep's first realization is the scenario generated from sub_seed(seed, 0).
    SweepSpec single = spec;
    single.values = {0.3};
    single.realizations = 1;
    single.policies = {Policy::Optimal};
    auto cfg = apply_axis(spec.base, spec.axis, 0.3);
    cfg.seed = sub_seed(spec.base.seed, 0);
    const auto sc = generate_scenario(cfg);
    const auto one = run_sweep(single);
    if (validate_tasks(sc.tasks, sc.params).all_feasible()) {
        CHECK(one[0].mean_energy_j == run_baseline(Policy::Optimal, sc.tasks, sc.params).objective);
    } else {
        CHECK(one[0].failures == 1);
    }
}

TEST_CASE("run_sweep counts infeasible draws as failures")
{
    SweepSpec spec;
    spec.base.mobiles = 4;
    spec.base.cpu_freqs_hz = {1.0};       // nothing computes locally
    spec.base.vm_cap_max = 1.0;           // and nothing fits in the cloud
    spec.base.data_min_kb = 1.0;
    spec.values = {0.6};
    spec.realizations = 5;
    spec.policies = {Policy::Optimal};
    spec.jobs = 1;
    const auto rows = run_sweep(spec);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].realizations == 0);
    CHECK(rows[0].failures == 5);
    CHECK(std::isnan(rows[0].mean_energy_j));
}

TEST_CASE("run_sweep rejects empty specs")
{
    SweepSpec spec;
    spec.values = {};
    CHECK_THROWS_WITH_AS(run_sweep(spec), "empty sweep", InvalidInput);
    spec.values = {0.5};
    spec.policies.clear();
    CHECK_THROWS_AS(run_sweep(spec), InvalidInput);
    spec.policies = {Policy::Optimal};
    spec.realizations = 0;
    CHECK_THROWS_AS(run_sweep(spec), InvalidInput);
}

TEST_CASE("reverse windows cost more than identical ones")
{
    SweepSpec spec;
    spec.base.mobiles = 10;
    spec.base.seed = 11;
    spec.axis = SweepAxis::TotalDuration;
    spec.values = {3.0};
    spec.realizations = 40;
    spec.policies = {Policy::Optimal};
    spec.base.regime = ScenarioRegime::Identical;
    const auto ident = run_sweep(spec);
    spec.base.regime = ScenarioRegime::Reverse;
    const auto rev = run_sweep(spec);
    CHECK(rev[0].mean_energy_j > ident[0].mean_energy_j);
}

TEST_CASE("write_csv")
{
    std::vector<ExperimentRow> rows(2);
    rows[0].sweep_var = "monomial_order";
    rows[0].value = 2.5;
    rows[0].policy = Policy::TwoRound;
    rows[0].mean_energy_j = 0.1;
    rows[0].stderr_energy_j = 1e-3;
    rows[0].mean_time_s = 2e-4;
    rows[0].realizations = 90;
    rows[0].failures = 10;
    rows[1] = rows[0];
    rows[1].policy = Policy::Optimal;
    std::ostringstream os;
    write_csv(os, rows);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "sweep_var,value,policy,mean_energy_j,stderr_energy_j,mean_time_s,realizations,failures");
    std::getline(in, line);
    CHECK(line.rfind("monomial_order,2.5,two_round,", 0) == 0);
    CHECK(line.substr(line.size() - 6) == ",90,10");
    // Full precision: the mean parses back exactly.
    const auto c1 = line.find(',', line.find("two_round")) + 1;
    CHECK(std::stod(line.substr(c1)) == 0.1);
    std::getline(in, line);
    CHECK(line.find(",optimal,") != std::string::npos);
    CHECK_FALSE(std::getline(in, line));
}

TEST_CASE("pairwise_sum")
{
    CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
    CHECK(pairwise_sum(std::vector<double>{1.5}) == 1.5);
    std::vector<double> v(1 << 20, 0.1);
    const double s = pairwise_sum(v);
    CHECK(rel_diff(s, 0.1 * static_cast<double>(v.size())) <= 1e-14);
    testsupport::Rng rng(71);
    std::vector<double> w(1000);
    for (auto& x : w) x = rng.uniform(-1.0, 1.0);
    long double exact = 0.0L;
    for (double x : w) exact += x;
    CHECK(std::abs(pairwise_sum(w) - static_cast<double>(exact)) <= 1e-13);
}
