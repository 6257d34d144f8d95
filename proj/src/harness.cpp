#include <meco/harness.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

namespace meco::harness {

namespace {

// Uniform on [0, 1) from the top 53 bits, so the stream does not depend on
// the standard library's distribution implementations.
class Draws
{
public:
    explicit Draws(std::uint64_t seed) : rng_(seed) {}

    double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    double exponential(double mean) { return -mean * std::log1p(-unit()); }
    std::size_t index(std::size_t n)
    {
        return std::min(static_cast<std::size_t>(unit() * static_cast<double>(n)), n - 1);
    }

private:
    std::mt19937_64 rng_;
};

double stderr_of(std::span<const double> v, double mean)
{
    if (v.size() < 2) return 0.0;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
    const double var = pairwise_sum(sq) / static_cast<double>(v.size() - 1);
    return std::sqrt(var / static_cast<double>(v.size()));
}

} // namespace

const char* to_string(ScenarioRegime r) noexcept
{
    switch (r) {
    case ScenarioRegime::General: return "general";
    case ScenarioRegime::Identical: return "identical";
    case ScenarioRegime::Reverse: return "reverse";
    }
    return "?";
}

std::optional<ScenarioRegime> regime_from_string(std::string_view s)
{
    for (auto r : {ScenarioRegime::General, ScenarioRegime::Identical, ScenarioRegime::Reverse}) {
        if (s == to_string(r)) return r;
    }
    return std::nullopt;
}

const char* to_string(Policy p) noexcept
{
    switch (p) {
    case Policy::EqualTimeDivision: return "equal_time_division";
    case Policy::OneRound: return "one_round";
    case Policy::TwoRound: return "two_round";
    case Policy::Optimal: return "optimal";
    }
    return "?";
}

std::optional<Policy> policy_from_string(std::string_view s)
{
    for (auto p : kAllPolicies) {
        if (s == to_string(p)) return p;
    }
    return std::nullopt;
}

const char* to_string(SweepAxis a) noexcept
{
    switch (a) {
    case SweepAxis::MonomialOrder: return "monomial_order";
    case SweepAxis::ExpectedLatency: return "expected_latency";
    case SweepAxis::ExpectedDataSize: return "expected_data_size";
    case SweepAxis::TotalDuration: return "total_duration";
    }
    return "?";
}

std::optional<SweepAxis> axis_from_string(std::string_view s)
{
    for (auto a : {SweepAxis::MonomialOrder, SweepAxis::ExpectedLatency,
                   SweepAxis::ExpectedDataSize, SweepAxis::TotalDuration}) {
        if (s == to_string(a)) return a;
    }
    return std::nullopt;
}

void check_config(const ScenarioConfig& cfg)
{
    auto fail = [](const std::string& msg) { throw InvalidInput("scenario config: " + msg); };
    if (cfg.mobiles < 1) fail("mobiles must be >= 1");
    if (!(cfg.window_s > 0.0) || !std::isfinite(cfg.window_s)) fail("window_s must be > 0");
    if (cfg.regime == ScenarioRegime::General && !(cfg.expected_latency_s > 0.0)) {
        fail("expected_latency_s must be > 0");
    }
    if (!(cfg.data_min_kb >= 0.0 && cfg.data_min_kb <= cfg.data_max_kb)) fail("need 0 <= data_min_kb <= data_max_kb");
    if (!(cfg.kb_bits > 0.0)) fail("kb_bits must be > 0");
    if (!(cfg.cycles_min > 0.0 && cfg.cycles_min <= cfg.cycles_max)) fail("need 0 < cycles_min <= cycles_max");
    if (cfg.cpu_freqs_hz.empty()) fail("cpu_freqs_hz is empty");
    for (double f : cfg.cpu_freqs_hz) {
        if (!(f > 0.0)) fail("cpu frequencies must be > 0");
    }
    if (!(cfg.vm_cap_min >= 0.0 && cfg.vm_cap_min <= cfg.vm_cap_max)) fail("need 0 <= vm_cap_min <= vm_cap_max");
    if (!(cfg.mean_channel_gain > 0.0)) fail("mean_channel_gain must be > 0");
    check_params(cfg.params);
}

std::uint64_t sub_seed(std::uint64_t master, std::uint64_t index) noexcept
{
    std::uint64_t z = master + (index + 1) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Scenario generate_scenario(const ScenarioConfig& cfg)
{
    check_config(cfg);
    Draws rng(cfg.seed);
    const auto K = static_cast<std::size_t>(cfg.mobiles);
    std::vector<double> arrivals(K), deadlines(K);
    if (cfg.regime == ScenarioRegime::General) {
        for (std::size_t k = 0; k < K; ++k) {
            arrivals[k] = rng.uniform(0.0, cfg.window_s);
            double latency = rng.exponential(cfg.expected_latency_s);
            // A zero draw would make the task invalid; it has probability 2^-53.
            if (!(latency > 0.0)) latency = cfg.expected_latency_s * 0x1.0p-53;
            deadlines[k] = arrivals[k] + latency;
        }
    } else {
        // 2K instants: 0, the sorted interior draws, and T.
        std::vector<double> s(2 * K);
        s.front() = 0.0;
        s.back() = cfg.window_s;
        for (std::size_t i = 1; i + 1 < s.size(); ++i) s[i] = rng.uniform(0.0, cfg.window_s);
        std::sort(s.begin() + 1, s.end() - 1);
        for (std::size_t k = 0; k < K; ++k) {
            arrivals[k] = s[k];
            deadlines[k] = cfg.regime == ScenarioRegime::Identical ? s[K + k] : s[2 * K - 1 - k];
        }
    }
    Scenario sc;
    sc.params = cfg.params;
    sc.tasks.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        auto& t = sc.tasks[k];
        t.id = static_cast<int>(k) + 1;
        t.arrival = arrivals[k];
        t.deadline = deadlines[k];
        t.data_bits = rng.uniform(cfg.data_min_kb, cfg.data_max_kb) * cfg.kb_bits;
        t.cycles_per_bit = rng.uniform(cfg.cycles_min, cfg.cycles_max);
        t.max_cpu_freq = cfg.cpu_freqs_hz[rng.index(cfg.cpu_freqs_hz.size())];
        t.vm_cap_cycles = rng.uniform(cfg.vm_cap_min, cfg.vm_cap_max);
        t.channel_gain = rng.exponential(cfg.mean_channel_gain);
        if (!(t.channel_gain > 0.0)) t.channel_gain = cfg.mean_channel_gain * 0x1.0p-53;
    }
    return sc;
}

BaselineResult run_baseline(Policy policy,
                            std::span<const TaskSpec> tasks,
                            const SystemParams& params,
                            const bcd::Options& options)
{
    const Timeline tl = build_timeline(tasks);
    bcd::Result r;
    switch (policy) {
    case Policy::EqualTimeDivision: r = bcd::run_rounds(tasks, params, tl, 0); break;
    case Policy::OneRound: r = bcd::run_rounds(tasks, params, tl, 1); break;
    case Policy::TwoRound: r = bcd::run_rounds(tasks, params, tl, 2); break;
    case Policy::Optimal:
        try {
            r = bcd::solve(tasks, params, tl, options);
        } catch (const bcd::NonConvergence& e) {
            r = e.best();
        }
        break;
    }
    return {std::move(r.alloc), r.report.objective_joules};
}

ScenarioConfig apply_axis(const ScenarioConfig& base, SweepAxis axis, double value)
{
    ScenarioConfig cfg = base;
    switch (axis) {
    case SweepAxis::MonomialOrder: cfg.params.monomial_order = value; break;
    case SweepAxis::ExpectedLatency: cfg.expected_latency_s = value; break;
    case SweepAxis::ExpectedDataSize:
        cfg.data_min_kb = 0.0;
        cfg.data_max_kb = 2.0 * value;
        break;
    case SweepAxis::TotalDuration: cfg.window_s = value; break;
    }
    return cfg;
}

std::vector<ExperimentRow> run_sweep(const SweepSpec& spec)
{
    if (spec.values.empty()) throw InvalidInput("empty sweep");
    if (spec.policies.empty()) throw InvalidInput("sweep has no policies");
    if (spec.realizations < 1) throw InvalidInput("realizations must be >= 1");
    for (double v : spec.values) check_config(apply_axis(spec.base, spec.axis, v));

    const auto R = static_cast<std::size_t>(spec.realizations);
    const std::size_t P = spec.policies.size();
    unsigned jobs = spec.jobs ? spec.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, R));

    std::vector<ExperimentRow> rows;
    for (double value : spec.values) {
        ScenarioConfig cfg = apply_axis(spec.base, spec.axis, value);
        // Slot [r * P + p]; NaN marks a failure.
        std::vector<double> energy(R * P, std::nan("")), seconds(R * P, 0.0);
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t r; (r = next.fetch_add(1)) < R;) {
                ScenarioConfig c = cfg;
                c.seed = sub_seed(spec.base.seed, r);
                const Scenario sc = generate_scenario(c);
                if (!validate_tasks(sc.tasks, sc.params).all_feasible()) continue;
                for (std::size_t p = 0; p < P; ++p) {
                    const auto t0 = std::chrono::steady_clock::now();
                    try {
                        const auto res = run_baseline(spec.policies[p], sc.tasks, sc.params, spec.solver);
                        if (std::isfinite(res.objective)) energy[r * P + p] = res.objective;
                    } catch (const Error&) {
                    }
                    seconds[r * P + p] =
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                }
            }
        };
        std::vector<std::thread> pool;
        for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
        worker();
        for (auto& th : pool) th.join();

        for (std::size_t p = 0; p < P; ++p) {
            std::vector<double> ok, times;
            for (std::size_t r = 0; r < R; ++r) {
                if (std::isnan(energy[r * P + p])) continue;
                ok.push_back(energy[r * P + p]);
                times.push_back(seconds[r * P + p]);
            }
            ExperimentRow row;
            row.sweep_var = to_string(spec.axis);
            row.value = value;
            row.policy = spec.policies[p];
            row.realizations = static_cast<int>(ok.size());
            row.failures = static_cast<int>(R - ok.size());
            if (!ok.empty()) {
                const auto n = static_cast<double>(ok.size());
                row.mean_energy_j = pairwise_sum(ok) / n;
                row.stderr_energy_j = stderr_of(ok, row.mean_energy_j);
                row.mean_time_s = pairwise_sum(times) / n;
            } else {
                row.mean_energy_j = std::nan("");
                row.stderr_energy_j = std::nan("");
            }
            rows.push_back(row);
        }
    }
    return rows;
}

void write_csv(std::ostream& os, std::span<const ExperimentRow> rows)
{
    os << "sweep_var,value,policy,mean_energy_j,stderr_energy_j,mean_time_s,realizations,failures\n";
    std::ostringstream line;
    line << std::setprecision(17);
    for (const auto& r : rows) {
        line.str("");
        line << r.sweep_var << ',' << r.value << ',' << to_string(r.policy) << ',' << r.mean_energy_j
             << ',' << r.stderr_energy_j << ',' << r.mean_time_s << ',' << r.realizations << ','
             << r.failures << '\n';
        os << line.str();
    }
}

double pairwise_sum(std::span<const double> values) noexcept
{
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

} // namespace meco::harness
