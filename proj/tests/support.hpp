#pragma once

// Instance generators and small numeric helpers shared by the tests and the
// acceptance binary.

#include <meco/energy.hpp>
#include <meco/timeline.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace testsupport {

using meco::SystemParams;
using meco::TaskSpec;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class Rng
{
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
    double exponential(double mean) { return std::exponential_distribution<double>(1.0 / mean)(gen_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

inline SystemParams params_for(meco::EnergyModel model)
{
    SystemParams p;
    p.model = model;
    return p;
}

// Mobile parameters in the ranges of the simulation setup, with finite caps.
inline TaskSpec random_mobile(Rng& rng, int id, double arrival, double deadline)
{
    TaskSpec t;
    t.id = id;
    t.arrival = arrival;
    t.deadline = deadline;
    t.data_bits = rng.uniform(0.0, 6e4);
    t.cycles_per_bit = rng.uniform(500.0, 1500.0);
    t.max_cpu_freq = 1e8 * rng.integer(1, 10);
    t.vm_cap_cycles = rng.uniform(0.0, 4e9);
    t.channel_gain = 1e-3 * std::max(rng.exponential(1.0), 0.01);
    return t;
}

// General-order instance; redrawn until every mobile is feasible.
inline std::vector<TaskSpec> general_instance(Rng& rng, int K, const SystemParams& params)
{
    for (;;) {
        std::vector<TaskSpec> ts;
        for (int k = 0; k < K; ++k) {
            const double a = rng.uniform(0.0, 3.0);
            ts.push_back(random_mobile(rng, k + 1, a, a + 0.1 + rng.exponential(0.6)));
        }
        if (meco::validate_tasks(ts, params).all_feasible()) return ts;
    }
}

// 2K sorted instants on [0, T] with both ends pinned.
inline std::vector<double> sorted_instants(Rng& rng, int K, double T)
{
    std::vector<double> s(2 * static_cast<std::size_t>(K));
    s.front() = 0.0;
    s.back() = T;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) s[i] = rng.uniform(0.0, T);
    std::sort(s.begin() + 1, s.end() - 1);
    return s;
}

// Unbounded CPU and VM capacities, as the ordered solvers require.
inline void unbounded_caps(std::vector<TaskSpec>& ts)
{
    for (auto& t : ts) {
        t.max_cpu_freq = kInf;
        t.vm_cap_cycles = kInf;
    }
}

inline std::vector<TaskSpec> identical_instance(Rng& rng, int K, double T = 3.0)
{
    const auto s = sorted_instants(rng, K, T);
    std::vector<TaskSpec> ts;
    for (int k = 0; k < K; ++k) ts.push_back(random_mobile(rng, k + 1, s[k], s[K + k]));
    unbounded_caps(ts);
    return ts;
}

inline std::vector<TaskSpec> reverse_instance(Rng& rng, int K, double T = 3.0)
{
    const auto s = sorted_instants(rng, K, T);
    std::vector<TaskSpec> ts;
    for (int k = 0; k < K; ++k) ts.push_back(random_mobile(rng, k + 1, s[k], s[2 * K - 1 - k]));
    unbounded_caps(ts);
    return ts;
}

inline double rel_diff(double a, double b)
{
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

// Golden-section minimum of a unimodal function on [lo, hi].
inline double golden_section(const std::function<double(double)>& f, double lo, double hi, int iters = 300)
{
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iters && b - a > 1e-15 * std::max(1.0, std::abs(b)); ++i) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

} // namespace testsupport
