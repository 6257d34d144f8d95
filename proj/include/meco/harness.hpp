#pragma once

#include <meco/bcd.hpp>
#include <meco/energy.hpp>
#include <meco/timeline.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Random scenario generation, baseline policies and parameter sweeps.
namespace meco::harness {

enum class ScenarioRegime { General, Identical, Reverse };

const char* to_string(ScenarioRegime r) noexcept;
std::optional<ScenarioRegime> regime_from_string(std::string_view s);

struct ScenarioConfig
{
    int mobiles = 30;
    // Arrival window [0, window_s] for the general regime; total duration T
    // for the identical and reverse regimes.
    double window_s = 3.0;
    double expected_latency_s = 0.6; // general regime only
    double data_min_kb = 0.0;
    double data_max_kb = 60.0;
    double kb_bits = 1e3;            // bits per KB; 8e3 for byte-based KB
    double cycles_min = 500.0;
    double cycles_max = 1500.0;
    std::vector<double> cpu_freqs_hz = {1e8, 2e8, 3e8, 4e8, 5e8, 6e8, 7e8, 8e8, 9e8, 1e9};
    double vm_cap_min = 0.0;
    double vm_cap_max = 4e9;
    double mean_channel_gain = 1e-3; // Rayleigh fading: exponential power gain
    SystemParams params;
    ScenarioRegime regime = ScenarioRegime::General;
    std::uint64_t seed = 1;
};

/// Throws InvalidInput on empty ranges or nonpositive scales.
void check_config(const ScenarioConfig& cfg);

struct Scenario
{
    std::vector<TaskSpec> tasks;
    SystemParams params;
};

/// Deterministic in cfg (including the seed). Infeasible draws are returned
/// as they are.
Scenario generate_scenario(const ScenarioConfig& cfg);

/// SplitMix64 output for (master, index); used to give every realization its
/// own stream.
std::uint64_t sub_seed(std::uint64_t master, std::uint64_t index) noexcept;

enum class Policy { EqualTimeDivision, OneRound, TwoRound, Optimal };

const char* to_string(Policy p) noexcept;
std::optional<Policy> policy_from_string(std::string_view s);
inline constexpr Policy kAllPolicies[] = {Policy::EqualTimeDivision, Policy::OneRound,
                                          Policy::TwoRound, Policy::Optimal};

struct BaselineResult
{
    Allocation alloc;
    double objective = 0.0;
};

/// Runs one policy. Optimal uses block coordinate descent to convergence and
/// returns its best iterate if the round budget runs out.
BaselineResult run_baseline(Policy policy,
                            std::span<const TaskSpec> tasks,
                            const SystemParams& params,
                            const bcd::Options& options = {});

enum class SweepAxis { MonomialOrder, ExpectedLatency, ExpectedDataSize, TotalDuration };

const char* to_string(SweepAxis a) noexcept;
std::optional<SweepAxis> axis_from_string(std::string_view s);

/// Copy of `base` with the swept quantity set to `value`. The data-size axis
/// is the mean in KB, so sizes are drawn from [0, 2 value].
ScenarioConfig apply_axis(const ScenarioConfig& base, SweepAxis axis, double value);

struct SweepSpec
{
    ScenarioConfig base;
    SweepAxis axis = SweepAxis::ExpectedLatency;
    std::vector<double> values;
    std::vector<Policy> policies = {std::begin(kAllPolicies), std::end(kAllPolicies)};
    int realizations = 1000;
    unsigned jobs = 0; // 0: hardware concurrency
    bcd::Options solver;
};

struct ExperimentRow
{
    std::string sweep_var;
    double value = 0.0;
    Policy policy = Policy::Optimal;
    double mean_energy_j = 0.0;
    double stderr_energy_j = 0.0;
    double mean_time_s = 0.0;
    int realizations = 0; // successful realizations
    int failures = 0;     // infeasible draws and solver errors
};

/// One row per (value, policy) in that order. Realization r uses the scenario
/// seeded by sub_seed(base.seed, r) at every sweep value, so sweep points
/// share their random draws.
std::vector<ExperimentRow> run_sweep(const SweepSpec& spec);

void write_csv(std::ostream& os, std::span<const ExperimentRow> rows);

/// Pairwise (cascade) summation.
double pairwise_sum(std::span<const double> values) noexcept;

} // namespace meco::harness
