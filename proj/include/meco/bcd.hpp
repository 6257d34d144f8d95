#pragma once

#include <meco/energy.hpp>
#include <meco/error.hpp>
#include <meco/timeline.hpp>

#include <optional>
#include <span>
#include <vector>

namespace meco::bcd {

enum class Regime { Interior, MobileConstrainedMin, CloudConstrainedMax };

const char* to_string(Regime r) noexcept;

/// Optimal bits of one mobile over its offloading epochs, given durations.
struct PartitionSolution
{
    std::vector<double> bits;         // aligned with the durations passed in
    double dual_root = 0.0;           // xi*, root of U(xi) = (L - sum h(xi))^2 - xi
    double unconstrained_total = 0.0; // sum h(xi*) before clamping to [r_min, r_max]
    Regime regime = Regime::Interior;
};

/// Monomial model. `durations` are the strictly positive airtimes of the
/// mobile's offloading epochs.
PartitionSolution partition_data_monomial(const MobileCoeffs& coeffs,
                                          const TaskSpec& task,
                                          const SystemParams& params,
                                          std::span<const double> durations);

/// Exponential (Shannon) model; offloads nothing unless the marginal local
/// energy at zero offload exceeds the marginal transmit energy.
PartitionSolution partition_data_exponential(const MobileCoeffs& coeffs,
                                             const TaskSpec& task,
                                             const SystemParams& params,
                                             std::span<const double> durations);

PartitionSolution partition_data(const MobileCoeffs& coeffs,
                                 const TaskSpec& task,
                                 const SystemParams& params,
                                 std::span<const double> durations);

/// 3 gamma C^3 g B / (T^2 N0 ln 2).
double exponential_threshold(const TaskSpec& task, const SystemParams& params);

/// Locally computed bits at the unconstrained monomial optimum for a given
/// total airtime, found by bisection on its defining equation. Used to
/// predict the clamp regime from the CPU and VM capacities.
double local_bits_threshold(const MobileCoeffs& coeffs,
                            const TaskSpec& task,
                            const SystemParams& params,
                            double total_duration);

Regime regime_from_thresholds(const MobileCoeffs& coeffs,
                              const TaskSpec& task,
                              const SystemParams& params,
                              double total_duration);

struct Offloader
{
    double channel_gain = 0.0;
    double bits = 0.0;
};

/// Splits one epoch among offloaders with positive bits (monomial model):
/// durations proportional to ((m-1) lambda / g)^(1/m) * bits.
std::vector<double> divide_time_monomial(double epoch_len,
                                         std::span<const Offloader> offloaders,
                                         const SystemParams& params);

/// Exponential model: equalizes (1/g) psi_bar(l/t) across offloaders by
/// bisection on the epoch multiplier.
std::vector<double> divide_time_exponential(double epoch_len,
                                            std::span<const Offloader> offloaders,
                                            const SystemParams& params);

std::vector<double> divide_time(double epoch_len,
                                std::span<const Offloader> offloaders,
                                const SystemParams& params);

/// psi(x) - x psi'(x) for psi(x) = N0 (2^{x/B} - 1). Nonpositive.
double psi_bar(double rate, const SystemParams& params);

/// Inverse of psi_bar on x >= 0, through the Lambert W closed form.
double psi_bar_inverse(double value, const SystemParams& params);

struct Options
{
    double tol = 1e-6;   // stop when the fractional objective decrease drops below
    int max_iters = 500;
    std::optional<Allocation> init; // initial durations; bits are recomputed
};

struct SolveReport
{
    double objective_joules = 0.0;
    int iterations = 0;
    std::vector<double> objective_trace;
    bool converged = false;
    AllocationResiduals residuals;
};

struct Result
{
    Allocation alloc;
    SolveReport report;
};

class NonConvergence : public Error
{
public:
    NonConvergence(const std::string& what, Result best)
        : Error("non_convergence", what), best_(std::move(best))
    {}
    const Result& best() const noexcept { return best_; }

private:
    Result best_;
};

/// Runs exactly `rounds` rounds after the equal-time-division start and
/// returns the state reached, converged or not. rounds = 0 yields the
/// equal-time-division policy.
Result run_rounds(std::span<const TaskSpec> tasks,
                  const SystemParams& params,
                  const Timeline& timeline,
                  int rounds,
                  const std::optional<Allocation>& init = std::nullopt);

/// Block coordinate descent to convergence (at least two rounds, so the result
/// never exceeds run_rounds(.., 2)). Throws InfeasibleInstance for an
/// infeasible mobile and NonConvergence (with the best iterate) after
/// max_iters rounds.
Result solve(std::span<const TaskSpec> tasks,
             const SystemParams& params,
             const Timeline& timeline,
             const Options& options = {});

} // namespace meco::bcd
