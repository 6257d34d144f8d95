#pragma once

#include <meco/timeline.hpp>

#include <cstddef>
#include <span>
#include <vector>

namespace meco {

enum class EnergyModel { Monomial, Exponential };

const char* to_string(EnergyModel m) noexcept;

struct SystemParams
{
    double lambda_coeff = 1e-25;   // monomial energy coefficient
    double gamma_switch = 1e-28;   // effective switched capacitance
    double monomial_order = 3.0;   // m > 1
    double bandwidth_hz = 1e6;     // exponential model only
    double noise_power = 1e-9;     // W, exponential model only
    EnergyModel model = EnergyModel::Monomial;
};

/// Throws InvalidInput when a parameter is out of range.
void check_params(const SystemParams& params);

/// Per-mobile aggregate coefficients. Working with these keeps the
/// arithmetic away from the extreme raw constants.
struct MobileCoeffs
{
    double a = 0.0;          // lambda / g
    double b = 0.0;          // gamma * C^3
    double r_min_bits = 0.0; // max(L - T F / C, 0)
    double r_max_bits = 0.0; // min(L, D / C)
};

double min_offload_bits(const TaskSpec& task) noexcept;
double max_offload_bits(const TaskSpec& task) noexcept;

/// Throws InfeasibleInstance when r_min > r_max.
MobileCoeffs mobile_coeffs(const TaskSpec& task, const SystemParams& params);

/// gamma C^3 (L - offloaded)^3 / T^2.
double local_energy(const TaskSpec& task, const SystemParams& params, double offloaded_total);

/// Energy to push `bits` within `duration` seconds under the configured model.
/// Zero bits cost nothing; bits without airtime throw AllocationError.
double offload_energy(const TaskSpec& task, const SystemParams& params, double bits, double duration);

/// Bits and durations per (mobile, epoch), stored densely along each mobile's
/// epoch set: bits[k][j] belongs to epoch timeline.epoch_sets[k][j].
struct Allocation
{
    std::vector<std::vector<double>> bits;
    std::vector<std::vector<double>> durations;

    static Allocation zeros(const Timeline& timeline);

    double total_bits(std::size_t k) const;
    double total_duration(std::size_t k) const;
};

struct EnergySplit
{
    double local = 0.0;
    double offload = 0.0;
    double total() const noexcept { return local + offload; }
};

std::vector<EnergySplit> energy_by_mobile(std::span<const TaskSpec> tasks,
                                          const SystemParams& params,
                                          const Timeline& timeline,
                                          const Allocation& alloc);

/// Total mobile energy of an allocation.
double objective(std::span<const TaskSpec> tasks,
                 const SystemParams& params,
                 const Timeline& timeline,
                 const Allocation& alloc);

struct AllocationResiduals
{
    double time_sharing = 0.0; // max_n (sum_k t - tau_n)^+
    double data_bounds = 0.0;  // max_k distance of sum_n l to [r_min, r_max]
    double negativity = 0.0;   // max (-l)^+, (-t)^+
};

AllocationResiduals allocation_residuals(std::span<const TaskSpec> tasks,
                                         const Timeline& timeline,
                                         const Allocation& alloc);

} // namespace meco
