#include <meco/energy.hpp>

#include <meco/error.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace meco {

const char* to_string(EnergyModel m) noexcept
{
    return m == EnergyModel::Monomial ? "monomial" : "exponential";
}

void check_params(const SystemParams& p)
{
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(p.lambda_coeff)) throw InvalidInput("lambda_coeff must be > 0");
    if (!positive(p.gamma_switch)) throw InvalidInput("gamma_switch must be > 0");
    if (!std::isfinite(p.monomial_order) || !(p.monomial_order > 1.0)) {
        throw InvalidInput("monomial_order must be > 1");
    }
    if (!positive(p.bandwidth_hz)) throw InvalidInput("bandwidth_hz must be > 0");
    if (!positive(p.noise_power)) throw InvalidInput("noise_power must be > 0");
}

double min_offload_bits(const TaskSpec& t) noexcept
{
    // T F / C is +inf for an unbounded CPU; max() then clamps to zero.
    const double local_capacity = t.latency() * t.max_cpu_freq / t.cycles_per_bit;
    return std::max(t.data_bits - local_capacity, 0.0);
}

double max_offload_bits(const TaskSpec& t) noexcept
{
    return std::min(t.data_bits, t.vm_cap_cycles / t.cycles_per_bit);
}

MobileCoeffs mobile_coeffs(const TaskSpec& task, const SystemParams& params)
{
    check_task(task);
    MobileCoeffs c;
    c.a = params.lambda_coeff / task.channel_gain;
    c.b = params.gamma_switch * std::pow(task.cycles_per_bit, 3);
    c.r_min_bits = min_offload_bits(task);
    c.r_max_bits = max_offload_bits(task);
    if (c.r_min_bits > c.r_max_bits) {
        std::ostringstream os;
        os << "mobile " << task.id << " is infeasible: must offload at least " << c.r_min_bits
           << " bits but the VM accepts at most " << c.r_max_bits;
        throw InfeasibleInstance(os.str());
    }
    return c;
}

double local_energy(const TaskSpec& task, const SystemParams& params, double offloaded_total)
{
    if (offloaded_total > task.data_bits) {
        std::ostringstream os;
        os << "mobile " << task.id << ": offloaded " << offloaded_total << " bits exceeds L = "
           << task.data_bits;
        throw AllocationError(os.str());
    }
    const double remaining = std::max(task.data_bits - offloaded_total, 0.0);
    const double T = task.latency();
    return params.gamma_switch * std::pow(task.cycles_per_bit, 3) * remaining * remaining * remaining
           / (T * T);
}

double offload_energy(const TaskSpec& task, const SystemParams& params, double bits, double duration)
{
    if (bits < 0.0 || duration < 0.0) throw AllocationError("negative bits or duration");
    if (bits == 0.0) return 0.0;
    if (duration == 0.0) {
        std::ostringstream os;
        os << "mobile " << task.id << ": " << bits << " bits scheduled with zero airtime";
        throw AllocationError(os.str());
    }
    if (params.model == EnergyModel::Monomial) {
        const double m = params.monomial_order;
        return params.lambda_coeff * std::pow(bits, m)
               / (task.channel_gain * std::pow(duration, m - 1.0));
    }
    // (t/g) N0 (2^{l/(B t)} - 1), evaluated through expm1 for small rates.
    const double exponent = bits / (params.bandwidth_hz * duration);
    return duration / task.channel_gain * params.noise_power
           * std::expm1(exponent * std::numbers::ln2);
}

Allocation Allocation::zeros(const Timeline& timeline)
{
    Allocation a;
    a.bits.resize(timeline.num_mobiles());
    a.durations.resize(timeline.num_mobiles());
    for (std::size_t k = 0; k < timeline.num_mobiles(); ++k) {
        a.bits[k].assign(timeline.epoch_sets[k].size(), 0.0);
        a.durations[k].assign(timeline.epoch_sets[k].size(), 0.0);
    }
    return a;
}

double Allocation::total_bits(std::size_t k) const
{
    double s = 0.0;
    for (double v : bits[k]) s += v;
    return s;
}

double Allocation::total_duration(std::size_t k) const
{
    double s = 0.0;
    for (double v : durations[k]) s += v;
    return s;
}

std::vector<EnergySplit> energy_by_mobile(std::span<const TaskSpec> tasks,
                                          const SystemParams& params,
                                          const Timeline& timeline,
                                          const Allocation& alloc)
{
    if (alloc.bits.size() != tasks.size() || timeline.num_mobiles() != tasks.size()) {
        throw InvalidInput("allocation, timeline and task list disagree on mobile count");
    }
    std::vector<EnergySplit> out(tasks.size());
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        if (alloc.bits[k].size() != timeline.epoch_sets[k].size()
            || alloc.durations[k].size() != timeline.epoch_sets[k].size()) {
            throw InvalidInput("allocation does not match the epoch set of a mobile");
        }
        for (std::size_t j = 0; j < alloc.bits[k].size(); ++j) {
            out[k].offload += offload_energy(tasks[k], params, alloc.bits[k][j], alloc.durations[k][j]);
        }
        out[k].local = local_energy(tasks[k], params, alloc.total_bits(k));
    }
    return out;
}

double objective(std::span<const TaskSpec> tasks,
                 const SystemParams& params,
                 const Timeline& timeline,
                 const Allocation& alloc)
{
    double total = 0.0;
    for (const auto& e : energy_by_mobile(tasks, params, timeline, alloc)) total += e.total();
    return total;
}

AllocationResiduals allocation_residuals(std::span<const TaskSpec> tasks,
                                         const Timeline& timeline,
                                         const Allocation& alloc)
{
    AllocationResiduals r;
    std::vector<double> load(timeline.num_epochs(), 0.0);
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        for (std::size_t j = 0; j < alloc.bits[k].size(); ++j) {
            const auto n = static_cast<std::size_t>(timeline.epoch_sets[k][j]);
            load[n] += alloc.durations[k][j];
            r.negativity = std::max({r.negativity, -alloc.bits[k][j], -alloc.durations[k][j]});
        }
        const double sum = alloc.total_bits(k);
        r.data_bounds = std::max({r.data_bounds, min_offload_bits(tasks[k]) - sum,
                                  sum - max_offload_bits(tasks[k])});
    }
    for (std::size_t n = 0; n < load.size(); ++n) {
        r.time_sharing = std::max(r.time_sharing, load[n] - timeline.epoch_lengths[n]);
    }
    return r;
}

} // namespace meco
