#include <meco/timeline.hpp>

#include <meco/energy.hpp>
#include <meco/error.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace meco {

const char* to_string(OrderClass c) noexcept
{
    switch (c) {
    case OrderClass::General: return "general";
    case OrderClass::Identical: return "identical";
    case OrderClass::Reverse: return "reverse";
    }
    return "unknown";
}

namespace {

std::string describe_task_problem(const TaskSpec& t)
{
    auto nonneg_or_inf = [](double v) { return !std::isnan(v) && v >= 0.0; };
    std::ostringstream os;
    if (!std::isfinite(t.arrival) || t.arrival < 0.0) {
        os << "mobile " << t.id << ": arrival must be finite and >= 0";
    } else if (!std::isfinite(t.deadline) || !(t.deadline > t.arrival)) {
        os << "mobile " << t.id << ": deadline must exceed arrival";
    } else if (!std::isfinite(t.data_bits) || t.data_bits < 0.0) {
        os << "mobile " << t.id << ": data_bits must be finite and >= 0";
    } else if (!std::isfinite(t.cycles_per_bit) || !(t.cycles_per_bit > 0.0)) {
        os << "mobile " << t.id << ": cycles_per_bit must be > 0";
    } else if (!std::isfinite(t.channel_gain) || !(t.channel_gain > 0.0)) {
        os << "mobile " << t.id << ": channel_gain must be > 0";
    } else if (!nonneg_or_inf(t.max_cpu_freq)) {
        os << "mobile " << t.id << ": max_cpu_freq must be >= 0";
    } else if (!nonneg_or_inf(t.vm_cap_cycles)) {
        os << "mobile " << t.id << ": vm_cap_cycles must be >= 0";
    }
    return os.str();
}

} // namespace

void check_task(const TaskSpec& task)
{
    if (auto msg = describe_task_problem(task); !msg.empty()) {
        throw InvalidInput(msg);
    }
}

std::vector<TaskSpec> sort_by_arrival(std::span<const TaskSpec> tasks)
{
    std::vector<TaskSpec> out(tasks.begin(), tasks.end());
    std::stable_sort(out.begin(), out.end(),
                     [](const TaskSpec& x, const TaskSpec& y) { return x.arrival < y.arrival; });
    return out;
}

Timeline build_timeline(std::span<const TaskSpec> tasks)
{
    if (tasks.empty()) throw InvalidInput("task list is empty");
    for (const auto& t : tasks) check_task(t);

    const auto K = tasks.size();
    // Instants 0..K-1 are arrivals, K..2K-1 are deadlines.
    std::vector<std::size_t> order(2 * K);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto instant = [&](std::size_t i) {
        return i < K ? tasks[i].arrival : tasks[i - K].deadline;
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        const double vx = instant(x), vy = instant(y);
        if (vx != vy) return vx < vy;
        return (x < K) && !(y < K);
    });

    Timeline tl;
    tl.boundaries.resize(2 * K);
    std::vector<std::size_t> position(2 * K);
    for (std::size_t p = 0; p < order.size(); ++p) {
        tl.boundaries[p] = instant(order[p]);
        position[order[p]] = p;
    }
    tl.epoch_lengths.resize(2 * K - 1);
    for (std::size_t n = 0; n + 1 < tl.boundaries.size(); ++n) {
        tl.epoch_lengths[n] = tl.boundaries[n + 1] - tl.boundaries[n];
    }

    tl.epoch_sets.resize(K);
    tl.user_sets.resize(2 * K - 1);
    for (std::size_t k = 0; k < K; ++k) {
        const auto first = position[k];
        const auto last = position[K + k];
        for (auto n = first; n < last; ++n) {
            tl.epoch_sets[k].push_back(static_cast<int>(n));
            tl.user_sets[n].push_back(static_cast<int>(k));
        }
    }
    return tl;
}

OrderClass classify_order(std::span<const TaskSpec> tasks)
{
    const auto sorted = sort_by_arrival(tasks);
    bool nondecreasing = true, nonincreasing = true;
    for (std::size_t k = 1; k < sorted.size(); ++k) {
        if (sorted[k].deadline < sorted[k - 1].deadline) nondecreasing = false;
        if (sorted[k].deadline > sorted[k - 1].deadline) nonincreasing = false;
    }
    if (nondecreasing) return OrderClass::Identical;
    if (nonincreasing) return OrderClass::Reverse;
    return OrderClass::General;
}

bool FeasibilityReport::all_feasible() const noexcept
{
    return std::all_of(mobiles.begin(), mobiles.end(),
                       [](const MobileFeasibility& m) { return m.feasible; });
}

FeasibilityReport validate_tasks(std::span<const TaskSpec> tasks, const SystemParams&)
{
    FeasibilityReport rep;
    rep.mobiles.reserve(tasks.size());
    for (const auto& t : tasks) {
        MobileFeasibility m;
        m.id = t.id;
        m.problem = describe_task_problem(t);
        m.valid = m.problem.empty();
        if (m.valid) {
            m.r_min_bits = min_offload_bits(t);
            m.r_max_bits = max_offload_bits(t);
            m.feasible = m.r_min_bits <= m.r_max_bits;
        }
        rep.mobiles.push_back(std::move(m));
    }
    const auto sorted = sort_by_arrival(tasks);
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        if (!(sorted[k].deadline > sorted[k + 1].arrival)) {
            rep.overlap_holds = false;
            rep.overlap_gaps.push_back(static_cast<int>(k));
        }
    }
    return rep;
}

} // namespace meco
