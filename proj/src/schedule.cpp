#include <meco/schedule.hpp>

#include <meco/error.hpp>

#include <algorithm>
#include <sstream>

namespace meco {

Allocation schedule_to_allocation(const Schedule& schedule,
                                  std::span<const TaskSpec> tasks,
                                  const Timeline& timeline)
{
    if (schedule.intervals.size() != tasks.size() || timeline.num_mobiles() != tasks.size()) {
        throw InvalidInput("schedule, timeline and task list disagree on mobile count");
    }
    Allocation alloc = Allocation::zeros(timeline);
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        const auto& epochs = timeline.epoch_sets[k];
        for (const auto& iv : schedule.intervals[k]) {
            const double len = iv.length();
            if (!(len > 0.0)) continue;
            for (std::size_t j = 0; j < epochs.size(); ++j) {
                const auto n = static_cast<std::size_t>(epochs[j]);
                const double lo = std::max(iv.start, timeline.boundaries[n]);
                const double hi = std::min(iv.end, timeline.boundaries[n + 1]);
                if (hi <= lo) continue;
                alloc.durations[k][j] += hi - lo;
                alloc.bits[k][j] += iv.bits * ((hi - lo) / len);
            }
        }
    }
    return alloc;
}

ScheduleCheck check_schedule(const Schedule& schedule, std::span<const TaskSpec> tasks)
{
    auto fail = [](std::string msg) { return ScheduleCheck{false, std::move(msg)}; };
    if (schedule.intervals.size() != tasks.size()) return fail("mobile count mismatch");

    struct Tagged
    {
        Interval iv;
        std::size_t k;
    };
    std::vector<Tagged> all;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        for (const auto& iv : schedule.intervals[k]) {
            std::ostringstream os;
            os << "mobile " << tasks[k].id << " interval [" << iv.start << ", " << iv.end << "]";
            if (!(iv.start <= iv.end)) return fail(os.str() + " is reversed");
            if (iv.bits < 0.0) return fail(os.str() + " carries negative bits");
            if (iv.start < tasks[k].arrival) return fail(os.str() + " starts before arrival");
            if (iv.end > tasks[k].deadline) return fail(os.str() + " ends after deadline");
            all.push_back({iv, k});
        }
    }
    std::sort(all.begin(), all.end(), [](const Tagged& x, const Tagged& y) {
        return x.iv.start != y.iv.start ? x.iv.start < y.iv.start : x.iv.end < y.iv.end;
    });
    for (std::size_t i = 1; i < all.size(); ++i) {
        if (all[i].iv.start < all[i - 1].iv.end) {
            std::ostringstream os;
            os << "intervals of mobiles " << tasks[all[i - 1].k].id << " and " << tasks[all[i].k].id
               << " overlap at " << all[i].iv.start;
            return fail(os.str());
        }
    }
    return {};
}

} // namespace meco
